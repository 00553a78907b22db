#pragma once

#include <span>
#include <vector>

namespace arcturus::stats {

// Median of an arbitrary sample; 0 for an empty sample.
double median(std::span<const double> values);

// Median absolute deviation around the median (unscaled).
double mad(std::span<const double> values);

double mean(std::span<const double> values);

double variance(std::span<const double> values);  // population variance

// Linear-interpolated quantile, q in [0,1].
double quantile(std::span<const double> values, double q);

}  // namespace arcturus::stats
