#pragma once

// Controller <-> proxy state synchronisation. Latency samples are split by a
// 1-D KNN rule into singular outliers, shipped raw, and the bulk, shipped as
// a five-number summary.
//
// Raw block  "ATR1" | u32 count | samples
// Digest     "ATD1" | i64 slot | u64 count | f64 mean | f64 median | f64 min |
//            f64 max | u32 singular | samples
// Sample     u8 len | src | u8 len | dst | f64 latency_ms | i64 slot
// All integers and IEEE-754 doubles are big-endian.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "arcturus/error.hpp"
#include "arcturus/model.hpp"

namespace arcturus::telemetry {

using Bytes = std::vector<std::uint8_t>;

struct Sample {
  NodeId src;
  NodeId dst;
  double latency_ms = 0.0;
  std::int64_t slot = 0;

  bool operator==(const Sample&) const = default;
};

struct Summary {
  std::uint64_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;

  bool operator==(const Summary&) const = default;
};

struct Digest {
  std::int64_t slot = 0;
  std::vector<Sample> singular;
  Summary summary;

  bool empty() const { return singular.empty() && summary.count == 0; }
  bool operator==(const Digest&) const = default;
};

struct PartitionParams {
  int k_neighbors = 5;
  double dist_multiplier = 3.0;
  void validate() const;  // throws ConfigError
};

struct Partition {
  std::vector<Sample> singular;
  std::vector<Sample> non_singular;
};

// A sample is singular when the mean distance to its k nearest latencies
// exceeds dist_multiplier times the median of that statistic. With fewer than
// k + 1 samples every other sample is a neighbour.
Partition partition(std::span<const Sample> samples, const PartitionParams& params = {});
std::vector<double> knn_distances(std::span<const double> values, int k);

Summary summarize(std::span<const double> values);

// Slot is taken from the newest sample.
Digest compress(std::span<const Sample> samples, const PartitionParams& params = {});

class FormatError : public Error {
 public:
  using Error::Error;
};

Bytes serialize_raw(std::span<const Sample> samples);
std::vector<Sample> parse_raw(std::span<const std::uint8_t> bytes);
Bytes serialize_digest(const Digest& digest);
Digest parse_digest(std::span<const std::uint8_t> bytes);

enum class Confidence { Exact, Aggregate };
const char* to_string(Confidence c);

struct Estimate {
  double latency_ms = 0.0;
  Confidence confidence = Confidence::Aggregate;
};

class UnknownPair : public Error {
 public:
  UnknownPair(const NodeId& src, const NodeId& dst)
      : Error("UnknownPair: no telemetry for " + src + " -> " + dst) {}
};

// Raw value for singular pairs, the summary median otherwise.
Estimate estimate(const Digest& digest, const NodeId& src, const NodeId& dst);
std::optional<double> exact_latency(const Digest& digest, const NodeId& src, const NodeId& dst);

class StaleSlot : public Error {
 public:
  StaleSlot(std::int64_t digest_slot, std::int64_t controller_slot)
      : Error("StaleSlot: digest for slot " + std::to_string(digest_slot) + " at controller slot " +
              std::to_string(controller_slot)) {}
};

struct ControllerState {
  std::int64_t slot = 0;
  // Incremental propagation of topology and user config.
  std::uint64_t static_version = 0;
  Digest global;
};

struct SyncResult {
  Digest broadcast;
  std::vector<std::string> warnings;  // one per dropped stale digest
};

// Merges same-slot proxy digests: singular sets are united (later entries for
// the same pair win), counts add, the mean is count-weighted and the median
// is the median of the non-empty medians. Digests more than one slot behind
// the controller are dropped with a warning; StaleSlot if none remain.
SyncResult sync_round(std::span<const Digest> digests, ControllerState& state);

std::string digest_csv(const Digest& digest);

// Synthetic full mesh: one latency per unordered pair, drawn within
// +-spread of a regional mean, with a fraction replaced by far outliers.
struct MeshModel {
  std::size_t nodes = 50;
  double regional_mean_ms = 80.0;
  double spread = 0.20;
  double outlier_fraction = 0.02;
  double outlier_min_factor = 5.0;
  double outlier_max_factor = 60.0;
  std::uint64_t seed = 1;
};

std::vector<Sample> generate_mesh(const MeshModel& model);

struct CompressionReport {
  std::size_t samples = 0;
  std::size_t singular = 0;
  std::size_t raw_bytes = 0;
  std::size_t digest_bytes = 0;
  double ratio = 0.0;              // digest / raw
  double within_tolerance = 0.0;   // share of non-singular pairs with |est - truth| / truth <= tolerance
  double tolerance = 0.25;
};

CompressionReport evaluate_compression(std::span<const Sample> samples, const PartitionParams& params = {},
                                       double tolerance = 0.25);

}  // namespace arcturus::telemetry
