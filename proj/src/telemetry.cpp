#include "arcturus/telemetry.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <map>
#include <random>
#include <sstream>

#include "arcturus/stats.hpp"

namespace arcturus::telemetry {

namespace {

constexpr char kRawMagic[4] = {'A', 'T', 'R', '1'};
constexpr char kDigestMagic[4] = {'A', 'T', 'D', '1'};

class Writer {
 public:
  void raw(const char* p, std::size_t n) { out_.insert(out_.end(), p, p + n); }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void id(const NodeId& id) {
    if (id.size() > 255) throw FormatError("telemetry: node id longer than 255 bytes: " + id);
    u8(static_cast<std::uint8_t>(id.size()));
    raw(id.data(), id.size());
  }
  void sample(const Sample& s) {
    id(s.src);
    id(s.dst);
    f64(s.latency_ms);
    u64(static_cast<std::uint64_t>(s.slot));
  }
  Bytes take() { return std::move(out_); }

 private:
  void put(std::uint64_t v, int width) {
    for (int i = width - 1; i >= 0; --i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  void magic(const char (&expected)[4]) {
    need(4);
    if (std::memcmp(in_.data() + pos_, expected, 4) != 0) throw FormatError("telemetry: bad magic");
    pos_ += 4;
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  NodeId id() {
    const std::size_t n = u8();
    need(n);
    NodeId out(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return out;
  }
  Sample sample() {
    Sample s;
    s.src = id();
    s.dst = id();
    s.latency_ms = f64();
    s.slot = static_cast<std::int64_t>(u64());
    return s;
  }
  void finish() const {
    if (pos_ != in_.size()) throw FormatError("telemetry: trailing bytes");
  }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw FormatError("telemetry: truncated input");
  }
  std::uint64_t get(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v = (v << 8) | in_[pos_++];
    return v;
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

void PartitionParams::validate() const {
  if (k_neighbors < 1) throw ConfigError("telemetry.k_neighbors", "must be >= 1");
  if (!(dist_multiplier > 0)) throw ConfigError("telemetry.dist_multiplier", "must be positive");
}

std::vector<double> knn_distances(std::span<const double> values, int k) {
  const std::size_t n = values.size();
  std::vector<double> out(n, 0.0);
  if (n < 2) return out;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  const std::size_t want = std::min<std::size_t>(static_cast<std::size_t>(k), n - 1);
  for (std::size_t r = 0; r < n; ++r) {
    const double x = values[order[r]];
    std::size_t lo = r, hi = r;  // neighbours are order[lo..hi] excluding r
    double sum = 0.0;
    for (std::size_t taken = 0; taken < want; ++taken) {
      const bool can_left = lo > 0;
      const bool can_right = hi + 1 < n;
      const double dl = can_left ? x - values[order[lo - 1]] : INFINITY;
      const double dr = can_right ? values[order[hi + 1]] - x : INFINITY;
      if (dl <= dr) {
        sum += dl;
        --lo;
      } else {
        sum += dr;
        ++hi;
      }
    }
    out[order[r]] = sum / static_cast<double>(want);
  }
  return out;
}

Partition partition(std::span<const Sample> samples, const PartitionParams& params) {
  params.validate();
  Partition out;
  std::vector<double> values;
  values.reserve(samples.size());
  for (const auto& s : samples) values.push_back(s.latency_ms);
  const auto dist = knn_distances(values, params.k_neighbors);
  const double threshold = params.dist_multiplier * stats::median(dist);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples.size() > 1 && dist[i] > threshold)
      out.singular.push_back(samples[i]);
    else
      out.non_singular.push_back(samples[i]);
  }
  return out;
}

Summary summarize(std::span<const double> values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  s.mean = stats::mean(values);
  s.median = stats::median(values);
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  s.min = *lo;
  s.max = *hi;
  return s;
}

Digest compress(std::span<const Sample> samples, const PartitionParams& params) {
  Digest d;
  if (samples.empty()) return d;
  for (const auto& s : samples) d.slot = std::max(d.slot, s.slot);
  auto parts = partition(samples, params);
  std::vector<double> bulk;
  bulk.reserve(parts.non_singular.size());
  for (const auto& s : parts.non_singular) bulk.push_back(s.latency_ms);
  d.summary = summarize(bulk);
  d.singular = std::move(parts.singular);
  return d;
}

Bytes serialize_raw(std::span<const Sample> samples) {
  Writer w;
  w.raw(kRawMagic, 4);
  w.u32(static_cast<std::uint32_t>(samples.size()));
  for (const auto& s : samples) w.sample(s);
  return w.take();
}

std::vector<Sample> parse_raw(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.magic(kRawMagic);
  const std::uint32_t n = r.u32();
  std::vector<Sample> out;
  for (std::uint32_t i = 0; i < n; ++i) out.push_back(r.sample());
  r.finish();
  return out;
}

Bytes serialize_digest(const Digest& d) {
  Writer w;
  w.raw(kDigestMagic, 4);
  w.u64(static_cast<std::uint64_t>(d.slot));
  w.u64(d.summary.count);
  w.f64(d.summary.mean);
  w.f64(d.summary.median);
  w.f64(d.summary.min);
  w.f64(d.summary.max);
  w.u32(static_cast<std::uint32_t>(d.singular.size()));
  for (const auto& s : d.singular) w.sample(s);
  return w.take();
}

Digest parse_digest(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.magic(kDigestMagic);
  Digest d;
  d.slot = static_cast<std::int64_t>(r.u64());
  d.summary.count = r.u64();
  d.summary.mean = r.f64();
  d.summary.median = r.f64();
  d.summary.min = r.f64();
  d.summary.max = r.f64();
  const std::uint32_t n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) d.singular.push_back(r.sample());
  r.finish();
  return d;
}

const char* to_string(Confidence c) { return c == Confidence::Exact ? "exact" : "aggregate"; }

std::optional<double> exact_latency(const Digest& digest, const NodeId& src, const NodeId& dst) {
  for (auto it = digest.singular.rbegin(); it != digest.singular.rend(); ++it)
    if (it->src == src && it->dst == dst) return it->latency_ms;
  return std::nullopt;
}

Estimate estimate(const Digest& digest, const NodeId& src, const NodeId& dst) {
  if (digest.empty()) throw UnknownPair(src, dst);
  if (auto exact = exact_latency(digest, src, dst)) return {*exact, Confidence::Exact};
  if (digest.summary.count > 0) return {digest.summary.median, Confidence::Aggregate};
  std::vector<double> values;
  for (const auto& s : digest.singular) values.push_back(s.latency_ms);
  return {stats::median(values), Confidence::Aggregate};
}

SyncResult sync_round(std::span<const Digest> digests, ControllerState& state) {
  SyncResult out;
  std::vector<const Digest*> fresh;
  for (const auto& d : digests) {
    if (d.slot < state.slot - 1)
      out.warnings.push_back(StaleSlot(d.slot, state.slot).what());
    else
      fresh.push_back(&d);
  }
  if (fresh.empty()) {
    if (digests.empty()) throw Error("sync_round: no proxy digests");
    throw StaleSlot(digests.front().slot, state.slot);
  }
  if (fresh.size() == 1) {
    out.broadcast = *fresh.front();
  } else {
    Digest merged;
    std::map<std::pair<NodeId, NodeId>, std::size_t> position;
    std::vector<double> medians;
    double weighted = 0.0;
    bool seen = false;
    for (const Digest* d : fresh) {
      merged.slot = std::max(merged.slot, d->slot);
      for (const auto& s : d->singular) {
        auto [it, inserted] = position.emplace(std::make_pair(s.src, s.dst), merged.singular.size());
        if (inserted)
          merged.singular.push_back(s);
        else
          merged.singular[it->second] = s;
      }
      const auto& sum = d->summary;
      if (sum.count == 0) continue;
      merged.summary.count += sum.count;
      weighted += sum.mean * static_cast<double>(sum.count);
      medians.push_back(sum.median);
      merged.summary.min = seen ? std::min(merged.summary.min, sum.min) : sum.min;
      merged.summary.max = seen ? std::max(merged.summary.max, sum.max) : sum.max;
      seen = true;
    }
    if (merged.summary.count > 0) {
      merged.summary.mean = weighted / static_cast<double>(merged.summary.count);
      merged.summary.median = stats::median(medians);
    }
    out.broadcast = std::move(merged);
  }
  state.global = out.broadcast;
  state.slot = std::max(state.slot, out.broadcast.slot);
  return out;
}

std::string digest_csv(const Digest& d) {
  std::ostringstream os;
  os.precision(17);
  os << "kind,src,dst,latency_ms,slot\n";
  for (const auto& s : d.singular) os << "singular," << s.src << ',' << s.dst << ',' << s.latency_ms << ',' << s.slot << '\n';
  os << "summary,count=" << d.summary.count << ",mean=" << d.summary.mean << ",median=" << d.summary.median
     << ",min=" << d.summary.min << ",max=" << d.summary.max << '\n';
  return os.str();
}

std::vector<Sample> generate_mesh(const MeshModel& model) {
  std::mt19937_64 rng(model.seed);
  std::uniform_real_distribution<double> jitter(-model.spread, model.spread);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> far(model.outlier_min_factor, model.outlier_max_factor);
  std::vector<Sample> out;
  out.reserve(model.nodes * (model.nodes - 1) / 2);
  for (std::size_t i = 0; i < model.nodes; ++i)
    for (std::size_t j = i + 1; j < model.nodes; ++j) {
      double latency = model.regional_mean_ms * (1.0 + jitter(rng));
      if (unit(rng) < model.outlier_fraction) latency = model.regional_mean_ms * far(rng);
      out.push_back({"n" + std::to_string(i), "n" + std::to_string(j), latency, 0});
    }
  return out;
}

CompressionReport evaluate_compression(std::span<const Sample> samples, const PartitionParams& params,
                                       double tolerance) {
  CompressionReport r;
  r.tolerance = tolerance;
  r.samples = samples.size();
  const auto digest = compress(samples, params);
  r.singular = digest.singular.size();
  r.raw_bytes = serialize_raw(samples).size();
  r.digest_bytes = serialize_digest(digest).size();
  r.ratio = r.raw_bytes > 0 ? static_cast<double>(r.digest_bytes) / static_cast<double>(r.raw_bytes) : 0.0;
  const auto parts = partition(samples, params);
  std::size_t good = 0;
  for (const auto& s : parts.non_singular) {
    const auto e = estimate(digest, s.src, s.dst);
    if (s.latency_ms > 0 && std::abs(e.latency_ms - s.latency_ms) / s.latency_ms <= tolerance) ++good;
  }
  r.within_tolerance =
      parts.non_singular.empty() ? 1.0 : static_cast<double>(good) / static_cast<double>(parts.non_singular.size());
  return r;
}

}  // namespace arcturus::telemetry
