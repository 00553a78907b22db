#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <vector>

#include "arcturus/error.hpp"
#include "arcturus/model.hpp"
#include "arcturus/srheader.hpp"

namespace arcturus::tunnel {

// Time on the engine's clock (simulated or steady), measured from an arbitrary epoch.
using Micros = std::chrono::microseconds;

struct TunnelParams {
  int sessions = 1;          // S_p in [1, 10]
  int concurrency = 50;      // C_p in {50, 60, ..., 200}
  int merge_timeout_ms = 1;  // T_p in [1, 5]

  bool valid() const;
  void validate() const;  // throws TunnelError(InvalidParams)
  Micros merge_timeout() const { return std::chrono::milliseconds(merge_timeout_ms); }

  bool operator==(const TunnelParams&) const = default;
};

enum class TunnelErrc { Saturated, Oversize, InvalidParams, UnknownStream };

class TunnelError : public Error {
 public:
  TunnelError(TunnelErrc code, const std::string& detail);
  TunnelErrc code() const noexcept { return code_; }

 private:
  TunnelErrc code_;
};

struct StreamHandle {
  sr::HopAddress dest;
  std::size_t session = 0;
};

// Per-destination session pool. A new session is opened only when every
// existing session to the destination is at C_p and fewer than S_p exist.
class ConnectionPool {
 public:
  explicit ConnectionPool(TunnelParams params);

  StreamHandle acquire_stream(const sr::HopAddress& dest);
  void release(const StreamHandle& handle);

  // New limits apply to future acquisitions; existing streams are kept.
  void set_params(TunnelParams params);
  TunnelParams params() const;

  std::size_t session_count(const sr::HopAddress& dest) const;
  std::size_t open_streams(const sr::HopAddress& dest) const;
  std::size_t max_streams_on_any_session() const;

 private:
  mutable std::mutex mu_;
  TunnelParams params_;
  std::map<sr::HopAddress, std::vector<int>> sessions_;  // open streams per session
};

// Time-bounded packet merging for one route. Not internally synchronised:
// the owner drives both submit() and poll().
class MergeBuffer {
 public:
  static constexpr std::size_t kDefaultCapacity = 16 * 1024;

  explicit MergeBuffer(Micros timeout, std::size_t capacity_bytes = kDefaultCapacity);

  // Returns a frame when the buffer flushes: capacity reached, the deadline
  // has passed, or the new item cannot join the pending batch.
  std::optional<sr::MergedFrame> submit(std::uint64_t packet_id, sr::Bytes bytes, Micros now);
  std::optional<sr::MergedFrame> poll(Micros now);
  std::optional<sr::MergedFrame> flush();

  std::optional<Micros> deadline() const;
  std::size_t pending_count() const { return pending_.size(); }
  std::size_t pending_bytes() const { return pending_bytes_; }
  std::size_t capacity_bytes() const { return capacity_; }
  Micros timeout() const { return timeout_; }
  void set_timeout(Micros timeout) { timeout_ = timeout; }

 private:
  Micros timeout_;
  std::size_t capacity_;
  std::vector<sr::SubRequest> pending_;
  std::size_t pending_bytes_ = 0;
  Micros opened_at_{0};
};

// Request counters for the current slot; roll_over() publishes them.
class SlotCounters {
 public:
  void record_arrival(std::uint64_t n = 1);
  void record_completion(double service_ms);

  // Closes the slot: computes rates over `slot_seconds`, resets accumulators.
  PerfCounters roll_over(double slot_seconds, double cpu);
  PerfCounters last() const;

 private:
  mutable std::mutex mu_;
  std::uint64_t arrivals_ = 0;
  std::uint64_t completions_ = 0;
  double service_ms_total_ = 0.0;
  PerfCounters last_{};
};

using CpuProvider = std::function<double()>;

// Reads this process's CPU time; utilisation is averaged over the interval
// since the previous call and all hardware threads.
CpuProvider process_cpu_provider();

class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send(const sr::HopAddress& to, sr::Bytes packet) = 0;
};

// Queues packets in memory; the driver delivers them explicitly.
class InMemoryTransport : public Transport {
 public:
  void send(const sr::HopAddress& to, sr::Bytes packet) override;
  std::vector<std::pair<sr::HopAddress, sr::Bytes>> drain();
  std::size_t pending() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::pair<sr::HopAddress, sr::Bytes>> queue_;
};

using Clock = std::function<Micros()>;

// One proxy's forwarding engine. Ingress traffic is merged per route, framed
// under a segment-routing header and pushed to the first hop; relays forward
// frames untouched; the egress splits frames and hands sub-requests up.
class TunnelEngine {
 public:
  using DeliveryHandler = std::function<void(const sr::SubRequest&)>;

  TunnelEngine(sr::HopAddress self, TunnelParams params, Transport& transport, Clock clock,
               CpuProvider cpu = {}, std::size_t merge_capacity = MergeBuffer::kDefaultCapacity);

  const sr::HopAddress& address() const { return self_; }

  // `route` lists the hops after this node; its last element is the egress.
  void send(std::uint64_t packet_id, sr::Bytes payload, const std::vector<sr::HopAddress>& route);
  void receive(sr::ByteView packet);
  void poll();
  void flush_all();

  void set_delivery_handler(DeliveryHandler handler);
  void set_params(TunnelParams params);
  TunnelParams params() const;

  PerfCounters roll_over_slot(double slot_seconds);
  PerfCounters sample_counters() const;

  std::uint64_t frames_sent() const;
  const ConnectionPool& pool() const { return pool_; }

 private:
  void transmit_locked(const std::vector<sr::HopAddress>& route, sr::MergedFrame frame);

  sr::HopAddress self_;
  Transport& transport_;
  Clock clock_;
  CpuProvider cpu_;
  std::size_t merge_capacity_;
  ConnectionPool pool_;
  SlotCounters counters_;

  mutable std::mutex mu_;
  TunnelParams params_;
  std::map<std::vector<sr::HopAddress>, MergeBuffer> buffers_;
  std::map<std::uint64_t, Micros> arrival_times_;
  std::uint64_t frames_sent_ = 0;
  std::uint64_t next_frame_id_ = 1;
  DeliveryHandler on_delivery_;
};

}  // namespace arcturus::tunnel
