#include "arcturus/tunnel.hpp"

#include <algorithm>
#include <ctime>
#include <thread>

namespace arcturus::tunnel {

namespace {

const char* errc_name(TunnelErrc code) {
  switch (code) {
    case TunnelErrc::Saturated: return "Saturated";
    case TunnelErrc::Oversize: return "Oversize";
    case TunnelErrc::InvalidParams: return "InvalidParams";
    case TunnelErrc::UnknownStream: return "UnknownStream";
  }
  return "Unknown";
}

}  // namespace

TunnelError::TunnelError(TunnelErrc code, const std::string& detail)
    : Error(std::string(errc_name(code)) + ": " + detail), code_(code) {}

bool TunnelParams::valid() const {
  return sessions >= 1 && sessions <= 10 && concurrency >= 50 && concurrency <= 200 &&
         concurrency % 10 == 0 && merge_timeout_ms >= 1 && merge_timeout_ms <= 5;
}

void TunnelParams::validate() const {
  if (!valid()) {
    throw TunnelError(TunnelErrc::InvalidParams,
                      "(S_p=" + std::to_string(sessions) + ", C_p=" + std::to_string(concurrency) +
                          ", T_p=" + std::to_string(merge_timeout_ms) + "ms) is off the grid");
  }
}

// ---------------------------------------------------------------------------

ConnectionPool::ConnectionPool(TunnelParams params) : params_(params) { params_.validate(); }

StreamHandle ConnectionPool::acquire_stream(const sr::HopAddress& dest) {
  std::lock_guard lock(mu_);
  auto& sessions = sessions_[dest];
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    if (sessions[i] < params_.concurrency) {
      ++sessions[i];
      return {dest, i};
    }
  }
  if (sessions.size() < static_cast<std::size_t>(params_.sessions)) {
    sessions.push_back(1);
    return {dest, sessions.size() - 1};
  }
  throw TunnelError(TunnelErrc::Saturated,
                    dest.to_string() + " has " + std::to_string(sessions.size()) +
                        " sessions with no spare streams");
}

void ConnectionPool::release(const StreamHandle& handle) {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(handle.dest);
  if (it == sessions_.end() || handle.session >= it->second.size() ||
      it->second[handle.session] == 0) {
    throw TunnelError(TunnelErrc::UnknownStream, handle.dest.to_string());
  }
  --it->second[handle.session];
}

void ConnectionPool::set_params(TunnelParams params) {
  params.validate();
  std::lock_guard lock(mu_);
  params_ = params;
}

TunnelParams ConnectionPool::params() const {
  std::lock_guard lock(mu_);
  return params_;
}

std::size_t ConnectionPool::session_count(const sr::HopAddress& dest) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(dest);
  return it == sessions_.end() ? 0 : it->second.size();
}

std::size_t ConnectionPool::open_streams(const sr::HopAddress& dest) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(dest);
  if (it == sessions_.end()) return 0;
  std::size_t total = 0;
  for (int n : it->second) total += static_cast<std::size_t>(n);
  return total;
}

std::size_t ConnectionPool::max_streams_on_any_session() const {
  std::lock_guard lock(mu_);
  int best = 0;
  for (const auto& [_, sessions] : sessions_)
    for (int n : sessions) best = std::max(best, n);
  return static_cast<std::size_t>(best);
}

// ---------------------------------------------------------------------------

MergeBuffer::MergeBuffer(Micros timeout, std::size_t capacity_bytes)
    : timeout_(timeout), capacity_(capacity_bytes) {}

std::optional<sr::MergedFrame> MergeBuffer::flush() {
  if (pending_.empty()) return std::nullopt;
  auto frame = sr::build_frame(pending_);
  pending_.clear();
  pending_bytes_ = 0;
  return frame;
}

std::optional<Micros> MergeBuffer::deadline() const {
  if (pending_.empty()) return std::nullopt;
  return opened_at_ + timeout_;
}

std::optional<sr::MergedFrame> MergeBuffer::poll(Micros now) {
  if (!pending_.empty() && now >= opened_at_ + timeout_) return flush();
  return std::nullopt;
}

std::optional<sr::MergedFrame> MergeBuffer::submit(std::uint64_t packet_id, sr::Bytes bytes,
                                                   Micros now) {
  if (bytes.size() > capacity_) {
    throw TunnelError(TunnelErrc::Oversize, std::to_string(bytes.size()) + " bytes exceeds " +
                                                std::to_string(capacity_) + "-byte merge buffer");
  }
  std::optional<sr::MergedFrame> out;
  const bool duplicate = std::any_of(pending_.begin(), pending_.end(),
                                     [&](const auto& s) { return s.packet_id == packet_id; });
  const bool overdue = !pending_.empty() && now >= opened_at_ + timeout_;
  if (duplicate || overdue || pending_bytes_ + bytes.size() > capacity_) out = flush();

  if (pending_.empty()) opened_at_ = now;
  pending_bytes_ += bytes.size();
  pending_.push_back({packet_id, std::move(bytes)});

  if (!out && (pending_bytes_ == capacity_ || now >= opened_at_ + timeout_)) out = flush();
  return out;
}

// ---------------------------------------------------------------------------

void SlotCounters::record_arrival(std::uint64_t n) {
  std::lock_guard lock(mu_);
  arrivals_ += n;
}

void SlotCounters::record_completion(double service_ms) {
  std::lock_guard lock(mu_);
  ++completions_;
  service_ms_total_ += service_ms;
}

PerfCounters SlotCounters::roll_over(double slot_seconds, double cpu) {
  std::lock_guard lock(mu_);
  PerfCounters c;
  c.cpu = std::clamp(cpu, 0.0, 1.0);
  c.rps = slot_seconds > 0 ? static_cast<double>(arrivals_) / slot_seconds : 0.0;
  c.rqpt = slot_seconds > 0 ? static_cast<double>(completions_) / slot_seconds : 0.0;
  c.art = completions_ > 0 ? service_ms_total_ / static_cast<double>(completions_) : 0.0;
  arrivals_ = 0;
  completions_ = 0;
  service_ms_total_ = 0.0;
  last_ = c;
  return c;
}

PerfCounters SlotCounters::last() const {
  std::lock_guard lock(mu_);
  return last_;
}

CpuProvider process_cpu_provider() {
  struct State {
    std::clock_t cpu;
    std::chrono::steady_clock::time_point wall;
  };
  auto state = std::make_shared<State>(State{std::clock(), std::chrono::steady_clock::now()});
  return [state]() {
    const auto cpu_now = std::clock();
    const auto wall_now = std::chrono::steady_clock::now();
    const double cpu_s = static_cast<double>(cpu_now - state->cpu) / CLOCKS_PER_SEC;
    const double wall_s = std::chrono::duration<double>(wall_now - state->wall).count();
    const double threads = std::max(1u, std::thread::hardware_concurrency());
    *state = {cpu_now, wall_now};
    return wall_s > 0 ? std::clamp(cpu_s / (wall_s * threads), 0.0, 1.0) : 0.0;
  };
}

// ---------------------------------------------------------------------------

void InMemoryTransport::send(const sr::HopAddress& to, sr::Bytes packet) {
  std::lock_guard lock(mu_);
  queue_.emplace_back(to, std::move(packet));
}

std::vector<std::pair<sr::HopAddress, sr::Bytes>> InMemoryTransport::drain() {
  std::lock_guard lock(mu_);
  return std::exchange(queue_, {});
}

std::size_t InMemoryTransport::pending() const {
  std::lock_guard lock(mu_);
  return queue_.size();
}

// ---------------------------------------------------------------------------

TunnelEngine::TunnelEngine(sr::HopAddress self, TunnelParams params, Transport& transport,
                           Clock clock, CpuProvider cpu, std::size_t merge_capacity)
    : self_(self),
      transport_(transport),
      clock_(std::move(clock)),
      cpu_(std::move(cpu)),
      merge_capacity_(merge_capacity),
      pool_(params),
      params_(params) {}

void TunnelEngine::set_delivery_handler(DeliveryHandler handler) {
  std::lock_guard lock(mu_);
  on_delivery_ = std::move(handler);
}

void TunnelEngine::set_params(TunnelParams params) {
  pool_.set_params(params);
  std::lock_guard lock(mu_);
  params_ = params;
  for (auto& [_, buf] : buffers_) buf.set_timeout(params.merge_timeout());
}

TunnelParams TunnelEngine::params() const {
  std::lock_guard lock(mu_);
  return params_;
}

void TunnelEngine::send(std::uint64_t packet_id, sr::Bytes payload,
                        const std::vector<sr::HopAddress>& route) {
  counters_.record_arrival();
  if (route.empty()) {
    counters_.record_completion(0.0);
    DeliveryHandler handler;
    {
      std::lock_guard lock(mu_);
      handler = on_delivery_;
    }
    if (handler) handler({packet_id, std::move(payload)});
    return;
  }
  std::lock_guard lock(mu_);
  const Micros now = clock_();
  auto it = buffers_.find(route);
  if (it == buffers_.end()) {
    it = buffers_.emplace(route, MergeBuffer(params_.merge_timeout(), merge_capacity_)).first;
  }
  arrival_times_[packet_id] = now;
  if (auto frame = it->second.submit(packet_id, std::move(payload), now)) {
    transmit_locked(route, std::move(*frame));
  }
}

void TunnelEngine::poll() {
  std::lock_guard lock(mu_);
  const Micros now = clock_();
  for (auto& [route, buf] : buffers_) {
    if (auto frame = buf.poll(now)) transmit_locked(route, std::move(*frame));
  }
}

void TunnelEngine::flush_all() {
  std::lock_guard lock(mu_);
  for (auto& [route, buf] : buffers_) {
    if (auto frame = buf.flush()) transmit_locked(route, std::move(*frame));
  }
}

void TunnelEngine::transmit_locked(const std::vector<sr::HopAddress>& route,
                                   sr::MergedFrame frame) {
  const Micros now = clock_();
  for (const auto& e : frame.entries) {
    auto at = arrival_times_.find(e.packet_id);
    const double waited_ms =
        at == arrival_times_.end()
            ? 0.0
            : std::chrono::duration<double, std::milli>(now - at->second).count();
    if (at != arrival_times_.end()) arrival_times_.erase(at);
    counters_.record_completion(waited_ms);
  }
  sr::SegmentHeader header;
  header.packet_id = (static_cast<std::uint64_t>(self_.ipv4) << 32) ^ next_frame_id_++;
  header.offset = 0;
  header.hop_list = route;
  header.hop_counts = static_cast<std::uint8_t>(route.size());
  auto [action, advanced] = sr::next_hop(header);
  const auto& next = std::get<sr::ForwardTo>(action).next;
  auto stream = pool_.acquire_stream(next);
  transport_.send(next, sr::encode_packet(advanced, frame));
  pool_.release(stream);
  ++frames_sent_;
}

void TunnelEngine::receive(sr::ByteView packet) {
  auto decoded = sr::decode_packet(packet);
  const auto count = decoded.frame.entries.size();
  counters_.record_arrival(count);
  auto [action, advanced] = sr::next_hop(decoded.header);
  if (const auto* fwd = std::get_if<sr::ForwardTo>(&action)) {
    auto stream = pool_.acquire_stream(fwd->next);
    transport_.send(fwd->next, sr::encode_packet(advanced, decoded.frame));
    pool_.release(stream);
    for (std::size_t i = 0; i < count; ++i) counters_.record_completion(0.0);
    std::lock_guard lock(mu_);
    ++frames_sent_;
    return;
  }
  DeliveryHandler handler;
  {
    std::lock_guard lock(mu_);
    handler = on_delivery_;
  }
  for (auto& sub : sr::split_frame(decoded.frame)) {
    counters_.record_completion(0.0);
    if (handler) handler(sub);
  }
}

PerfCounters TunnelEngine::roll_over_slot(double slot_seconds) {
  return counters_.roll_over(slot_seconds, cpu_ ? cpu_() : 0.0);
}

PerfCounters TunnelEngine::sample_counters() const { return counters_.last(); }

std::uint64_t TunnelEngine::frames_sent() const {
  std::lock_guard lock(mu_);
  return frames_sent_;
}

}  // namespace arcturus::tunnel
