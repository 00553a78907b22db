#include "arcturus/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "arcturus/error.hpp"

namespace arcturus::tuner {

namespace {

constexpr int kSessions = 10;
constexpr int kConcurrencyLevels = 16;
constexpr int kTimeouts = 5;

double normalized(double v, double lo, double hi) {
  return hi > lo ? (v - lo) / (hi - lo) : 0.0;
}

}  // namespace

Arm arm_at(int index) {
  if (index < 0 || index >= kArmCount) throw Error("arm index out of range: " + std::to_string(index));
  Arm arm;
  arm.index = index;
  arm.params.sessions = 1 + index / (kConcurrencyLevels * kTimeouts);
  arm.params.concurrency = 50 + 10 * ((index / kTimeouts) % kConcurrencyLevels);
  arm.params.merge_timeout_ms = 1 + index % kTimeouts;
  return arm;
}

int arm_index(const tunnel::TunnelParams& p) {
  p.validate();
  return (p.sessions - 1) * kConcurrencyLevels * kTimeouts + ((p.concurrency - 50) / 10) * kTimeouts +
         (p.merge_timeout_ms - 1);
}

std::vector<Arm> arm_space() {
  std::vector<Arm> arms;
  arms.reserve(kArmCount);
  for (int i = 0; i < kArmCount; ++i) arms.push_back(arm_at(i));
  return arms;
}

std::pair<double, RewardNorm> compute_reward(double rqpt, double art, RewardNorm norm) {
  norm.rqpt_min = std::min(norm.rqpt_min, rqpt);
  norm.rqpt_max = std::max(norm.rqpt_max, rqpt);
  norm.art_min = std::min(norm.art_min, art);
  norm.art_max = std::max(norm.art_max, art);
  const double rqpt_norm = normalized(rqpt, norm.rqpt_min, norm.rqpt_max);
  const double art_norm = normalized(art, norm.art_min, norm.art_max);
  const double reward = norm.w_rqpt * rqpt_norm + norm.w_art * (1.0 - art_norm);
  return {std::clamp(reward, 0.0, 1.0), norm};
}

LinUcbState::LinUcbState(double alpha) : alpha_(alpha), arms_(kArmCount) {
  if (!(alpha > 0)) throw Error("LinUCB exploration coefficient must be positive");
}

double LinUcbState::score(int arm, const Context& x) const {
  const auto& m = arms_.at(static_cast<std::size_t>(arm));
  const double width = x.dot(m.a_inv * x);
  return m.theta.dot(x) + alpha_ * std::sqrt(std::max(width, 0.0));
}

Arm LinUcbState::select_arm(const Context& x) const {
  int best = 0;
  double best_score = score(0, x);
  for (int i = 1; i < kArmCount; ++i) {
    const double s = score(i, x);
    if (s > best_score) {
      best_score = s;
      best = i;
    }
  }
  return arm_at(best);
}

void LinUcbState::update(int arm, const Context& x, double reward) {
  auto& m = arms_.at(static_cast<std::size_t>(arm));
  m.a += x * x.transpose();
  m.b += reward * x;
  m.a_inv = m.a.inverse();
  m.theta = m.a_inv * m.b;
}

nlohmann::json LinUcbState::to_json() const {
  nlohmann::json j;
  j["alpha"] = alpha_;
  j["dim"] = kContextDim;
  j["arms"] = nlohmann::json::array();
  for (int i = 0; i < kArmCount; ++i) {
    const auto& m = arms_[static_cast<std::size_t>(i)];
    if (m.a == Matrix::Identity() && m.b.isZero()) continue;
    std::vector<double> a(m.a.data(), m.a.data() + kContextDim * kContextDim);
    std::vector<double> b(m.b.data(), m.b.data() + kContextDim);
    j["arms"].push_back({{"index", i}, {"A", a}, {"b", b}});
  }
  return j;
}

LinUcbState LinUcbState::from_json(const nlohmann::json& j) {
  try {
    if (j.at("dim").get<int>() != kContextDim) throw ConfigError("tuner state", "context dimension mismatch");
    LinUcbState state(j.at("alpha").get<double>());
    for (const auto& entry : j.at("arms")) {
      const int index = entry.at("index").get<int>();
      if (index < 0 || index >= kArmCount) throw ConfigError("tuner state", "arm index out of range");
      auto a = entry.at("A").get<std::vector<double>>();
      auto b = entry.at("b").get<std::vector<double>>();
      if (a.size() != kContextDim * kContextDim || b.size() != kContextDim)
        throw ConfigError("tuner state", "arm " + std::to_string(index) + " has wrong shape");
      auto& m = state.arms_[static_cast<std::size_t>(index)];
      m.a = Eigen::Map<const Matrix>(a.data());
      m.b = Eigen::Map<const Context>(b.data());
      m.a_inv = m.a.inverse();
      m.theta = m.a_inv * m.b;
    }
    return state;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("tuner state", e.what());
  }
}

Context ContextScaler::standardize(const PerfCounters& c) {
  rps_max_ = std::max(rps_max_, c.rps);
  rqpt_max_ = std::max(rqpt_max_, c.rqpt);
  art_max_ = std::max(art_max_, c.art);
  Context x;
  x << std::clamp(c.cpu, 0.0, 1.0), rps_max_ > 0 ? c.rps / rps_max_ : 0.0,
      rqpt_max_ > 0 ? c.rqpt / rqpt_max_ : 0.0, art_max_ > 0 ? c.art / art_max_ : 0.0;
  return x;
}

Tuner::Tuner(double alpha, RewardNorm norm) : state_(alpha), norm_(norm) {}

tunnel::TunnelParams Tuner::step(const PerfCounters& finished_slot) {
  if (current_arm_ >= 0) {
    auto [reward, norm] = compute_reward(finished_slot.rqpt, finished_slot.art, norm_);
    norm_ = norm;
    last_reward_ = reward;
    state_.update(current_arm_, current_context_, reward);
  }
  current_context_ = scaler_.standardize(finished_slot);
  const Arm arm = state_.select_arm(current_context_);
  current_arm_ = arm.index;
  return arm.params;
}

nlohmann::json Tuner::snapshot() const {
  return {{"bandit", state_.to_json()},
          {"norm",
           {{"rqpt_min", norm_.rqpt_min},
            {"rqpt_max", norm_.rqpt_max},
            {"art_min", norm_.art_min},
            {"art_max", norm_.art_max},
            {"w_rqpt", norm_.w_rqpt},
            {"w_art", norm_.w_art}}}};
}

Tuner Tuner::restore(const nlohmann::json& j) {
  try {
    Tuner t;
    t.state_ = LinUcbState::from_json(j.at("bandit"));
    const auto& n = j.at("norm");
    t.norm_ = {n.at("rqpt_min"), n.at("rqpt_max"), n.at("art_min"),
               n.at("art_max"), n.at("w_rqpt"),   n.at("w_art")};
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("tuner snapshot", e.what());
  }
}

BanditRun run_stationary(const StationaryEnv& env, int rounds, double alpha, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Context center;
  center << 0.6, 0.5, 0.5, 0.4;
  LinUcbState state(alpha);
  BanditRun run;
  run.arms.reserve(static_cast<std::size_t>(rounds));
  run.rewards.reserve(static_cast<std::size_t>(rounds));
  for (int r = 0; r < rounds; ++r) {
    Context x = center;
    for (int i = 0; i < kContextDim; ++i) x(i) = std::clamp(x(i) + env.context_jitter * gauss(rng), 0.0, 1.0);
    const int arm = state.select_arm(x).index;
    const double mean = arm == env.best_arm ? env.best_reward : env.other_reward;
    const double reward = std::clamp(mean + env.noise * gauss(rng), 0.0, 1.0);
    state.update(arm, x, reward);
    run.arms.push_back(arm);
    run.rewards.push_back(reward);
  }
  return run;
}

double arm_frequency(const BanditRun& run, int arm, int from, int to) {
  to = std::min<int>(to, static_cast<int>(run.arms.size()));
  if (to <= from) return 0.0;
  int hits = 0;
  for (int r = from; r < to; ++r) hits += run.arms[static_cast<std::size_t>(r)] == arm ? 1 : 0;
  return static_cast<double>(hits) / (to - from);
}

PerfCounters TunnelModel::observe(const tunnel::TunnelParams& p, std::mt19937_64& rng) const {
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double streams = static_cast<double>(p.sessions * p.concurrency);
  const double capacity =
      30000.0 * (1.0 - std::exp(-streams / 300.0)) * (0.85 + 0.05 * p.merge_timeout_ms) / (1.0 + 0.02 * p.sessions);
  const double served = std::min(offered_rps, capacity);
  const double utilisation = served / capacity;
  PerfCounters c;
  c.rps = offered_rps;
  c.rqpt = served * std::max(0.0, 1.0 + noise * gauss(rng));
  c.art = (3.0 + 0.5 * p.merge_timeout_ms + 0.3 * p.sessions + 20.0 * utilisation * utilisation) *
          std::max(0.1, 1.0 + noise * gauss(rng));
  c.cpu = std::clamp(0.2 + 0.6 * served / 30000.0 + 0.01 * p.sessions, 0.0, 1.0);
  return c;
}

}  // namespace arcturus::tuner
