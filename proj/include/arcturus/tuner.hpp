#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "arcturus/model.hpp"
#include "arcturus/tunnel.hpp"

namespace arcturus::tuner {

inline constexpr int kContextDim = 4;
inline constexpr int kArmCount = 10 * 16 * 5;

using Context = Eigen::Matrix<double, kContextDim, 1>;
using Matrix = Eigen::Matrix<double, kContextDim, kContextDim>;

struct Arm {
  tunnel::TunnelParams params;
  int index = 0;
};

// S_p major, then C_p, then T_p.
std::vector<Arm> arm_space();
Arm arm_at(int index);
int arm_index(const tunnel::TunnelParams& params);

struct RewardNorm {
  double rqpt_min = 0.0;
  double rqpt_max = 25000.0;
  double art_min = 0.0;
  double art_max = 100.0;
  double w_rqpt = 0.5;
  double w_art = 0.5;
};

// Widens the running extrema with the observation, then scores it:
// w_rqpt * rqpt_norm + w_art * (1 - art_norm).
std::pair<double, RewardNorm> compute_reward(double rqpt, double art, RewardNorm norm);

struct ArmModel {
  Matrix a = Matrix::Identity();
  Context b = Context::Zero();
  Matrix a_inv = Matrix::Identity();
  Context theta = Context::Zero();
};

// Disjoint LinUCB over the joint 800-arm grid.
class LinUcbState {
 public:
  explicit LinUcbState(double alpha = 1.0);

  double score(int arm, const Context& x) const;
  // Highest score wins; ties go to the lowest index.
  Arm select_arm(const Context& x) const;
  void update(int arm, const Context& x, double reward);

  double alpha() const { return alpha_; }
  const ArmModel& arm(int index) const { return arms_.at(static_cast<std::size_t>(index)); }

  nlohmann::json to_json() const;
  static LinUcbState from_json(const nlohmann::json& j);

 private:
  double alpha_;
  std::vector<ArmModel> arms_;
};

// Standardises counters into a context: cpu as-is, the rest over running maxima.
class ContextScaler {
 public:
  Context standardize(const PerfCounters& c);

 private:
  double rps_max_ = 0.0;
  double rqpt_max_ = 0.0;
  double art_max_ = 0.0;
};

// One select/update per slot: credit the previous arm with the reward of the
// slot just finished, then choose parameters for the next slot.
class Tuner {
 public:
  explicit Tuner(double alpha = 1.0, RewardNorm norm = {});

  tunnel::TunnelParams step(const PerfCounters& finished_slot);

  const LinUcbState& state() const { return state_; }
  const RewardNorm& norm() const { return norm_; }
  double last_reward() const { return last_reward_; }

  nlohmann::json snapshot() const;
  static Tuner restore(const nlohmann::json& j);

 private:
  LinUcbState state_;
  RewardNorm norm_;
  ContextScaler scaler_;
  int current_arm_ = -1;
  Context current_context_ = Context::Zero();
  double last_reward_ = 0.0;
};

// Stationary test bed: one arm pays best_reward, every other arm
// other_reward, both with clipped Gaussian noise; contexts jitter around a
// fixed operating point.
struct StationaryEnv {
  int best_arm = arm_index({4, 100, 2});
  double best_reward = 0.9;
  double other_reward = 0.1;
  double noise = 0.05;
  double context_jitter = 0.02;
};

struct BanditRun {
  std::vector<int> arms;
  std::vector<double> rewards;
};

BanditRun run_stationary(const StationaryEnv& env, int rounds, double alpha, std::uint64_t seed);
// Share of rounds [from, to) that chose `arm`.
double arm_frequency(const BanditRun& run, int arm, int from, int to);

// Closed-form tunnel performance under a fixed offered load, used by the
// tuning loop: more sessions and streams raise capacity with diminishing
// returns, longer merge windows save per-packet work but add waiting time.
struct TunnelModel {
  double offered_rps = 20000.0;
  double noise = 0.03;
  PerfCounters observe(const tunnel::TunnelParams& params, std::mt19937_64& rng) const;
};

}  // namespace arcturus::tuner
