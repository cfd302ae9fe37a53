// The vehicular MDP: observations, the 4374-state discretisation, the 21
// joint actions, network selection with handoff accounting, rewards, and the
// per-step transition of every vehicle on the corridor.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "vnet/channel.hpp"
#include "vnet/road.hpp"

namespace vnet {

enum class Telecom : std::uint8_t { HandoffAware, NoHandoffPenalty, MaxRate };
inline constexpr int kTelecomCount = 3;
inline constexpr int kActionCount = kDrivingCount * kTelecomCount;  // 21
inline constexpr int kStateCount = 3 * 3 * 3 * 3 * 3 * 3 * 3 * 2;   // 4374

std::string_view to_string(Telecom t);

struct ActionPair {
  Driving driving = Driving::HardAccel;
  Telecom telecom = Telecom::HandoffAware;

  int index() const { return static_cast<int>(driving) * kTelecomCount + static_cast<int>(telecom); }
  static ActionPair from_index(int index);
  friend bool operator==(const ActionPair&, const ActionPair&) = default;
};

/// Network-selection rule actually executed for a vehicle. The first three
/// mirror the telecom actions; NearestBs is the geometric baseline.
enum class SelectionRule : std::uint8_t { HandoffAware, NoHandoffPenalty, MaxRate, NearestBs };

inline SelectionRule rule_for(Telecom t) { return static_cast<SelectionRule>(t); }

struct Command {
  Driving driving = Driving::Maintain;
  SelectionRule rule = SelectionRule::HandoffAware;
};

struct Observation {
  double d_fc = kNoNeighbor;
  double d_ft = kNoNeighbor;
  double d_rt = kNoNeighbor;
  double v_fc = 0.0;
  double v_ft = 0.0;
  double v_rt = 0.0;
  int c_count = 0;
  Lane lane = Lane::Right;
};

enum class DistanceBand : std::uint8_t { Close, Mid, Far };
enum class VelocityBand : std::uint8_t { Approaching, Equal, Separating };

struct DiscretizeConfig {
  double d_close_m = 15.0;  // d_c
  double d_far_m = 50.0;    // d_f
  double v_eps_mps = 0.5;
};

struct DiscreteState {
  std::array<DistanceBand, 3> distance{};  // fc, ft, rt
  std::array<VelocityBand, 3> velocity{};  // fc, ft, rt
  std::uint8_t connectivity = 0;           // 0: c <= 1, 1: c == 2, 2: c == 3
  Lane lane = Lane::Right;

  int index() const;
  static DiscreteState from_index(int index);
  friend bool operator==(const DiscreteState&, const DiscreteState&) = default;
};

DistanceBand distance_band(double d, const DiscretizeConfig& config);
VelocityBand velocity_band(double v, const DiscretizeConfig& config);
DiscreteState discretize(const Observation& obs, const DiscretizeConfig& config);

/// Numeric network input for a state: 8 centred codes, or one-hot blocks.
enum class StateEncoding : std::uint8_t { Centered, OneHot };
int encoding_width(StateEncoding e);
Eigen::VectorXd encode_state(const DiscreteState& s, StateEncoding e);

struct RewardWeights {
  double w1 = 1000.0;
  double w2 = 5.0;
  double w3 = 1.0;
  double w4 = 1.0;
  double w5 = 1.0;
  double w6 = 4.5 * std::pow(10.0, -6.5);
  double v_desired_mps = 30.0;
  double r_th_bps = 1e8;
};

struct ChannelConfig {
  RfParams<double> rf;
  ThzParams<double> thz;
  InterferenceMode mode = InterferenceMode::ExpectedAlignment;
  bool fading = true;  // false pins every RF fade to 1
};

struct EnvConfig {
  RoadConfig road;
  ChannelConfig channel;
  RewardWeights weights;
  double v_eps_mps = 0.5;

  DiscretizeConfig discretize_config() const {
    return {road.d_min_safety_m, road.d_max_safety_m, v_eps_mps};
  }
  void validate() const;
};

struct CandidateRate {
  int bs_id = 0;
  double rate_bps = 0.0;
};
using TopList = std::vector<CandidateRate>;

struct AssociationState {
  std::optional<int> previous_bs;
  std::optional<int> current_bs;
  TopList top3;
  long handoff_count = 0;
  long steps_elapsed = 0;

  double handoff_prob() const {
    return steps_elapsed == 0 ? 0.0 : static_cast<double>(handoff_count) / static_cast<double>(steps_elapsed);
  }
};

enum class HandoffKind : std::uint8_t { None, Horizontal, Vertical };

int count_meeting_threshold(std::span<const CandidateRate> top3, double r_th_bps);
Observation observe(const World& world, int av_id, std::span<const CandidateRate> top3, double r_th_bps);

/// Shannon rate from vehicle `av_id` to every base station, indexed by BS id.
/// RF fades (and THz alignments in sampled mode) are drawn from `rng`.
std::vector<double> link_rates(const World& world, int av_id, const ChannelConfig& channel,
                               std::mt19937_64& rng);

/// Best three stations by rate (ties: lower id first); bumps their candidate load.
TopList rank_bs(World& world, std::span<const double> rates);

double weighted_rate(double t_ij, int quota, int n_s, double mu);
double handoff_penalty(std::optional<int> prev_bs, int candidate_bs, BsKind candidate_kind);

struct Selection {
  std::optional<int> bs;  // station actually serving this step
  double t_ij = 0.0;
  double t_q = 0.0;
  bool handoff = false;
  HandoffKind kind = HandoffKind::None;
};

/// Executes one network-selection rule and books the association.
/// `rates` and `distances` are indexed by BS id; `distances` is only read by
/// the NearestBs rule.
Selection select_bs(World& world, AssociationState& assoc, SelectionRule rule, std::span<const double> rates,
                    std::span<const double> distances);

double reward_tran(bool collided, double v_x_mps, Driving action, double front_gap_m, Lane lane,
                   const RewardWeights& w, const DiscretizeConfig& d);
double reward_tele(double t_q, double k, const RewardWeights& w);

struct AvStep {
  int av_id = 0;
  bool acted = false;  // false for wrecks waiting to re-enter
  int state = 0;
  int action = 0;
  int next_state = 0;
  bool terminal = false;
  bool collision = false;
  double r_tran = 0.0;
  double r_tele = 0.0;
  double t_ij = 0.0;
  double t_q = 0.0;
  double k = 0.0;
  double v_x_mps = 0.0;
  int serving_bs = -1;
  bool handoff = false;
  HandoffKind handoff_kind = HandoffKind::None;

  double reward() const { return r_tran + r_tele; }
};

struct EpisodeMetrics {
  long av_steps = 0;
  double sum_r_tran = 0.0;
  double sum_r_tele = 0.0;
  double sum_t_q = 0.0;
  double sum_t_ij = 0.0;
  double sum_v = 0.0;
  long handoffs = 0;
  long horizontal = 0;
  long vertical = 0;
  long collisions = 0;
  long quota_violations = 0;  // station-steps with associated > quota
  long tq_violations = 0;     // vehicle-steps with T_q > T_ij
  double k_min = 1.0;
  double k_max = 0.0;
};

/// Multi-vehicle environment. Vehicles are agents indexed by id.
class VehicularEnv {
 public:
  VehicularEnv(EnvConfig config, std::uint64_t seed);

  static constexpr int num_states() { return kStateCount; }
  static constexpr int num_actions() { return kActionCount; }
  int num_agents() const { return config_.road.num_avs; }

  /// Fresh deployment; returns each vehicle's discrete state index.
  const std::vector<int>& reset();
  const std::vector<int>& states() const { return states_; }
  /// Vehicles that take an action this step (not waiting wrecks).
  std::vector<bool> acting() const;

  std::vector<AvStep> step(std::span<const Command> commands);
  std::vector<AvStep> step_actions(std::span<const int> joint_actions);

  Eigen::VectorXd features(int state) const;
  int feature_dim() const { return encoding_width(encoding_); }
  void set_encoding(StateEncoding e) { encoding_ = e; }

  const World& world() const { return world_; }
  const EnvConfig& config() const { return config_; }
  const std::vector<AssociationState>& associations() const { return assoc_; }
  const EpisodeMetrics& episode_metrics() const { return metrics_; }
  const Observation& observation(int av_id) const { return observations_.at(static_cast<std::size_t>(av_id)); }

 private:
  void refresh_state(int av_id);

  EnvConfig config_;
  DiscretizeConfig disc_;
  std::mt19937_64 world_rng_;
  std::mt19937_64 channel_rng_;
  World world_;
  std::vector<AssociationState> assoc_;
  std::vector<Observation> observations_;
  std::vector<int> states_;
  EpisodeMetrics metrics_;
  StateEncoding encoding_ = StateEncoding::Centered;
};

}  // namespace vnet
