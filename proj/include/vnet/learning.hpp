// Pieces shared by the tabular and deep learners.
#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace vnet {

/// Exponential epsilon annealing: max(end, start * decay^episode).
struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.05;
  double decay = 0.995;

  double at(int episode) const { return std::max(end, start * std::pow(decay, episode)); }
};

/// What the learners need from an environment. Each agent acts once per
/// step; step_actions returns one record per agent, in agent order, exposing
/// acted/state/action/next_state/terminal/reward().
template <typename E>
concept LearningEnv = requires(E& env, const E& cenv, std::span<const int> actions) {
  { E::num_states() } -> std::convertible_to<int>;
  { E::num_actions() } -> std::convertible_to<int>;
  { cenv.num_agents() } -> std::convertible_to<int>;
  { env.reset() } -> std::convertible_to<const std::vector<int>&>;
  { cenv.states() } -> std::convertible_to<const std::vector<int>&>;
  { cenv.acting() } -> std::convertible_to<std::vector<bool>>;
  { env.step_actions(actions) };
};

template <typename E>
concept FeatureEnv = LearningEnv<E> && requires(const E& env, int s) {
  { env.features(s) } -> std::convertible_to<Eigen::VectorXd>;
  { env.feature_dim() } -> std::convertible_to<int>;
};

/// Index of the largest entry; ties go to the lowest index.
template <typename Derived>
int argmax_lowest(const Eigen::DenseBase<Derived>& row) {
  int best = 0;
  for (Eigen::Index j = 1; j < row.size(); ++j)
    if (row(j) > row(best)) best = static_cast<int>(j);
  return best;
}

struct EpisodeLog {
  int episode = 0;
  double epsilon = 0.0;
  double mean_return = 0.0;  // undiscounted return per agent
  double mean_loss = 0.0;    // DQN only
};

/// Called after every episode with the log entry and the environment.
template <typename Env>
using EpisodeHook = std::function<void(const EpisodeLog&, const Env&)>;

inline void check_finite_reward(double r) {
  if (!std::isfinite(r)) throw std::runtime_error("non-finite reward encountered; check reward weights and channel settings");
}

}  // namespace vnet
