// Tabular Q-learning with epsilon-greedy exploration and annealed epsilon.
#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "vnet/learning.hpp"

namespace vnet {

using QTable = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline QTable make_qtable(int states, int actions) { return QTable::Zero(states, actions); }

struct LearnConfig {
  double alpha = 0.1;
  double gamma = 0.9;
  EpsilonSchedule epsilon;
  int episodes = 1000;
  int horizon = 500;
  bool shared_table = true;  // false: one table per agent
};

inline int greedy_action(const QTable& q, int state) { return argmax_lowest(q.row(state)); }

template <typename Rng>
int select_action(const QTable& q, int state, double epsilon, Rng& rng) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(rng) < epsilon) {
    std::uniform_int_distribution<int> pick(0, static_cast<int>(q.cols()) - 1);
    return pick(rng);
  }
  return greedy_action(q, state);
}

/// Q(s,a) += alpha (r + gamma max_a' Q(s',a') - Q(s,a)); terminal steps drop
/// the bootstrap term. Returns the updated entry.
inline double bellman_update(QTable& q, int s, int a, double r, int s_next, double alpha, double gamma,
                             bool terminal = false) {
  const double bootstrap = terminal ? 0.0 : gamma * q.row(s_next).maxCoeff();
  q(s, a) += alpha * (r + bootstrap - q(s, a));
  return q(s, a);
}

struct TabularResult {
  std::vector<QTable> tables;  // one entry when shared
  std::vector<EpisodeLog> episodes;

  const QTable& table_for(int agent) const {
    return tables.size() == 1 ? tables.front() : tables.at(static_cast<std::size_t>(agent));
  }
};

template <LearningEnv Env>
TabularResult train_tabular(Env& env, const LearnConfig& cfg, std::mt19937_64& rng,
                            const EpisodeHook<Env>& hook = {}) {
  const int agents = env.num_agents();
  TabularResult result;
  result.tables.assign(cfg.shared_table ? 1 : static_cast<std::size_t>(agents),
                       make_qtable(Env::num_states(), Env::num_actions()));
  auto table = [&](int agent) -> QTable& {
    return result.tables.size() == 1 ? result.tables.front() : result.tables[static_cast<std::size_t>(agent)];
  };

  std::vector<int> actions(static_cast<std::size_t>(agents), 0);
  for (int ep = 0; ep < cfg.episodes; ++ep) {
    const double eps = cfg.epsilon.at(ep);
    env.reset();
    double total = 0.0;
    for (int t = 0; t < cfg.horizon; ++t) {
      const auto& states = env.states();
      const std::vector<bool> acting = env.acting();
      for (int i = 0; i < agents; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        actions[idx] = acting[idx] ? select_action(table(i), states[idx], eps, rng) : 0;
      }
      const auto steps = env.step_actions(actions);
      for (int i = 0; i < agents; ++i) {
        const auto& s = steps[static_cast<std::size_t>(i)];
        if (!s.acted) continue;
        const double r = s.reward();
        check_finite_reward(r);
        total += r;
        bellman_update(table(i), s.state, s.action, r, s.next_state, cfg.alpha, cfg.gamma, s.terminal);
      }
    }
    EpisodeLog log{ep, eps, total / agents, 0.0};
    result.episodes.push_back(log);
    if (hook) hook(log, env);
  }
  return result;
}

/// Flat CSV artifact: one header line, then one row per state.
void save_qtable(const std::filesystem::path& path, const QTable& q, std::uint64_t config_hash);
QTable load_qtable(const std::filesystem::path& path, std::uint64_t* config_hash = nullptr);

}  // namespace vnet
