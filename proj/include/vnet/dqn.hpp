// Deep Q-learning: online and target networks, uniform experience replay,
// mini-batch gradient descent.
#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "vnet/fnn.hpp"
#include "vnet/learning.hpp"

namespace vnet {

using QNetwork = Fnn<double>;

struct DqnConfig {
  int batch = 32;
  int sync_every = 50;  // episodes
  double learning_rate = 1e-3;
  double gamma = 0.9;
  EpsilonSchedule epsilon;
  LossMode loss = LossMode::SquaredError;
  int capacity = 50'000;
  std::vector<int> hidden{64, 32};
  double reward_scale = 1.0;  // rewards are multiplied by this before entering targets
  double grad_clip = 0.0;     // global-norm clip; 0 disables
  int train_every = 1;        // environment steps per gradient step
  int episodes = 300;
  int horizon = 500;
};

struct Transition {
  Eigen::VectorXd state;
  int action = 0;  // joint action index
  double reward = 0.0;
  Eigen::VectorXd next_state;
  bool terminal = false;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be >= 1");
    items_.reserve(std::min<std::size_t>(capacity, 4096));
  }

  void push(Transition t) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(t));
    } else {
      items_[cursor_] = std::move(t);
    }
    cursor_ = (cursor_ + 1) % capacity_;
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t cursor() const { return cursor_; }
  const Transition& at(std::size_t i) const { return items_.at(i); }

  template <typename Rng>
  std::size_t sample_index(Rng& rng) const {
    std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
    return pick(rng);
  }

 private:
  std::size_t capacity_;
  std::size_t cursor_ = 0;
  std::vector<Transition> items_;
};

/// Temperature for the BCE squash: max(1, 95th percentile of recent |targets|).
class TargetScale {
 public:
  explicit TargetScale(std::size_t window = 4096) : window_(window) {}
  void add(double target);
  double temperature() const;

 private:
  std::size_t window_;
  std::deque<double> recent_;
};

struct TrainStepResult {
  bool updated = false;
  double loss = 0.0;
};

/// One mini-batch update of `net` against bootstrap targets from `target`.
/// Skipped while the buffer holds fewer than `cfg.batch` transitions.
template <typename Rng>
TrainStepResult train_step(QNetwork& net, const QNetwork& target, const ReplayBuffer& buffer, const DqnConfig& cfg,
                           TargetScale& scale, Rng& rng) {
  const auto m = static_cast<std::size_t>(cfg.batch);
  if (buffer.size() < m) return {};
  const double tau = scale.temperature();
  QNetwork::Gradient grad = net.zero_gradient();
  std::vector<double> targets;
  targets.reserve(m);
  double total = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const Transition& tr = buffer.at(buffer.sample_index(rng));
    double y = cfg.reward_scale * tr.reward;
    if (!tr.terminal) y += cfg.gamma * target.forward(tr.next_state).maxCoeff();
    targets.push_back(y);
    total += net.backward(tr.state, tr.action, y, cfg.loss, tau, grad).value;
  }
  for (double y : targets) scale.add(y);

  double step = cfg.learning_rate / static_cast<double>(m);
  if (cfg.grad_clip > 0.0) {
    const double norm = QNetwork::gradient_norm(grad) / static_cast<double>(m);
    if (norm > cfg.grad_clip) step *= cfg.grad_clip / norm;
  }
  net.add_scaled(grad, -step);
  return {true, total / static_cast<double>(m)};
}

/// Copies the online parameters into the target every `period` episodes.
inline bool sync_target(const QNetwork& net, QNetwork& target, int episode, int period) {
  if (episode <= 0 || episode % period != 0) return false;
  target = net;
  return true;
}

inline int greedy_action(const QNetwork& net, const Eigen::VectorXd& x) { return argmax_lowest(net.forward(x)); }

struct DqnResult {
  QNetwork net;
  std::vector<EpisodeLog> episodes;
};

template <FeatureEnv Env>
DqnResult train_dqn(Env& env, const DqnConfig& cfg, std::mt19937_64& rng, const EpisodeHook<Env>& hook = {}) {
  if (cfg.batch < 1 || cfg.sync_every < 1) throw std::invalid_argument("DqnConfig: batch and sync period must be >= 1");
  QNetwork net = QNetwork::q_network(env.feature_dim(), cfg.hidden, Env::num_actions());
  net.init_random(rng);
  QNetwork target = net;
  ReplayBuffer buffer(static_cast<std::size_t>(cfg.capacity));
  TargetScale scale;

  std::vector<Eigen::VectorXd> cache(static_cast<std::size_t>(Env::num_states()));
  auto feat = [&](int s) -> const Eigen::VectorXd& {
    auto& f = cache[static_cast<std::size_t>(s)];
    if (f.size() == 0) f = env.features(s);
    return f;
  };

  const int agents = env.num_agents();
  std::vector<int> actions(static_cast<std::size_t>(agents), 0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, Env::num_actions() - 1);
  DqnResult result;
  long env_steps = 0;
  for (int ep = 0; ep < cfg.episodes; ++ep) {
    const double eps = cfg.epsilon.at(ep);
    env.reset();
    double total = 0.0, loss_sum = 0.0;
    long updates = 0;
    for (int t = 0; t < cfg.horizon; ++t) {
      const auto& states = env.states();
      const std::vector<bool> acting = env.acting();
      for (int i = 0; i < agents; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        if (!acting[idx]) continue;
        actions[idx] = coin(rng) < eps ? pick(rng) : greedy_action(net, feat(states[idx]));
      }
      const auto steps = env.step_actions(actions);
      for (int i = 0; i < agents; ++i) {
        const auto& s = steps[static_cast<std::size_t>(i)];
        if (!s.acted) continue;
        const double r = s.reward();
        check_finite_reward(r);
        total += r;
        buffer.push({feat(s.state), s.action, r, feat(s.next_state), s.terminal});
      }
      if (++env_steps % cfg.train_every == 0) {
        const TrainStepResult tr = train_step(net, target, buffer, cfg, scale, rng);
        if (tr.updated) {
          loss_sum += tr.loss;
          ++updates;
        }
      }
    }
    sync_target(net, target, ep + 1, cfg.sync_every);
    if (!net.all_finite()) throw std::runtime_error("DQN parameters diverged to non-finite values");
    EpisodeLog log{ep, eps, total / agents, updates ? loss_sum / static_cast<double>(updates) : 0.0};
    result.episodes.push_back(log);
    if (hook) hook(log, env);
  }
  result.net = std::move(net);
  return result;
}

void save_checkpoint(const std::filesystem::path& path, const QNetwork& net, std::uint64_t config_hash);
QNetwork load_checkpoint(const std::filesystem::path& path, std::uint64_t* config_hash = nullptr);

}  // namespace vnet
