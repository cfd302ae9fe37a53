// Deterministic two-state, two-action chain used to check the learners
// against an exact value-iteration solution.
//
//   s0 --a0--> s0  r = 0        s1 --a0--> s1  r = 1
//   s0 --a1--> s1  r = 0        s1 --a1--> s0  r = 1.5
#pragma once

#include <array>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "vnet/tabular.hpp"

namespace vnet {

class ChainMdp {
 public:
  struct Step {
    bool acted = true;
    int state = 0;
    int action = 0;
    int next_state = 0;
    bool terminal = false;
    double r = 0.0;
    double reward() const { return r; }
  };

  static constexpr int num_states() { return 2; }
  static constexpr int num_actions() { return 2; }
  int num_agents() const { return 1; }

  static int next(int s, int a) { return kNext[static_cast<std::size_t>(s * 2 + a)]; }
  static double reward(int s, int a) { return kReward[static_cast<std::size_t>(s * 2 + a)]; }

  const std::vector<int>& reset() {
    states_.assign(1, 0);
    return states_;
  }
  const std::vector<int>& states() const { return states_; }
  std::vector<bool> acting() const { return {true}; }

  std::vector<Step> step_actions(std::span<const int> actions) {
    if (actions.size() != 1) throw std::invalid_argument("ChainMdp: exactly one action per step");
    const int s = states_[0], a = actions[0];
    if (a < 0 || a >= 2) throw std::out_of_range("ChainMdp: action out of range");
    const int s2 = next(s, a);
    states_[0] = s2;
    return {Step{true, s, a, s2, false, reward(s, a)}};
  }

  Eigen::VectorXd features(int s) const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
    x(s) = 1.0;
    return x;
  }
  int feature_dim() const { return 2; }

 private:
  static constexpr std::array<int, 4> kNext{0, 1, 1, 0};
  static constexpr std::array<double, 4> kReward{0.0, 0.0, 1.0, 1.5};
  std::vector<int> states_{0};
};

/// Exact Q* of the chain by value iteration, iterated until the sup-norm
/// change drops below `tol`.
inline QTable chain_value_iteration(double gamma, double tol = 1e-14) {
  QTable q = make_qtable(2, 2);
  for (int it = 0; it < 100'000; ++it) {
    QTable next(2, 2);
    for (int s = 0; s < 2; ++s)
      for (int a = 0; a < 2; ++a)
        next(s, a) = ChainMdp::reward(s, a) + gamma * q.row(ChainMdp::next(s, a)).maxCoeff();
    const double delta = (next - q).cwiseAbs().maxCoeff();
    q = next;
    if (delta < tol) break;
  }
  return q;
}

}  // namespace vnet
