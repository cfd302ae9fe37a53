#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "vnet/env.hpp"
#include "vnet/fixture.hpp"
#include "vnet/tabular.hpp"

using namespace vnet;

namespace {

// Two states visited alternately whatever the action. Each (s, a) pays a
// noisy reward around a fixed mean. Used for the gamma = 0 regression.
class NoisyBandit {
 public:
  struct Step {
    bool acted = true;
    int state = 0, action = 0, next_state = 0;
    bool terminal = false;
    double r = 0.0;
    double reward() const { return r; }
  };
  static constexpr int num_states() { return 2; }
  static constexpr int num_actions() { return 2; }
  int num_agents() const { return 1; }
  const std::vector<int>& reset() {
    s_.assign(1, 0);
    return s_;
  }
  const std::vector<int>& states() const { return s_; }
  std::vector<bool> acting() const { return {true}; }
  std::vector<Step> step_actions(std::span<const int> a) {
    const int s = s_[0];
    const double mean = kMean[static_cast<std::size_t>(s * 2 + a[0])];
    const double r = mean + noise_(rng_);
    s_[0] = 1 - s;
    return {Step{true, s, a[0], s_[0], false, r}};
  }
  static constexpr std::array<double, 4> kMean{1.0, -2.0, 0.5, 3.0};

 private:
  std::vector<int> s_{0};
  std::mt19937_64 rng_{99};
  std::uniform_real_distribution<double> noise_{-1.0, 1.0};
};

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("vnet_test_" + name);
}

}  // namespace

TEST_CASE("action selection") {
  QTable q = make_qtable(4, kActionCount);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) CHECK(select_action(q, 2, 0.0, rng) == 0);

  q(1, 7) = 3.0;
  q(1, 12) = 2.9;
  for (int i = 0; i < 100; ++i) CHECK(select_action(q, 1, 0.0, rng) == 7);

  q(1, 15) = 3.0;
  CHECK(greedy_action(q, 1) == 7);

  const int n = 1'000'000;
  std::vector<int> counts(kActionCount, 0);
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(select_action(q, 1, 1.0, rng))];
  for (int c : counts) CHECK(std::abs(c / double(n) * kActionCount - 1.0) < 0.01);
}

TEST_CASE("bellman update examples") {
  QTable q = make_qtable(3, 2);
  CHECK(bellman_update(q, 0, 1, 1.0, 2, 0.5, 0.9) == 0.5);

  QTable frozen = make_qtable(3, 2);
  frozen(1, 0) = 4.0;
  const QTable before = frozen;
  bellman_update(frozen, 1, 0, 10.0, 2, 0.0, 0.9);
  CHECK(frozen == before);

  // At the fixed point the update is exactly zero.
  QTable fp = make_qtable(2, 2);
  fp(1, 0) = 2.0;
  fp(1, 1) = 1.0;
  fp(0, 0) = 0.5 + 0.5 * 2.0;
  bellman_update(fp, 0, 0, 0.5, 1, 0.3, 0.5);
  CHECK(fp(0, 0) == 1.5);

  QTable term = make_qtable(2, 2);
  term(1, 0) = 100.0;
  CHECK(bellman_update(term, 0, 0, 2.0, 1, 1.0, 0.9, true) == 2.0);
}

TEST_CASE("epsilon schedule") {
  EpsilonSchedule e;
  CHECK(e.at(0) == 1.0);
  CHECK(e.at(1) == doctest::Approx(0.995));
  double prev = 2.0;
  for (int i = 0; i < 5000; ++i) {
    const double v = e.at(i);
    REQUIRE(v <= prev);
    REQUIRE(v >= 0.05);
    prev = v;
  }
  CHECK(e.at(5000) == 0.05);
}

TEST_CASE("chain fixture: learned values match value iteration") {
  const QTable exact = chain_value_iteration(0.9);
  CHECK(exact(0, 0) == doctest::Approx(8.1).epsilon(1e-12));
  CHECK(exact(0, 1) == doctest::Approx(9.0).epsilon(1e-12));
  CHECK(exact(1, 0) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(exact(1, 1) == doctest::Approx(9.6).epsilon(1e-12));

  const auto vi = oracle::value_iteration({{0, 1}, {1, 0}}, {{0.0, 0.0}, {1.0, 1.5}}, 0.9);
  for (int s = 0; s < 2; ++s)
    for (int a = 0; a < 2; ++a) CHECK(exact(s, a) == doctest::Approx(vi[s][a]).epsilon(1e-12));

  ChainMdp env;
  LearnConfig cfg;
  cfg.alpha = 0.1;
  cfg.gamma = 0.9;
  cfg.epsilon = {1.0, 1.0, 1.0};  // uniform exploration keeps visiting every pair
  cfg.episodes = 100;
  cfg.horizon = 100;
  std::mt19937_64 rng(4);
  const TabularResult r = train_tabular(env, cfg, rng);
  const QTable& q = r.tables.front();
  CHECK((q - exact).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(greedy_action(q, 0) == 1);
  CHECK(greedy_action(q, 1) == 0);

  // Bounded rewards keep every entry below R_max / (1 - gamma).
  CHECK(q.cwiseAbs().maxCoeff() <= 1.5 / (1 - 0.9) + 1e-9);
}

TEST_CASE("q-values stay bounded during training") {
  ChainMdp env;
  LearnConfig cfg;
  cfg.gamma = 0.95;
  cfg.episodes = 200;
  cfg.horizon = 50;
  std::mt19937_64 rng(7);
  const double bound = 1.5 / (1 - cfg.gamma);
  const TabularResult r = train_tabular(env, cfg, rng);
  CHECK(r.tables.front().maxCoeff() <= bound);
  CHECK(r.tables.front().minCoeff() >= 0.0);
}

TEST_CASE("gamma zero learns the mean immediate reward") {
  NoisyBandit env;
  LearnConfig cfg;
  cfg.gamma = 0.0;
  cfg.alpha = 0.002;
  cfg.epsilon = {1.0, 1.0, 1.0};
  cfg.episodes = 40;
  cfg.horizon = 5000;
  std::mt19937_64 rng(3);
  const TabularResult r = train_tabular(env, cfg, rng);
  const QTable& q = r.tables.front();
  for (int s = 0; s < 2; ++s)
    for (int a = 0; a < 2; ++a) CHECK(q(s, a) == doctest::Approx(NoisyBandit::kMean[s * 2 + a]).epsilon(0.05).scale(1));
}

TEST_CASE("training is deterministic per seed") {
  auto curve = [](std::uint64_t seed) {
    EnvConfig cfg;
    cfg.road.num_avs = 6;
    VehicularEnv env(cfg, seed);
    LearnConfig lc;
    lc.episodes = 4;
    lc.horizon = 60;
    std::mt19937_64 rng(seed);
    const TabularResult r = train_tabular(env, lc, rng);
    std::vector<double> out;
    for (const EpisodeLog& e : r.episodes) out.push_back(e.mean_return);
    return std::make_pair(out, r.tables.front());
  };
  const auto a = curve(5), b = curve(5), c = curve(6);
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  CHECK(a.first != c.first);
}

TEST_CASE("independent tables") {
  EnvConfig cfg;
  cfg.road.num_avs = 3;
  VehicularEnv env(cfg, 1);
  LearnConfig lc;
  lc.shared_table = false;
  lc.episodes = 2;
  lc.horizon = 30;
  std::mt19937_64 rng(1);
  const TabularResult r = train_tabular(env, lc, rng);
  CHECK(r.tables.size() == 3u);
  CHECK(&r.table_for(2) == &r.tables[2]);
}

TEST_CASE("non-finite rewards abort training") {
  EnvConfig cfg;
  cfg.road.num_avs = 2;
  cfg.weights.w6 = std::numeric_limits<double>::infinity();
  CHECK_THROWS(VehicularEnv(cfg, 1));
  CHECK_THROWS_AS(check_finite_reward(std::nan("")), std::runtime_error);
}

TEST_CASE("q-table artifact round-trip") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 100.0);
  QTable q = make_qtable(kStateCount, kActionCount);
  for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = n(rng);
  q(0, 0) = 1.0 / 3.0;
  const auto path = temp_path("roundtrip.qtable");
  save_qtable(path, q, 0xDEADBEEFCAFEF00DULL);
  std::uint64_t hash = 0;
  const QTable back = load_qtable(path, &hash);
  CHECK(hash == 0xDEADBEEFCAFEF00DULL);
  CHECK(back == q);

  std::ofstream(path) << "not a table\n";
  CHECK_THROWS(load_qtable(path));
  std::filesystem::remove(path);
  CHECK_THROWS(load_qtable(path));
}
