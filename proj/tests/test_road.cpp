#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "vnet/road.hpp"

using namespace vnet;

namespace {

World two_car_world(double x0, double x1, Lane l0, Lane l1, double v0 = 20, double v1 = 20) {
  RoadConfig c;
  c.num_avs = 2;
  c.n_rbs = c.n_tbs = 0;
  World w;
  w.config = c;
  for (int i = 0; i < 2; ++i) {
    VehicleState v;
    v.id = i;
    v.x_m = i ? x1 : x0;
    v.lane = i ? l1 : l0;
    v.y_m = v.lane == Lane::Left ? c.lane_width_m : 0.0;
    v.v_x_mps = v.target_v_mps = i ? v1 : v0;
    w.vehicles.push_back(v);
  }
  return w;
}

double min_ring_gap(const World& w, Lane lane) {
  double best = 1e18;
  for (const auto& a : w.vehicles)
    for (const auto& b : w.vehicles)
      if (a.id != b.id && a.lane == lane && b.lane == lane)
        best = std::min(best, ring_forward(a.x_m, b.x_m, w.config.corridor_len_m));
  return best;
}

}  // namespace

TEST_CASE("uniform layout partitions the corridor") {
  RoadConfig c;
  c.corridor_len_m = 1000;
  c.n_tbs = 10;
  c.num_avs = 3;
  std::mt19937_64 rng(1);
  const World w = deploy(c, rng);
  REQUIRE(w.stations.size() == 14u);
  for (int i = 0; i < 4; ++i) CHECK(w.stations[static_cast<std::size_t>(i)].kind == BsKind::Rbs);
  for (int i = 0; i < 10; ++i) {
    const BaseStation& bs = w.stations[static_cast<std::size_t>(4 + i)];
    CHECK(bs.kind == BsKind::Tbs);
    CHECK(bs.id == 4 + i);
    CHECK(bs.x_m == doctest::Approx(50 + 100 * i));
    CHECK(bs.quota == 5);
    CHECK(bs.bandwidth_hz == 5e8);
  }
}

TEST_CASE("spawned vehicles keep gap d_f and start at the desired speed") {
  for (int m : {2, 15, 40, 41, 70}) {
    RoadConfig c;
    c.num_avs = m;
    std::mt19937_64 rng(static_cast<unsigned>(m));
    const World w = deploy(c, rng);
    REQUIRE(w.vehicles.size() == static_cast<std::size_t>(m));
    CHECK(min_ring_gap(w, Lane::Right) >= c.d_max_safety_m - 1e-9);
    CHECK(min_ring_gap(w, Lane::Left) >= c.d_max_safety_m - 1e-9);
    for (const auto& v : w.vehicles) CHECK(v.v_x_mps == c.v_desired_mps);
    if (m <= 40)
      for (const auto& v : w.vehicles) CHECK(v.lane == Lane::Right);
  }
  RoadConfig too_many;
  too_many.num_avs = 81;
  std::mt19937_64 rng(0);
  CHECK_THROWS_AS(deploy(too_many, rng), ContractViolation);
}

TEST_CASE("seeded random layout is reproducible") {
  RoadConfig c;
  c.bs_layout = BsLayout::SeededRandom;
  std::mt19937_64 a(99), b(99);
  const World wa = deploy(c, a), wb = deploy(c, b);
  for (std::size_t i = 0; i < wa.stations.size(); ++i) CHECK(wa.stations[i].x_m == wb.stations[i].x_m);
  for (std::size_t i = 0; i < wa.vehicles.size(); ++i) CHECK(wa.vehicles[i].x_m == wb.vehicles[i].x_m);
}

TEST_CASE("driving actions set accelerations") {
  RoadConfig c;
  VehicleState v;
  v.v_x_mps = 20;
  CHECK(apply_driving_action(v, Driving::Maintain, c).a_x_mps2 == 0.0);
  CHECK(apply_driving_action(v, Driving::HardAccel, c).a_x_mps2 == 4.0);
  CHECK(apply_driving_action(v, Driving::MildAccel, c).a_x_mps2 == 1.5);
  CHECK(apply_driving_action(v, Driving::MildDecel, c).a_x_mps2 == -1.5);
  CHECK(apply_driving_action(v, Driving::HardDecel, c).a_x_mps2 == -4.0);
  CHECK(apply_driving_action(v, Driving::Stop, c).a_x_mps2 == doctest::Approx(-34.0));
  CHECK(apply_driving_action(v, Driving::HardDecel, c).target_v_mps == 18.0);

  const VehicleState s = apply_driving_action(v, Driving::LaneSwitch, c);
  CHECK(s.v_y_mps == 1.5);
  CHECK(s.a_x_mps2 == 0.0);
  CHECK(s.switch_dir == +1);
  const VehicleState again = apply_driving_action(s, Driving::LaneSwitch, c);
  CHECK(again.ignored_switches == 1);
  CHECK(again.switch_dir == +1);
}

TEST_CASE("acceleration never carries speed past the limit") {
  RoadConfig c;
  c.v_desired_mps = 30;
  VehicleState v;
  v.v_x_mps = 29;
  World w;
  w.config = c;
  w.vehicles = {v};
  for (int i = 0; i < 20; ++i) {
    w.vehicles[0] = apply_driving_action(w.vehicles[0], Driving::HardAccel, c);
    step_kinematics(w, c.dt_s);
    CHECK(w.vehicles[0].v_x_mps <= 30.0 + 1e-12);
  }
  c.speed_limit_mps = 45;
  CHECK(c.speed_limit() == 45);
}

TEST_CASE("speed change holds the acceleration until the target is within one step") {
  RoadConfig c;
  World w;
  w.config = c;
  VehicleState v;
  v.v_x_mps = 10;
  w.vehicles = {apply_driving_action(v, Driving::MildAccel, c)};  // target 12, 0.75 per step
  step_kinematics(w, c.dt_s);
  CHECK(w.vehicles[0].v_x_mps == doctest::Approx(10.75));
  step_kinematics(w, c.dt_s);
  CHECK(w.vehicles[0].v_x_mps == doctest::Approx(11.5));
  step_kinematics(w, c.dt_s);  // 0.5 left < 0.75: acceleration zeroed
  CHECK(w.vehicles[0].v_x_mps == doctest::Approx(11.5));
  CHECK(w.vehicles[0].a_x_mps2 == 0.0);
}

TEST_CASE("euler integration, clamping and wrap") {
  RoadConfig c;
  World w;
  w.config = c;
  VehicleState v;
  v.x_m = 100;
  v.v_x_mps = 12;
  w.vehicles = {v};
  step_kinematics(w, 0.5);
  CHECK(w.vehicles[0].x_m == doctest::Approx(106));

  w.vehicles[0].v_x_mps = 1;
  w.vehicles[0].a_x_mps2 = -4;
  w.vehicles[0].target_v_mps = -10;  // unreachable target: the rest clamp must catch it
  step_kinematics(w, 1.0);
  CHECK(w.vehicles[0].v_x_mps == 0.0);

  w.vehicles[0].x_m = c.corridor_len_m - 1;
  w.vehicles[0].v_x_mps = 4;
  w.vehicles[0].a_x_mps2 = 0;
  step_kinematics(w, 0.5);
  CHECK(w.vehicles[0].x_m == doctest::Approx(1.0));
}

TEST_CASE("stop brings the vehicle to rest within the step") {
  RoadConfig c;
  World w;
  w.config = c;
  VehicleState v;
  v.x_m = 0;
  v.v_x_mps = 20;
  w.vehicles = {apply_driving_action(v, Driving::Stop, c)};
  step_kinematics(w, c.dt_s);
  CHECK(w.vehicles[0].v_x_mps == 0.0);
  CHECK(w.vehicles[0].x_m == doctest::Approx(20 * 0.5 - 0.5 * 34 * 0.25));
}

TEST_CASE("lane switch timing and reported lane") {
  RoadConfig c;
  World w;
  w.config = c;
  VehicleState v;
  v.v_x_mps = 20;
  w.vehicles = {apply_driving_action(v, Driving::LaneSwitch, c)};
  const int expected = static_cast<int>(std::ceil(c.lane_width_m / (c.lateral_speed_mps * c.dt_s)));
  int steps = 0;
  while (w.vehicles[0].mid_switch()) {
    step_kinematics(w, c.dt_s);
    ++steps;
    const bool past_mid = w.vehicles[0].y_m >= 0.5 * c.lane_width_m;
    CHECK(w.vehicles[0].lane == (past_mid ? Lane::Left : Lane::Right));
    w.vehicles[0] = apply_driving_action(w.vehicles[0], Driving::Maintain, c);
    REQUIRE(steps <= 100);
  }
  CHECK(steps == expected);
  CHECK(w.vehicles[0].lane == Lane::Left);
  CHECK(w.vehicles[0].y_m == c.lane_width_m);
}

TEST_CASE("neighbour queries") {
  World same = two_car_world(100, 130, Lane::Right, Lane::Right);
  Neighborhood n = neighbors(same, 0);
  CHECK(n.front_current.gap_m == doctest::Approx(30));
  CHECK(n.front_current.rel_v_mps == 0.0);
  CHECK(n.front_adjacent.gap_m == kNoNeighbor);
  CHECK(n.rear_adjacent.gap_m == kNoNeighbor);
  CHECK(n.front_adjacent.rel_v_mps == 0.0);

  World slower = two_car_world(100, 130, Lane::Right, Lane::Right, 25, 20);
  CHECK(neighbors(slower, 0).front_current.rel_v_mps < 0);

  // Ring: the car at 1990 sees the one at 10 twenty metres ahead.
  World ring = two_car_world(1990, 10, Lane::Right, Lane::Right);
  CHECK(neighbors(ring, 0).front_current.gap_m == doctest::Approx(20));

  // Adjacent lane: a faster car behind is approaching (negative).
  World adj = two_car_world(100, 80, Lane::Right, Lane::Left, 20, 25);
  n = neighbors(adj, 0);
  CHECK(n.rear_adjacent.gap_m == doctest::Approx(20));
  CHECK(n.rear_adjacent.rel_v_mps < 0);
  CHECK(n.front_current.gap_m == kNoNeighbor);
}

TEST_CASE("collision detection") {
  World touching = two_car_world(100, 100, Lane::Right, Lane::Right);
  CHECK(detect_collisions(touching) == std::vector<int>{0, 1});
  CHECK(touching.vehicles[0].collided);

  World apart = two_car_world(100, 200, Lane::Right, Lane::Right);
  CHECK(detect_collisions(apart).empty());

  World lanes = two_car_world(100, 100, Lane::Right, Lane::Left);
  CHECK(detect_collisions(lanes).empty());

  // One step into a lane change, 2 m behind a car in the target lane.
  World merge = two_car_world(100, 102, Lane::Right, Lane::Left);
  merge.vehicles[0] = apply_driving_action(merge.vehicles[0], Driving::LaneSwitch, merge.config);
  merge.vehicles[0].y_m = 0.75;
  const double dy = std::abs(merge.vehicles[0].y_m - merge.vehicles[1].y_m);
  const bool oracle_overlap = 2.0 <= merge.config.vehicle_length_m && dy < merge.config.lateral_envelope_m;
  CHECK(oracle_overlap);
  CHECK(detect_collisions(merge).size() == 2u);
}

TEST_CASE("wrecks re-enter after the respawn delay") {
  World w = two_car_world(100, 102, Lane::Right, Lane::Right);
  w.config.respawn_steps = 3;
  detect_collisions(w);
  for (int i = 0; i < 2; ++i) {
    respawn_wrecks(w);
    CHECK(w.vehicles[0].collided);
  }
  respawn_wrecks(w);
  CHECK_FALSE(w.vehicles[0].collided);
  CHECK(w.vehicles[0].v_x_mps == w.config.v_desired_mps);
}

TEST_CASE("random driving keeps the world invariants and is reproducible") {
  RoadConfig c;
  c.num_avs = 30;
  auto run = [&](std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    World w = deploy(c, rng);
    std::uniform_int_distribution<int> pick(0, kDrivingCount - 1);
    std::ostringstream trace;
    for (int t = 0; t < 400; ++t) {
      for (auto& v : w.vehicles)
        v = apply_driving_action(v, v.collided ? Driving::Stop : static_cast<Driving>(pick(rng)), c);
      step_kinematics(w, c.dt_s);
      for (const auto& v : w.vehicles) {
        REQUIRE(v.v_x_mps >= 0.0);
        REQUIRE(v.x_m >= 0.0);
        REQUIRE(v.x_m < c.corridor_len_m);
        REQUIRE((v.lane == Lane::Left) == (v.y_m >= 0.5 * c.lane_width_m));
      }
      // No collision is ever reported for a settled cross-lane pair.
      for (const auto& a : w.vehicles)
        for (const auto& b : w.vehicles) {
          if (a.id >= b.id || a.lane == b.lane || a.mid_switch() || b.mid_switch()) continue;
          World pair;
          pair.config = c;
          pair.vehicles = {a, b};
          pair.vehicles[0].id = 0;
          pair.vehicles[1].id = 1;
          pair.vehicles[0].collided = pair.vehicles[1].collided = false;
          REQUIRE(detect_collisions(pair).empty());
        }
      detect_collisions(w);
      respawn_wrecks(w);
      write_trace(trace, w);
    }
    return trace.str();
  };
  CHECK(run(5) == run(5));
  CHECK(run(5) != run(6));
}
