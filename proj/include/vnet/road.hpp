// Two-lane ring corridor: base-station layout, point-mass vehicle motion under
// the seven driving actions, neighbour queries and collision detection.
#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include "vnet/errors.hpp"

namespace vnet {

enum class BsKind : std::uint8_t { Rbs, Tbs };
enum class Lane : std::uint8_t { Right = 0, Left = 1 };
enum class BsLayout : std::uint8_t { Uniform, SeededRandom };

enum class Driving : std::uint8_t {
  HardAccel,
  MildAccel,
  Maintain,
  MildDecel,
  HardDecel,
  LaneSwitch,
  Stop,
};
inline constexpr int kDrivingCount = 7;

std::string_view to_string(Driving d);
std::string_view to_string(BsKind k);

struct RoadConfig {
  double corridor_len_m = 2000.0;
  double lane_width_m = 3.5;
  double dt_s = 0.5;
  int n_rbs = 4;
  int n_tbs = 10;
  BsLayout bs_layout = BsLayout::Uniform;
  double rbs_offset_m = 10.0;  // lateral distance from the right road edge
  double tbs_offset_m = 5.0;
  double d_min_safety_m = 15.0;  // d_c
  double d_max_safety_m = 50.0;  // d_f
  double v_desired_mps = 30.0;
  double v_at_mps = 2.0;
  double speed_limit_mps = 0.0;  // 0: the desired velocity is also the speed limit
  int num_avs = 15;
  double vehicle_length_m = 5.0;
  double lateral_envelope_m = 3.0;
  double lateral_speed_mps = 1.5;
  int respawn_steps = 10;
  double rbs_bandwidth_hz = 4e7;
  double tbs_bandwidth_hz = 5e8;
  int rbs_quota = 2;
  int tbs_quota = 5;

  double speed_limit() const { return speed_limit_mps > 0 ? speed_limit_mps : v_desired_mps; }

  /// Throws ContractViolation on inconsistent settings.
  void validate() const;
};

struct BaseStation {
  int id = 0;
  BsKind kind = BsKind::Rbs;
  double x_m = 0.0;
  double y_m = 0.0;
  double bandwidth_hz = 0.0;
  int quota = 1;
  int candidate_load = 0;  // n_s: AVs listing this BS in their top three
  int associated = 0;
};

struct VehicleState {
  int id = 0;
  double x_m = 0.0;
  double y_m = 0.0;  // lateral offset from the right lane centre, in [0, lane_width]
  Lane lane = Lane::Right;
  double v_x_mps = 0.0;
  double a_x_mps2 = 0.0;
  double v_y_mps = 0.0;
  double target_v_mps = 0.0;
  int switch_dir = 0;  // +1 towards the left lane, -1 towards the right, 0 idle
  bool stopping = false;
  std::optional<int> serving_bs;
  bool collided = false;
  int respawn_countdown = 0;
  int ignored_switches = 0;

  bool mid_switch() const { return switch_dir != 0; }
};

struct World {
  RoadConfig config;
  std::vector<BaseStation> stations;
  std::vector<VehicleState> vehicles;
  long step = 0;
};

inline constexpr double kNoNeighbor = std::numeric_limits<double>::infinity();

struct NeighborInfo {
  double gap_m = kNoNeighbor;
  double rel_v_mps = 0.0;  // < 0 approaching, > 0 separating
};

struct Neighborhood {
  NeighborInfo front_current;
  NeighborInfo front_adjacent;
  NeighborInfo rear_adjacent;
};

/// Lays out base stations and spawns the vehicles.
World deploy(const RoadConfig& config, std::mt19937_64& rng);

VehicleState apply_driving_action(VehicleState v, Driving action, const RoadConfig& config);

/// Euler step of every vehicle that is not a wreck.
void step_kinematics(World& world, double dt);

/// Forward arc from `from` to `to` on a ring of length `len`, in [0, len).
double ring_forward(double from, double to, double len);

/// Absolute lateral coordinate of a vehicle (road edge at 0).
double lateral_position(const VehicleState& v, const RoadConfig& config);

Neighborhood neighbors(const World& world, int av_id);

/// Flags newly colliding vehicles and returns their ids in ascending order.
std::vector<int> detect_collisions(World& world);

/// Counts down wreck timers and re-enters expired wrecks at the widest gap.
void respawn_wrecks(World& world);

/// One line per vehicle: t,id,x,lane,v_x,a_x,serving_bs
void write_trace(std::ostream& os, const World& world);
inline constexpr std::string_view kTraceHeader = "t,id,x,lane,v_x,a_x,serving_bs";

}  // namespace vnet
