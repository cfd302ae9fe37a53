#include "vnet/road.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "vnet/channel.hpp"

namespace vnet {

std::string_view to_string(Driving d) {
  switch (d) {
    case Driving::HardAccel: return "hard_accel";
    case Driving::MildAccel: return "mild_accel";
    case Driving::Maintain: return "maintain";
    case Driving::MildDecel: return "mild_decel";
    case Driving::HardDecel: return "hard_decel";
    case Driving::LaneSwitch: return "lane_switch";
    case Driving::Stop: return "stop";
  }
  return "?";
}

std::string_view to_string(BsKind k) { return k == BsKind::Rbs ? "rbs" : "tbs"; }

void RoadConfig::validate() const {
  if (!(corridor_len_m > 0)) throw ContractViolation("corridor_len_m must be > 0");
  if (!(lane_width_m > 0)) throw ContractViolation("lane_width_m must be > 0");
  if (!(dt_s > 0)) throw ContractViolation("dt_s must be > 0");
  if (!(d_min_safety_m > 0 && d_min_safety_m < d_max_safety_m))
    throw ContractViolation("safety distances must satisfy 0 < d_c < d_f");
  if (num_avs < 1) throw ContractViolation("num_avs must be >= 1");
  if (n_rbs < 0 || n_tbs < 0) throw ContractViolation("base-station counts must be >= 0");
  if (rbs_quota < 1 || tbs_quota < 1) throw ContractViolation("quotas must be >= 1");
  if (!(v_desired_mps >= 0 && v_at_mps > 0)) throw ContractViolation("invalid speed settings");
  if (!(speed_limit_mps >= 0)) throw ContractViolation("speed_limit_mps must be >= 0");
  if (!(vehicle_length_m > 0 && lateral_envelope_m > 0 && lateral_speed_mps > 0))
    throw ContractViolation("invalid vehicle geometry");
  if (lateral_envelope_m >= lane_width_m)
    throw ContractViolation("lateral envelope must be narrower than a lane");
  if (respawn_steps < 1) throw ContractViolation("respawn_steps must be >= 1");
  const auto per_lane = static_cast<long>(std::floor(corridor_len_m / d_max_safety_m));
  if (num_avs > 2 * per_lane) throw ContractViolation("corridor too short to spawn num_avs at gap d_f");
}

double ring_forward(double from, double to, double len) {
  double d = std::fmod(to - from, len);
  if (d < 0) d += len;
  if (d >= len) d = 0;
  return d;
}

namespace {

double wrap(double x, double len) {
  double w = std::fmod(x, len);
  if (w < 0) w += len;
  if (w >= len) w = 0;
  return w;
}

void place_tier(std::vector<BaseStation>& out, int count, BsKind kind, const RoadConfig& c,
                std::mt19937_64& rng) {
  if (count == 0) return;
  const double spacing = c.corridor_len_m / count;
  std::uniform_real_distribution<double> jitter(-0.4 * spacing, 0.4 * spacing);
  const bool rbs = kind == BsKind::Rbs;
  for (int i = 0; i < count; ++i) {
    BaseStation bs;
    bs.id = static_cast<int>(out.size());
    bs.kind = kind;
    bs.x_m = (i + 0.5) * spacing;
    if (c.bs_layout == BsLayout::SeededRandom) bs.x_m = wrap(bs.x_m + jitter(rng), c.corridor_len_m);
    bs.y_m = -(rbs ? c.rbs_offset_m : c.tbs_offset_m);
    bs.bandwidth_hz = rbs ? c.rbs_bandwidth_hz : c.tbs_bandwidth_hz;
    bs.quota = rbs ? c.rbs_quota : c.tbs_quota;
    out.push_back(bs);
  }
}

void spawn_lane(std::vector<VehicleState>& out, int count, Lane lane, const RoadConfig& c,
                std::mt19937_64& rng) {
  if (count == 0) return;
  const double spacing = c.corridor_len_m / count;
  const double slack = std::max(0.0, (spacing - c.d_max_safety_m) / 2.0);
  std::uniform_real_distribution<double> base(0.0, c.corridor_len_m);
  std::uniform_real_distribution<double> jitter(-slack, slack);
  const double origin = base(rng);
  for (int i = 0; i < count; ++i) {
    VehicleState v;
    v.id = static_cast<int>(out.size());
    v.x_m = wrap(origin + i * spacing + jitter(rng), c.corridor_len_m);
    v.lane = lane;
    v.y_m = lane == Lane::Left ? c.lane_width_m : 0.0;
    v.v_x_mps = c.v_desired_mps;
    v.target_v_mps = c.v_desired_mps;
    out.push_back(v);
  }
}

}  // namespace

World deploy(const RoadConfig& config, std::mt19937_64& rng) {
  config.validate();
  World w;
  w.config = config;
  place_tier(w.stations, config.n_rbs, BsKind::Rbs, config, rng);
  place_tier(w.stations, config.n_tbs, BsKind::Tbs, config, rng);

  const auto per_lane = static_cast<int>(std::floor(config.corridor_len_m / config.d_max_safety_m));
  if (config.num_avs <= per_lane) {
    spawn_lane(w.vehicles, config.num_avs, Lane::Right, config, rng);
  } else {
    const int right = (config.num_avs + 1) / 2;
    spawn_lane(w.vehicles, right, Lane::Right, config, rng);
    spawn_lane(w.vehicles, config.num_avs - right, Lane::Left, config, rng);
  }
  return w;
}

VehicleState apply_driving_action(VehicleState v, Driving action, const RoadConfig& config) {
  if (action == Driving::LaneSwitch && v.mid_switch()) {
    ++v.ignored_switches;
    action = Driving::Maintain;
  }
  v.stopping = false;
  if (action != Driving::Stop && v.mid_switch()) v.v_y_mps = config.lateral_speed_mps;

  auto speed_change = [&](double accel) {
    v.a_x_mps2 = accel;
    v.target_v_mps = accel > 0 ? std::min(v.v_x_mps + config.v_at_mps, std::max(v.v_x_mps, config.speed_limit()))
                                : std::max(0.0, v.v_x_mps - config.v_at_mps);
  };
  switch (action) {
    case Driving::HardAccel: speed_change(4.0); break;
    case Driving::MildAccel: speed_change(1.5); break;
    case Driving::MildDecel: speed_change(-1.5); break;
    case Driving::HardDecel: speed_change(-4.0); break;
    case Driving::Maintain:
      v.a_x_mps2 = 0.0;
      v.target_v_mps = v.v_x_mps;
      break;
    case Driving::LaneSwitch:
      v.a_x_mps2 = 0.0;
      v.target_v_mps = v.v_x_mps;
      v.switch_dir = v.lane == Lane::Right ? +1 : -1;
      v.v_y_mps = config.lateral_speed_mps;
      break;
    case Driving::Stop:
      v.a_x_mps2 = -0.85 * v.v_x_mps / config.dt_s;
      v.target_v_mps = 0.0;
      v.v_y_mps = 0.0;
      v.stopping = true;
      break;
  }
  return v;
}

void step_kinematics(World& world, double dt) {
  const RoadConfig& c = world.config;
  for (VehicleState& v : world.vehicles) {
    if (v.stopping) {
      v.x_m += v.v_x_mps * dt + 0.5 * v.a_x_mps2 * dt * dt;
      v.v_x_mps = 0.0;
    } else {
      if (v.a_x_mps2 != 0.0 && std::abs(v.target_v_mps - v.v_x_mps) < std::abs(v.a_x_mps2) * dt)
        v.a_x_mps2 = 0.0;
      const double a = v.a_x_mps2;
      const double v_next = v.v_x_mps + a * dt;
      if (v_next < 0.0) {
        // Comes to rest inside the step.
        v.x_m += 0.5 * v.v_x_mps * (v.v_x_mps / -a);
        v.v_x_mps = 0.0;
      } else {
        v.x_m += v.v_x_mps * dt + 0.5 * a * dt * dt;
        v.v_x_mps = v_next;
      }
    }
    v.x_m = wrap(v.x_m, c.corridor_len_m);

    if (v.mid_switch() && v.v_y_mps > 0.0) {
      const double target = v.switch_dir > 0 ? c.lane_width_m : 0.0;
      v.y_m += v.switch_dir * v.v_y_mps * dt;
      if ((v.switch_dir > 0 && v.y_m >= target) || (v.switch_dir < 0 && v.y_m <= target)) {
        v.y_m = target;
        v.v_y_mps = 0.0;
        v.switch_dir = 0;
      }
    }
    v.lane = v.y_m >= 0.5 * c.lane_width_m ? Lane::Left : Lane::Right;
  }
  ++world.step;
}

double lateral_position(const VehicleState& v, const RoadConfig& config) {
  return 0.5 * config.lane_width_m + v.y_m;
}

Neighborhood neighbors(const World& world, int av_id) {
  const VehicleState& self = world.vehicles.at(static_cast<std::size_t>(av_id));
  const double len = world.config.corridor_len_m;
  Neighborhood n;
  for (const VehicleState& o : world.vehicles) {
    if (o.id == self.id) continue;
    const double fwd = ring_forward(self.x_m, o.x_m, len);
    if (o.lane == self.lane) {
      if (fwd < n.front_current.gap_m) n.front_current = {fwd, o.v_x_mps - self.v_x_mps};
    } else {
      if (fwd < n.front_adjacent.gap_m) n.front_adjacent = {fwd, o.v_x_mps - self.v_x_mps};
      const double back = ring_forward(o.x_m, self.x_m, len);
      if (back < n.rear_adjacent.gap_m) n.rear_adjacent = {back, self.v_x_mps - o.v_x_mps};
    }
  }
  return n;
}

std::vector<int> detect_collisions(World& world) {
  const RoadConfig& c = world.config;
  auto& vs = world.vehicles;
  std::vector<bool> hit(vs.size(), false);
  for (std::size_t i = 0; i < vs.size(); ++i) {
    for (std::size_t j = i + 1; j < vs.size(); ++j) {
      if (vs[i].collided && vs[j].collided) continue;
      const double fwd = ring_forward(vs[i].x_m, vs[j].x_m, c.corridor_len_m);
      const double gap = std::min(fwd, c.corridor_len_m - fwd);
      if (gap > c.vehicle_length_m) continue;
      if (std::abs(vs[i].y_m - vs[j].y_m) >= c.lateral_envelope_m) continue;
      if (!vs[i].collided) hit[i] = true;
      if (!vs[j].collided) hit[j] = true;
    }
  }
  std::vector<int> out;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    if (!hit[i]) continue;
    vs[i].collided = true;
    vs[i].respawn_countdown = c.respawn_steps;
    out.push_back(vs[i].id);
  }
  return out;
}

namespace {

// Midpoint of the widest gap in `lane`, ignoring vehicle `skip`.
std::pair<double, double> widest_gap(const World& world, Lane lane, int skip) {
  std::vector<double> xs;
  for (const VehicleState& o : world.vehicles)
    if (o.id != skip && o.lane == lane && !o.mid_switch()) xs.push_back(o.x_m);
  const double len = world.config.corridor_len_m;
  if (xs.empty()) return std::pair{0.5 * len, len};
  std::sort(xs.begin(), xs.end());
  double best_gap = -1.0, best_mid = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double next = i + 1 < xs.size() ? xs[i + 1] : xs.front() + len;
    const double gap = next - xs[i];
    if (gap > best_gap) {
      best_gap = gap;
      best_mid = wrap(xs[i] + 0.5 * gap, len);
    }
  }
  return std::pair{best_mid, best_gap};
}

}  // namespace

void respawn_wrecks(World& world) {
  const RoadConfig& c = world.config;
  for (VehicleState& v : world.vehicles) {
    if (!v.collided) continue;
    if (--v.respawn_countdown > 0) continue;
    const int id = v.id;
    const auto right = widest_gap(world, Lane::Right, id);
    const auto left = widest_gap(world, Lane::Left, id);
    const bool use_left = left.second > right.second;
    VehicleState fresh;
    fresh.id = id;
    fresh.x_m = use_left ? left.first : right.first;
    fresh.lane = use_left ? Lane::Left : Lane::Right;
    fresh.y_m = use_left ? c.lane_width_m : 0.0;
    fresh.v_x_mps = c.v_desired_mps;
    fresh.target_v_mps = c.v_desired_mps;
    fresh.ignored_switches = v.ignored_switches;
    v = fresh;
  }
}

void write_trace(std::ostream& os, const World& world) {
  for (const VehicleState& v : world.vehicles) {
    os << world.step << ',' << v.id << ',' << v.x_m << ',' << (v.lane == Lane::Left ? 1 : 0) << ','
       << v.v_x_mps << ',' << v.a_x_mps2 << ',' << (v.serving_bs ? *v.serving_bs : -1) << '\n';
  }
}

}  // namespace vnet
