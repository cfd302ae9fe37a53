#include "vnet/env.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace vnet {

std::string_view to_string(Telecom t) {
  switch (t) {
    case Telecom::HandoffAware: return "handoff_aware";
    case Telecom::NoHandoffPenalty: return "no_handoff_penalty";
    case Telecom::MaxRate: return "max_rate";
  }
  return "?";
}

ActionPair ActionPair::from_index(int index) {
  if (index < 0 || index >= kActionCount) throw std::out_of_range("joint action index out of range");
  return {static_cast<Driving>(index / kTelecomCount), static_cast<Telecom>(index % kTelecomCount)};
}

int DiscreteState::index() const {
  int idx = 0;
  for (DistanceBand d : distance) idx = idx * 3 + static_cast<int>(d);
  for (VelocityBand v : velocity) idx = idx * 3 + static_cast<int>(v);
  idx = idx * 3 + connectivity;
  return idx * 2 + static_cast<int>(lane);
}

DiscreteState DiscreteState::from_index(int index) {
  if (index < 0 || index >= kStateCount) throw std::out_of_range("state index out of range");
  DiscreteState s;
  s.lane = static_cast<Lane>(index % 2);
  index /= 2;
  s.connectivity = static_cast<std::uint8_t>(index % 3);
  index /= 3;
  for (int i = 2; i >= 0; --i) {
    s.velocity[static_cast<std::size_t>(i)] = static_cast<VelocityBand>(index % 3);
    index /= 3;
  }
  for (int i = 2; i >= 0; --i) {
    s.distance[static_cast<std::size_t>(i)] = static_cast<DistanceBand>(index % 3);
    index /= 3;
  }
  return s;
}

DistanceBand distance_band(double d, const DiscretizeConfig& config) {
  if (d <= config.d_close_m) return DistanceBand::Close;
  if (d <= config.d_far_m) return DistanceBand::Mid;
  return DistanceBand::Far;
}

VelocityBand velocity_band(double v, const DiscretizeConfig& config) {
  if (std::abs(v) < config.v_eps_mps) return VelocityBand::Equal;
  return v < 0 ? VelocityBand::Approaching : VelocityBand::Separating;
}

DiscreteState discretize(const Observation& obs, const DiscretizeConfig& config) {
  DiscreteState s;
  s.distance = {distance_band(obs.d_fc, config), distance_band(obs.d_ft, config), distance_band(obs.d_rt, config)};
  s.velocity = {velocity_band(obs.v_fc, config), velocity_band(obs.v_ft, config), velocity_band(obs.v_rt, config)};
  s.connectivity = obs.c_count <= 1 ? 0 : static_cast<std::uint8_t>(obs.c_count - 1);
  s.lane = obs.lane;
  return s;
}

int encoding_width(StateEncoding e) { return e == StateEncoding::Centered ? 8 : 7 * 3 + 2; }

Eigen::VectorXd encode_state(const DiscreteState& s, StateEncoding e) {
  std::array<int, 7> trits{};
  for (std::size_t i = 0; i < 3; ++i) {
    trits[i] = static_cast<int>(s.distance[i]);
    trits[i + 3] = static_cast<int>(s.velocity[i]);
  }
  trits[6] = s.connectivity;
  const int lane = static_cast<int>(s.lane);
  if (e == StateEncoding::Centered) {
    Eigen::VectorXd x(8);
    for (std::size_t i = 0; i < trits.size(); ++i) x[static_cast<Eigen::Index>(i)] = trits[i] - 1.0;
    x[7] = lane;
    return x;
  }
  Eigen::VectorXd x = Eigen::VectorXd::Zero(23);
  for (std::size_t i = 0; i < trits.size(); ++i) x[static_cast<Eigen::Index>(3 * i) + trits[i]] = 1.0;
  x[21 + lane] = 1.0;
  return x;
}

void EnvConfig::validate() const {
  road.validate();
  channel.rf.validate();
  channel.thz.validate();
  if (!(v_eps_mps > 0)) throw ContractViolation("v_eps must be > 0");
  for (double w : {weights.w1, weights.w2, weights.w3, weights.w4, weights.w5, weights.w6})
    if (!std::isfinite(w)) throw ContractViolation("reward weights must be finite");
  if (!(weights.w1 > 0)) throw ContractViolation("w1 must be > 0");
  if (!(weights.r_th_bps >= 0)) throw ContractViolation("R_th must be >= 0");
}

int count_meeting_threshold(std::span<const CandidateRate> top3, double r_th_bps) {
  return static_cast<int>(
      std::count_if(top3.begin(), top3.end(), [&](const CandidateRate& c) { return c.rate_bps >= r_th_bps; }));
}

Observation observe(const World& world, int av_id, std::span<const CandidateRate> top3, double r_th_bps) {
  const Neighborhood n = neighbors(world, av_id);
  Observation o;
  o.d_fc = n.front_current.gap_m;
  o.d_ft = n.front_adjacent.gap_m;
  o.d_rt = n.rear_adjacent.gap_m;
  o.v_fc = n.front_current.rel_v_mps;
  o.v_ft = n.front_adjacent.rel_v_mps;
  o.v_rt = n.rear_adjacent.rel_v_mps;
  o.c_count = count_meeting_threshold(top3, r_th_bps);
  o.lane = world.vehicles.at(static_cast<std::size_t>(av_id)).lane;
  return o;
}

namespace {

std::vector<double> station_distances(const World& world, int av_id) {
  const VehicleState& v = world.vehicles.at(static_cast<std::size_t>(av_id));
  const double len = world.config.corridor_len_m;
  const double y = lateral_position(v, world.config);
  std::vector<double> d(world.stations.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const BaseStation& bs = world.stations[i];
    const double fwd = ring_forward(v.x_m, bs.x_m, len);
    const double dx = std::min(fwd, len - fwd);
    d[i] = std::hypot(dx, y - bs.y_m);
  }
  return d;
}

// Sum of all entries except entry i, without cancellation.
std::vector<double> leave_one_out(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<double> prefix(n + 1, 0.0), suffix(n + 1, 0.0), out(n);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i];
  for (std::size_t i = n; i-- > 0;) suffix[i] = suffix[i + 1] + x[i];
  for (std::size_t i = 0; i < n; ++i) out[i] = prefix[i] + suffix[i + 1];
  return out;
}

TopList top_three(std::span<const double> rates) {
  std::vector<int> ids(rates.size());
  std::iota(ids.begin(), ids.end(), 0);
  const std::size_t k = std::min<std::size_t>(3, ids.size());
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(), [&](int a, int b) {
    const auto ra = rates[static_cast<std::size_t>(a)], rb = rates[static_cast<std::size_t>(b)];
    return ra != rb ? ra > rb : a < b;
  });
  TopList out;
  for (std::size_t i = 0; i < k; ++i) out.push_back({ids[i], rates[static_cast<std::size_t>(ids[i])]});
  return out;
}

}  // namespace

std::vector<double> link_rates(const World& world, int av_id, const ChannelConfig& channel, std::mt19937_64& rng) {
  const auto dist = station_distances(world, av_id);
  const auto& st = world.stations;
  std::vector<double> rates(st.size(), 0.0);

  std::vector<std::size_t> rbs, tbs;
  for (std::size_t i = 0; i < st.size(); ++i) (st[i].kind == BsKind::Rbs ? rbs : tbs).push_back(i);

  const auto& rf = channel.rf;
  const double gamma_r = rf_constant(rf);
  std::vector<double> fade(rbs.size()), rx(rbs.size());
  for (std::size_t k = 0; k < rbs.size(); ++k) {
    fade[k] = channel.fading ? sample_fading<double>(rng) : 1.0;
    rx[k] = rf.tx_power_w * gamma_r * std::pow(dist[rbs[k]], -rf.pathloss_exp) * fade[k];
  }
  const auto rf_interference = leave_one_out(rx);
  for (std::size_t k = 0; k < rbs.size(); ++k) {
    const double r = dist[rbs[k]];
    const double sinr =
        gamma_r * rf.tx_power_w * fade[k] / (std::pow(r, rf.pathloss_exp) * (rf.noise_w + rf_interference[k]));
    rates[rbs[k]] = link_rate(st[rbs[k]].bandwidth_hz, sinr);
  }

  const auto& thz = channel.thz;
  const double gamma_t = thz_constant(thz);
  const double spread = spreading_factor(thz.carrier_hz);
  // An interfering TBS contributes D (c/4 pi f)^2 P r^-2 split between the
  // absorbed (noise) and the surviving (interference) share; the two add up.
  std::vector<double> leak(tbs.size());
  for (std::size_t k = 0; k < tbs.size(); ++k) {
    const double d_k = channel.mode == InterferenceMode::SampledAlignment ? sample_alignment(thz, rng)
                                                                           : expected_alignment(thz);
    const double r = dist[tbs[k]];
    leak[k] = d_k * spread * thz.tx_power_w / (r * r);
  }
  const auto thz_leak = leave_one_out(leak);
  for (std::size_t k = 0; k < tbs.size(); ++k) {
    const double r = dist[tbs[k]];
    const double spread_loss = gamma_t * thz.tx_power_w / (r * r);
    const double num = spread_loss * std::exp(-thz.absorption_per_m * r);
    const double den = thz.thermal_noise_w + spread_loss * -std::expm1(-thz.absorption_per_m * r) + thz_leak[k];
    rates[tbs[k]] = link_rate(st[tbs[k]].bandwidth_hz, num / den);
  }
  return rates;
}

TopList rank_bs(World& world, std::span<const double> rates) {
  TopList top = top_three(rates);
  for (const CandidateRate& c : top) ++world.stations[static_cast<std::size_t>(c.bs_id)].candidate_load;
  return top;
}

double weighted_rate(double t_ij, int quota, int n_s, double mu) {
  if (n_s < 1) throw ContractViolation("weighted_rate: n_s must be >= 1");
  return t_ij / static_cast<double>(std::min(quota, n_s)) * (1.0 - mu);
}

double handoff_penalty(std::optional<int> prev_bs, int candidate_bs, BsKind candidate_kind) {
  if (!prev_bs || *prev_bs == candidate_bs) return 0.0;
  return candidate_kind == BsKind::Tbs ? 0.5 : 0.1;
}

Selection select_bs(World& world, AssociationState& assoc, SelectionRule rule, std::span<const double> rates,
                    std::span<const double> distances) {
  auto& st = world.stations;
  const std::optional<int> prev = assoc.current_bs;
  auto station = [&](int id) -> BaseStation& { return st[static_cast<std::size_t>(id)]; };
  auto load = [&](int id) { return std::max(1, station(id).candidate_load); };

  std::vector<int> order;
  if (rule == SelectionRule::NearestBs) {
    order.resize(st.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return distances[static_cast<std::size_t>(a)] < distances[static_cast<std::size_t>(b)];
    });
  } else {
    std::vector<double> metric;
    for (const CandidateRate& c : assoc.top3) {
      order.push_back(c.bs_id);
      const BaseStation& bs = station(c.bs_id);
      switch (rule) {
        case SelectionRule::HandoffAware:
          metric.push_back(weighted_rate(c.rate_bps, bs.quota, load(c.bs_id), handoff_penalty(prev, bs.id, bs.kind)));
          break;
        case SelectionRule::NoHandoffPenalty:
          metric.push_back(weighted_rate(c.rate_bps, bs.quota, load(c.bs_id), 0.0));
          break;
        default:
          metric.push_back(c.rate_bps);
          break;
      }
    }
    std::vector<std::size_t> pos(order.size());
    std::iota(pos.begin(), pos.end(), 0);
    std::stable_sort(pos.begin(), pos.end(), [&](std::size_t a, std::size_t b) { return metric[a] > metric[b]; });
    std::vector<int> sorted;
    for (std::size_t p : pos) sorted.push_back(order[p]);
    order = std::move(sorted);
  }

  std::optional<int> chosen;
  for (int id : order) {
    if (station(id).associated < station(id).quota) {
      chosen = id;
      break;
    }
  }
  if (!chosen && prev && station(*prev).associated < station(*prev).quota) chosen = prev;

  Selection sel;
  ++assoc.steps_elapsed;
  assoc.previous_bs = prev;
  if (!chosen) return sel;  // disconnected this step; keeps its previous attachment

  BaseStation& bs = station(*chosen);
  ++bs.associated;
  sel.bs = chosen;
  sel.t_ij = rates[static_cast<std::size_t>(*chosen)];
  sel.t_q = weighted_rate(sel.t_ij, bs.quota, load(*chosen), handoff_penalty(prev, bs.id, bs.kind));
  sel.handoff = prev && *prev != *chosen;
  if (sel.handoff) {
    ++assoc.handoff_count;
    sel.kind = station(*prev).kind == bs.kind ? HandoffKind::Horizontal : HandoffKind::Vertical;
  }
  assoc.current_bs = chosen;
  return sel;
}

double reward_tran(bool collided, double v_x_mps, Driving action, double front_gap_m, Lane lane,
                   const RewardWeights& w, const DiscretizeConfig& d) {
  const double c = collided ? -1.0 : 0.0;
  const double v = std::clamp(0.2 * (v_x_mps - w.v_desired_mps), -1.0, 1.0);
  double h = 0.0;
  switch (distance_band(front_gap_m, d)) {
    case DistanceBand::Close: h = -1.0; break;
    case DistanceBand::Mid: h = 0.0; break;
    case DistanceBand::Far: h = 1.0; break;
  }
  double a = 0.0;
  if (action == Driving::HardAccel || action == Driving::HardDecel) a = -3.0;
  if (action == Driving::MildAccel || action == Driving::MildDecel) a = -1.0;
  const double l = lane == Lane::Left ? -1.0 : 0.0;
  return w.w1 * c + w.w2 * v + w.w3 * h + w.w4 * a + w.w5 * l;
}

double reward_tele(double t_q, double k, const RewardWeights& w) { return w.w6 * t_q * (1.0 - std::min(1.0, k)); }

VehicularEnv::VehicularEnv(EnvConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.weights.v_desired_mps = config_.road.v_desired_mps;
  config_.validate();
  disc_ = config_.discretize_config();
  std::seed_seq world_seq{seed, std::uint64_t{0x77}};
  std::seed_seq channel_seq{seed, std::uint64_t{0xC4}};
  world_rng_.seed(world_seq);
  channel_rng_.seed(channel_seq);
  reset();
}

const std::vector<int>& VehicularEnv::reset() {
  world_ = deploy(config_.road, world_rng_);
  const auto m = world_.vehicles.size();
  assoc_.assign(m, AssociationState{});
  observations_.assign(m, Observation{});
  states_.assign(m, 0);
  metrics_ = EpisodeMetrics{};
  for (int i = 0; i < static_cast<int>(m); ++i) {
    const auto rates = link_rates(world_, i, config_.channel, channel_rng_);
    assoc_[static_cast<std::size_t>(i)].top3 = top_three(rates);
  }
  for (int i = 0; i < static_cast<int>(m); ++i) refresh_state(i);
  return states_;
}

void VehicularEnv::refresh_state(int av_id) {
  const auto i = static_cast<std::size_t>(av_id);
  observations_[i] = observe(world_, av_id, assoc_[i].top3, config_.weights.r_th_bps);
  states_[i] = discretize(observations_[i], disc_).index();
}

std::vector<bool> VehicularEnv::acting() const {
  std::vector<bool> out;
  for (const VehicleState& v : world_.vehicles) out.push_back(!v.collided);
  return out;
}

Eigen::VectorXd VehicularEnv::features(int state) const {
  return encode_state(DiscreteState::from_index(state), encoding_);
}

std::vector<AvStep> VehicularEnv::step_actions(std::span<const int> joint_actions) {
  std::vector<Command> cmds;
  cmds.reserve(joint_actions.size());
  for (int a : joint_actions) {
    const ActionPair p = ActionPair::from_index(a);
    cmds.push_back({p.driving, rule_for(p.telecom)});
  }
  return step(cmds);
}

std::vector<AvStep> VehicularEnv::step(std::span<const Command> commands) {
  auto& vs = world_.vehicles;
  const std::size_t m = vs.size();
  if (commands.size() != m) throw ContractViolation("step: one command per vehicle required");
  const RoadConfig& road = config_.road;
  const std::vector<bool> act = acting();

  std::vector<AvStep> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    out[i].av_id = static_cast<int>(i);
    out[i].acted = act[i];
    out[i].state = states_[i];
    const Driving d = act[i] ? commands[i].driving : Driving::Stop;
    if (act[i]) {
      const int tele = commands[i].rule == SelectionRule::NearestBs ? 0 : static_cast<int>(commands[i].rule);
      out[i].action = ActionPair{d, static_cast<Telecom>(tele)}.index();
    }
    vs[i] = apply_driving_action(vs[i], d, road);
  }

  step_kinematics(world_, road.dt_s);

  for (int id : detect_collisions(world_)) {
    auto& s = out[static_cast<std::size_t>(id)];
    if (s.acted) s.collision = true;
  }

  for (BaseStation& bs : world_.stations) {
    bs.candidate_load = 0;
    bs.associated = 0;
  }
  std::vector<std::vector<double>> rates(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (!act[i]) continue;
    rates[i] = link_rates(world_, static_cast<int>(i), config_.channel, channel_rng_);
    assoc_[i].top3 = rank_bs(world_, rates[i]);
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (!act[i]) continue;
    std::vector<double> dist;
    if (commands[i].rule == SelectionRule::NearestBs) dist = station_distances(world_, static_cast<int>(i));
    const Selection sel = select_bs(world_, assoc_[i], commands[i].rule, rates[i], dist);
    vs[i].serving_bs = assoc_[i].current_bs;
    auto& s = out[i];
    s.t_ij = sel.t_ij;
    s.t_q = sel.t_q;
    s.serving_bs = sel.bs ? *sel.bs : -1;
    s.handoff = sel.handoff;
    s.handoff_kind = sel.kind;
    s.k = assoc_[i].handoff_prob();
  }
  for (const BaseStation& bs : world_.stations)
    if (bs.associated > bs.quota) ++metrics_.quota_violations;

  for (std::size_t i = 0; i < m; ++i) {
    if (!act[i]) continue;
    auto& s = out[i];
    const Neighborhood n = neighbors(world_, static_cast<int>(i));
    const Driving d = ActionPair::from_index(s.action).driving;
    s.v_x_mps = vs[i].v_x_mps;
    s.r_tran = reward_tran(s.collision, vs[i].v_x_mps, d, n.front_current.gap_m, vs[i].lane, config_.weights, disc_);
    s.r_tele = reward_tele(s.t_q, s.k, config_.weights);
    s.terminal = s.collision;

    metrics_.av_steps += 1;
    metrics_.sum_r_tran += s.r_tran;
    metrics_.sum_r_tele += s.r_tele;
    metrics_.sum_t_q += s.t_q;
    metrics_.sum_t_ij += s.t_ij;
    metrics_.sum_v += s.v_x_mps;
    metrics_.handoffs += s.handoff ? 1 : 0;
    metrics_.horizontal += s.handoff_kind == HandoffKind::Horizontal ? 1 : 0;
    metrics_.vertical += s.handoff_kind == HandoffKind::Vertical ? 1 : 0;
    metrics_.collisions += s.collision ? 1 : 0;
    metrics_.tq_violations += s.t_q > s.t_ij ? 1 : 0;
    metrics_.k_min = std::min(metrics_.k_min, s.k);
    metrics_.k_max = std::max(metrics_.k_max, s.k);
  }

  std::vector<bool> was_wreck(m);
  for (std::size_t i = 0; i < m; ++i) was_wreck[i] = vs[i].collided && !out[i].collision;
  respawn_wrecks(world_);
  for (std::size_t i = 0; i < m; ++i) {
    if (was_wreck[i] && !vs[i].collided) {
      // Re-entered the corridor: no attachment yet, fresh candidate list.
      assoc_[i].current_bs.reset();
      assoc_[i].previous_bs.reset();
      const auto r = link_rates(world_, static_cast<int>(i), config_.channel, channel_rng_);
      assoc_[i].top3 = top_three(r);
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (!vs[i].collided) refresh_state(static_cast<int>(i));
    out[i].next_state = states_[i];
  }
  return out;
}

}  // namespace vnet
