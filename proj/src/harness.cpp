#include "vnet/harness.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace vnet {

// ---------------------------------------------------------------------------
// enum names

std::string_view to_string(AgentKind a) {
  switch (a) {
    case AgentKind::Tabular: return "tabular";
    case AgentKind::Dqn: return "dqn";
    case AgentKind::NearestBs: return "nearest_bs";
    case AgentKind::MaxRate: return "max_rate";
    case AgentKind::NoHandoffPenalty: return "no_handoff_penalty";
  }
  return "?";
}

std::string_view to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::DesiredVelocity: return "desired_velocity";
    case SweepAxis::NTbs: return "n_tbs";
    case SweepAxis::NAvs: return "n_avs";
  }
  return "?";
}

AgentKind agent_from_string(std::string_view s) {
  for (AgentKind a : {AgentKind::Tabular, AgentKind::Dqn, AgentKind::NearestBs, AgentKind::MaxRate,
                      AgentKind::NoHandoffPenalty})
    if (to_string(a) == s) return a;
  throw std::invalid_argument("unknown agent kind: " + std::string(s));
}

SweepAxis axis_from_string(std::string_view s) {
  for (SweepAxis a : {SweepAxis::DesiredVelocity, SweepAxis::NTbs, SweepAxis::NAvs})
    if (to_string(a) == s) return a;
  throw std::invalid_argument("unknown sweep axis: " + std::string(s));
}

bool is_learning_agent(AgentKind a) { return a == AgentKind::Tabular || a == AgentKind::Dqn; }

// ---------------------------------------------------------------------------
// configuration

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto piece = trim(s.substr(start, comma == std::string_view::npos ? s.size() - start : comma - start));
    if (!piece.empty()) out.push_back(piece);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw std::invalid_argument("config key '" + std::string(key) + "': cannot parse value '" + std::string(value) + "'");
}

double parse_double(std::string_view key, std::string_view text) {
  const std::string v = trim(text);
  double out = 0.0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || end != v.data() + v.size() || v.empty()) bad_value(key, text);
  return out;
}

long long parse_int(std::string_view key, std::string_view text) {
  const std::string v = trim(text);
  long long out = 0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || end != v.data() + v.size() || v.empty()) bad_value(key, text);
  return out;
}

bool parse_bool(std::string_view key, std::string_view text) {
  const std::string v = trim(text);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, text);
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Field {
  std::string key;
  std::function<std::string(const ScenarioConfig&)> get;
  std::function<void(ScenarioConfig&, std::string_view, std::string_view)> set;
};

template <typename Access>
Field real(std::string key, Access access) {
  return {key, [access](const ScenarioConfig& c) { return fmt_double(access(c)); },
          [access](ScenarioConfig& c, std::string_view k, std::string_view v) { access(c) = parse_double(k, v); }};
}

template <typename Access>
Field integer(std::string key, Access access) {
  return {key, [access](const ScenarioConfig& c) { return std::to_string(access(c)); },
          [access](ScenarioConfig& c, std::string_view k, std::string_view v) {
            using T = std::remove_reference_t<decltype(access(c))>;
            access(c) = static_cast<T>(parse_int(k, v));
          }};
}

template <typename Access>
Field boolean(std::string key, Access access) {
  return {key,
          [access](const ScenarioConfig& c) { return std::string(access(c) ? "true" : "false"); },
          [access](ScenarioConfig& c, std::string_view k, std::string_view v) { access(c) = parse_bool(k, v); }};
}

template <typename T, typename Access>
Field choice(std::string key, Access access, std::vector<std::pair<std::string, T>> names) {
  return {key,
          [access, names](const ScenarioConfig& c) {
            const T cur = access(c);
            for (const auto& [n, v] : names)
              if (v == cur) return n;
            return std::string("?");
          },
          [access, names](ScenarioConfig& c, std::string_view k, std::string_view v) {
            const std::string t = trim(v);
            for (const auto& [n, val] : names)
              if (n == t) {
                access(c) = val;
                return;
              }
            bad_value(k, v);
          }};
}

#define VNET_REF(expr) [](auto& c) -> auto& { return c.expr; }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    // corridor and vehicles
    f.push_back(real("corridor_len_m", VNET_REF(env.road.corridor_len_m)));
    f.push_back(real("lane_width_m", VNET_REF(env.road.lane_width_m)));
    f.push_back(real("dt_s", VNET_REF(env.road.dt_s)));
    f.push_back(integer("n_rbs", VNET_REF(env.road.n_rbs)));
    f.push_back(integer("n_tbs", VNET_REF(env.road.n_tbs)));
    f.push_back(choice<BsLayout>("bs_layout", VNET_REF(env.road.bs_layout),
                                 {{"uniform", BsLayout::Uniform}, {"random", BsLayout::SeededRandom}}));
    f.push_back(real("rbs_offset_m", VNET_REF(env.road.rbs_offset_m)));
    f.push_back(real("tbs_offset_m", VNET_REF(env.road.tbs_offset_m)));
    f.push_back(real("d_c_m", VNET_REF(env.road.d_min_safety_m)));
    f.push_back(real("d_f_m", VNET_REF(env.road.d_max_safety_m)));
    f.push_back(real("v_desired_mps", VNET_REF(env.road.v_desired_mps)));
    f.push_back(real("v_at_mps", VNET_REF(env.road.v_at_mps)));
    f.push_back(real("speed_limit_mps", VNET_REF(env.road.speed_limit_mps)));
    f.push_back(integer("num_avs", VNET_REF(env.road.num_avs)));
    f.push_back(real("vehicle_length_m", VNET_REF(env.road.vehicle_length_m)));
    f.push_back(real("lateral_envelope_m", VNET_REF(env.road.lateral_envelope_m)));
    f.push_back(real("lateral_speed_mps", VNET_REF(env.road.lateral_speed_mps)));
    f.push_back(integer("respawn_steps", VNET_REF(env.road.respawn_steps)));
    f.push_back(real("rbs_bandwidth_hz", VNET_REF(env.road.rbs_bandwidth_hz)));
    f.push_back(real("tbs_bandwidth_hz", VNET_REF(env.road.tbs_bandwidth_hz)));
    f.push_back(integer("rbs_quota", VNET_REF(env.road.rbs_quota)));
    f.push_back(integer("tbs_quota", VNET_REF(env.road.tbs_quota)));
    // RF tier
    f.push_back(real("rf_tx_power_w", VNET_REF(env.channel.rf.tx_power_w)));
    f.push_back(real("rf_tx_gain", VNET_REF(env.channel.rf.tx_gain)));
    f.push_back(real("rf_rx_gain", VNET_REF(env.channel.rf.rx_gain)));
    f.push_back(real("rf_carrier_hz", VNET_REF(env.channel.rf.carrier_hz)));
    f.push_back(real("rf_pathloss_exp", VNET_REF(env.channel.rf.pathloss_exp)));
    f.push_back(real("rf_noise_w", VNET_REF(env.channel.rf.noise_w)));
    // THz tier
    f.push_back(real("thz_tx_power_w", VNET_REF(env.channel.thz.tx_power_w)));
    f.push_back(real("thz_main_gain_tx", VNET_REF(env.channel.thz.main_gain_tx)));
    f.push_back(real("thz_main_gain_rx", VNET_REF(env.channel.thz.main_gain_rx)));
    f.push_back(real("thz_side_gain_tx", VNET_REF(env.channel.thz.side_gain_tx)));
    f.push_back(real("thz_side_gain_rx", VNET_REF(env.channel.thz.side_gain_rx)));
    f.push_back(real("thz_carrier_hz", VNET_REF(env.channel.thz.carrier_hz)));
    f.push_back(real("thz_absorption_per_m", VNET_REF(env.channel.thz.absorption_per_m)));
    f.push_back(real("thz_noise_w", VNET_REF(env.channel.thz.thermal_noise_w)));
    f.push_back(real("thz_beamwidth_tx_rad", VNET_REF(env.channel.thz.beamwidth_tx_rad)));
    f.push_back(real("thz_beamwidth_rx_rad", VNET_REF(env.channel.thz.beamwidth_rx_rad)));
    f.push_back(real("thz_align_prob_tx", VNET_REF(env.channel.thz.align_prob_tx)));
    f.push_back(real("thz_align_prob_rx", VNET_REF(env.channel.thz.align_prob_rx)));
    f.push_back(choice<InterferenceMode>(
        "interference_mode", VNET_REF(env.channel.mode),
        {{"expected", InterferenceMode::ExpectedAlignment}, {"sampled", InterferenceMode::SampledAlignment}}));
    f.push_back(boolean("fading", VNET_REF(env.channel.fading)));
    // rewards and state
    f.push_back(real("w1", VNET_REF(env.weights.w1)));
    f.push_back(real("w2", VNET_REF(env.weights.w2)));
    f.push_back(real("w3", VNET_REF(env.weights.w3)));
    f.push_back(real("w4", VNET_REF(env.weights.w4)));
    f.push_back(real("w5", VNET_REF(env.weights.w5)));
    f.push_back(real("w6", VNET_REF(env.weights.w6)));
    f.push_back(real("r_th_bps", VNET_REF(env.weights.r_th_bps)));
    f.push_back(real("v_eps_mps", VNET_REF(env.v_eps_mps)));
    // tabular learner
    f.push_back(real("alpha", VNET_REF(learn.alpha)));
    f.push_back(real("gamma", VNET_REF(learn.gamma)));
    f.push_back(real("epsilon_start", VNET_REF(learn.epsilon.start)));
    f.push_back(real("epsilon_end", VNET_REF(learn.epsilon.end)));
    f.push_back(real("epsilon_decay", VNET_REF(learn.epsilon.decay)));
    f.push_back(integer("episodes", VNET_REF(learn.episodes)));
    f.push_back(integer("horizon", VNET_REF(learn.horizon)));
    f.push_back(boolean("shared_table", VNET_REF(learn.shared_table)));
    // deep learner
    f.push_back(integer("dqn_episodes", VNET_REF(dqn.episodes)));
    f.push_back(integer("dqn_horizon", VNET_REF(dqn.horizon)));
    f.push_back(integer("dqn_batch", VNET_REF(dqn.batch)));
    f.push_back(integer("dqn_sync_every", VNET_REF(dqn.sync_every)));
    f.push_back(real("dqn_learning_rate", VNET_REF(dqn.learning_rate)));
    f.push_back(real("dqn_gamma", VNET_REF(dqn.gamma)));
    f.push_back(real("dqn_epsilon_start", VNET_REF(dqn.epsilon.start)));
    f.push_back(real("dqn_epsilon_end", VNET_REF(dqn.epsilon.end)));
    f.push_back(real("dqn_epsilon_decay", VNET_REF(dqn.epsilon.decay)));
    f.push_back(choice<LossMode>("dqn_loss", VNET_REF(dqn.loss),
                                 {{"squared", LossMode::SquaredError}, {"bce", LossMode::Bce}}));
    f.push_back(integer("dqn_capacity", VNET_REF(dqn.capacity)));
    f.push_back({"dqn_hidden",
                 [](const ScenarioConfig& c) {
                   std::string s;
                   for (std::size_t i = 0; i < c.dqn.hidden.size(); ++i)
                     s += (i ? "," : "") + std::to_string(c.dqn.hidden[i]);
                   return s;
                 },
                 [](ScenarioConfig& c, std::string_view k, std::string_view v) {
                   std::vector<int> h;
                   for (const auto& p : split_list(v)) h.push_back(static_cast<int>(parse_int(k, p)));
                   c.dqn.hidden = h;
                 }});
    f.push_back(real("dqn_reward_scale", VNET_REF(dqn.reward_scale)));
    f.push_back(real("dqn_grad_clip", VNET_REF(dqn.grad_clip)));
    f.push_back(integer("dqn_train_every", VNET_REF(dqn.train_every)));
    f.push_back(choice<StateEncoding>("state_encoding", VNET_REF(encoding),
                                      {{"centered", StateEncoding::Centered}, {"onehot", StateEncoding::OneHot}}));
    // experiment
    f.push_back(choice<AgentKind>("agent", VNET_REF(agent),
                                  {{"tabular", AgentKind::Tabular},
                                   {"dqn", AgentKind::Dqn},
                                   {"nearest_bs", AgentKind::NearestBs},
                                   {"max_rate", AgentKind::MaxRate},
                                   {"no_handoff_penalty", AgentKind::NoHandoffPenalty}}));
    f.push_back(choice<SweepAxis>("axis", VNET_REF(axis),
                                  {{"desired_velocity", SweepAxis::DesiredVelocity},
                                   {"n_tbs", SweepAxis::NTbs},
                                   {"n_avs", SweepAxis::NAvs}}));
    f.push_back({"values",
                 [](const ScenarioConfig& c) {
                   std::string s;
                   for (std::size_t i = 0; i < c.values.size(); ++i) s += (i ? "," : "") + fmt_double(c.values[i]);
                   return s;
                 },
                 [](ScenarioConfig& c, std::string_view k, std::string_view v) {
                   std::vector<double> out;
                   for (const auto& p : split_list(v)) out.push_back(parse_double(k, p));
                   c.values = out;
                 }});
    f.push_back({"seeds",
                 [](const ScenarioConfig& c) {
                   std::string s;
                   for (std::size_t i = 0; i < c.seeds.size(); ++i) s += (i ? "," : "") + std::to_string(c.seeds[i]);
                   return s;
                 },
                 [](ScenarioConfig& c, std::string_view k, std::string_view v) {
                   std::vector<std::uint64_t> out;
                   for (const auto& p : split_list(v)) {
                     const long long s = parse_int(k, p);
                     if (s < 0) bad_value(k, p);
                     out.push_back(static_cast<std::uint64_t>(s));
                   }
                   c.seeds = out;
                 }});
    f.push_back({"out", [](const ScenarioConfig& c) { return c.out_dir.string(); },
                 [](ScenarioConfig& c, std::string_view, std::string_view v) { c.out_dir = trim(v); }});
    f.push_back(boolean("trace", VNET_REF(trace)));
    f.push_back(integer("eval_episodes", VNET_REF(eval_episodes)));
    f.push_back(integer("threads", VNET_REF(threads)));
    return f;
  }();
  return table;
}

#undef VNET_REF

// Keys that describe where and how a run is executed rather than what it computes.
bool excluded_from_hash(std::string_view key) { return key == "out" || key == "threads" || key == "trace"; }

}  // namespace

void ScenarioConfig::validate() const {
  env.validate();
  if (values.empty()) throw std::invalid_argument("config: axis values must be non-empty");
  if (seeds.empty()) throw std::invalid_argument("config: at least one seed is required");
  auto sorted = seeds;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw std::invalid_argument("config: seeds must be distinct");
  if (eval_episodes < 1) throw std::invalid_argument("config: eval_episodes must be >= 1");
  if (learn.episodes < 0 || learn.horizon < 1 || dqn.episodes < 0 || dqn.horizon < 1)
    throw std::invalid_argument("config: episodes must be >= 0 and horizons >= 1");
  if (!(learn.alpha > 0 && learn.alpha <= 1)) throw std::invalid_argument("config: alpha must lie in (0, 1]");
  if (!(learn.gamma >= 0 && learn.gamma <= 1)) throw std::invalid_argument("config: gamma must lie in [0, 1]");
  if (dqn.batch < 1 || dqn.sync_every < 1 || dqn.capacity < dqn.batch || dqn.train_every < 1)
    throw std::invalid_argument("config: invalid deep-learner batch, sync period, capacity or training period");
  if (threads < 1) throw std::invalid_argument("config: threads must be >= 1");
  for (double v : values) (void)apply_axis(env, axis, v);
}

std::vector<std::pair<std::string, std::string>> config_items(const ScenarioConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const Field& f : fields()) out.emplace_back(f.key, f.get(cfg));
  return out;
}

void set_config_value(ScenarioConfig& cfg, std::string_view key, std::string_view value) {
  for (const Field& f : fields())
    if (f.key == key) return f.set(cfg, key, value);
  throw std::invalid_argument("unknown config key: " + std::string(key));
}

std::uint64_t config_hash(const ScenarioConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [k, v] : config_items(cfg)) {
    if (excluded_from_hash(k)) continue;
    for (char ch : k + "=" + v + "\n") {
      h ^= static_cast<unsigned char>(ch);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

ScenarioConfig parse_config(std::string_view text) {
  ScenarioConfig cfg;
  std::istringstream is{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    set_config_value(cfg, trim(std::string_view(body).substr(0, eq)), std::string_view(body).substr(eq + 1));
  }
  return cfg;
}

void apply_environment(ScenarioConfig& cfg) {
  for (const Field& f : fields()) {
    std::string name = "VNET_" + f.key;
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::toupper(c); });
    if (const char* v = std::getenv(name.c_str())) f.set(cfg, f.key, v);
  }
}

ScenarioConfig load_config(const std::optional<std::filesystem::path>& path, bool use_environment) {
  ScenarioConfig cfg;
  if (path) {
    std::ifstream is(*path);
    if (!is) throw std::runtime_error("cannot open config file " + path->string());
    std::stringstream buf;
    buf << is.rdbuf();
    cfg = parse_config(buf.str());
  }
  if (use_environment) apply_environment(cfg);
  return cfg;
}

EnvConfig apply_axis(const EnvConfig& base, SweepAxis axis, double value) {
  EnvConfig out = base;
  const auto as_count = [&](std::string_view name) {
    if (value < 0 || value != std::floor(value))
      throw std::invalid_argument(std::string(name) + " axis values must be non-negative integers");
    return static_cast<int>(value);
  };
  switch (axis) {
    case SweepAxis::DesiredVelocity:
      if (!(value > 0)) throw std::invalid_argument("desired_velocity axis values must be positive");
      out.road.v_desired_mps = value;
      break;
    case SweepAxis::NTbs: out.road.n_tbs = as_count("n_tbs"); break;
    case SweepAxis::NAvs: out.road.num_avs = as_count("n_avs"); break;
  }
  out.weights.v_desired_mps = out.road.v_desired_mps;
  out.validate();
  return out;
}

std::uint64_t derive_seed(std::uint64_t seed, double axis_value, std::uint64_t stream) {
  const auto point = std::bit_cast<std::uint64_t>(axis_value);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(point), static_cast<std::uint32_t>(point >> 32),
                    static_cast<std::uint32_t>(stream)};
  std::array<std::uint32_t, 2> words{};
  seq.generate(words.begin(), words.end());
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

// ---------------------------------------------------------------------------
// policies

Driving heuristic_driving(const VehicularEnv& env, int av_id) {
  const auto& road = env.config().road;
  const Neighborhood n = neighbors(env.world(), av_id);
  const bool front_close = n.front_current.gap_m < road.d_min_safety_m;
  const bool adjacent_far = n.front_adjacent.gap_m > road.d_max_safety_m && n.rear_adjacent.gap_m > road.d_max_safety_m;
  if (front_close && adjacent_far) return Driving::LaneSwitch;
  if (front_close) return Driving::MildDecel;
  return Driving::Maintain;
}

Policy baseline_policy(AgentKind kind) {
  SelectionRule rule{};
  switch (kind) {
    case AgentKind::NearestBs: rule = SelectionRule::NearestBs; break;
    case AgentKind::MaxRate: rule = SelectionRule::MaxRate; break;
    case AgentKind::NoHandoffPenalty: rule = SelectionRule::NoHandoffPenalty; break;
    default: throw std::invalid_argument("baseline_policy: not a baseline agent: " + std::string(to_string(kind)));
  }
  return [rule](const VehicularEnv& env, int av, int) { return Command{heuristic_driving(env, av), rule}; };
}

Policy table_policy(std::vector<QTable> tables) {
  if (tables.empty()) throw std::invalid_argument("table_policy: no Q-table");
  return [tables = std::move(tables)](const VehicularEnv&, int av, int state) {
    const QTable& q = tables.size() == 1 ? tables.front() : tables.at(static_cast<std::size_t>(av));
    const ActionPair a = ActionPair::from_index(greedy_action(q, state));
    return Command{a.driving, rule_for(a.telecom)};
  };
}

Policy network_policy(QNetwork net, StateEncoding encoding) {
  return [net = std::move(net), encoding](const VehicularEnv&, int, int state) {
    const ActionPair a = ActionPair::from_index(greedy_action(net, encode_state(DiscreteState::from_index(state), encoding)));
    return Command{a.driving, rule_for(a.telecom)};
  };
}

// ---------------------------------------------------------------------------
// rollouts and summaries

EpisodeRow make_row(const EpisodeMetrics& m, int num_avs, std::string phase, int episode, int steps) {
  EpisodeRow r;
  r.phase = std::move(phase);
  r.episode = episode;
  r.steps = steps;
  r.av_steps = m.av_steps;
  const double agents = static_cast<double>(std::max(1, num_avs));
  r.reward_tran = m.sum_r_tran / agents;
  r.reward_tele = m.sum_r_tele / agents;
  r.reward_total = r.reward_tran + r.reward_tele;
  const double n = static_cast<double>(std::max<long>(1, m.av_steps));
  r.rate_tq_bps = m.sum_t_q / n;
  r.rate_tij_bps = m.sum_t_ij / n;
  r.handoff_prob = static_cast<double>(m.handoffs) / n;
  r.horizontal_handoffs = m.horizontal;
  r.vertical_handoffs = m.vertical;
  r.collision_rate = static_cast<double>(m.collisions) / n;
  r.collisions = m.collisions;
  r.mean_velocity_mps = m.sum_v / n;
  r.k_min = m.av_steps ? m.k_min : 0.0;
  r.k_max = m.k_max;
  r.quota_violations = m.quota_violations;
  r.tq_violations = m.tq_violations;
  return r;
}

RunSummary summarize(const std::vector<EpisodeRow>& rows, AgentKind agent, SweepAxis axis, double value,
                     std::uint64_t seed) {
  RunSummary s;
  s.agent = agent;
  s.axis = axis;
  s.axis_value = value;
  s.seed = seed;
  double n = 0;
  for (const EpisodeRow& r : rows) {
    if (r.phase != "eval") continue;
    n += 1;
    s.reward_total += r.reward_total;
    s.reward_tran += r.reward_tran;
    s.reward_tele += r.reward_tele;
    s.rate_tq_bps += r.rate_tq_bps;
    s.handoff_prob += r.handoff_prob;
    s.collision_rate += r.collision_rate;
    s.mean_velocity_mps += r.mean_velocity_mps;
    s.quota_violations += r.quota_violations;
    s.tq_violations += r.tq_violations;
    s.k_min = std::min(s.k_min, r.k_min);
    s.k_max = std::max(s.k_max, r.k_max);
  }
  if (n == 0) throw std::logic_error("summarize: no evaluation episodes");
  s.episodes = static_cast<int>(n);
  for (double* f : {&s.reward_total, &s.reward_tran, &s.reward_tele, &s.rate_tq_bps, &s.handoff_prob,
                    &s.collision_rate, &s.mean_velocity_mps})
    *f /= n;
  return s;
}

namespace {

void write_steps(std::ostream& os, int episode, long t, const std::vector<AvStep>& steps) {
  for (const AvStep& s : steps) {
    if (!s.acted) continue;
    os << episode << ',' << t << ',' << s.av_id << ',' << s.state << ',' << s.action << ',' << fmt_double(s.r_tran)
       << ',' << fmt_double(s.r_tele) << ',' << fmt_double(s.t_ij) << ',' << fmt_double(s.t_q) << ','
       << s.serving_bs << ',' << (s.handoff ? 1 : 0) << ',' << (s.collision ? 1 : 0) << '\n';
  }
}

constexpr std::string_view kStepsHeader = "episode,t,av_id,state,action,r_tran,r_tele,t_ij,t_q,serving_bs,handoff,collision";

}  // namespace

std::vector<EpisodeRow> rollout(const EnvConfig& env_cfg, const Policy& policy, int episodes, int horizon,
                                std::uint64_t seed, const TraceSink& sink) {
  VehicularEnv env(env_cfg, seed);
  std::vector<EpisodeRow> rows;
  if (sink.trace) *sink.trace << "episode," << kTraceHeader << '\n';
  if (sink.steps) *sink.steps << kStepsHeader << '\n';
  const int m = env.num_agents();
  std::vector<Command> cmds(static_cast<std::size_t>(m));
  for (int ep = 0; ep < episodes; ++ep) {
    env.reset();
    for (int t = 0; t < horizon; ++t) {
      const std::vector<bool> acting = env.acting();
      for (int i = 0; i < m; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        cmds[idx] = acting[idx] ? policy(env, i, env.states()[idx]) : Command{};
      }
      const auto steps = env.step(cmds);
      if (sink.steps) write_steps(*sink.steps, ep, env.world().step, steps);
      if (sink.trace) {
        std::ostringstream snap;
        write_trace(snap, env.world());
        std::istringstream lines(snap.str());
        for (std::string line; std::getline(lines, line);) *sink.trace << ep << ',' << line << '\n';
      }
    }
    rows.push_back(make_row(env.episode_metrics(), m, "eval", ep, horizon));
  }
  return rows;
}

PointResult run_point(const ScenarioConfig& cfg, std::size_t axis_index, std::uint64_t seed, const TraceSink& sink) {
  const double value = cfg.values.at(axis_index);
  const EnvConfig env_cfg = apply_axis(cfg.env, cfg.axis, value);
  const std::uint64_t train_seed = derive_seed(seed, value, 0);
  const std::uint64_t eval_seed = derive_seed(seed, value, 2);
  std::mt19937_64 agent_rng(derive_seed(seed, value, 1));

  PointResult out;
  Policy policy;
  int horizon = cfg.learn.horizon;
  const int m = env_cfg.road.num_avs;
  switch (cfg.agent) {
    case AgentKind::Tabular: {
      VehicularEnv env(env_cfg, train_seed);
      const EpisodeHook<VehicularEnv> hook = [&](const EpisodeLog& log, const VehicularEnv& e) {
        EpisodeRow r = make_row(e.episode_metrics(), m, "train", log.episode, cfg.learn.horizon);
        r.epsilon = log.epsilon;
        out.rows.push_back(r);
      };
      TabularResult res = train_tabular(env, cfg.learn, agent_rng, hook);
      out.tables = res.tables;
      policy = table_policy(std::move(res.tables));
      break;
    }
    case AgentKind::Dqn: {
      VehicularEnv env(env_cfg, train_seed);
      env.set_encoding(cfg.encoding);
      const EpisodeHook<VehicularEnv> hook = [&](const EpisodeLog& log, const VehicularEnv& e) {
        EpisodeRow r = make_row(e.episode_metrics(), m, "train", log.episode, cfg.dqn.horizon);
        r.epsilon = log.epsilon;
        r.loss = log.mean_loss;
        out.rows.push_back(r);
      };
      DqnResult res = train_dqn(env, cfg.dqn, agent_rng, hook);
      out.net = res.net;
      policy = network_policy(std::move(res.net), cfg.encoding);
      horizon = cfg.dqn.horizon;
      break;
    }
    default: policy = baseline_policy(cfg.agent); break;
  }
  auto eval = rollout(env_cfg, policy, cfg.eval_episodes, horizon, eval_seed, sink);
  out.rows.insert(out.rows.end(), eval.begin(), eval.end());
  out.summary = summarize(out.rows, cfg.agent, cfg.axis, value, seed);
  return out;
}

// ---------------------------------------------------------------------------
// CSV / JSON

const std::vector<std::string> kEpisodeColumns{
    "agent",          "axis",           "axis_value",   "seed",          "phase",
    "episode",        "epsilon",        "steps",        "av_steps",      "reward_total",
    "reward_tran",    "reward_tele",    "rate_tq_bps",  "rate_tij_bps",  "handoff_prob",
    "horizontal_handoffs", "vertical_handoffs", "collision_rate", "collisions", "mean_velocity_mps",
    "k_min",          "k_max",          "quota_violations", "tq_violations", "loss"};

const std::vector<std::string> kSummaryColumns{
    "agent",        "axis",         "axis_value",     "seed",           "episodes",
    "reward_total", "reward_tran",  "reward_tele",    "rate_tq_bps",    "handoff_prob",
    "collision_rate", "mean_velocity_mps", "quota_violations", "tq_violations", "k_min", "k_max"};

namespace {

void write_header(std::ostream& os, const std::vector<std::string>& cols) {
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
}

}  // namespace

void write_episode_csv(std::ostream& os, const std::vector<EpisodeRow>& rows, const RunSummary& key) {
  write_header(os, kEpisodeColumns);
  for (const EpisodeRow& r : rows) {
    os << to_string(key.agent) << ',' << to_string(key.axis) << ',' << fmt_double(key.axis_value) << ',' << key.seed
       << ',' << r.phase << ',' << r.episode << ',' << fmt_double(r.epsilon) << ',' << r.steps << ',' << r.av_steps
       << ',' << fmt_double(r.reward_total) << ',' << fmt_double(r.reward_tran) << ',' << fmt_double(r.reward_tele)
       << ',' << fmt_double(r.rate_tq_bps) << ',' << fmt_double(r.rate_tij_bps) << ',' << fmt_double(r.handoff_prob)
       << ',' << r.horizontal_handoffs << ',' << r.vertical_handoffs << ',' << fmt_double(r.collision_rate) << ','
       << r.collisions << ',' << fmt_double(r.mean_velocity_mps) << ',' << fmt_double(r.k_min) << ','
       << fmt_double(r.k_max) << ',' << r.quota_violations << ',' << r.tq_violations << ',' << fmt_double(r.loss)
       << '\n';
  }
}

void write_summary_csv(std::ostream& os, const std::vector<RunSummary>& rows) {
  write_header(os, kSummaryColumns);
  for (const RunSummary& s : rows) {
    os << to_string(s.agent) << ',' << to_string(s.axis) << ',' << fmt_double(s.axis_value) << ',' << s.seed << ','
       << s.episodes << ',' << fmt_double(s.reward_total) << ',' << fmt_double(s.reward_tran) << ','
       << fmt_double(s.reward_tele) << ',' << fmt_double(s.rate_tq_bps) << ',' << fmt_double(s.handoff_prob) << ','
       << fmt_double(s.collision_rate) << ',' << fmt_double(s.mean_velocity_mps) << ',' << s.quota_violations << ','
       << s.tq_violations << ',' << fmt_double(s.k_min) << ',' << fmt_double(s.k_max) << '\n';
  }
}

namespace {

nlohmann::json summary_to_json(const RunSummary& s) {
  return {{"agent", to_string(s.agent)},
          {"axis", to_string(s.axis)},
          {"axis_value", s.axis_value},
          {"seed", s.seed},
          {"episodes", s.episodes},
          {"reward_total", s.reward_total},
          {"reward_tran", s.reward_tran},
          {"reward_tele", s.reward_tele},
          {"rate_tq_bps", s.rate_tq_bps},
          {"handoff_prob", s.handoff_prob},
          {"collision_rate", s.collision_rate},
          {"mean_velocity_mps", s.mean_velocity_mps},
          {"quota_violations", s.quota_violations},
          {"tq_violations", s.tq_violations},
          {"k_min", s.k_min},
          {"k_max", s.k_max}};
}

}  // namespace

std::string summary_json(const ScenarioConfig& cfg, const std::vector<RunSummary>& rows) {
  nlohmann::json doc;
  nlohmann::json config = nlohmann::json::object();
  for (const auto& [k, v] : config_items(cfg)) config[k] = v;
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash(cfg)));
  doc["config"] = config;
  doc["config_hash"] = hash;
  doc["agent"] = to_string(cfg.agent);
  doc["axis"] = to_string(cfg.axis);
  doc["runs"] = nlohmann::json::array();
  for (const RunSummary& s : rows) doc["runs"].push_back(summary_to_json(s));

  // Seed-level mean and sample standard deviation per axis value.
  nlohmann::json agg = nlohmann::json::array();
  for (double v : cfg.values) {
    std::vector<const RunSummary*> pts;
    for (const RunSummary& s : rows)
      if (s.axis_value == v) pts.push_back(&s);
    if (pts.empty()) continue;
    nlohmann::json entry{{"axis_value", v}, {"seeds", pts.size()}};
    const std::vector<std::pair<const char*, double RunSummary::*>> metrics{
        {"reward_total", &RunSummary::reward_total}, {"reward_tran", &RunSummary::reward_tran},
        {"reward_tele", &RunSummary::reward_tele},   {"rate_tq_bps", &RunSummary::rate_tq_bps},
        {"handoff_prob", &RunSummary::handoff_prob}, {"collision_rate", &RunSummary::collision_rate},
        {"mean_velocity_mps", &RunSummary::mean_velocity_mps}};
    for (const auto& [name, member] : metrics) {
      double mean = 0;
      for (const RunSummary* p : pts) mean += p->*member;
      mean /= static_cast<double>(pts.size());
      double var = 0;
      for (const RunSummary* p : pts) var += (p->*member - mean) * (p->*member - mean);
      const double sd = pts.size() > 1 ? std::sqrt(var / static_cast<double>(pts.size() - 1)) : 0.0;
      entry[name] = {{"mean", mean}, {"std", sd}};
    }
    agg.push_back(entry);
  }
  doc["aggregate"] = agg;
  return doc.dump(2);
}

// ---------------------------------------------------------------------------
// sweeps and evaluation

namespace {

std::string point_stem(const ScenarioConfig& cfg, double value, std::uint64_t seed) {
  char v[32];
  std::snprintf(v, sizeof v, "%g", value);
  return std::string(to_string(cfg.agent)) + "_" + std::string(to_string(cfg.axis)) + "_" + v + "_seed" +
         std::to_string(seed);
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

}  // namespace

std::vector<RunSummary> run_sweep(const ScenarioConfig& cfg) {
  cfg.validate();
  std::filesystem::create_directories(cfg.out_dir);
  const std::uint64_t hash = config_hash(cfg);
  const std::size_t nv = cfg.values.size(), ns = cfg.seeds.size(), total = nv * ns;
  std::vector<RunSummary> results(total);
  std::vector<std::exception_ptr> errors(total);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t job; (job = next.fetch_add(1)) < total;) {
      const std::size_t vi = job / ns, si = job % ns;
      try {
        const std::uint64_t seed = cfg.seeds[si];
        const std::string stem = point_stem(cfg, cfg.values[vi], seed);
        std::ofstream trace_os, steps_os;
        TraceSink sink;
        if (cfg.trace) {
          trace_os = open_out(cfg.out_dir / (stem + "_trace.csv"));
          steps_os = open_out(cfg.out_dir / (stem + "_steps.csv"));
          sink = {&trace_os, &steps_os};
        }
        PointResult res = run_point(cfg, vi, seed, sink);
        {
          auto os = open_out(cfg.out_dir / (stem + "_episodes.csv"));
          write_episode_csv(os, res.rows, res.summary);
        }
        {
          auto os = open_out(cfg.out_dir / (stem + "_summary.csv"));
          write_summary_csv(os, {res.summary});
        }
        for (std::size_t t = 0; t < res.tables.size(); ++t) {
          const std::string suffix = res.tables.size() == 1 ? "" : "_av" + std::to_string(t);
          save_qtable(cfg.out_dir / (stem + suffix + ".qtable"), res.tables[t], hash);
        }
        if (res.net) save_checkpoint(cfg.out_dir / (stem + ".fnn"), *res.net, hash);
        results[job] = res.summary;
      } catch (...) {
        errors[job] = std::current_exception();
      }
    }
  };

  const int n_threads = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(cfg.threads), total));
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  {
    auto os = open_out(cfg.out_dir / "summary.csv");
    write_summary_csv(os, results);
  }
  {
    auto os = open_out(cfg.out_dir / "summary.json");
    os << summary_json(cfg, results) << '\n';
  }
  return results;
}

RunSummary evaluate_artifact(const ScenarioConfig& cfg, const std::filesystem::path& artifact, std::uint64_t seed,
                             std::vector<EpisodeRow>* rows) {
  const EnvConfig env_cfg = apply_axis(cfg.env, cfg.axis, cfg.values.front());
  Policy policy;
  int horizon = cfg.learn.horizon;
  AgentKind kind = AgentKind::Tabular;
  if (artifact.extension() == ".fnn") {
    QNetwork net = load_checkpoint(artifact);
    if (net.inputs() != encoding_width(cfg.encoding) || net.outputs() != kActionCount)
      throw std::runtime_error(artifact.string() + ": network shape does not match the configured encoding");
    policy = network_policy(std::move(net), cfg.encoding);
    horizon = cfg.dqn.horizon;
    kind = AgentKind::Dqn;
  } else {
    QTable q = load_qtable(artifact);
    if (q.rows() != kStateCount || q.cols() != kActionCount)
      throw std::runtime_error(artifact.string() + ": Q-table shape does not match the state/action space");
    policy = table_policy({std::move(q)});
  }
  auto r = rollout(env_cfg, policy, cfg.eval_episodes, horizon, derive_seed(seed, cfg.values.front(), 2));
  RunSummary s = summarize(r, kind, cfg.axis, cfg.values.front(), seed);
  if (rows) *rows = std::move(r);
  return s;
}

}  // namespace vnet
