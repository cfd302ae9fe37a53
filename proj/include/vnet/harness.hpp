// Experiment harness: scenario configuration, policies, sweeps over one
// scenario axis, and the CSV/JSON artifacts consumed by the plotting scripts.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vnet/dqn.hpp"
#include "vnet/env.hpp"
#include "vnet/tabular.hpp"

namespace vnet {

enum class AgentKind { Tabular, Dqn, NearestBs, MaxRate, NoHandoffPenalty };
enum class SweepAxis { DesiredVelocity, NTbs, NAvs };

std::string_view to_string(AgentKind a);
std::string_view to_string(SweepAxis a);
AgentKind agent_from_string(std::string_view s);
SweepAxis axis_from_string(std::string_view s);
bool is_learning_agent(AgentKind a);

struct ScenarioConfig {
  EnvConfig env;
  LearnConfig learn{0.1, 0.9, {}, 300, 500, true};
  DqnConfig dqn;
  StateEncoding encoding = StateEncoding::Centered;

  AgentKind agent = AgentKind::Tabular;
  SweepAxis axis = SweepAxis::NTbs;
  std::vector<double> values{10};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::filesystem::path out_dir = "runs";
  bool trace = false;
  int eval_episodes = 5;
  int threads = 1;

  void validate() const;
};

/// Every recognised key with its current value, in a stable order.
std::vector<std::pair<std::string, std::string>> config_items(const ScenarioConfig& cfg);
/// Sets one key from its text form; throws std::invalid_argument naming the key
/// when it is unknown or the value does not parse.
void set_config_value(ScenarioConfig& cfg, std::string_view key, std::string_view value);
/// FNV-1a over the canonical `key=value` listing.
std::uint64_t config_hash(const ScenarioConfig& cfg);

/// Parses `key = value` lines (`#` starts a comment). A missing path yields
/// the defaults. Environment variables VNET_<KEY> (key upper-cased) override
/// file values when `use_environment` is set.
ScenarioConfig load_config(const std::optional<std::filesystem::path>& path, bool use_environment = true);
ScenarioConfig parse_config(std::string_view text);
void apply_environment(ScenarioConfig& cfg);

/// Scenario with `axis` set to `value`.
EnvConfig apply_axis(const EnvConfig& base, SweepAxis axis, double value);

/// Independent generator stream for (seed, axis value, purpose). Keyed on the
/// axis value itself so a point's results do not depend on its list position.
/// Streams: 0 training environment, 1 agent, 2 evaluation environment.
std::uint64_t derive_seed(std::uint64_t seed, double axis_value, std::uint64_t stream);

/// Per-step decision of every vehicle given its current discrete state.
using Policy = std::function<Command(const VehicularEnv& env, int av_id, int state)>;

Driving heuristic_driving(const VehicularEnv& env, int av_id);
Policy baseline_policy(AgentKind kind);
Policy table_policy(std::vector<QTable> tables);
Policy network_policy(QNetwork net, StateEncoding encoding);

struct EpisodeRow {
  std::string phase;  // "train" or "eval"
  int episode = 0;
  double epsilon = 0.0;
  int steps = 0;
  long av_steps = 0;
  double reward_total = 0.0;  // per-vehicle episode return
  double reward_tran = 0.0;
  double reward_tele = 0.0;
  double rate_tq_bps = 0.0;   // mean handoff-aware rate per vehicle-step
  double rate_tij_bps = 0.0;  // mean raw link rate per vehicle-step
  double handoff_prob = 0.0;  // handoffs per vehicle-step
  long horizontal_handoffs = 0;
  long vertical_handoffs = 0;
  double collision_rate = 0.0;  // collisions per vehicle-step
  long collisions = 0;
  double mean_velocity_mps = 0.0;
  double k_min = 0.0;
  double k_max = 0.0;
  long quota_violations = 0;
  long tq_violations = 0;
  double loss = 0.0;
};

EpisodeRow make_row(const EpisodeMetrics& m, int num_avs, std::string phase, int episode, int steps);

/// Seed-level summary of one sweep point: arithmetic means of its eval rows.
struct RunSummary {
  AgentKind agent = AgentKind::Tabular;
  SweepAxis axis = SweepAxis::NTbs;
  double axis_value = 0.0;
  std::uint64_t seed = 0;
  int episodes = 0;
  double reward_total = 0.0;
  double reward_tran = 0.0;
  double reward_tele = 0.0;
  double rate_tq_bps = 0.0;
  double handoff_prob = 0.0;
  double collision_rate = 0.0;
  double mean_velocity_mps = 0.0;
  long quota_violations = 0;
  long tq_violations = 0;
  double k_min = 1.0;
  double k_max = 0.0;
};

RunSummary summarize(const std::vector<EpisodeRow>& rows, AgentKind agent, SweepAxis axis, double value,
                     std::uint64_t seed);

/// Writes the optional per-step files of a rollout.
struct TraceSink {
  std::ostream* trace = nullptr;  // vehicle kinematics, one line per vehicle per step
  std::ostream* steps = nullptr;  // per-vehicle transition records
};

/// Greedy rollouts of `policy`; no learning. Returns one row per episode.
std::vector<EpisodeRow> rollout(const EnvConfig& env_cfg, const Policy& policy, int episodes, int horizon,
                                std::uint64_t seed, const TraceSink& sink = {});

struct PointResult {
  RunSummary summary;
  std::vector<EpisodeRow> rows;  // training rows then eval rows
  std::vector<QTable> tables;    // tabular agents
  std::optional<QNetwork> net;   // deep agent
};

/// Trains (learning agents) and evaluates one (axis value, seed) point.
PointResult run_point(const ScenarioConfig& cfg, std::size_t axis_index, std::uint64_t seed,
                      const TraceSink& sink = {});

/// Runs every axis value x seed, writing per-point CSVs, `summary.csv` and
/// `summary.json` under cfg.out_dir. Returned summaries are ordered by
/// (axis index, seed index) regardless of execution order.
std::vector<RunSummary> run_sweep(const ScenarioConfig& cfg);

/// Greedy evaluation of a stored Q-table (`.qtable`) or network checkpoint.
RunSummary evaluate_artifact(const ScenarioConfig& cfg, const std::filesystem::path& artifact, std::uint64_t seed,
                             std::vector<EpisodeRow>* rows = nullptr);

/// CSV schemas shared with the plotting scripts.
extern const std::vector<std::string> kEpisodeColumns;
extern const std::vector<std::string> kSummaryColumns;
void write_episode_csv(std::ostream& os, const std::vector<EpisodeRow>& rows, const RunSummary& key);
void write_summary_csv(std::ostream& os, const std::vector<RunSummary>& rows);
std::string summary_json(const ScenarioConfig& cfg, const std::vector<RunSummary>& rows);

}  // namespace vnet
