#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "avgrl/agents.hpp"
#include "avgrl/envs.hpp"

namespace avgrl {

struct EnvironmentSpec {
    std::string name = "riverswim";   // riverswim | random-linear | cartpole | file
    std::uint64_t seed = 0;           // instance seed (random-linear parameters)
    std::string file;                 // description file when name == "file"
    std::size_t n_states = 100;       // random-linear
    std::size_t n_actions = 2;        // random-linear
    Eigen::Index dim = 3;             // random-linear
    std::optional<bool> augment_constant;  // default: true for cartpole, false otherwise
    std::optional<bool> normalize;         // MVEE; default: true for cartpole, false otherwise
    std::size_t mvee_samples = 10'000;     // cartpole states sampled for the MVEE
    double mvee_tolerance = kDefaultMveeTolerance;
    bool include_squares = true;           // cartpole pairwise products
};

enum class ScheduleKind { fixed, theory, doubling };

struct AgentSpec {
    std::string algorithm = "mdp-exp2";  // fopo | olsvi | mdp-exp2 | uniform | fixed
    std::string preset;
    std::optional<double> span;          // default: solver span (tabular)
    double delta = 0.01;
    double ridge = 1.0;
    double beta = 0.0;
    double beta_scale = 1.0;
    double grid_resolution = 0.01;
    std::size_t fp_iters = 200;
    std::size_t horizon = 0;
    ScheduleKind schedule = ScheduleKind::fixed;
    std::size_t n_len = 10;
    std::size_t b_len = 100;
    double eta = 10.0;
    double mix_mu = 0.0;
    std::optional<double> sigma;         // default: sampled estimate (tabular)
    std::optional<double> t_mix;         // default: sampled estimate (tabular)
    std::optional<double> gate;
    double xi = 0.5;
    bool retain_estimators = false;
    std::size_t action = 0;              // fixed agent
    /// Table values that have no role in these algorithms (kept for the record).
    std::map<std::string, double> metadata;
};

enum class JStarSource { solver, fixed };

struct RunConfig {
    EnvironmentSpec environment;
    AgentSpec agent;
    std::uint64_t t_total = 10'000;
    std::size_t record_stride = 0;   // 0: max(1, T / 2000)
    std::uint64_t seed = 0;
    JStarSource j_star_source = JStarSource::solver;
    std::optional<double> j_star;    // used when j_star_source == fixed
    std::size_t runs = 10;
    std::size_t threads = 1;

    std::size_t effective_stride() const;
};

/// Everything about an environment that is shared, read-only, across seeds.
struct PreparedEnvironment {
    std::string name;
    std::shared_ptr<const TabularLinearMDP> mdp;       // dynamics (tabular)
    std::shared_ptr<const TabularLinearMDP> agent_mdp; // same MDP in agent-visible features
    std::optional<CartpoleParams> cartpole;
    FeatureMap agent_features;
    std::optional<BellmanSolution> solution;
    double j_star = 0.0;
};

PreparedEnvironment prepare_environment(const EnvironmentSpec& spec, JStarSource source = JStarSource::solver,
                                        std::optional<double> fixed_j_star = std::nullopt);

std::unique_ptr<Environment> make_environment(const PreparedEnvironment& env, std::uint64_t seed);

/// Number of sampled policies (besides uniform) behind default sigma / t_mix estimates.
inline constexpr std::size_t kMixingPolicies = 20;

/// Fills MDP-Exp2 sigma / t_mix left unset with sampled estimates on the
/// agent-visible MDP (tabular only; ConfigError otherwise).
AgentSpec resolve_agent_spec(const AgentSpec& spec, const PreparedEnvironment& env);

/// Builds the agent, resolving span / sigma / t_mix defaults from the prepared
/// environment. Throws ConfigError for unresolvable settings.
std::unique_ptr<Agent> make_agent(const AgentSpec& spec, const PreparedEnvironment& env, std::uint64_t t_total,
                                  std::uint64_t seed);

/// Running sums behind a regret trace: regret(t) = t J* - sum_{s<=t} r_s.
class RegretAccumulator {
public:
    void add(double reward) {
        ++steps_;
        reward_sum_ += reward;
    }
    std::uint64_t steps() const { return steps_; }
    double reward_sum() const { return reward_sum_; }
    double regret(double j_star) const { return double(steps_) * j_star - reward_sum_; }
    double average_reward() const { return steps_ == 0 ? 0.0 : reward_sum_ / double(steps_); }

private:
    std::uint64_t steps_ = 0;
    double reward_sum_ = 0.0;
};

struct RegretTrace {
    std::vector<std::uint64_t> steps;
    std::vector<double> cumulative_regret;
    std::vector<double> running_avg_reward;
    double j_star = 0.0;
    std::uint64_t seed = 0;
    double reward_sum = 0.0;
};

/// Builds a trace from a logged reward stream, recording every `stride`
/// steps plus the last one.
RegretTrace trace_from_rewards(const std::vector<double>& rewards, double j_star, std::size_t stride,
                               std::uint64_t seed = 0);

using StepHook = std::function<void(std::uint64_t t, std::size_t action, double reward)>;

/// One seeded run of act -> step -> observe for config.t_total steps.
RegretTrace run(const RunConfig& config, const PreparedEnvironment& env, const StepHook& hook = {});
RegretTrace run(const RunConfig& config);

/// Same as run() with a caller-supplied agent.
RegretTrace run_with_agent(const RunConfig& config, const PreparedEnvironment& env, Agent& agent,
                           const StepHook& hook = {});

struct Aggregate {
    std::vector<std::uint64_t> steps;
    std::vector<double> mean_regret;
    std::vector<double> std_regret;     // sample standard deviation (0 for one run)
    std::vector<double> mean_avg_reward;
    double j_star = 0.0;
    std::vector<RegretTrace> traces;    // in seed order
};

/// Seeds base_seed, ..., base_seed + n_runs - 1, spread over `threads` workers.
Aggregate monte_carlo(const RunConfig& config, std::size_t n_runs, std::uint64_t base_seed, std::size_t threads = 1);

std::string format_csv(const RegretTrace& trace);
std::string format_csv(const Aggregate& aggregate);
void emit_csv(const RegretTrace& trace, const std::string& path);
void emit_csv(const Aggregate& aggregate, const std::string& path);

/// INI-style text with [environment], [agent] and [run] sections. Unknown
/// sections or keys raise ConfigError.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
/// Sets one `section.key` as if it appeared in a config file.
void set_config_value(RunConfig& config, const std::string& section, const std::string& key,
                      const std::string& value);

/// Named configurations carrying the published hyperparameter table.
std::vector<std::string> preset_names();
RunConfig preset_config(const std::string& name);
/// Applies the agent part of a preset onto `spec`.
void apply_agent_preset(AgentSpec& spec, const std::string& name);

} // namespace avgrl
