#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "avgrl/features.hpp"
#include "avgrl/random.hpp"

namespace avgrl {

// ---------------------------------------------------------------------------
// Tabular linear MDPs
// ---------------------------------------------------------------------------

/**
 * Finite MDP with p(x'|x,a) = Phi(x,a)^T mu(x') and r(x,a) = Phi(x,a)^T theta.
 *
 * `features` has one row per state-action pair, row index x * n_actions + a.
 * `mu` is dim x n_states (row i is the measure mu_i).
 */
struct TabularLinearMDP {
    std::string name;
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    MatrixXd features;
    MatrixXd mu;
    VectorXd theta;
    std::uint64_t seed = 0;
    /// Builder constants recorded so that description files are self-describing.
    std::map<std::string, double> parameters;
    /// Optional feature normalisation applied to what agents observe.
    std::optional<EllipsoidTransform> transform;

    Eigen::Index dim() const { return features.cols(); }
    std::size_t row(std::size_t x, std::size_t a) const { return x * n_actions + a; }
    VectorXd phi(std::size_t x, std::size_t a) const { return features.row(Eigen::Index(row(x, a))).transpose(); }

    /// (n_states * n_actions) x n_states transition matrix Phi mu.
    MatrixXd transitions() const { return features * mu; }
    /// Length n_states * n_actions reward vector Phi theta.
    VectorXd rewards() const { return features * theta; }

    /// Phi as a FeatureMap over state vectors holding the state index.
    FeatureMap feature_map() const;
};

/// Standard RiverSwim group dynamics, replicated `copies` times per group.
struct RiverSwimParams {
    std::size_t groups = 6;
    std::size_t copies = 6;
    double interior_advance = 0.35;
    double interior_stay = 0.6;
    double interior_retreat = 0.05;
    double left_end_stay = 0.6;
    double left_end_advance = 0.4;
    double right_end_stay = 0.6;
    double right_end_retreat = 0.4;
    double left_reward = 0.2;
    double right_reward = 1.0;
};

/// Action 0 swims left, action 1 swims right. State x belongs to group
/// x / copies. d = groups + 1.
TabularLinearMDP build_riverswim(const RiverSwimParams& params = {});

/// Features uniform on the simplex, Dirichlet(1,...,1) measures, uniform theta.
TabularLinearMDP build_random_linear(std::uint64_t seed, std::size_t n_states = 100, std::size_t n_actions = 2,
                                     Eigen::Index dim = 3);

/// One-hot linear embedding of an explicit kernel: Phi(x,a) = e_{x*nA+a},
/// mu rows are the kernel rows and theta is the reward table.
TabularLinearMDP tabular_from_kernel(std::size_t n_states, std::size_t n_actions, const MatrixXd& kernel,
                                     const VectorXd& rewards, std::string name = "explicit");

/// Returns a copy with a constant 1 coordinate prepended to Phi and 0 to mu, theta.
TabularLinearMDP augment_constant(const TabularLinearMDP& mdp);

struct Violation {
    std::string kind;  // "kernel_range", "row_sum", "reward_range", "feature_norm"
    std::size_t state = 0;
    std::size_t action = 0;
    std::optional<std::size_t> next_state;
    double value = 0.0;  // amount by which the bound is exceeded
};

struct ValidationReport {
    double max_kernel_range_violation = 0.0;
    double max_row_sum_error = 0.0;
    double max_reward_range_violation = 0.0;
    double max_feature_norm_excess = 0.0;
    std::vector<Violation> violations;

    bool clean() const { return violations.empty(); }
};

inline constexpr double kFeatureNormBound = 1.4142135623730951; // sqrt(2)

/// Checks kernel entries in [0,1], rows summing to 1, rewards in [-1,1] and
/// ||Phi|| <= sqrt(2). Violations larger than tol are listed with locations.
ValidationReport validate_linear(const TabularLinearMDP& mdp, double tol = 1e-10);

// ---------------------------------------------------------------------------
// Exact average-reward solvers
// ---------------------------------------------------------------------------

struct BellmanSolution {
    double j_star = 0.0;
    VectorXd v_star;   // centred: max + min = 0
    MatrixXd q_star;   // n_states x n_actions
    double span = 0.0;
    double residual = 0.0;
    std::size_t iterations = 0;

    /// Greedy deterministic policy (lowest index on ties) as an n_states x n_actions table.
    MatrixXd greedy_policy() const;
};

/**
 * Relative value iteration on the aperiodicity-transformed chain
 * 0.5 (P + I), reference state 0. Stops once the max Bellman violation of the
 * original equation is <= tol; throws ConvergenceError with the last residual
 * after max_iters sweeps.
 */
BellmanSolution solve_average_reward(const TabularLinearMDP& mdp, double tol = 1e-9,
                                     std::size_t max_iters = 1'000'000);

struct PolicyValue {
    double j_pi = 0.0;
    VectorXd v_pi;   // stationary mean zero
    MatrixXd q_pi;   // n_states x n_actions
    VectorXd stationary;
    double residual = 0.0;
};

/// Exact evaluation of a stochastic policy (n_states x n_actions, rows sum to
/// one) through the stationary distribution and the fundamental matrix.
PolicyValue solve_policy_value(const TabularLinearMDP& mdp, const MatrixXd& policy, double tol = 1e-9);

/// H-step optimal values V_1 by backward induction with V_{H+1} = 0.
VectorXd finite_horizon_values(const TabularLinearMDP& mdp, std::size_t horizon);

struct MixingReport {
    double t_mix_hat = 0.0;
    double sigma_hat = 0.0;
    std::size_t policies_evaluated = 0;
    /// Indices (0 = uniform, 1.. = sampled) of policies whose chain never contracted.
    std::vector<std::size_t> excluded;
};

/// Sample-based estimates over the uniform policy plus n_policies softmax
/// policies with standard-normal logits. t_mix_hat is the max and sigma_hat
/// the min over the sample, so neither is a certified bound.
MixingReport estimate_mixing_and_excitation(const TabularLinearMDP& mdp, std::size_t n_policies,
                                            std::uint64_t seed, std::size_t max_steps = 10'000);

// ---------------------------------------------------------------------------
// Cartpole
// ---------------------------------------------------------------------------

struct CartpoleParams {
    double gravity = 9.8;
    double cart_mass = 1.0;
    double pole_mass = 0.1;
    double half_length = 0.5;
    double force = 10.0;
    double dt = 0.02;
    double angle_limit_deg = 12.0;
    std::size_t max_episode_steps = 200;
    double reset_probability = 0.05;
    double init_range = 0.05;
    bool include_squares = true;
};

/// Average reward of a policy that always balances the full episode.
double cartpole_balanced_gain(const CartpoleParams& params = {});

/// Raw state features: the 4 variables followed by pairwise products
/// (with or without squares). The absorbing state maps to the zero vector.
/// `state` is (x, x_dot, theta, theta_dot, absorbing_flag).
VectorXd cartpole_base_features(const StateVector& state, bool include_squares);
Eigen::Index cartpole_base_dim(bool include_squares);

/// Block-per-action encoding of cartpole_base_features (2 actions).
FeatureMap cartpole_feature_map(const CartpoleParams& params);

/// Samples block-encoded feature vectors (columns) for MVEE construction from
/// states uniform over the operating box, both actions each.
MatrixXd cartpole_feature_samples(const CartpoleParams& params, std::size_t n_states, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Runtime environments
// ---------------------------------------------------------------------------

struct Observation {
    /// Discrete state identifier (tabular environments only).
    std::optional<std::size_t> state_id;
    StateVector state;
    /// d x n_actions; column a is the agent-visible Phi(x, a).
    MatrixXd features;
};

struct EnvStep {
    Observation next;
    double reward = 0.0;
    /// True when the transition entered the cartpole absorbing state.
    bool episode_boundary = false;
};

class Environment {
public:
    virtual ~Environment() = default;
    virtual std::string name() const = 0;
    virtual std::size_t n_actions() const = 0;
    virtual Eigen::Index feature_dim() const = 0;
    virtual const Observation& current() const = 0;
    virtual EnvStep step(std::size_t action) = 0;
    virtual double reward_min() const { return -1.0; }
    virtual double reward_max() const { return 1.0; }
};

/// Samples a TabularLinearMDP. Agents observe `agent_features`, which may
/// differ from the MDP's own Phi (augmentation, normalisation).
class TabularEnvironment : public Environment {
public:
    TabularEnvironment(std::shared_ptr<const TabularLinearMDP> mdp, FeatureMap agent_features, std::uint64_t seed,
                       std::size_t initial_state = 0);

    std::string name() const override { return mdp_->name; }
    std::size_t n_actions() const override { return mdp_->n_actions; }
    Eigen::Index feature_dim() const override { return agent_features_.dim(); }
    const Observation& current() const override { return observations_[state_]; }
    EnvStep step(std::size_t action) override;

    std::size_t state() const { return state_; }

private:
    std::shared_ptr<const TabularLinearMDP> mdp_;
    FeatureMap agent_features_;
    Rng rng_;
    std::size_t state_;
    MatrixXd cumulative_;  // row-wise cumulative transition probabilities
    VectorXd rewards_;
    std::vector<Observation> observations_;
};

/// Infinite-horizon cart-pole: balanced episodes of at most max_episode_steps,
/// then a zero-reward absorbing state left with probability reset_probability.
class CartpoleEnvironment : public Environment {
public:
    CartpoleEnvironment(CartpoleParams params, FeatureMap agent_features, std::uint64_t seed);

    std::string name() const override { return "cartpole"; }
    std::size_t n_actions() const override { return 2; }
    Eigen::Index feature_dim() const override { return agent_features_.dim(); }
    const Observation& current() const override { return current_; }
    EnvStep step(std::size_t action) override;
    double reward_min() const override { return 0.0; }
    double reward_max() const override { return 1.0; }

    bool absorbing() const { return absorbing_; }
    std::size_t episode_step() const { return episode_step_; }

private:
    void begin_episode();
    void refresh_observation();

    CartpoleParams params_;
    FeatureMap agent_features_;
    Rng rng_;
    Eigen::Vector4d physics_ = Eigen::Vector4d::Zero();
    bool absorbing_ = false;
    std::size_t episode_step_ = 0;
    Observation current_;
};

// ---------------------------------------------------------------------------
// Environment description files
// ---------------------------------------------------------------------------

struct CartpoleDescription {
    CartpoleParams params;
    std::uint64_t seed = 0;
    std::optional<EllipsoidTransform> transform;
};

struct EnvironmentDescription {
    std::optional<TabularLinearMDP> tabular;
    std::optional<CartpoleDescription> cartpole;
};

/// JSON text; write -> read -> write is byte-identical.
std::string write_environment(const EnvironmentDescription& env);
EnvironmentDescription read_environment(const std::string& text);
void save_environment(const EnvironmentDescription& env, const std::string& path);
EnvironmentDescription load_environment(const std::string& path);

std::string write_transform(const EllipsoidTransform& transform);
EllipsoidTransform read_transform(const std::string& text);

} // namespace avgrl
