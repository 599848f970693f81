#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "avgrl/envs.hpp"
#include "avgrl/linalg.hpp"
#include "avgrl/random.hpp"

namespace avgrl {

/**
 * Learning protocol: at every step t = 1, 2, ... the harness calls act()
 * once, steps the environment, then calls observe() once with the outcome.
 * Given the same seed and observations, act() returns the same actions.
 */
class Agent {
public:
    virtual ~Agent() = default;
    virtual std::string name() const = 0;
    virtual std::size_t act(std::uint64_t t, const Observation& x) = 0;
    virtual void observe(const Observation& x, std::size_t action, double reward, const Observation& next) = 0;
    /// False once any internal quantity became NaN or infinite.
    virtual bool finite() const { return true; }
};

/// Index of the largest entry, lowest index on ties.
std::size_t argmax_lowest(const VectorXd& values);

// ---------------------------------------------------------------------------
// Transition statistics shared by the least-squares agents
// ---------------------------------------------------------------------------

/**
 * Sufficient statistics of a transition history {(phi_t, r_t, x_{t+1})} for
 * targets of the form  sum_t phi_t (r_t + f(x_{t+1})):
 *   phi_reward = sum phi_t r_t,  phi_sum = sum phi_t,
 * and one bucket per distinct next state holding G_b = sum of phi_t that
 * landed there, next to that state's per-action feature matrix.
 * Observations with a state_id share buckets; continuous states get one each.
 */
class TransitionSums {
public:
    TransitionSums(Eigen::Index dim, std::size_t n_actions);

    void add(const VectorXd& phi, double reward, const Observation& next);

    Eigen::Index dim() const { return dim_; }
    std::size_t n_actions() const { return n_actions_; }
    std::size_t size() const { return count_; }
    std::size_t buckets() const { return bucket_count_; }

    const VectorXd& phi_reward() const { return phi_reward_; }
    const VectorXd& phi_sum() const { return phi_sum_; }

    /// d x (buckets * n_actions); bucket b occupies columns [b*nA, (b+1)*nA).
    Eigen::Map<const MatrixXd> next_features() const;
    /// d x buckets matrix of G_b.
    Eigen::Map<const MatrixXd> bucket_sums() const;

    /// max_a Phi(x_b, a)^T w for every bucket.
    VectorXd greedy_values(const VectorXd& w) const;

private:
    Eigen::Index dim_;
    std::size_t n_actions_;
    std::size_t count_ = 0;
    std::size_t bucket_count_ = 0;
    VectorXd phi_reward_;
    VectorXd phi_sum_;
    std::vector<double> features_;
    std::vector<double> sums_;
    std::unordered_map<std::size_t, std::size_t> by_id_;
};

// ---------------------------------------------------------------------------
// FOPO
// ---------------------------------------------------------------------------

struct FopoSolution {
    VectorXd w;
    double j = -1.0;
    VectorXd b;
    bool feasible = false;
};

/**
 * Grid search over J in {-1, -1 + res, ..., 1}, from the top down. For each J
 * the projected fixed-point iteration
 *     w <- Proj_{||w|| <= w_cap} Lambda^{-1} sum phi (r - J + max_a Phi(x', a)^T w)
 * runs fp_iters rounds from `warm_start`; J is certified when the implied
 * slack b = w - Lambda^{-1} sum(...) has ||b||_Lambda <= beta. Returns the
 * first certified J, or feasible = false with J = -1, w = 0.
 */
FopoSolution fopo_solve(const TransitionSums& history, const Covariance& lambda, double beta, double w_cap,
                        double grid_resolution, std::size_t fp_iters, const VectorXd& warm_start);

struct FopoConfig {
    std::uint64_t t_total = 1;
    double span = 0.0;       // span(v*) used by beta and the weight cap
    double delta = 0.01;
    double ridge = 1.0;
    double beta = 0.0;       // > 0 overrides 20 (2 + span) d sqrt(ln(T/delta))
    double beta_scale = 1.0;
    double grid_resolution = 0.01;
    std::size_t fp_iters = 200;
};

double fopo_beta(double span, Eigen::Index d, std::uint64_t t_total, double delta);

class FopoAgent : public Agent {
public:
    FopoAgent(Eigen::Index dim, std::size_t n_actions, const FopoConfig& config);

    std::string name() const override { return "fopo"; }
    std::size_t act(std::uint64_t t, const Observation& x) override;
    void observe(const Observation& x, std::size_t action, double reward, const Observation& next) override;
    bool finite() const override;

    const VectorXd& w() const { return w_; }
    double j() const { return j_; }
    const VectorXd& b() const { return b_; }
    double beta() const { return beta_; }
    double w_cap() const { return w_cap_; }
    std::uint64_t last_update() const { return s_; }
    std::size_t resolves() const { return j_history_.size(); }
    /// J returned by every solver invocation, in order.
    const std::vector<double>& j_history() const { return j_history_; }
    std::size_t infeasible_solves() const { return infeasible_; }
    const Covariance& lambda() const { return lambda_now_; }

private:
    FopoConfig config_;
    double beta_;
    double w_cap_;
    VectorXd w_;
    double j_ = 1.0;
    VectorXd b_;
    Covariance lambda_now_;
    Covariance lambda_at_update_;
    std::uint64_t s_ = 0;
    TransitionSums history_;
    std::vector<double> j_history_;
    std::size_t infeasible_ = 0;
};

// ---------------------------------------------------------------------------
// OLSVI.FH
// ---------------------------------------------------------------------------

/// max{ sqrt(span) T^{1/4} / d^{3/4}, (span T / d^2)^{1/3} }, rounded, floored at 2, capped at T.
std::size_t olsvi_horizon(double span, std::uint64_t t_total, Eigen::Index d);

double olsvi_beta(Eigen::Index d, std::size_t horizon, std::uint64_t t_total, double delta);

struct OlsviConfig {
    std::uint64_t t_total = 1;
    double span = 0.0;
    double delta = 0.01;
    double ridge = 1.0;
    std::size_t horizon = 0;  // 0: olsvi_horizon
    double beta = 0.0;        // > 0 overrides 40 d H sqrt(ln(T/delta))
    double beta_scale = 1.0;
};

class OlsviAgent : public Agent {
public:
    OlsviAgent(Eigen::Index dim, std::size_t n_actions, const OlsviConfig& config);

    std::string name() const override { return "olsvi"; }
    std::size_t act(std::uint64_t t, const Observation& x) override;
    void observe(const Observation& x, std::size_t action, double reward, const Observation& next) override;
    bool finite() const override;

    /// Backward induction for the current episode over all completed episodes.
    void plan();

    /// Q_h(x, .) = min{ w_h^T Phi + beta ||Phi||_{Lambda^{-1}}, H } for h in 1..H.
    VectorXd q_values(std::size_t h, const MatrixXd& features) const;

    std::size_t horizon() const { return horizon_; }
    double beta() const { return beta_; }
    /// w_1 ... w_H of the current episode (index 0 is w_1).
    const std::vector<VectorXd>& weights() const { return weights_; }
    const Covariance& lambda() const { return lambda_; }
    std::size_t episodes_planned() const { return episodes_planned_; }

private:
    struct Pending {
        VectorXd phi;
        double reward;
        Observation next;
    };
    void flush_episode();

    OlsviConfig config_;
    std::size_t horizon_;
    double beta_;
    Covariance lambda_;
    MatrixXd lambda_inv_;
    std::vector<VectorXd> weights_;
    TransitionSums data_;
    std::vector<Pending> episode_;
    std::size_t step_in_episode_ = 0;
    std::size_t episodes_planned_ = 0;
};

// ---------------------------------------------------------------------------
// MDP-Exp2
// ---------------------------------------------------------------------------

struct Exp2Schedule {
    std::size_t n_len = 1;   // trajectory length N
    std::size_t b_len = 2;   // epoch length B, a multiple of 2N
    double eta = 0.0;
    double gate = 0.0;       // lambda_min(M_k) threshold
};

/// N = ceil(8 t_mix ln T), B = 32 N ln(dT) / sigma rounded up to a multiple of
/// 2N, eta = min{ sqrt(1 / (T t_mix)), sigma / (24 N) }, gate = B sigma / (24 N).
/// Real-valued T and d are accepted; no feasibility check.
Exp2Schedule exp2_schedule_values(double t_total, double t_mix, double sigma, double d);

/// As exp2_schedule_values; throws ConfigError when B > T.
Exp2Schedule exp2_schedule(std::uint64_t t_total, double t_mix, double sigma, Eigen::Index d);

/// Phase i of the unknown-parameter variant: W = 64 * 2^i, N = ceil(W^{0.4 xi}),
/// B = W^{0.8 xi} rounded up to a multiple of 2N, eta = 1 / sqrt(W^{0.4 xi} W),
/// gate = (4/3) ln(dW).
struct DoublingPhase {
    std::uint64_t phase_length = 64;
    Exp2Schedule schedule;
};
DoublingPhase doubling_schedule(std::size_t phase, double xi, Eigen::Index d);

/// Rounds B down to a multiple of 2N (never below 2N).
std::size_t round_epoch_length(std::size_t b_len, std::size_t n_len);

/// (1 - mix) softmax(eta Phi^T W) + mix uniform, column a of `features` is Phi(x, a).
VectorXd exp2_policy(const MatrixXd& features, const VectorXd& score_sum, double eta, double mix_mu);

struct TrajectoryRecord {
    MatrixXd start_features;   // d x n_actions at x_tau
    VectorXd start_policy;     // pi_k(. | x_tau)
    std::size_t action = 0;    // a_tau
    double reward_sum = 0.0;   // R_{k,m}
};

struct EpochEstimate {
    VectorXd w;
    double min_eigenvalue = 0.0;
    bool gate_passed = false;
};

/// M_k = sum_m sum_a pi(a|x) Phi Phi^T; w_k = M_k^{-1} sum_m Phi(x, a_tau) R if
/// lambda_min(M_k) >= gate, else 0. Requires exactly B / (2N) records.
EpochEstimate exp2_epoch_finish(const std::vector<TrajectoryRecord>& records, std::size_t n_len, std::size_t b_len,
                                double gate);

struct Exp2Config {
    std::size_t n_len = 10;
    std::size_t b_len = 100;
    double eta = 10.0;
    double mix_mu = 0.0;
    double sigma = 0.0;                  // gate = B sigma / (24 N) unless overridden
    std::optional<double> gate_override;
    bool retain_estimators = false;
    bool doubling = false;               // ignore n_len/b_len/eta; use doubling_schedule
    double xi = 0.5;
};

class Exp2Agent : public Agent {
public:
    Exp2Agent(Eigen::Index dim, std::size_t n_actions, const Exp2Config& config, std::uint64_t seed);

    std::string name() const override { return "mdp-exp2"; }
    std::size_t act(std::uint64_t t, const Observation& x) override;
    void observe(const Observation& x, std::size_t action, double reward, const Observation& next) override;
    bool finite() const override;

    VectorXd policy(const MatrixXd& features) const;

    const VectorXd& score_sum() const { return score_sum_; }
    const std::vector<VectorXd>& estimators() const { return estimators_; }
    const Exp2Schedule& schedule() const { return schedule_; }
    std::size_t epochs_finished() const { return epochs_; }
    std::size_t gate_failures() const { return gate_failures_; }
    std::size_t phase() const { return phase_; }

private:
    void start_phase(std::size_t phase);

    Exp2Config config_;
    Eigen::Index dim_;
    Rng rng_;
    Exp2Schedule schedule_;
    VectorXd score_sum_;
    std::vector<VectorXd> estimators_;
    std::vector<TrajectoryRecord> records_;
    std::size_t offset_ = 0;          // position within the epoch
    std::size_t epochs_ = 0;
    std::size_t gate_failures_ = 0;
    std::size_t phase_ = 0;
    std::uint64_t phase_length_ = 0;
    std::uint64_t phase_steps_ = 0;
};

// ---------------------------------------------------------------------------
// Reference agents
// ---------------------------------------------------------------------------

class FixedActionAgent : public Agent {
public:
    explicit FixedActionAgent(std::size_t action) : action_(action) {}
    std::string name() const override { return "fixed"; }
    std::size_t act(std::uint64_t, const Observation&) override { return action_; }
    void observe(const Observation&, std::size_t, double, const Observation&) override {}

private:
    std::size_t action_;
};

class UniformRandomAgent : public Agent {
public:
    UniformRandomAgent(std::size_t n_actions, std::uint64_t seed) : n_actions_(n_actions), rng_(seed) {}
    std::string name() const override { return "uniform"; }
    std::size_t act(std::uint64_t, const Observation&) override { return rng_.index(n_actions_); }
    void observe(const Observation&, std::size_t, double, const Observation&) override {}

private:
    std::size_t n_actions_;
    Rng rng_;
};

/// Delegates act() to a callable; for scripted controllers in experiments and tests.
class ScriptedAgent : public Agent {
public:
    using Policy = std::function<std::size_t(std::uint64_t, const Observation&)>;
    explicit ScriptedAgent(Policy policy, std::string name = "scripted")
        : policy_(std::move(policy)), name_(std::move(name)) {}
    std::string name() const override { return name_; }
    std::size_t act(std::uint64_t t, const Observation& x) override { return policy_(t, x); }
    void observe(const Observation&, std::size_t, double, const Observation&) override {}

private:
    Policy policy_;
    std::string name_;
};

} // namespace avgrl
