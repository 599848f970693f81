#include <cmath>

#include "avgrl/agents.hpp"

namespace avgrl {

namespace {

void project_to_ball(VectorXd& w, double radius) {
    const double n = w.norm();
    if (n > radius) w *= radius / n;
}

// Lambda^{-1} sum_t phi_t (r_t - J + max_a Phi(x_{t+1}, a)^T w)
VectorXd fixed_point_target(const TransitionSums& h, const Covariance& lambda, double j, const VectorXd& w) {
    VectorXd rhs = h.phi_reward() - j * h.phi_sum();
    if (h.buckets() > 0) rhs.noalias() += h.bucket_sums() * h.greedy_values(w);
    return lambda.solve(rhs);
}

} // namespace

double fopo_beta(double span, Eigen::Index d, std::uint64_t t_total, double delta) {
    return 20.0 * (2.0 + span) * double(d) * std::sqrt(std::log(double(t_total) / delta));
}

FopoSolution fopo_solve(const TransitionSums& history, const Covariance& lambda, double beta, double w_cap,
                        double grid_resolution, std::size_t fp_iters, const VectorXd& warm_start) {
    const Eigen::Index d = lambda.dim();
    detail::require_dim(d, history.dim(), "fopo_solve");
    detail::require_dim(d, warm_start.size(), "fopo_solve warm start");
    if (!(grid_resolution > 0.0) || grid_resolution > 2.0) throw InvalidInput("fopo_solve: bad grid resolution");

    const auto steps = static_cast<long>(std::floor(2.0 / grid_resolution + 1e-9));
    for (long i = steps; i >= 0; --i) {
        const double j = std::min(1.0, -1.0 + double(i) * grid_resolution);
        VectorXd w = warm_start;
        project_to_ball(w, w_cap);
        for (std::size_t k = 0; k < fp_iters; ++k) {
            w = fixed_point_target(history, lambda, j, w);
            project_to_ball(w, w_cap);
        }
        VectorXd b = w - fixed_point_target(history, lambda, j, w);
        if (lambda.weighted_norm(b) <= beta) return {std::move(w), j, std::move(b), true};
    }
    return {VectorXd::Zero(d), -1.0, VectorXd::Zero(d), false};
}

FopoAgent::FopoAgent(Eigen::Index dim, std::size_t n_actions, const FopoConfig& config)
    : config_(config),
      beta_(config.beta > 0.0 ? config.beta : fopo_beta(config.span, dim, config.t_total, config.delta)),
      w_cap_((2.0 + config.span) * std::sqrt(double(dim))),
      w_(VectorXd::Zero(dim)),
      b_(VectorXd::Zero(dim)),
      lambda_now_(dim, config.ridge),
      lambda_at_update_(dim, config.ridge),
      history_(dim, n_actions) {
    beta_ *= config.beta_scale;
    if (config.fp_iters == 0) throw InvalidInput("fopo: fp_iters must be positive");
}

std::size_t FopoAgent::act(std::uint64_t t, const Observation& x) {
    if (j_history_.empty() || det_ratio_exceeds(lambda_now_, lambda_at_update_, 2.0)) {
        FopoSolution sol =
            fopo_solve(history_, lambda_now_, beta_, w_cap_, config_.grid_resolution, config_.fp_iters, w_);
        j_history_.push_back(sol.j);
        if (sol.feasible) {
            w_ = std::move(sol.w);
            j_ = sol.j;
            b_ = std::move(sol.b);
        } else {
            ++infeasible_;
        }
        s_ = t;
        lambda_at_update_ = lambda_now_;
    }
    return argmax_lowest(x.features.transpose() * w_);
}

void FopoAgent::observe(const Observation& x, std::size_t action, double reward, const Observation& next) {
    const VectorXd phi = x.features.col(Eigen::Index(action));
    lambda_now_.absorb(phi);
    history_.add(phi, reward, next);
}

bool FopoAgent::finite() const { return w_.allFinite() && std::isfinite(j_) && b_.allFinite(); }

} // namespace avgrl
