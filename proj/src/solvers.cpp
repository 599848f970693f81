#include <algorithm>
#include <cmath>
#include <limits>

#include "avgrl/envs.hpp"

namespace avgrl {

namespace {

// Max over actions of a (S*A) vector laid out state-major, per state.
VectorXd max_over_actions(const VectorXd& q, std::size_t n_states, std::size_t n_actions) {
    const Eigen::Map<const MatrixXd> table(q.data(), Eigen::Index(n_actions), Eigen::Index(n_states));
    return table.colwise().maxCoeff().transpose();
}

MatrixXd as_state_action_table(const VectorXd& q, std::size_t n_states, std::size_t n_actions) {
    const Eigen::Map<const MatrixXd> table(q.data(), Eigen::Index(n_actions), Eigen::Index(n_states));
    return table.transpose();
}

MatrixXd policy_kernel(const MatrixXd& p, const MatrixXd& policy, std::size_t n_states, std::size_t n_actions) {
    MatrixXd out = MatrixXd::Zero(Eigen::Index(n_states), Eigen::Index(n_states));
    for (std::size_t x = 0; x < n_states; ++x) {
        for (std::size_t a = 0; a < n_actions; ++a) {
            const double w = policy(Eigen::Index(x), Eigen::Index(a));
            if (w != 0.0) out.row(Eigen::Index(x)) += w * p.row(Eigen::Index(x * n_actions + a));
        }
    }
    return out;
}

// Solves nu^T P = nu^T, sum nu = 1 in the least-squares sense.
VectorXd stationary_distribution(const MatrixXd& p_pi) {
    const Eigen::Index n = p_pi.rows();
    MatrixXd system(n + 1, n);
    system.topRows(n) = p_pi.transpose() - MatrixXd::Identity(n, n);
    system.row(n).setOnes();
    VectorXd rhs = VectorXd::Zero(n + 1);
    rhs(n) = 1.0;
    return system.colPivHouseholderQr().solve(rhs);
}

void check_policy(const TabularLinearMDP& mdp, const MatrixXd& policy) {
    if (policy.rows() != Eigen::Index(mdp.n_states) || policy.cols() != Eigen::Index(mdp.n_actions)) {
        throw InvalidInput("policy table must be n_states x n_actions");
    }
    if ((policy.array() < 0.0).any() || ((policy.rowwise().sum().array() - 1.0).abs() > 1e-9).any()) {
        throw InvalidInput("policy rows must be distributions");
    }
}

} // namespace

MatrixXd BellmanSolution::greedy_policy() const {
    MatrixXd pi = MatrixXd::Zero(q_star.rows(), q_star.cols());
    for (Eigen::Index x = 0; x < q_star.rows(); ++x) {
        Eigen::Index best = 0;
        for (Eigen::Index a = 1; a < q_star.cols(); ++a) {
            if (q_star(x, a) > q_star(x, best)) best = a;
        }
        pi(x, best) = 1.0;
    }
    return pi;
}

BellmanSolution solve_average_reward(const TabularLinearMDP& mdp, double tol, std::size_t max_iters) {
    const MatrixXd p = mdp.transitions();
    const VectorXd r = mdp.rewards();
    const std::size_t n_s = mdp.n_states;
    const std::size_t n_a = mdp.n_actions;
    constexpr double kLaziness = 0.5;

    VectorXd v = VectorXd::Zero(Eigen::Index(n_s));
    VectorXd q;
    VectorXd diff;
    double residual = std::numeric_limits<double>::infinity();
    std::size_t it = 0;
    for (;; ++it) {
        q = r + p * v;
        diff = max_over_actions(q, n_s, n_a) - v;
        residual = (diff.maxCoeff() - diff.minCoeff()) / 2.0;
        if (residual <= tol) break;
        if (it >= max_iters) {
            throw ConvergenceError("relative value iteration did not converge (residual " +
                                       std::to_string(residual) + ")",
                                   residual);
        }
        v += kLaziness * diff;
        v.array() -= v(0);
    }

    BellmanSolution sol;
    sol.j_star = (diff.maxCoeff() + diff.minCoeff()) / 2.0;
    const double centre = (v.maxCoeff() + v.minCoeff()) / 2.0;
    sol.v_star = v.array() - centre;
    sol.q_star = as_state_action_table(q, n_s, n_a).array() - sol.j_star - centre;
    sol.span = sol.v_star.maxCoeff() - sol.v_star.minCoeff();
    sol.residual = residual;
    sol.iterations = it;
    return sol;
}

PolicyValue solve_policy_value(const TabularLinearMDP& mdp, const MatrixXd& policy, double tol) {
    check_policy(mdp, policy);
    const std::size_t n_s = mdp.n_states;
    const std::size_t n_a = mdp.n_actions;
    const MatrixXd p = mdp.transitions();
    const VectorXd r = mdp.rewards();
    const MatrixXd p_pi = policy_kernel(p, policy, n_s, n_a);
    VectorXd r_pi(static_cast<Eigen::Index>(n_s));
    for (std::size_t x = 0; x < n_s; ++x) {
        r_pi(Eigen::Index(x)) = policy.row(Eigen::Index(x)).dot(
            r.segment(Eigen::Index(x * n_a), Eigen::Index(n_a)));
    }

    PolicyValue out;
    out.stationary = stationary_distribution(p_pi);
    out.j_pi = out.stationary.dot(r_pi);
    const auto n = Eigen::Index(n_s);
    const MatrixXd fundamental =
        MatrixXd::Identity(n, n) - p_pi + VectorXd::Ones(n) * out.stationary.transpose();
    out.v_pi = fundamental.fullPivLu().solve(r_pi - out.j_pi * VectorXd::Ones(n));

    const VectorXd q = r + p * out.v_pi;
    out.q_pi = as_state_action_table(q, n_s, n_a).array() - out.j_pi;
    const VectorXd bellman = (out.j_pi + out.v_pi.array()).matrix() - r_pi - p_pi * out.v_pi;
    const double stationarity = (p_pi.transpose() * out.stationary - out.stationary).cwiseAbs().maxCoeff();
    out.residual = std::max({bellman.cwiseAbs().maxCoeff(), stationarity,
                             std::max(0.0, -out.stationary.minCoeff())});
    if (!(out.residual <= tol)) {
        throw ConvergenceError("policy evaluation failed (residual " + std::to_string(out.residual) +
                                   "); the policy chain may be multichain",
                               out.residual);
    }
    return out;
}

VectorXd finite_horizon_values(const TabularLinearMDP& mdp, std::size_t horizon) {
    const MatrixXd p = mdp.transitions();
    const VectorXd r = mdp.rewards();
    VectorXd v = VectorXd::Zero(Eigen::Index(mdp.n_states));
    for (std::size_t h = horizon; h >= 1; --h) {
        v = max_over_actions(r + p * v, mdp.n_states, mdp.n_actions);
    }
    return v;
}

namespace {

double max_pairwise_tv(const MatrixXd& q) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < q.rows(); ++j) {
            worst = std::max(worst, 0.5 * (q.row(i) - q.row(j)).cwiseAbs().sum());
        }
    }
    return worst;
}

} // namespace

MixingReport estimate_mixing_and_excitation(const TabularLinearMDP& mdp, std::size_t n_policies,
                                            std::uint64_t seed, std::size_t max_steps) {
    const std::size_t n_s = mdp.n_states;
    const std::size_t n_a = mdp.n_actions;
    const MatrixXd p = mdp.transitions();
    Rng rng(derive_seed(seed, kBuildStream));

    MixingReport report;
    report.sigma_hat = std::numeric_limits<double>::infinity();
    const double threshold = std::exp(-1.0);
    for (std::size_t k = 0; k <= n_policies; ++k) {
        MatrixXd policy(static_cast<Eigen::Index>(n_s), static_cast<Eigen::Index>(n_a));
        if (k == 0) {
            policy.setConstant(1.0 / double(n_a));
        } else {
            for (Eigen::Index x = 0; x < policy.rows(); ++x) {
                for (Eigen::Index a = 0; a < policy.cols(); ++a) policy(x, a) = rng.normal();
                const double top = policy.row(x).maxCoeff();
                policy.row(x) = (policy.row(x).array() - top).exp();
                policy.row(x) /= policy.row(x).sum();
            }
        }
        const MatrixXd p_pi = policy_kernel(p, policy, n_s, n_a);
        MatrixXd power = p_pi;
        std::size_t t = 1;
        bool contracted = false;
        for (; t <= max_steps; ++t) {
            if (max_pairwise_tv(power) <= threshold) {
                contracted = true;
                break;
            }
            power = power * p_pi;
        }
        if (!contracted) {
            report.excluded.push_back(k);
            continue;
        }
        ++report.policies_evaluated;
        report.t_mix_hat = std::max(report.t_mix_hat, double(t));

        const VectorXd nu = stationary_distribution(p_pi);
        MatrixXd moment = MatrixXd::Zero(mdp.dim(), mdp.dim());
        for (std::size_t x = 0; x < n_s; ++x) {
            for (std::size_t a = 0; a < n_a; ++a) {
                const VectorXd phi = mdp.phi(x, a);
                moment += nu(Eigen::Index(x)) * policy(Eigen::Index(x), Eigen::Index(a)) * phi * phi.transpose();
            }
        }
        report.sigma_hat = std::min(report.sigma_hat, min_eigenvalue(moment));
    }
    if (report.policies_evaluated == 0) report.sigma_hat = 0.0;
    return report;
}

} // namespace avgrl
