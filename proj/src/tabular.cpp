#include <algorithm>
#include <cmath>
#include <utility>

#include "avgrl/envs.hpp"

namespace avgrl {

FeatureMap TabularLinearMDP::feature_map() const {
    auto table = std::make_shared<const MatrixXd>(features);
    const std::size_t n_a = n_actions;
    const std::size_t n_s = n_states;
    auto evaluator = [table, n_a, n_s](const StateVector& x, std::size_t a) {
        const auto s = std::size_t(x(0));
        if (s >= n_s) throw InvalidInput("tabular feature map: state out of range");
        return VectorXd(table->row(Eigen::Index(s * n_a + a)).transpose());
    };
    const double bound = std::max(1e-12, features.rowwise().norm().maxCoeff());
    const bool constant = dim() > 0 && (features.col(0).array() == 1.0).all();
    return FeatureMap(dim(), n_actions, bound, constant, evaluator);
}

namespace {

// Distribution over destination groups for (group, action).
VectorXd riverswim_group_kernel(const RiverSwimParams& p, std::size_t g, std::size_t a) {
    VectorXd out = VectorXd::Zero(Eigen::Index(p.groups));
    const std::size_t last = p.groups - 1;
    if (a == 0) {
        out(Eigen::Index(g == 0 ? 0 : g - 1)) = 1.0;
    } else if (g == 0) {
        out(0) += p.left_end_stay;
        out(1) += p.left_end_advance;
    } else if (g == last) {
        out(Eigen::Index(last)) += p.right_end_stay;
        out(Eigen::Index(last - 1)) += p.right_end_retreat;
    } else {
        out(Eigen::Index(g + 1)) += p.interior_advance;
        out(Eigen::Index(g)) += p.interior_stay;
        out(Eigen::Index(g - 1)) += p.interior_retreat;
    }
    return out;
}

} // namespace

TabularLinearMDP build_riverswim(const RiverSwimParams& p) {
    if (p.groups < 2 || p.copies < 1) throw InvalidInput("build_riverswim: need >= 2 groups and >= 1 copy");
    TabularLinearMDP mdp;
    mdp.name = "riverswim";
    mdp.n_states = p.groups * p.copies;
    mdp.n_actions = 2;
    const auto d = Eigen::Index(p.groups + 1);
    mdp.features = MatrixXd::Zero(Eigen::Index(mdp.n_states * 2), d);
    for (std::size_t x = 0; x < mdp.n_states; ++x) {
        const std::size_t g = x / p.copies;
        for (std::size_t a = 0; a < 2; ++a) {
            const auto row = Eigen::Index(mdp.row(x, a));
            mdp.features.row(row).head(d - 1) = riverswim_group_kernel(p, g, a).transpose();
            double r = 0.0;
            if (a == 0 && g == 0) r = p.left_reward;
            if (a == 1 && g == p.groups - 1) r = p.right_reward;
            mdp.features(row, d - 1) = r;
        }
    }
    mdp.mu = MatrixXd::Zero(d, Eigen::Index(mdp.n_states));
    for (std::size_t x = 0; x < mdp.n_states; ++x) {
        mdp.mu(Eigen::Index(x / p.copies), Eigen::Index(x)) = 1.0 / double(p.copies);
    }
    mdp.theta = VectorXd::Zero(d);
    mdp.theta(d - 1) = 1.0;
    mdp.parameters = {
        {"groups", double(p.groups)},
        {"copies", double(p.copies)},
        {"interior_advance", p.interior_advance},
        {"interior_stay", p.interior_stay},
        {"interior_retreat", p.interior_retreat},
        {"left_end_stay", p.left_end_stay},
        {"left_end_advance", p.left_end_advance},
        {"right_end_stay", p.right_end_stay},
        {"right_end_retreat", p.right_end_retreat},
        {"left_reward", p.left_reward},
        {"right_reward", p.right_reward},
    };
    return mdp;
}

namespace {

// Uniform draw from the probability simplex of the given size.
VectorXd dirichlet_ones(Rng& rng, Eigen::Index n) {
    VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.exponential();
    return v / v.sum();
}

} // namespace

TabularLinearMDP build_random_linear(std::uint64_t seed, std::size_t n_states, std::size_t n_actions,
                                     Eigen::Index dim) {
    if (n_states == 0 || n_actions == 0 || dim <= 0) throw InvalidInput("build_random_linear: empty dimensions");
    Rng rng(derive_seed(seed, kBuildStream));
    TabularLinearMDP mdp;
    mdp.name = "random-linear";
    mdp.seed = seed;
    mdp.n_states = n_states;
    mdp.n_actions = n_actions;
    mdp.features.resize(Eigen::Index(n_states * n_actions), dim);
    for (Eigen::Index r = 0; r < mdp.features.rows(); ++r) mdp.features.row(r) = dirichlet_ones(rng, dim).transpose();
    mdp.mu.resize(dim, Eigen::Index(n_states));
    for (Eigen::Index i = 0; i < dim; ++i) mdp.mu.row(i) = dirichlet_ones(rng, Eigen::Index(n_states)).transpose();
    mdp.theta.resize(dim);
    for (Eigen::Index i = 0; i < dim; ++i) mdp.theta(i) = rng.uniform();
    const double top = mdp.rewards().maxCoeff();
    if (top > 1.0) mdp.theta /= top;
    mdp.parameters = {
        {"n_states", double(n_states)},
        {"n_actions", double(n_actions)},
        {"dim", double(dim)},
    };
    return mdp;
}

TabularLinearMDP tabular_from_kernel(std::size_t n_states, std::size_t n_actions, const MatrixXd& kernel,
                                     const VectorXd& rewards, std::string name) {
    const auto pairs = Eigen::Index(n_states * n_actions);
    if (kernel.rows() != pairs || kernel.cols() != Eigen::Index(n_states) || rewards.size() != pairs) {
        throw InvalidInput("tabular_from_kernel: kernel must be (S*A) x S and rewards length S*A");
    }
    TabularLinearMDP mdp;
    mdp.name = std::move(name);
    mdp.n_states = n_states;
    mdp.n_actions = n_actions;
    mdp.features = MatrixXd::Identity(pairs, pairs);
    mdp.mu = kernel;
    mdp.theta = rewards;
    return mdp;
}

TabularLinearMDP augment_constant(const TabularLinearMDP& mdp) {
    if (mdp.dim() > 0 && (mdp.features.col(0).array() == 1.0).all()) {
        throw InvalidInput("augment_constant: MDP features already have a constant coordinate");
    }
    TabularLinearMDP out = mdp;
    const Eigen::Index d = mdp.dim();
    out.features.resize(mdp.features.rows(), d + 1);
    out.features.col(0).setOnes();
    out.features.rightCols(d) = mdp.features;
    out.mu = MatrixXd::Zero(d + 1, mdp.mu.cols());
    out.mu.bottomRows(d) = mdp.mu;
    out.theta = VectorXd::Zero(d + 1);
    out.theta.tail(d) = mdp.theta;
    if (out.transform) out.transform.reset();
    return out;
}

ValidationReport validate_linear(const TabularLinearMDP& mdp, double tol) {
    ValidationReport report;
    auto note = [&](std::string kind, std::size_t x, std::size_t a, std::optional<std::size_t> next, double v) {
        report.violations.push_back({std::move(kind), x, a, next, v});
    };
    const auto pairs = Eigen::Index(mdp.n_states * mdp.n_actions);
    if (mdp.features.rows() != pairs || mdp.mu.cols() != Eigen::Index(mdp.n_states) ||
        mdp.mu.rows() != mdp.dim() || mdp.theta.size() != mdp.dim()) {
        throw InvalidInput("validate_linear: inconsistent table shapes");
    }
    const MatrixXd p = mdp.transitions();
    const VectorXd r = mdp.rewards();
    for (std::size_t x = 0; x < mdp.n_states; ++x) {
        for (std::size_t a = 0; a < mdp.n_actions; ++a) {
            const auto row = Eigen::Index(mdp.row(x, a));
            for (Eigen::Index y = 0; y < p.cols(); ++y) {
                const double v = p(row, y);
                const double excess = std::max(-v, v - 1.0);
                report.max_kernel_range_violation = std::max(report.max_kernel_range_violation, excess);
                if (excess > tol) note("kernel_range", x, a, std::size_t(y), excess);
            }
            const double sum_err = std::abs(p.row(row).sum() - 1.0);
            report.max_row_sum_error = std::max(report.max_row_sum_error, sum_err);
            if (sum_err > tol) note("row_sum", x, a, std::nullopt, sum_err);

            const double r_excess = std::abs(r(row)) - 1.0;
            report.max_reward_range_violation = std::max(report.max_reward_range_violation, r_excess);
            if (r_excess > tol) note("reward_range", x, a, std::nullopt, r_excess);

            const double n_excess = mdp.features.row(row).norm() - kFeatureNormBound;
            report.max_feature_norm_excess = std::max(report.max_feature_norm_excess, n_excess);
            if (n_excess > tol) note("feature_norm", x, a, std::nullopt, n_excess);
        }
    }
    return report;
}

} // namespace avgrl
