#include "avgrl/features.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace avgrl {

FeatureMap::FeatureMap(Eigen::Index dim, std::size_t n_actions, double norm_bound, bool has_constant_coordinate,
                       Evaluator evaluator)
    : dim_(dim),
      n_actions_(n_actions),
      norm_bound_(norm_bound),
      has_constant_coordinate_(has_constant_coordinate),
      evaluator_(std::make_shared<const Evaluator>(std::move(evaluator))) {
    if (dim <= 0) throw InvalidInput("FeatureMap: dim must be positive");
    if (n_actions == 0) throw InvalidInput("FeatureMap: need at least one action");
    if (!(norm_bound > 0.0)) throw InvalidInput("FeatureMap: norm bound must be positive");
}

VectorXd FeatureMap::operator()(const StateVector& x, std::size_t action) const {
    if (action >= n_actions_) {
        throw InvalidInput("FeatureMap: action " + std::to_string(action) + " out of range [0, " +
                           std::to_string(n_actions_) + ")");
    }
    VectorXd phi = (*evaluator_)(x, action);
    detail::require_dim(dim_, phi.size(), "FeatureMap evaluator");
    return phi;
}

MatrixXd FeatureMap::action_matrix(const StateVector& x) const {
    MatrixXd out(dim_, Eigen::Index(n_actions_));
    for (std::size_t a = 0; a < n_actions_; ++a) out.col(Eigen::Index(a)) = (*this)(x, a);
    return out;
}

FeatureMap augment_constant(const FeatureMap& map) {
    if (map.has_constant_coordinate()) {
        throw InvalidInput("augment_constant: map already has a constant coordinate");
    }
    const Eigen::Index d = map.dim();
    auto evaluator = [map, d](const StateVector& x, std::size_t a) {
        VectorXd out(d + 1);
        out(0) = 1.0;
        out.tail(d) = map(x, a);
        return out;
    };
    const double bound = std::sqrt(1.0 + map.norm_bound() * map.norm_bound());
    return FeatureMap(d + 1, map.n_actions(), bound, true, evaluator);
}

FeatureMap block_action_encoding(std::function<VectorXd(const StateVector&)> base, Eigen::Index m,
                                 std::size_t n_actions, double base_norm_bound) {
    if (n_actions == 0) throw InvalidInput("block_action_encoding: n_actions must be >= 1");
    if (m <= 0) throw InvalidInput("block_action_encoding: block size must be positive");
    auto evaluator = [base = std::move(base), m, n_actions](const StateVector& x, std::size_t a) {
        if (a >= n_actions) throw InvalidInput("block_action_encoding: action out of range");
        VectorXd b = base(x);
        detail::require_dim(m, b.size(), "block_action_encoding base");
        VectorXd out = VectorXd::Zero(m * Eigen::Index(n_actions));
        out.segment(Eigen::Index(a) * m, m) = b;
        return out;
    };
    return FeatureMap(m * Eigen::Index(n_actions), n_actions, base_norm_bound, false, evaluator);
}

namespace {

Eigen::Index numerical_rank(const MatrixXd& points) {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(points.transpose());
    qr.setThreshold(1e-10);
    return qr.rank();
}

// g_i = p_i^T X^{-1} p_i for every column.
VectorXd leverages(const MatrixXd& points, const VectorXd& weights, MatrixXd& x_inv) {
    const MatrixXd x = points * weights.asDiagonal() * points.transpose();
    x_inv = x.llt().solve(MatrixXd::Identity(x.rows(), x.cols()));
    return (points.array() * (x_inv * points).array()).colwise().sum().transpose();
}

} // namespace

MveeDesign mvee_design(const MatrixXd& points, double tolerance) {
    const Eigen::Index d = points.rows();
    const Eigen::Index n = points.cols();
    if (n == 0 || d == 0) throw InvalidInput("mvee: empty point set");
    if (!(tolerance > 0.0)) throw InvalidInput("mvee: tolerance must be positive");
    const Eigen::Index rank = numerical_rank(points);
    if (rank < d) {
        throw InvalidInput("mvee: point set is rank deficient (rank " + std::to_string(rank) + " < dim " +
                           std::to_string(d) + ")");
    }

    // A centred ellipsoid enclosing {p} also encloses {-p}, and both copies
    // contribute the same p p^T, so the symmetrised problem reduces to the
    // D-optimal design on the original columns.
    const double dd = double(d);
    const auto budget = std::size_t(std::ceil(100.0 * dd * dd * std::log(1.0 / tolerance)));

    VectorXd u = VectorXd::Constant(n, 1.0 / double(n));
    MatrixXd x_inv;
    VectorXd g = leverages(points, u, x_inv);

    MveeDesign out;
    for (std::size_t it = 0;; ++it) {
        Eigen::Index j_plus = 0;
        const double kappa_plus = g.maxCoeff(&j_plus);
        Eigen::Index j_minus = -1;
        double kappa_minus = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < n; ++i) {
            if (u(i) > 0.0 && g(i) < kappa_minus) {
                kappa_minus = g(i);
                j_minus = i;
            }
        }
        const double eps_plus = kappa_plus / dd - 1.0;
        const double eps_minus = 1.0 - kappa_minus / dd;

        if (eps_plus <= tolerance) {
            // Refresh leverages from scratch before declaring convergence.
            g = leverages(points, u, x_inv);
            const double exact = g.maxCoeff() / dd - 1.0;
            if (exact <= tolerance) {
                out.weights = u;
                out.gap = std::max(0.0, exact);
                out.iterations = it;
                return out;
            }
            continue;
        }
        if (it >= budget) {
            throw ConvergenceError("mvee: iteration budget exhausted (gap " + std::to_string(eps_plus) + ")",
                                   eps_plus);
        }

        if (eps_plus > eps_minus || j_minus < 0) {
            // Toward step on the most violated point.
            const double alpha = (kappa_plus - dd) / (dd * (kappa_plus - 1.0));
            const VectorXd y = x_inv * points.col(j_plus);
            const VectorXd q = points.transpose() * y;
            const double denom = (1.0 - alpha) + alpha * kappa_plus;
            g = (g.array() - alpha * q.array().square() / denom) / (1.0 - alpha);
            x_inv = (x_inv - (alpha / denom) * y * y.transpose()) / (1.0 - alpha);
            u *= (1.0 - alpha);
            u(j_plus) += alpha;
        } else {
            // Away step (possibly dropping the point).
            const double uj = u(j_minus);
            const double drop = uj / (1.0 - uj);
            double beta = drop;
            if (kappa_minus > 1.0) beta = std::min(beta, (dd - kappa_minus) / (dd * (kappa_minus - 1.0)));
            const VectorXd y = x_inv * points.col(j_minus);
            const VectorXd q = points.transpose() * y;
            const double denom = (1.0 + beta) - beta * kappa_minus;
            g = (g.array() + beta * q.array().square() / denom) / (1.0 + beta);
            x_inv = (x_inv + (beta / denom) * y * y.transpose()) / (1.0 + beta);
            u *= (1.0 + beta);
            u(j_minus) -= beta;
            if (beta == drop || u(j_minus) < 0.0) u(j_minus) = 0.0;
        }
    }
}

EllipsoidTransform mvee_transform(const MatrixXd& points, double tolerance) {
    const MveeDesign design = mvee_design(points, tolerance);
    const MatrixXd x = points * design.weights.asDiagonal() * points.transpose();
    MatrixXd b = x.llt().solve(MatrixXd::Identity(x.rows(), x.cols()));
    b = (b + b.transpose()) / 2.0;
    const double reach = (points.array() * (b * points).array()).colwise().sum().maxCoeff();
    b /= reach;

    Eigen::SelfAdjointEigenSolver<MatrixXd> es(b);
    EllipsoidTransform out;
    out.matrix_a = es.operatorSqrt();
    out.inverse_a = es.operatorInverseSqrt();
    out.tolerance = tolerance;
    return out;
}

bool transform_weight_bound_check(const EllipsoidTransform& transform, const VectorXd& weight, double f_max) {
    detail::require_dim(transform.dim(), weight.size(), "transform_weight_bound_check");
    const double lhs = (transform.inverse_a * weight).norm();
    return lhs <= std::sqrt(double(transform.dim())) * f_max * (1.0 + 10.0 * transform.tolerance);
}

FeatureMap apply_transform(const FeatureMap& map, const EllipsoidTransform& transform) {
    detail::require_dim(map.dim(), transform.dim(), "apply_transform");
    if (map.has_constant_coordinate()) {
        throw InvalidInput("apply_transform: normalise before constant augmentation");
    }
    auto evaluator = [map, a = transform.matrix_a](const StateVector& x, std::size_t action) {
        return VectorXd(a * map(x, action));
    };
    return FeatureMap(map.dim(), map.n_actions(), 1.0, false, evaluator);
}

} // namespace avgrl
