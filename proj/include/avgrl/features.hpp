#pragma once

#include <cstddef>
#include <functional>
#include <memory>

#include "avgrl/linalg.hpp"

namespace avgrl {

/// States are passed to feature evaluators as dense vectors. Tabular
/// environments use a length-1 vector holding the state index.
using StateVector = Eigen::VectorXd;

/**
 * A feature map Phi(x, a) in R^dim over a finite action set.
 *
 * Evaluators are shared, immutable callables: copying a FeatureMap is cheap
 * and evaluation from several threads is safe.
 */
class FeatureMap {
public:
    using Evaluator = std::function<VectorXd(const StateVector&, std::size_t)>;

    FeatureMap(Eigen::Index dim, std::size_t n_actions, double norm_bound, bool has_constant_coordinate,
               Evaluator evaluator);

    Eigen::Index dim() const { return dim_; }
    std::size_t n_actions() const { return n_actions_; }
    double norm_bound() const { return norm_bound_; }
    bool has_constant_coordinate() const { return has_constant_coordinate_; }

    /// Phi(x, a). Throws InvalidInput for an out-of-range action.
    VectorXd operator()(const StateVector& x, std::size_t action) const;

    /// d x n_actions matrix whose column a is Phi(x, a).
    MatrixXd action_matrix(const StateVector& x) const;

private:
    Eigen::Index dim_;
    std::size_t n_actions_;
    double norm_bound_;
    bool has_constant_coordinate_;
    std::shared_ptr<const Evaluator> evaluator_;
};

/// Prepends a constant 1 coordinate. Rejects maps that already carry one.
FeatureMap augment_constant(const FeatureMap& map);

/// Places base(x) (length m) into block `a` of an m * n_actions vector.
FeatureMap block_action_encoding(std::function<VectorXd(const StateVector&)> base, Eigen::Index m,
                                 std::size_t n_actions, double base_norm_bound);

/// Linear normalisation v -> A v with A = B^{1/2}, where {u : u^T B u <= 1}
/// is the (approximate) minimum-volume ellipsoid enclosing the symmetrised
/// point set {+phi} U {-phi}.
struct EllipsoidTransform {
    MatrixXd matrix_a;
    MatrixXd inverse_a;
    double tolerance = 1e-6;

    VectorXd apply(const VectorXd& v) const { return matrix_a * v; }
    Eigen::Index dim() const { return matrix_a.rows(); }
};

/// Optimal-design view of the MVEE problem: weights u on the points with
/// X = sum_i u_i p_i p_i^T; the ellipsoid is {v : v^T X^{-1} v <= dim}.
struct MveeDesign {
    VectorXd weights;
    double gap = 0.0;          // max_i p_i^T X^{-1} p_i / dim - 1
    std::size_t iterations = 0;
};

inline constexpr double kDefaultMveeTolerance = 1e-6;

/// Khachiyan coordinate ascent with Todd-Yildirim away steps on the points
/// given as the columns of `points`. Throws InvalidInput when the points do
/// not span R^d and ConvergenceError (carrying the gap) when the budget
/// 100 d^2 ln(1/tol) is exhausted.
MveeDesign mvee_design(const MatrixXd& points, double tolerance = kDefaultMveeTolerance);

/// Builds A from mvee_design, rescaled so that the farthest point maps to
/// norm exactly 1.
EllipsoidTransform mvee_transform(const MatrixXd& points, double tolerance = kDefaultMveeTolerance);

/// ||A^{-1} z|| <= sqrt(d) * f_max * (1 + 10 tol).
bool transform_weight_bound_check(const EllipsoidTransform& transform, const VectorXd& weight, double f_max);

/// Phi'(x, a) = A Phi(x, a). The declared norm bound becomes 1, which is exact
/// only on the construction set.
FeatureMap apply_transform(const FeatureMap& map, const EllipsoidTransform& transform);

} // namespace avgrl
