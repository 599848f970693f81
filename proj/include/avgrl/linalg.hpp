#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstddef>
#include <string>

#include "avgrl/errors.hpp"

namespace avgrl {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using VectorXd = Eigen::VectorXd;
using MatrixXd = Eigen::MatrixXd;

/// Absolute tolerance on |M - M^T| for accepting externally built matrices.
inline constexpr double kSymmetryTolerance = 1e-9;

namespace detail {
inline void require_dim(Eigen::Index expected, Eigen::Index got, const char* what) {
    if (expected != got) {
        throw InvalidInput(std::string(what) + ": dimension mismatch (expected " +
                           std::to_string(expected) + ", got " + std::to_string(got) + ")");
    }
}
} // namespace detail

/**
 * Regularized Gram matrix  ridge * I + sum_i phi_i phi_i^T.
 *
 * The Cholesky factor is recomputed on every absorb; the dimensions used in
 * this project stay well below 64, where an O(d^3) refactor is cheaper to get
 * right than rank-one factor updates. log det is cached from the factor.
 */
template <typename Scalar>
class CovarianceAccumulator {
public:
    using VectorType = Vec<Scalar>;
    using MatrixType = Mat<Scalar>;

    CovarianceAccumulator() : CovarianceAccumulator(1, Scalar(1)) {}

    CovarianceAccumulator(Eigen::Index dim, Scalar ridge) : ridge_(ridge) {
        if (dim <= 0) throw InvalidInput("CovarianceAccumulator: dim must be positive");
        if (!(ridge > Scalar(0))) throw InvalidInput("CovarianceAccumulator: ridge must be positive");
        matrix_ = ridge * MatrixType::Identity(dim, dim);
        refactor();
    }

    template <typename Derived>
    void absorb(const Eigen::MatrixBase<Derived>& phi) {
        detail::require_dim(dim(), phi.size(), "CovarianceAccumulator::absorb");
        matrix_.noalias() += phi * phi.transpose();
        ++count_;
        const Scalar previous = log_det_;
        refactor();
        // True log det can only grow; guard against last-ulp rounding in the factor.
        if (log_det_ < previous) log_det_ = previous;
    }

    /// phi^T Lambda^{-1} phi.
    template <typename Derived>
    Scalar inv_quadratic_form(const Eigen::MatrixBase<Derived>& phi) const {
        detail::require_dim(dim(), phi.size(), "CovarianceAccumulator::inv_quadratic_form");
        VectorType y = llt_.matrixL().solve(VectorType(phi));
        return y.squaredNorm();
    }

    /// Lambda^{-1} v.
    template <typename Derived>
    VectorType solve(const Eigen::MatrixBase<Derived>& v) const {
        detail::require_dim(dim(), v.size(), "CovarianceAccumulator::solve");
        return llt_.solve(VectorType(v));
    }

    /// sqrt(v^T Lambda v).
    template <typename Derived>
    Scalar weighted_norm(const Eigen::MatrixBase<Derived>& v) const {
        detail::require_dim(dim(), v.size(), "CovarianceAccumulator::weighted_norm");
        return std::sqrt(std::max(Scalar(0), Scalar(v.dot(matrix_ * v))));
    }

    MatrixType inverse() const { return llt_.solve(MatrixType::Identity(dim(), dim())); }

    Eigen::Index dim() const { return matrix_.rows(); }
    Scalar ridge() const { return ridge_; }
    const MatrixType& matrix() const { return matrix_; }
    Scalar log_det() const { return log_det_; }
    std::size_t count() const { return count_; }

private:
    void refactor() {
        llt_.compute(matrix_);
        const auto& l = llt_.matrixLLT();
        Scalar s(0);
        for (Eigen::Index i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
        log_det_ = Scalar(2) * s;
    }

    Scalar ridge_;
    MatrixType matrix_;
    Eigen::LLT<MatrixType> llt_;
    Scalar log_det_{0};
    std::size_t count_{0};
};

/// Smallest eigenvalue of a symmetric matrix. Matrices whose asymmetry
/// exceeds kSymmetryTolerance are rejected; smaller asymmetry is averaged out.
template <typename Derived>
typename Derived::Scalar min_eigenvalue(const Eigen::MatrixBase<Derived>& m) {
    using Scalar = typename Derived::Scalar;
    if (m.rows() != m.cols() || m.rows() == 0) throw InvalidInput("min_eigenvalue: matrix must be square and nonempty");
    const Scalar asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > Scalar(kSymmetryTolerance)) {
        throw InvalidInput("min_eigenvalue: matrix is not symmetric (max asymmetry " + std::to_string(double(asym)) + ")");
    }
    Mat<Scalar> sym = (m + m.transpose()) / Scalar(2);
    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(sym, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

/// det(now) >= factor * det(then), compared in log space. Equality counts as
/// exceeded; the 1e-12 slack absorbs rounding in the Cholesky log det.
template <typename Scalar>
bool det_ratio_exceeds(const CovarianceAccumulator<Scalar>& now, const CovarianceAccumulator<Scalar>& then,
                       Scalar factor) {
    detail::require_dim(now.dim(), then.dim(), "det_ratio_exceeds");
    return now.log_det() - then.log_det() >= std::log(factor) - Scalar(1e-12);
}

using Covariance = CovarianceAccumulator<double>;

} // namespace avgrl
