#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <doctest.h>

#include "avgrl/envs.hpp"
#include "avgrl/errors.hpp"
#include "avgrl/features.hpp"
#include "oracles.hpp"

using namespace avgrl;

namespace {

MatrixXd random_points(Rng& rng, Eigen::Index d, Eigen::Index n) {
    MatrixXd p(d, n);
    for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = rng.normal();
    // Anisotropic scaling so the ellipsoid is far from a sphere.
    for (Eigen::Index r = 0; r < d; ++r) p.row(r) *= double(r + 1);
    return p;
}

VectorXd transformed_norms(const EllipsoidTransform& t, const MatrixXd& points) {
    return (t.matrix_a * points).colwise().norm().transpose();
}

MatrixXd random_rotation(Rng& rng, Eigen::Index d) {
    MatrixXd g(d, d);
    for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = rng.normal();
    return Eigen::HouseholderQR<MatrixXd>(g).householderQ();
}

FeatureMap constant_map(double value) {
    return FeatureMap(1, 1, std::abs(value), false,
                      [value](const StateVector&, std::size_t) { return VectorXd::Constant(1, value); });
}

} // namespace

TEST_CASE("feature map rejects out-of-range actions") {
    FeatureMap m = constant_map(0.5);
    CHECK(m(StateVector::Zero(1), 0)(0) == 0.5);
    CHECK_THROWS_AS(m(StateVector::Zero(1), 1), InvalidInput);
    CHECK(m.action_matrix(StateVector::Zero(1)).cols() == 1);
}

TEST_CASE("augment_constant examples") {
    const FeatureMap aug = augment_constant(constant_map(0.5));
    const VectorXd phi = aug(StateVector::Zero(1), 0);
    REQUIRE(phi.size() == 2);
    CHECK(phi(0) == 1.0);
    CHECK(phi(1) == 0.5);
    CHECK(phi.norm() == doctest::Approx(std::sqrt(1.25)));
    CHECK(aug.norm_bound() == doctest::Approx(std::sqrt(1.25)));
    CHECK(aug.has_constant_coordinate());
    CHECK_THROWS_AS(augment_constant(aug), InvalidInput);
}

TEST_CASE("augment_constant on the cartpole base features") {
    const FeatureMap base(cartpole_base_dim(true), 1, 10.0, false,
                          [](const StateVector& x, std::size_t) { return cartpole_base_features(x, true); });
    const FeatureMap aug = augment_constant(base);
    CHECK(aug.dim() == 15);
    Rng rng(4);
    for (int i = 0; i < 50; ++i) {
        StateVector s(5);
        s << rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-0.2, 0.2), rng.uniform(-2, 2), 0.0;
        const VectorXd a = aug(s, 0);
        const VectorXd b = base(s, 0);
        CHECK(a(0) == 1.0);
        CHECK((a.tail(14) - b).cwiseAbs().maxCoeff() == 0.0);
        CHECK(a.squaredNorm() == doctest::Approx(1.0 + b.squaredNorm()).epsilon(1e-15));
    }
}

TEST_CASE("block_action_encoding examples") {
    auto base = [](const StateVector&) { return VectorXd((VectorXd(2) << 1.0, 0.0).finished()); };
    const FeatureMap m = block_action_encoding(base, 2, 2, 1.0);
    CHECK(m.dim() == 4);
    const VectorXd a1 = m(StateVector::Zero(1), 1);
    const VectorXd a0 = m(StateVector::Zero(1), 0);
    CHECK(a1 == (VectorXd(4) << 0, 0, 1, 0).finished());
    CHECK(a0 == (VectorXd(4) << 1, 0, 0, 0).finished());
    CHECK_THROWS_AS(m(StateVector::Zero(1), 2), InvalidInput);
}

TEST_CASE("cartpole block encoding: orthogonal actions, preserved norms") {
    const CartpoleParams params;
    const FeatureMap m = cartpole_feature_map(params);
    Rng rng(6);
    for (int i = 0; i < 100; ++i) {
        StateVector s(5);
        s << rng.uniform(-2.4, 2.4), rng.uniform(-3, 3), rng.uniform(-0.2, 0.2), rng.uniform(-3.5, 3.5), 0.0;
        const VectorXd f0 = m(s, 0);
        const VectorXd f1 = m(s, 1);
        CHECK(f0.dot(f1) == 0.0);
        const double base = cartpole_base_features(s, true).norm();
        CHECK(f0.norm() == doctest::Approx(base));
        CHECK(f1.norm() == doctest::Approx(base));
        CHECK(f0.norm() <= m.norm_bound() + 1e-9);
    }
}

TEST_CASE("mvee of the unit basis is the unit circle") {
    const MatrixXd pts = MatrixXd::Identity(2, 2);
    const EllipsoidTransform t = mvee_transform(pts, 1e-6);
    CHECK((t.matrix_a - MatrixXd::Identity(2, 2)).norm() <= 1e-5);
    CHECK((t.matrix_a * t.inverse_a - MatrixXd::Identity(2, 2)).norm() <= 1e-8);
}

TEST_CASE("mvee scales with the point set") {
    const MatrixXd pts = 2.0 * MatrixXd::Identity(2, 2);
    const EllipsoidTransform t = mvee_transform(pts, 1e-6);
    CHECK((t.matrix_a - 0.5 * MatrixXd::Identity(2, 2)).norm() <= 1e-5);
}

TEST_CASE("mvee on random point sets: containment, tightness, dual certificate") {
    Rng rng(8);
    const double tol = 1e-6;
    for (int trial = 0; trial < 10; ++trial) {
        const MatrixXd pts = random_points(rng, 3, 50);
        const MveeDesign design = mvee_design(pts, tol);
        CHECK(design.gap <= tol);
        CHECK(design.weights.minCoeff() >= 0.0);
        CHECK(design.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(oracle::design_certificate(pts, design.weights) <= 3.0 * (1.0 + tol) + 1e-9);

        const EllipsoidTransform t = mvee_transform(pts, tol);
        const VectorXd norms = transformed_norms(t, pts);
        CHECK(norms.maxCoeff() <= 1.0 + tol);
        CHECK(norms.maxCoeff() >= 1.0 - 10.0 * tol);
        CHECK((t.matrix_a * t.inverse_a - MatrixXd::Identity(3, 3)).norm() <= 1e-8);
    }
}

TEST_CASE("mvee rejects rank-deficient sets, naming the rank") {
    MatrixXd pts(3, 4);
    pts << 1, 2, 3, 4,
           2, 4, 6, 8,
           0, 1, 0, 1;
    try {
        mvee_transform(pts);
        FAIL("expected InvalidInput");
    } catch (const InvalidInput& e) {
        CHECK(std::string(e.what()).find("rank 2") != std::string::npos);
    }
    CHECK_THROWS_AS(mvee_transform(MatrixXd(3, 0)), InvalidInput);
}

TEST_CASE("mvee either converges within tolerance or reports the gap") {
    Rng rng(12);
    const MatrixXd pts = random_points(rng, 4, 200);
    try {
        const MveeDesign d = mvee_design(pts, 1e-14);
        CHECK(d.gap <= 1e-14);
    } catch (const ConvergenceError& e) {
        CHECK(e.gap() > 0.0);
    }
}

TEST_CASE("property: an already isotropic set maps to the identity") {
    // Axis points plus cube vertices, all on the unit sphere.
    MatrixXd pts(3, 7);
    pts.leftCols(3) = MatrixXd::Identity(3, 3);
    const double s = 1.0 / std::sqrt(3.0);
    pts.col(3) << s, s, s;
    pts.col(4) << s, -s, s;
    pts.col(5) << s, s, -s;
    pts.col(6) << s, -s, -s;
    const double tol = 1e-6;
    const EllipsoidTransform t = mvee_transform(pts, tol);
    CHECK((t.matrix_a - MatrixXd::Identity(3, 3)).norm() <= 10.0 * tol);
}

TEST_CASE("property: transformed norms are rotation invariant") {
    Rng rng(31);
    const double tol = 1e-8;
    for (int trial = 0; trial < 5; ++trial) {
        const MatrixXd pts = random_points(rng, 3, 40);
        const MatrixXd rot = random_rotation(rng, 3);
        VectorXd a = transformed_norms(mvee_transform(pts, tol), pts);
        VectorXd b = transformed_norms(mvee_transform(rot * pts, tol), rot * pts);
        std::sort(a.data(), a.data() + a.size());
        std::sort(b.data(), b.data() + b.size());
        CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-5);
    }
}

TEST_CASE("transform_weight_bound_check examples") {
    const EllipsoidTransform basis = mvee_transform(MatrixXd::Identity(2, 2));
    CHECK(transform_weight_bound_check(basis, VectorXd::Zero(2), 0.3));
    CHECK((basis.inverse_a * VectorXd::Unit(2, 0)).norm() == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(transform_weight_bound_check(basis, VectorXd::Unit(2, 0), 1.0));
}

TEST_CASE("transform_weight_bound_check on a regression fit over RiverSwim features") {
    const TabularLinearMDP rs = build_riverswim();
    const MatrixXd pts = rs.features.transpose();
    const EllipsoidTransform t = mvee_transform(pts);
    Rng rng(14);
    for (int trial = 0; trial < 10; ++trial) {
        VectorXd f(rs.features.rows());
        for (Eigen::Index i = 0; i < f.size(); ++i) f(i) = rng.uniform(-1, 1);
        const VectorXd z = rs.features.colPivHouseholderQr().solve(f);
        const double f_max = (rs.features * z).cwiseAbs().maxCoeff();
        CHECK(transform_weight_bound_check(t, z, f_max));
    }
}

TEST_CASE("apply_transform normalises a map") {
    const TabularLinearMDP rs = build_riverswim();
    const EllipsoidTransform t = mvee_transform(rs.features.transpose());
    const FeatureMap m = apply_transform(rs.feature_map(), t);
    CHECK(m.norm_bound() == 1.0);
    double worst = 0.0;
    for (std::size_t x = 0; x < rs.n_states; ++x) {
        for (std::size_t a = 0; a < rs.n_actions; ++a) {
            worst = std::max(worst, m(StateVector::Constant(1, double(x)), a).norm());
        }
    }
    CHECK(worst <= 1.0 + 1e-6);
    CHECK(worst >= 1.0 - 1e-3);
    CHECK_THROWS_AS(apply_transform(augment_constant(m), mvee_transform(MatrixXd::Identity(8, 8))), InvalidInput);
}
