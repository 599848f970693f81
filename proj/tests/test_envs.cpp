#include <cmath>
#include <memory>
#include <vector>

#include <doctest.h>

#include "avgrl/envs.hpp"
#include "avgrl/errors.hpp"
#include "oracles.hpp"

using namespace avgrl;

TEST_CASE("riverswim shape and rewards") {
    const TabularLinearMDP rs = build_riverswim();
    CHECK(rs.n_states == 36);
    CHECK(rs.n_actions == 2);
    CHECK(rs.dim() == 7);
    const VectorXd r = rs.rewards();
    CHECK(r(Eigen::Index(rs.row(0, 0))) == doctest::Approx(0.2));
    CHECK(r(Eigen::Index(rs.row(35, 1))) == doctest::Approx(1.0));
    CHECK(r(Eigen::Index(rs.row(17, 0))) == 0.0);
    CHECK(r(Eigen::Index(rs.row(17, 1))) == 0.0);
    CHECK(validate_linear(rs).clean());
}

TEST_CASE("riverswim dynamics spread uniformly over destination copies") {
    const TabularLinearMDP rs = build_riverswim();
    const MatrixXd p = rs.transitions();
    // Interior state 14 (group 2), action right: 0.05 back, 0.6 stay, 0.35 forward.
    const auto row = Eigen::Index(rs.row(14, 1));
    for (int y = 6; y < 12; ++y) CHECK(p(row, y) == doctest::Approx(0.05 / 6));
    for (int y = 12; y < 18; ++y) CHECK(p(row, y) == doctest::Approx(0.6 / 6));
    for (int y = 18; y < 24; ++y) CHECK(p(row, y) == doctest::Approx(0.35 / 6));
    // Left always moves left; the leftmost group stays put.
    CHECK(p.row(Eigen::Index(rs.row(14, 0))).segment(6, 6).sum() == doctest::Approx(1.0));
    CHECK(p.row(Eigen::Index(rs.row(2, 0))).segment(0, 6).sum() == doctest::Approx(1.0));
    // Ends.
    CHECK(p.row(Eigen::Index(rs.row(3, 1))).segment(6, 6).sum() == doctest::Approx(0.4));
    CHECK(p.row(Eigen::Index(rs.row(33, 1))).segment(24, 6).sum() == doctest::Approx(0.4));
    CHECK(rs.parameters.count("interior_advance") == 1);
}

TEST_CASE("random linear MDP shape, validity and determinism") {
    const TabularLinearMDP a = build_random_linear(3);
    const TabularLinearMDP b = build_random_linear(3);
    const TabularLinearMDP c = build_random_linear(4);
    CHECK(a.n_states == 100);
    CHECK(a.n_actions == 2);
    CHECK(a.dim() == 3);
    const VectorXd sums = a.transitions().rowwise().sum();
    CHECK((sums.array() - 1.0).abs().maxCoeff() <= 1e-12);
    CHECK(a.features == b.features);
    CHECK(a.mu == b.mu);
    CHECK(a.theta == b.theta);
    CHECK(a.features != c.features);
    CHECK(a.rewards().maxCoeff() <= 1.0);
    CHECK(a.rewards().minCoeff() >= 0.0);
    for (std::uint64_t seed : {0, 1, 2, 7, 99}) CHECK(validate_linear(build_random_linear(seed)).clean());
}

TEST_CASE("kernel is the product of features and measures") {
    for (const TabularLinearMDP& mdp : {build_riverswim(), build_random_linear(1)}) {
        const MatrixXd p = mdp.transitions();
        for (std::size_t x = 0; x < mdp.n_states; x += 5) {
            for (std::size_t a = 0; a < mdp.n_actions; ++a) {
                for (std::size_t y = 0; y < mdp.n_states; y += 3) {
                    double direct = 0.0;
                    for (Eigen::Index i = 0; i < mdp.dim(); ++i) {
                        direct += mdp.features(Eigen::Index(mdp.row(x, a)), i) * mdp.mu(i, Eigen::Index(y));
                    }
                    CHECK(std::abs(p(Eigen::Index(mdp.row(x, a)), Eigen::Index(y)) - direct) <= 1e-12);
                }
            }
        }
    }
}

TEST_CASE("validation reports a corrupted measure with its location") {
    TabularLinearMDP rs = build_riverswim();
    rs.mu(2, 13) = -rs.mu(2, 13);
    const ValidationReport rep = validate_linear(rs);
    CHECK_FALSE(rep.clean());
    CHECK(rep.max_kernel_range_violation > 0.0);
    bool located = false;
    for (const Violation& v : rep.violations) {
        if (v.kind == "kernel_range" && v.next_state && *v.next_state == 13) located = true;
    }
    CHECK(located);
}

TEST_CASE("validation flags rewards and feature norms") {
    TabularLinearMDP rs = build_riverswim();
    rs.theta(6) = 3.0;
    const ValidationReport rep = validate_linear(rs);
    CHECK(rep.max_reward_range_violation > 0.0);
    CHECK(rep.max_feature_norm_excess == 0.0);
    rs.features.row(0) *= 3.0;
    CHECK(validate_linear(rs).max_feature_norm_excess > 0.0);
}

TEST_CASE("constant augmentation of a tabular MDP keeps its dynamics") {
    const TabularLinearMDP rl = build_random_linear(2);
    const TabularLinearMDP aug = augment_constant(rl);
    CHECK(aug.dim() == 4);
    CHECK((aug.transitions() - rl.transitions()).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK((aug.rewards() - rl.rewards()).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK(aug.feature_map().has_constant_coordinate());
    CHECK_FALSE(rl.feature_map().has_constant_coordinate());
    CHECK_THROWS_AS(augment_constant(aug), InvalidInput);
}

TEST_CASE("tabular feature map evaluates rows by state index") {
    const TabularLinearMDP rs = build_riverswim();
    const FeatureMap m = rs.feature_map();
    CHECK(m.dim() == 7);
    CHECK(m(StateVector::Constant(1, 5.0), 1) == rs.phi(5, 1));
    CHECK_THROWS_AS(m(StateVector::Constant(1, 36.0), 0), InvalidInput);
}

TEST_CASE("mixing estimates: one-state MDP") {
    MatrixXd kernel = MatrixXd::Ones(1, 1);
    const TabularLinearMDP one = tabular_from_kernel(1, 1, kernel, VectorXd::Constant(1, 0.5));
    const MixingReport rep = estimate_mixing_and_excitation(one, 5, 0);
    CHECK(rep.t_mix_hat == 1.0);
    CHECK(rep.sigma_hat == doctest::Approx(1.0));
    CHECK(rep.excluded.empty());
}

TEST_CASE("mixing estimates: random linear MDP and the trace bound") {
    const TabularLinearMDP rl = build_random_linear(0);
    const MixingReport rep = estimate_mixing_and_excitation(rl, 20, 0);
    CHECK(rep.sigma_hat > 0.0);
    CHECK(rep.sigma_hat <= 2.0 / double(rl.dim()));
    CHECK(rep.t_mix_hat >= 1.0);
    CHECK(rep.policies_evaluated == 21);
    const MixingReport rs = estimate_mixing_and_excitation(build_riverswim(), 20, 1);
    CHECK(rs.sigma_hat <= 2.0 / 7.0);
}

TEST_CASE("mixing estimates exclude periodic chains") {
    MatrixXd kernel(2, 2);
    kernel << 0, 1, 1, 0;
    const TabularLinearMDP cycle = tabular_from_kernel(2, 1, kernel, VectorXd::Zero(2));
    const MixingReport rep = estimate_mixing_and_excitation(cycle, 3, 0, 200);
    CHECK(rep.excluded.size() == 4);
}

TEST_CASE("tabular environment samples the kernel") {
    auto rs = std::make_shared<const TabularLinearMDP>(build_riverswim());
    TabularEnvironment env(rs, rs->feature_map(), 5, 14);
    const MatrixXd p = rs->transitions();
    std::vector<int> counts(36, 0);
    const int n = 60000;
    for (int i = 0; i < n; ++i) {
        TabularEnvironment fresh(rs, rs->feature_map(), 1000 + std::uint64_t(i), 14);
        const EnvStep s = fresh.step(1);
        CHECK(s.reward == 0.0);
        ++counts[*s.next.state_id];
    }
    for (int y = 0; y < 36; ++y) {
        const double expected = p(Eigen::Index(rs->row(14, 1)), y);
        CHECK(std::abs(counts[y] / double(n) - expected) <= 5.0 * std::sqrt(expected / n) + 1e-12);
    }
    CHECK(env.current().features.cols() == 2);
    CHECK(env.current().features.col(1) == rs->phi(14, 1));
}

TEST_CASE("tabular environment replays identically") {
    auto rl = std::make_shared<const TabularLinearMDP>(build_random_linear(1));
    TabularEnvironment a(rl, rl->feature_map(), 77), b(rl, rl->feature_map(), 77);
    for (int t = 0; t < 500; ++t) {
        const std::size_t act = std::size_t(t % 2);
        const EnvStep sa = a.step(act), sb = b.step(act);
        CHECK(*sa.next.state_id == *sb.next.state_id);
        CHECK(sa.reward == sb.reward);
    }
    CHECK_THROWS_AS(a.step(2), InvalidInput);
}
