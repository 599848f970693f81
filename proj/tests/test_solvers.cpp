#include <chrono>
#include <cmath>

#include <doctest.h>

#include "avgrl/envs.hpp"
#include "avgrl/errors.hpp"
#include "oracles.hpp"

using namespace avgrl;

namespace {

TabularLinearMDP one_state(double reward) {
    return tabular_from_kernel(1, 1, MatrixXd::Ones(1, 1), VectorXd::Constant(1, reward), "one-state");
}

TabularLinearMDP two_state_cycle() {
    MatrixXd kernel(2, 2);
    kernel << 0, 1, 1, 0;
    return tabular_from_kernel(2, 1, kernel, (VectorXd(2) << 1.0, 0.0).finished(), "cycle");
}

void check_bellman(const TabularLinearMDP& mdp, const BellmanSolution& sol) {
    const MatrixXd p = mdp.transitions();
    const VectorXd r = mdp.rewards();
    for (std::size_t x = 0; x < mdp.n_states; ++x) {
        for (std::size_t a = 0; a < mdp.n_actions; ++a) {
            const auto row = Eigen::Index(mdp.row(x, a));
            const double rhs = r(row) + p.row(row).dot(sol.v_star);
            CHECK(std::abs(sol.j_star + sol.q_star(Eigen::Index(x), Eigen::Index(a)) - rhs) <= sol.residual + 1e-12);
        }
        CHECK(std::abs(sol.v_star(Eigen::Index(x)) - sol.q_star.row(Eigen::Index(x)).maxCoeff()) <=
              sol.residual + 1e-12);
    }
    CHECK(std::abs(sol.v_star.maxCoeff() + sol.v_star.minCoeff()) <= 1e-9);
    CHECK(sol.span == doctest::Approx(sol.v_star.maxCoeff() - sol.v_star.minCoeff()));
    CHECK(sol.v_star.cwiseAbs().maxCoeff() <= sol.span / 2.0 + 1e-12);
}

} // namespace

TEST_CASE("one-state MDP") {
    const TabularLinearMDP m = one_state(0.5);
    const BellmanSolution sol = solve_average_reward(m);
    CHECK(sol.j_star == doctest::Approx(0.5));
    CHECK(sol.v_star(0) == doctest::Approx(0.0));
    CHECK(sol.span == doctest::Approx(0.0));
    const PolicyValue pv = solve_policy_value(m, MatrixXd::Ones(1, 1));
    CHECK(pv.j_pi == doctest::Approx(0.5));
}

TEST_CASE("two-state deterministic cycle") {
    const TabularLinearMDP m = two_state_cycle();
    const BellmanSolution sol = solve_average_reward(m);
    CHECK(sol.j_star == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(sol.v_star(0) == doctest::Approx(0.25).epsilon(1e-9));
    CHECK(sol.v_star(1) == doctest::Approx(-0.25).epsilon(1e-9));
    CHECK(sol.span == doctest::Approx(0.5).epsilon(1e-9));
    check_bellman(m, sol);
}

TEST_CASE("riverswim matches Howard policy iteration") {
    const TabularLinearMDP rs = build_riverswim();
    const auto start = std::chrono::steady_clock::now();
    const BellmanSolution sol = solve_average_reward(rs);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(seconds < 1.0);
    const oracle::HowardResult howard = oracle::howard(rs);
    CHECK(std::abs(sol.j_star - howard.gain) <= 1e-6);
    CHECK(sol.residual <= 1e-8);
    check_bellman(rs, sol);
    // Always-right: stationary mass of the right group is 2401/5602.
    CHECK(sol.j_star == doctest::Approx(2401.0 / 5602.0).epsilon(1e-8));
    // The bias from the oracle differs from v* by a constant.
    const VectorXd diff = sol.v_star - howard.bias;
    CHECK(diff.maxCoeff() - diff.minCoeff() <= 1e-6);
}

TEST_CASE("random linear MDPs match Howard policy iteration") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const TabularLinearMDP m = build_random_linear(seed);
        const BellmanSolution sol = solve_average_reward(m);
        CHECK(std::abs(sol.j_star - oracle::howard(m).gain) <= 1e-6);
        CHECK(sol.residual <= 1e-8);
        check_bellman(m, sol);
    }
}

TEST_CASE("non-convergence carries the residual") {
    try {
        solve_average_reward(build_riverswim(), 1e-12, 3);
        FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
        CHECK(e.gap() > 1e-12);
    }
}

TEST_CASE("policy values") {
    const TabularLinearMDP rs = build_riverswim();
    MatrixXd left = MatrixXd::Zero(36, 2);
    left.col(0).setOnes();
    const PolicyValue pl = solve_policy_value(rs, left);
    CHECK(pl.j_pi == doctest::Approx(0.2).epsilon(1e-10));
    CHECK(pl.residual <= 1e-9);
    CHECK(std::abs(pl.stationary.dot(pl.v_pi)) <= 1e-9);

    const BellmanSolution sol = solve_average_reward(rs);
    const PolicyValue opt = solve_policy_value(rs, sol.greedy_policy());
    CHECK(std::abs(opt.j_pi - sol.j_star) <= 1e-6);

    const TabularLinearMDP rl = build_random_linear(2);
    const BellmanSolution rl_sol = solve_average_reward(rl);
    CHECK(std::abs(solve_policy_value(rl, rl_sol.greedy_policy()).j_pi - rl_sol.j_star) <= 1e-6);
    const PolicyValue uni = solve_policy_value(rl, MatrixXd::Constant(100, 2, 0.5));
    CHECK(uni.j_pi <= rl_sol.j_star + 1e-9);
    CHECK(std::abs(uni.stationary.sum() - 1.0) <= 1e-12);
}

TEST_CASE("policy value rejects malformed policies and multichain evaluations") {
    const TabularLinearMDP rs = build_riverswim();
    CHECK_THROWS_AS(solve_policy_value(rs, MatrixXd::Ones(36, 2)), InvalidInput);
    CHECK_THROWS_AS(solve_policy_value(rs, MatrixXd::Constant(35, 2, 0.5)), InvalidInput);

    MatrixXd kernel = MatrixXd::Identity(2, 2);
    const TabularLinearMDP split = tabular_from_kernel(2, 1, kernel, (VectorXd(2) << 1.0, 0.0).finished());
    CHECK_THROWS_AS(solve_policy_value(split, MatrixXd::Ones(2, 1)), ConvergenceError);
}

TEST_CASE("H-step optimal values stay within span of H J* on riverswim") {
    const TabularLinearMDP rs = build_riverswim();
    const BellmanSolution sol = solve_average_reward(rs);
    for (std::size_t h : {5u, 20u}) {
        const VectorXd v1 = oracle::backward_induction(rs, h);
        CHECK((double(h) * sol.j_star - v1.array()).abs().maxCoeff() <= sol.span + 1e-6);
        CHECK((finite_horizon_values(rs, h) - v1).cwiseAbs().maxCoeff() <= 1e-12);
    }
}
