#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <doctest.h>

#include "avgrl/harness.hpp"
#include "oracles.hpp"

using namespace avgrl;

namespace {

std::string one_state_file(double reward) {
    const std::string path = "test_harness_one_state.json";
    EnvironmentDescription d;
    d.tabular = tabular_from_kernel(1, 1, MatrixXd::Ones(1, 1), VectorXd::Constant(1, reward), "one-state");
    save_environment(d, path);
    return path;
}

RunConfig small_config(const std::string& algorithm, std::uint64_t t_total) {
    RunConfig c;
    c.environment.name = "random-linear";
    c.environment.n_states = 10;
    c.agent.algorithm = algorithm;
    c.t_total = t_total;
    return c;
}

class NanAgent : public Agent {
public:
    std::string name() const override { return "nan"; }
    std::size_t act(std::uint64_t, const Observation&) override { return 0; }
    void observe(const Observation&, std::size_t, double, const Observation&) override { ++steps_; }
    bool finite() const override { return steps_ < 5; }

private:
    int steps_ = 0;
};

} // namespace

TEST_CASE("regret is zero when every reward equals J*") {
    const std::string path = one_state_file(0.5);
    RunConfig c;
    c.environment.name = "file";
    c.environment.file = path;
    c.t_total = 100;
    for (const char* algorithm : {"uniform", "fopo", "olsvi", "mdp-exp2"}) {
        c.agent.algorithm = algorithm;
        c.agent.span = 0.0;
        c.agent.sigma = 1.0;
        c.agent.n_len = 2;
        c.agent.b_len = 8;
        const RegretTrace tr = run(c);
        CHECK(tr.cumulative_regret.back() == 0.0);
        CHECK(tr.j_star == 0.5);
    }
    std::remove(path.c_str());
}

TEST_CASE("fixed-action regret equals T J* minus the logged reward sum") {
    RunConfig c;
    c.environment.name = "riverswim";
    c.agent.algorithm = "fixed";
    c.agent.action = 1;
    c.t_total = 5000;
    c.seed = 4;
    const PreparedEnvironment env = prepare_environment(c.environment);
    std::vector<double> log;
    const RegretTrace tr = run(c, env, [&](std::uint64_t, std::size_t a, double r) {
        CHECK(a == 1);
        log.push_back(r);
    });
    REQUIRE(log.size() == 5000);
    double total = 0.0;
    for (double r : log) total += r;
    CHECK(std::abs(tr.cumulative_regret.back() - (5000.0 * env.j_star - total)) <= 1e-9);
    CHECK(tr.steps.back() == 5000);

    // Every recorded point agrees with the accumulator invariants.
    const RegretTrace replay = trace_from_rewards(log, env.j_star, c.effective_stride(), c.seed);
    CHECK(replay.steps == tr.steps);
    CHECK(replay.cumulative_regret == tr.cumulative_regret);
    CHECK(replay.running_avg_reward == tr.running_avg_reward);
    double prefix = 0.0;
    std::size_t k = 0;
    for (std::size_t t = 1; t <= log.size(); ++t) {
        prefix += log[t - 1];
        if (k < tr.steps.size() && tr.steps[k] == t) {
            CHECK(std::abs(tr.cumulative_regret[k] - (double(t) * env.j_star - prefix)) <= 1e-9);
            CHECK(std::abs(tr.running_avg_reward[k] - prefix / double(t)) <= 1e-12);
            ++k;
        }
    }
    CHECK(k == tr.steps.size());
}

TEST_CASE("runs are bitwise deterministic per seed") {
    for (const char* algorithm : {"uniform", "fopo", "olsvi", "mdp-exp2"}) {
        RunConfig c = small_config(algorithm, 600);
        c.seed = 12;
        const RegretTrace a = run(c), b = run(c);
        CHECK(a.cumulative_regret == b.cumulative_regret);
        CHECK(format_csv(a) == format_csv(b));
    }
}

TEST_CASE("record stride defaults to T / 2000 and always keeps the last step") {
    RunConfig c = small_config("uniform", 10001);
    CHECK(c.effective_stride() == 5);
    const RegretTrace tr = run(c);
    CHECK(tr.steps.size() == 2001);
    CHECK(tr.steps.back() == 10001);
    c.t_total = 7;
    CHECK(c.effective_stride() == 1);
    c.record_stride = 100;
    const RegretTrace tiny = run(c);
    CHECK(tiny.steps == std::vector<std::uint64_t>{7});
    CHECK(format_csv(tiny).find('\n') < format_csv(tiny).size() - 1);  // header + one row
}

TEST_CASE("monte carlo aggregates") {
    RunConfig c = small_config("mdp-exp2", 2000);
    c.agent.sigma = 0.05;
    c.record_stride = 50;

    const Aggregate one = monte_carlo(c, 1, 3);
    CHECK(one.mean_regret == one.traces[0].cumulative_regret);
    for (double s : one.std_regret) CHECK(s == 0.0);

    const Aggregate seq = monte_carlo(c, 5, 100, 1);
    const Aggregate par = monte_carlo(c, 5, 100, 4);
    CHECK(format_csv(seq) == format_csv(par));
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(seq.traces[i].seed == 100 + i);
        CHECK(format_csv(seq.traces[i]) == format_csv(par.traces[i]));
        RunConfig single = c;
        single.seed = 100 + i;
        CHECK(format_csv(run(single)) == format_csv(seq.traces[i]));
    }

    // Recompute mean and sample std from the per-seed CSV text.
    std::vector<oracle::CsvTable> tables;
    for (const auto& tr : seq.traces) tables.push_back(oracle::parse_csv(format_csv(tr)));
    const oracle::CsvTable agg = oracle::parse_csv(format_csv(seq));
    REQUIRE(agg.rows.size() == seq.steps.size());
    for (std::size_t p = 0; p < agg.rows.size(); ++p) {
        double mean = 0.0;
        for (const auto& t : tables) mean += std::stod(t.rows[p][1]);
        mean /= 5.0;
        double ss = 0.0;
        for (const auto& t : tables) ss += std::pow(std::stod(t.rows[p][1]) - mean, 2);
        const double sd = std::sqrt(ss / 4.0);
        CHECK(std::abs(std::stod(agg.rows[p][1]) - mean) <= 1e-9 * (1.0 + std::abs(mean)));
        CHECK(std::abs(std::stod(agg.rows[p][2]) - sd) <= 1e-8 * (1.0 + sd));
    }
}

TEST_CASE("CSV schema and parse-back") {
    RunConfig c = small_config("uniform", 3000);
    const RegretTrace tr = run(c);
    const oracle::CsvTable t = oracle::parse_csv(format_csv(tr));
    CHECK(t.header == std::vector<std::string>{"step", "cum_regret", "avg_reward", "j_star", "seed"});
    REQUIRE(t.rows.size() == tr.steps.size());
    CHECK(t.rows.size() >= 1);
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        CHECK(std::stoull(t.rows[i][0]) == tr.steps[i]);
        const double reg = std::stod(t.rows[i][1]);
        CHECK(std::abs(reg - tr.cumulative_regret[i]) <= 1e-10 * std::max(1.0, std::abs(tr.cumulative_regret[i])));
        CHECK(std::abs(std::stod(t.rows[i][2]) - tr.running_avg_reward[i]) <=
              1e-10 * std::max(1.0, std::abs(tr.running_avg_reward[i])));
        CHECK(t.rows[i][4] == "0");
    }
    const std::string text = format_csv(tr);
    CHECK(text.back() == '\n');

    const Aggregate agg = monte_carlo(c, 2, 0);
    const oracle::CsvTable a = oracle::parse_csv(format_csv(agg));
    CHECK(a.header ==
          std::vector<std::string>{"step", "cum_regret_mean", "cum_regret_std", "avg_reward", "j_star", "seed"});
    CHECK(a.rows.back()[5] == "agg");

    const std::string path = "test_harness_trace.csv";
    emit_csv(tr, path);
    CHECK(oracle::slurp(path) == text);
    std::remove(path.c_str());
    CHECK_THROWS(emit_csv(tr, "/nonexistent/dir/trace.csv"));
}

TEST_CASE("regret is exactly linear in J*") {
    Rng rng(8);
    std::vector<double> rewards(4321);
    for (double& r : rewards) r = rng.uniform(-1.0, 1.0);
    for (double c : {0.25, -0.5, 1.0}) {
        const RegretTrace a = trace_from_rewards(rewards, 0.3, 17);
        const RegretTrace b = trace_from_rewards(rewards, 0.3 + c, 17);
        REQUIRE(a.steps == b.steps);
        for (std::size_t i = 0; i < a.steps.size(); ++i) {
            CHECK(std::abs(b.cumulative_regret[i] - a.cumulative_regret[i] - c * double(a.steps[i])) <=
                  1e-9 * double(a.steps[i]));
        }
    }
}

TEST_CASE("simulated uniform-policy average matches the solver within 3 standard errors") {
    RunConfig c;
    c.environment.name = "random-linear";
    c.agent.algorithm = "uniform";
    c.t_total = 100000;
    c.seed = 2;
    const PreparedEnvironment env = prepare_environment(c.environment);
    const std::size_t n_s = env.mdp->n_states, n_a = env.mdp->n_actions;
    const double j_pi = solve_policy_value(*env.mdp, MatrixXd::Constant(Eigen::Index(n_s), Eigen::Index(n_a),
                                                                        1.0 / double(n_a)))
                            .j_pi;
    std::vector<double> rewards;
    const RegretTrace tr = run(c, env, [&](std::uint64_t, std::size_t, double r) { rewards.push_back(r); });

    // Batch means: 100 batches of 1000 steps.
    const std::size_t batches = 100, len = rewards.size() / batches;
    std::vector<double> means(batches, 0.0);
    for (std::size_t b = 0; b < batches; ++b) {
        for (std::size_t i = 0; i < len; ++i) means[b] += rewards[b * len + i];
        means[b] /= double(len);
    }
    double m = 0.0;
    for (double x : means) m += x;
    m /= double(batches);
    double ss = 0.0;
    for (double x : means) ss += (x - m) * (x - m);
    const double se = std::sqrt(ss / double(batches - 1) / double(batches));
    CHECK(std::abs(tr.running_avg_reward.back() - j_pi) <= 3.0 * se);
    CHECK(se > 0.0);
}

TEST_CASE("config parsing is fail-closed") {
    const RunConfig c = parse_config(
        "[environment]\nname = random-linear\nseed = 3\n"
        "[agent]\npreset = mdpexp2-randomlinear\neta = 2.5\n"
        "[run]\nt_total = 1234\nseed = 9\nruns = 3\n");
    CHECK(c.environment.name == "random-linear");
    CHECK(c.environment.seed == 3);
    CHECK(c.agent.algorithm == "mdp-exp2");
    CHECK(c.agent.n_len == 10);
    CHECK(c.agent.eta == 2.5);
    CHECK(c.t_total == 1234);
    CHECK(c.runs == 3);

    const RunConfig commented = parse_config("; leading comment\n[run]\nt_total = 500   ; inline\nseed = 4 # too\n");
    CHECK(commented.t_total == 500);
    CHECK(commented.seed == 4);
    CHECK_THROWS_AS(parse_config("[environment]\nnmae = riverswim\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[enviroment]\nname = riverswim\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[run]\nt_total = many\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[run]\nrecord_stride = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[agent]\npreset = nope\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[agent]\nschedule = sometimes\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("stray = 1\n"), ConfigError);

    RunConfig s;
    set_config_value(s, "agent", "eta", "0.5");
    CHECK(s.agent.eta == 0.5);
    CHECK_THROWS_AS(set_config_value(s, "agent", "etaa", "0.5"), ConfigError);
}

TEST_CASE("presets carry the hyperparameter table") {
    const RunConfig rs = preset_config("mdpexp2-riverswim");
    CHECK(rs.environment.name == "riverswim");
    CHECK(rs.agent.n_len == 100);
    CHECK(rs.agent.b_len == 1000);
    CHECK(rs.agent.eta == 10.0);
    const RunConfig cp = preset_config("mdpexp2-cartpole");
    CHECK(cp.agent.n_len == 500);
    CHECK(cp.agent.b_len == 5000);
    CHECK(cp.agent.eta == 0.002);
    const RunConfig ol = preset_config("olsvi-riverswim");
    CHECK(ol.agent.beta == 1.0);
    CHECK(ol.agent.ridge == 0.01);
    CHECK(ol.agent.metadata.at("gamma") == 0.99);
    CHECK(preset_names().size() == 6);
    CHECK_THROWS_AS(preset_config("unknown"), ConfigError);
}

TEST_CASE("errors surface with context") {
    RunConfig c = small_config("uniform", 100);
    const PreparedEnvironment env = prepare_environment(c.environment);
    NanAgent nan;
    CHECK_THROWS_AS(run_with_agent(c, env, nan), DivergenceError);

    RunConfig bad = small_config("fixed", 100);
    bad.agent.action = 7;
    try {
        monte_carlo(bad, 3, 40);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).rfind("seed 40: ", 0) == 0);
    }

    RunConfig theory = small_config("mdp-exp2", 500);
    theory.agent.schedule = ScheduleKind::theory;
    theory.agent.sigma = 0.01;
    theory.agent.t_mix = 2.0;
    bool stepped = false;
    CHECK_THROWS_AS(run(theory, env, [&](std::uint64_t, std::size_t, double) { stepped = true; }), ConfigError);
    CHECK_FALSE(stepped);

    RunConfig cart;
    cart.environment.name = "cartpole";
    cart.environment.mvee_samples = 200;
    cart.agent.algorithm = "fopo";
    cart.t_total = 10;
    CHECK_THROWS_AS(run(cart), ConfigError);
    cart.environment.name = "nowhere";
    CHECK_THROWS_AS(run(cart), ConfigError);
}
