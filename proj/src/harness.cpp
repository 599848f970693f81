#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "avgrl/harness.hpp"

namespace avgrl {

namespace {

// Same MDP expressed in transformed features: Phi' = A Phi, mu' = A^{-T} mu, theta' = A^{-T} theta.
TabularLinearMDP transformed_view(const TabularLinearMDP& mdp, const EllipsoidTransform& t) {
    TabularLinearMDP out = mdp;
    out.features = mdp.features * t.matrix_a.transpose();
    out.mu = t.inverse_a.transpose() * mdp.mu;
    out.theta = t.inverse_a.transpose() * mdp.theta;
    out.transform.reset();
    return out;
}

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void write_text(const std::string& text, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << text;
    out.close();
    if (!out) throw std::runtime_error("write failed: " + path);
}

[[noreturn]] void rethrow_with_seed(std::exception_ptr error, std::uint64_t seed) {
    const std::string prefix = "seed " + std::to_string(seed) + ": ";
    try {
        std::rethrow_exception(error);
    } catch (const ConfigError& e) {
        throw ConfigError(prefix + e.what());
    } catch (const DivergenceError& e) {
        throw DivergenceError(prefix + e.what());
    } catch (const ConvergenceError& e) {
        throw ConvergenceError(prefix + e.what(), e.gap());
    } catch (const InvalidInput& e) {
        throw InvalidInput(prefix + e.what());
    } catch (const std::exception& e) {
        throw std::runtime_error(prefix + e.what());
    }
}

} // namespace

std::size_t RunConfig::effective_stride() const {
    if (record_stride > 0) return record_stride;
    return std::max<std::size_t>(1, std::size_t(t_total / 2000));
}

PreparedEnvironment prepare_environment(const EnvironmentSpec& spec, JStarSource source,
                                        std::optional<double> fixed_j_star) {
    std::optional<TabularLinearMDP> tabular;
    std::optional<CartpoleParams> cartpole;
    std::optional<EllipsoidTransform> stored_transform;

    if (spec.name == "riverswim") {
        tabular = build_riverswim();
    } else if (spec.name == "random-linear") {
        tabular = build_random_linear(spec.seed, spec.n_states, spec.n_actions, spec.dim);
    } else if (spec.name == "cartpole") {
        cartpole = CartpoleParams{};
        cartpole->include_squares = spec.include_squares;
    } else if (spec.name == "file") {
        if (spec.file.empty()) throw ConfigError("environment: name = file needs a file path");
        EnvironmentDescription desc = load_environment(spec.file);
        if (desc.tabular) {
            stored_transform = desc.tabular->transform;
            tabular = std::move(*desc.tabular);
        } else {
            cartpole = desc.cartpole->params;
            stored_transform = desc.cartpole->transform;
        }
    } else {
        throw ConfigError("environment: unknown name '" + spec.name + "'");
    }

    const bool augment = spec.augment_constant.value_or(cartpole.has_value());
    const bool normalize = spec.normalize.value_or(cartpole.has_value());

    if (tabular) {
        auto mdp = std::make_shared<TabularLinearMDP>(std::move(*tabular));
        mdp->transform.reset();
        TabularLinearMDP view = *mdp;
        std::optional<EllipsoidTransform> transform = stored_transform;
        if (!transform && normalize) {
            transform = mvee_transform(MatrixXd(view.features.transpose()), spec.mvee_tolerance);
        }
        if (transform) view = transformed_view(view, *transform);
        if (augment) view = augment_constant(view);
        auto agent_mdp = std::make_shared<const TabularLinearMDP>(std::move(view));

        std::optional<BellmanSolution> solution;
        double j_star = 0.0;
        if (source == JStarSource::solver) {
            solution = solve_average_reward(*mdp);
            j_star = solution->j_star;
        } else {
            if (!fixed_j_star) throw ConfigError("run: j_star_source = fixed needs a j_star value");
            j_star = *fixed_j_star;
        }
        return {mdp->name, mdp, agent_mdp, std::nullopt, agent_mdp->feature_map(), std::move(solution), j_star};
    }
    FeatureMap map = cartpole_feature_map(*cartpole);
    std::optional<EllipsoidTransform> transform = stored_transform;
    if (!transform && normalize) {
        transform = mvee_transform(cartpole_feature_samples(*cartpole, spec.mvee_samples, spec.seed),
                                   spec.mvee_tolerance);
    }
    if (transform) map = apply_transform(map, *transform);
    if (augment) map = augment_constant(map);
    const double j_star = fixed_j_star.value_or(cartpole_balanced_gain(*cartpole));
    return {"cartpole", nullptr, nullptr, cartpole, map, std::nullopt, j_star};
}

std::unique_ptr<Environment> make_environment(const PreparedEnvironment& env, std::uint64_t seed) {
    if (env.mdp) return std::make_unique<TabularEnvironment>(env.mdp, env.agent_features, seed);
    return std::make_unique<CartpoleEnvironment>(*env.cartpole, env.agent_features, seed);
}

namespace {

double resolve_span(const AgentSpec& spec, const PreparedEnvironment& env) {
    if (spec.span) return *spec.span;
    if (env.solution) return env.solution->span;
    if (env.agent_mdp) return solve_average_reward(*env.mdp).span;
    throw ConfigError("agent: span must be given for continuous environments");
}

} // namespace

AgentSpec resolve_agent_spec(const AgentSpec& spec, const PreparedEnvironment& env) {
    AgentSpec out = spec;
    if (spec.algorithm != "mdp-exp2" || spec.schedule == ScheduleKind::doubling) return out;
    const bool need_sigma = !out.sigma && (spec.schedule == ScheduleKind::theory || !out.gate);
    const bool need_t_mix = !out.t_mix && spec.schedule == ScheduleKind::theory;
    if (!need_sigma && !need_t_mix) return out;
    if (!env.agent_mdp) {
        throw ConfigError("agent: sigma and t_mix (or a gate) must be given for continuous environments");
    }
    const MixingReport est = estimate_mixing_and_excitation(*env.agent_mdp, kMixingPolicies, env.agent_mdp->seed);
    if (need_sigma) out.sigma = est.sigma_hat;
    if (need_t_mix) out.t_mix = est.t_mix_hat;
    return out;
}

std::unique_ptr<Agent> make_agent(const AgentSpec& spec, const PreparedEnvironment& env, std::uint64_t t_total,
                                  std::uint64_t seed) {
    const Eigen::Index d = env.agent_features.dim();
    const std::size_t n_a = env.agent_features.n_actions();
    if (t_total == 0) throw ConfigError("run: t_total must be at least 1");

    if (spec.algorithm == "fopo") {
        FopoConfig c;
        c.t_total = t_total;
        c.span = resolve_span(spec, env);
        c.delta = spec.delta;
        c.ridge = spec.ridge;
        c.beta = spec.beta;
        c.beta_scale = spec.beta_scale;
        c.grid_resolution = spec.grid_resolution;
        c.fp_iters = spec.fp_iters;
        return std::make_unique<FopoAgent>(d, n_a, c);
    }
    if (spec.algorithm == "olsvi") {
        OlsviConfig c;
        c.t_total = t_total;
        // span only enters through the horizon formula
        c.span = spec.horizon > 0 && !spec.span && !env.mdp ? 0.0 : resolve_span(spec, env);
        c.delta = spec.delta;
        c.ridge = spec.ridge;
        c.horizon = spec.horizon;
        c.beta = spec.beta;
        c.beta_scale = spec.beta_scale;
        return std::make_unique<OlsviAgent>(d, n_a, c);
    }
    if (spec.algorithm == "mdp-exp2") {
        const AgentSpec r = resolve_agent_spec(spec, env);
        Exp2Config c;
        c.mix_mu = r.mix_mu;
        c.gate_override = r.gate;
        c.retain_estimators = r.retain_estimators;
        c.xi = r.xi;
        switch (r.schedule) {
        case ScheduleKind::fixed:
            c.n_len = r.n_len;
            c.b_len = r.b_len;
            c.eta = r.eta;
            c.sigma = r.sigma.value_or(0.0);
            break;
        case ScheduleKind::theory: {
            const Exp2Schedule s = exp2_schedule(t_total, *r.t_mix, *r.sigma, d);
            c.n_len = s.n_len;
            c.b_len = s.b_len;
            c.eta = s.eta;
            c.sigma = *r.sigma;
            break;
        }
        case ScheduleKind::doubling:
            c.doubling = true;
            break;
        }
        if (!c.doubling && (c.n_len == 0 || 2 * c.n_len > t_total)) {
            throw ConfigError("agent: trajectory length N = " + std::to_string(c.n_len) +
                              " leaves no complete epoch within T = " + std::to_string(t_total));
        }
        return std::make_unique<Exp2Agent>(d, n_a, c, seed);
    }
    if (spec.algorithm == "uniform") return std::make_unique<UniformRandomAgent>(n_a, seed);
    if (spec.algorithm == "fixed") {
        if (spec.action >= n_a) throw ConfigError("agent: fixed action out of range");
        return std::make_unique<FixedActionAgent>(spec.action);
    }
    throw ConfigError("agent: unknown algorithm '" + spec.algorithm + "'");
}

RegretTrace trace_from_rewards(const std::vector<double>& rewards, double j_star, std::size_t stride,
                               std::uint64_t seed) {
    if (stride == 0) throw InvalidInput("trace_from_rewards: stride must be positive");
    RegretTrace trace;
    trace.j_star = j_star;
    trace.seed = seed;
    RegretAccumulator acc;
    for (std::size_t i = 0; i < rewards.size(); ++i) {
        acc.add(rewards[i]);
        if (acc.steps() % stride == 0 || i + 1 == rewards.size()) {
            trace.steps.push_back(acc.steps());
            trace.cumulative_regret.push_back(acc.regret(j_star));
            trace.running_avg_reward.push_back(acc.average_reward());
        }
    }
    trace.reward_sum = acc.reward_sum();
    return trace;
}

RegretTrace run_with_agent(const RunConfig& config, const PreparedEnvironment& env, Agent& agent,
                           const StepHook& hook) {
    if (config.t_total == 0) throw ConfigError("run: t_total must be at least 1");
    const std::size_t stride = config.effective_stride();
    std::unique_ptr<Environment> world = make_environment(env, derive_seed(config.seed, kEnvironmentStream));
    const std::size_t n_a = world->n_actions();

    RegretTrace trace;
    trace.j_star = env.j_star;
    trace.seed = config.seed;
    RegretAccumulator acc;
    Observation x = world->current();
    for (std::uint64_t t = 1; t <= config.t_total; ++t) {
        const std::size_t a = agent.act(t, x);
        if (a >= n_a) throw InvalidInput("run: agent chose action " + std::to_string(a) + " out of range");
        EnvStep step = world->step(a);
        agent.observe(x, a, step.reward, step.next);
        if (!agent.finite() || !std::isfinite(step.reward)) {
            throw DivergenceError("run: non-finite agent quantity at step " + std::to_string(t));
        }
        acc.add(step.reward);
        if (hook) hook(t, a, step.reward);
        if (t % stride == 0 || t == config.t_total) {
            trace.steps.push_back(t);
            trace.cumulative_regret.push_back(acc.regret(env.j_star));
            trace.running_avg_reward.push_back(acc.average_reward());
        }
        x = std::move(step.next);
    }
    trace.reward_sum = acc.reward_sum();
    return trace;
}

RegretTrace run(const RunConfig& config, const PreparedEnvironment& env, const StepHook& hook) {
    std::unique_ptr<Agent> agent =
        make_agent(config.agent, env, config.t_total, derive_seed(config.seed, kAgentStream));
    return run_with_agent(config, env, *agent, hook);
}

RegretTrace run(const RunConfig& config) {
    const PreparedEnvironment env = prepare_environment(config.environment, config.j_star_source, config.j_star);
    return run(config, env);
}

Aggregate monte_carlo(const RunConfig& config, std::size_t n_runs, std::uint64_t base_seed, std::size_t threads) {
    if (n_runs == 0) throw ConfigError("monte_carlo: n_runs must be at least 1");
    const PreparedEnvironment env = prepare_environment(config.environment, config.j_star_source, config.j_star);
    RunConfig resolved = config;
    resolved.agent = resolve_agent_spec(config.agent, env);

    std::vector<RegretTrace> traces(n_runs);
    std::vector<std::exception_ptr> errors(n_runs);
    std::size_t next = 0;
    std::mutex lock;
    auto worker = [&] {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard<std::mutex> guard(lock);
                if (next == n_runs) return;
                i = next++;
            }
            try {
                RunConfig c = resolved;
                c.seed = base_seed + i;
                traces[i] = run(c, env);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t n_threads = std::clamp<std::size_t>(threads, 1, n_runs);
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t k = 0; k < n_threads; ++k) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (std::size_t i = 0; i < n_runs; ++i) {
        if (errors[i]) rethrow_with_seed(errors[i], base_seed + i);
    }

    Aggregate agg;
    agg.j_star = env.j_star;
    agg.steps = traces.front().steps;
    const std::size_t n_points = agg.steps.size();
    agg.mean_regret.assign(n_points, 0.0);
    agg.std_regret.assign(n_points, 0.0);
    agg.mean_avg_reward.assign(n_points, 0.0);
    const double n = double(n_runs);
    for (std::size_t p = 0; p < n_points; ++p) {
        double sum = 0.0;
        double avg = 0.0;
        for (const auto& tr : traces) {
            sum += tr.cumulative_regret[p];
            avg += tr.running_avg_reward[p];
        }
        const double mean = sum / n;
        double ss = 0.0;
        for (const auto& tr : traces) ss += (tr.cumulative_regret[p] - mean) * (tr.cumulative_regret[p] - mean);
        agg.mean_regret[p] = mean;
        agg.std_regret[p] = n_runs > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
        agg.mean_avg_reward[p] = avg / n;
    }
    agg.traces = std::move(traces);
    return agg;
}

std::string format_csv(const RegretTrace& trace) {
    std::ostringstream out;
    out << "step,cum_regret,avg_reward,j_star,seed\n";
    const std::string j = format_number(trace.j_star);
    const std::string seed = std::to_string(trace.seed);
    for (std::size_t i = 0; i < trace.steps.size(); ++i) {
        out << trace.steps[i] << ',' << format_number(trace.cumulative_regret[i]) << ','
            << format_number(trace.running_avg_reward[i]) << ',' << j << ',' << seed << '\n';
    }
    return out.str();
}

std::string format_csv(const Aggregate& aggregate) {
    std::ostringstream out;
    out << "step,cum_regret_mean,cum_regret_std,avg_reward,j_star,seed\n";
    const std::string j = format_number(aggregate.j_star);
    for (std::size_t i = 0; i < aggregate.steps.size(); ++i) {
        out << aggregate.steps[i] << ',' << format_number(aggregate.mean_regret[i]) << ','
            << format_number(aggregate.std_regret[i]) << ',' << format_number(aggregate.mean_avg_reward[i]) << ','
            << j << ",agg\n";
    }
    return out.str();
}

void emit_csv(const RegretTrace& trace, const std::string& path) { write_text(format_csv(trace), path); }
void emit_csv(const Aggregate& aggregate, const std::string& path) { write_text(format_csv(aggregate), path); }

} // namespace avgrl
