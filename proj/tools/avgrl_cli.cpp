#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "avgrl/errors.hpp"
#include "avgrl/harness.hpp"

using namespace avgrl;
namespace fs = std::filesystem;

namespace {

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << text;
    if (!out.flush()) throw std::runtime_error("write failed: " + path);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot read " + path);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Tabular MDP from --env / --file, or nullopt with the cartpole params for continuous ones.
struct Resolved {
    std::optional<TabularLinearMDP> tabular;
    std::optional<CartpoleDescription> cartpole;
};

Resolved resolve_environment(const std::string& env, const std::string& file, std::uint64_t seed) {
    if (!file.empty()) {
        EnvironmentDescription d = load_environment(file);
        return {std::move(d.tabular), std::move(d.cartpole)};
    }
    if (env == "riverswim") return {build_riverswim(), std::nullopt};
    if (env == "random-linear") return {build_random_linear(seed), std::nullopt};
    if (env == "cartpole") {
        CartpoleDescription c;
        c.seed = seed;
        return {std::nullopt, c};
    }
    throw ConfigError("unknown environment '" + env + "'");
}

// ---------------------------------------------------------------------------

struct RunOptions {
    std::string config;
    std::string preset;
    std::string out;
    std::optional<std::size_t> runs;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    std::optional<std::uint64_t> t_total;
    std::optional<double> fixed_j_star;
};

RunConfig load_run_config(const RunOptions& o) {
    if (o.config.empty() == o.preset.empty()) throw ConfigError("give exactly one of --config or --preset");
    RunConfig c = o.config.empty() ? preset_config(o.preset) : load_config(o.config);
    if (o.runs) c.runs = *o.runs;
    if (o.seed) c.seed = *o.seed;
    if (o.threads) c.threads = *o.threads;
    if (o.t_total) c.t_total = *o.t_total;
    if (o.fixed_j_star) {
        c.j_star = *o.fixed_j_star;
        c.j_star_source = JStarSource::fixed;
    }
    if (c.runs == 0) throw ConfigError("--runs must be at least 1");
    if (c.t_total == 0) throw ConfigError("--t-total must be at least 1");
    return c;
}

void run_into(const RunConfig& c, const std::string& out_dir, const std::string& label) {
    fs::create_directories(out_dir);
    const Aggregate agg = monte_carlo(c, c.runs, c.seed, c.threads);
    for (const RegretTrace& tr : agg.traces) {
        emit_csv(tr, (fs::path(out_dir) / ("seed_" + std::to_string(tr.seed) + ".csv")).string());
    }
    emit_csv(agg, (fs::path(out_dir) / "aggregate.csv").string());
    std::cout << label << "T=" << agg.steps.back() << " runs=" << c.runs
              << " mean_cum_regret=" << num(agg.mean_regret.back())
              << " std_cum_regret=" << num(agg.std_regret.back())
              << " mean_avg_reward=" << num(agg.mean_avg_reward.back()) << " j_star=" << num(agg.j_star) << "\n";
}

int cmd_run(const RunOptions& o) {
    const RunConfig c = load_run_config(o);
    run_into(c, o.out, "");
    return 0;
}

int cmd_sweep(const RunOptions& o, const std::string& param, const std::vector<std::string>& values) {
    const RunConfig base = load_run_config(o);
    const auto dot = param.find('.');
    if (dot == std::string::npos) throw ConfigError("--param must look like section.key");
    const std::string section = param.substr(0, dot), key = param.substr(dot + 1);
    for (const std::string& v : values) {
        RunConfig c = base;
        set_config_value(c, section, key, v);
        run_into(c, (fs::path(o.out) / (key + "=" + v)).string(), param + "=" + v + " ");
    }
    return 0;
}

int cmd_solve_env(const std::string& env, const std::string& file, std::uint64_t seed, double tol,
                  const std::string& dump) {
    const Resolved r = resolve_environment(env, file, seed);
    if (!r.tabular) {
        std::cerr << "error: no exact solver for continuous environments; use --fixed-jstar\n";
        return 2;
    }
    const BellmanSolution sol = solve_average_reward(*r.tabular, tol);
    std::cout << "environment: " << r.tabular->name << "\n"
              << "j_star: " << num(sol.j_star) << "\n"
              << "span: " << num(sol.span) << "\n"
              << "residual: " << num(sol.residual) << "\n"
              << "iterations: " << sol.iterations << "\n";
    if (!dump.empty()) {
        nlohmann::ordered_json j;
        j["j_star"] = sol.j_star;
        j["span"] = sol.span;
        j["residual"] = sol.residual;
        j["v_star"] = std::vector<double>(sol.v_star.data(), sol.v_star.data() + sol.v_star.size());
        nlohmann::ordered_json q = nlohmann::ordered_json::array();
        for (Eigen::Index s = 0; s < sol.q_star.rows(); ++s) {
            std::vector<double> row(std::size_t(sol.q_star.cols()));
            for (Eigen::Index a = 0; a < sol.q_star.cols(); ++a) row[std::size_t(a)] = sol.q_star(s, a);
            q.push_back(row);
        }
        j["q_star"] = q;
        write_file(dump, j.dump(2) + "\n");
    }
    return 0;
}

int cmd_validate(const std::string& env, const std::string& file, std::uint64_t seed, double tol) {
    const Resolved r = resolve_environment(env, file, seed);
    if (!r.tabular) {
        std::cout << "continuous environment: nothing to validate\n";
        return 0;
    }
    const ValidationReport rep = validate_linear(*r.tabular, tol);
    std::cout << "environment: " << r.tabular->name << "\n"
              << "max_kernel_range_violation: " << num(rep.max_kernel_range_violation) << "\n"
              << "max_row_sum_error: " << num(rep.max_row_sum_error) << "\n"
              << "max_reward_range_violation: " << num(rep.max_reward_range_violation) << "\n"
              << "max_feature_norm_excess: " << num(rep.max_feature_norm_excess) << "\n"
              << "violations: " << rep.violations.size() << "\n";
    const std::size_t shown = std::min<std::size_t>(rep.violations.size(), 20);
    for (std::size_t i = 0; i < shown; ++i) {
        const Violation& v = rep.violations[i];
        std::cout << "  " << v.kind << " state=" << v.state << " action=" << v.action;
        if (v.next_state) std::cout << " next_state=" << *v.next_state;
        std::cout << " excess=" << num(v.value) << "\n";
    }
    std::cout << (rep.clean() ? "clean\n" : "NOT clean\n");
    return rep.clean() ? 0 : 1;
}

// One point per line, coordinates separated by commas or whitespace.
MatrixXd read_points(const std::string& path) {
    std::istringstream in(read_file(path));
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        for (char& ch : line) {
            if (ch == ',') ch = ' ';
        }
        std::istringstream ls(line);
        std::vector<double> row;
        std::string tok;
        while (ls >> tok) {
            if (tok[0] == '#') break;
            try {
                row.push_back(std::stod(tok));
            } catch (const std::exception&) {
                throw InvalidInput("points: not a number: '" + tok + "'");
            }
        }
        if (row.empty()) continue;
        if (!rows.empty() && row.size() != rows.front().size()) throw InvalidInput("points: ragged rows");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw InvalidInput("points: no points in " + path);
    MatrixXd p(Eigen::Index(rows.front().size()), Eigen::Index(rows.size()));
    for (std::size_t j = 0; j < rows.size(); ++j) {
        for (std::size_t i = 0; i < rows[j].size(); ++i) p(Eigen::Index(i), Eigen::Index(j)) = rows[j][i];
    }
    return p;
}

int cmd_mvee(const std::string& points_file, const std::string& env, std::size_t samples, std::uint64_t seed,
             double tol, const std::string& out) {
    MatrixXd pts;
    if (!points_file.empty()) {
        pts = read_points(points_file);
    } else {
        const Resolved r = resolve_environment(env, "", seed);
        pts = r.tabular ? MatrixXd(r.tabular->features.transpose())
                        : cartpole_feature_samples(r.cartpole->params, samples, seed);
    }
    const EllipsoidTransform t = mvee_transform(pts, tol);
    const double before = pts.colwise().norm().maxCoeff();
    const double after = (t.matrix_a * pts).colwise().norm().maxCoeff();
    std::cout << "points: " << pts.cols() << " dim: " << pts.rows() << "\n"
              << "max_norm_before: " << num(before) << "\n"
              << "max_norm_after: " << num(after) << "\n"
              << "max_abs_a_minus_identity: "
              << num((t.matrix_a - MatrixXd::Identity(t.dim(), t.dim())).cwiseAbs().maxCoeff()) << "\n";
    if (t.dim() <= 8) {
        std::cout << "A:\n";
        for (Eigen::Index i = 0; i < t.dim(); ++i) {
            std::cout << " ";
            for (Eigen::Index j = 0; j < t.dim(); ++j) std::cout << " " << num(t.matrix_a(i, j));
            std::cout << "\n";
        }
    }
    if (!out.empty()) write_file(out, write_transform(t));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Average-reward linear MDP laboratory"};
    app.require_subcommand(1);

    RunOptions run_opts;
    auto add_run_flags = [&](CLI::App* sub) {
        auto* cfg = sub->add_option("--config", run_opts.config, "INI config file");
        auto* pre = sub->add_option("--preset", run_opts.preset, "named preset");
        cfg->excludes(pre);
        sub->add_option("--out", run_opts.out, "output directory")->required();
        sub->add_option("--runs", run_opts.runs, "number of seeds (default 10)");
        sub->add_option("--seed", run_opts.seed, "base seed");
        sub->add_option("--threads", run_opts.threads, "worker threads");
        sub->add_option("--t-total", run_opts.t_total, "horizon T");
        sub->add_option("--fixed-jstar", run_opts.fixed_j_star, "use this J* instead of the solver");
    };

    CLI::App* run = app.add_subcommand("run", "Monte-Carlo run; writes per-seed and aggregate CSVs");
    add_run_flags(run);

    CLI::App* sweep = app.add_subcommand("sweep", "run once per value of one config key");
    add_run_flags(sweep);
    std::string param;
    std::vector<std::string> values;
    sweep->add_option("--param", param, "section.key")->required();
    sweep->add_option("--values", values, "comma-separated values")->required()->delimiter(',');

    std::string env_name, file, dump, points, out;
    std::uint64_t seed = 0;
    double tol = 1e-9;
    std::size_t samples = 10000;

    CLI::App* solve = app.add_subcommand("solve-env", "exact J*, span and residual");
    auto* se = solve->add_option("--env", env_name, "riverswim | random-linear | cartpole");
    auto* sf = solve->add_option("--file", file, "environment description");
    se->excludes(sf);
    solve->add_option("--seed", seed, "instance seed");
    solve->add_option("--tol", tol, "Bellman residual tolerance");
    solve->add_option("--dump", dump, "write v* and q* as JSON");

    CLI::App* validate = app.add_subcommand("validate", "check the linear-MDP structure");
    auto* ve = validate->add_option("--env", env_name, "built-in environment");
    auto* vf = validate->add_option("--file", file, "environment description");
    ve->excludes(vf);
    validate->add_option("--seed", seed, "instance seed");
    double validate_tol = 1e-10;
    validate->add_option("--tol", validate_tol, "violation tolerance");

    CLI::App* mvee = app.add_subcommand("mvee", "minimum-volume ellipsoid normalization");
    auto* mp = mvee->add_option("--points", points, "text file, one point per line");
    auto* me = mvee->add_option("--env", env_name, "built-in environment");
    mp->excludes(me);
    mvee->add_option("--samples", samples, "cartpole states to sample");
    mvee->add_option("--seed", seed, "sampling / instance seed");
    double mvee_tol = kDefaultMveeTolerance;
    mvee->add_option("--tol", mvee_tol, "duality-gap tolerance");
    mvee->add_option("--out", out, "write the transform JSON here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*run) return cmd_run(run_opts);
        if (*sweep) return cmd_sweep(run_opts, param, values);
        if (*solve) {
            if (env_name.empty() && file.empty()) throw ConfigError("give --env or --file");
            return cmd_solve_env(env_name, file, seed, tol, dump);
        }
        if (*validate) {
            if (env_name.empty() && file.empty()) throw ConfigError("give --env or --file");
            return cmd_validate(env_name, file, seed, validate_tol);
        }
        if (*mvee) {
            if (points.empty() && env_name.empty()) throw ConfigError("give --points or --env");
            return cmd_mvee(points, env_name, samples, seed, mvee_tol, out);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const InvalidInput& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return 2;
    } catch (const DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return 3;
    } catch (const ConvergenceError& e) {
        std::cerr << "no convergence: " << e.what() << " (residual " << num(e.gap()) << ")\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
