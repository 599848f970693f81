#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "avgrl/harness.hpp"

namespace avgrl {

namespace {

using Setter = std::function<void(RunConfig&, const std::string&)>;

std::string trimmed(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Drops an inline "; ..." or "# ..." comment (must follow whitespace), then trims.
std::string value_text(const std::string& raw) {
    for (std::size_t i = 1; i < raw.size(); ++i) {
        if ((raw[i] == ';' || raw[i] == '#') && std::isspace(static_cast<unsigned char>(raw[i - 1]))) {
            return trimmed(raw.substr(0, i));
        }
    }
    return trimmed(raw);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
    throw ConfigError("config: " + key + " = '" + value + "' is not " + expected);
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used == v.size()) return x;
    } catch (const std::exception&) {
    }
    bad_value(key, v, "a number");
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    if (v.empty() || !std::all_of(v.begin(), v.end(), [](unsigned char c) { return std::isdigit(c); })) {
        bad_value(key, v, "a non-negative integer");
    }
    try {
        return std::stoull(v);
    } catch (const std::exception&) {
        bad_value(key, v, "a non-negative integer");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    std::string s = v;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return char(std::tolower(c)); });
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    bad_value(key, v, "a boolean");
}

const std::map<std::string, Setter>& environment_keys() {
    static const std::map<std::string, Setter> keys = {
        {"name", [](RunConfig& c, const std::string& v) { c.environment.name = v; }},
        {"seed", [](RunConfig& c, const std::string& v) { c.environment.seed = to_u64("environment.seed", v); }},
        {"file", [](RunConfig& c, const std::string& v) { c.environment.file = v; }},
        {"n_states",
         [](RunConfig& c, const std::string& v) { c.environment.n_states = to_u64("environment.n_states", v); }},
        {"n_actions",
         [](RunConfig& c, const std::string& v) { c.environment.n_actions = to_u64("environment.n_actions", v); }},
        {"dim",
         [](RunConfig& c, const std::string& v) { c.environment.dim = Eigen::Index(to_u64("environment.dim", v)); }},
        {"augment_constant",
         [](RunConfig& c, const std::string& v) {
             c.environment.augment_constant = to_bool("environment.augment_constant", v);
         }},
        {"normalize",
         [](RunConfig& c, const std::string& v) { c.environment.normalize = to_bool("environment.normalize", v); }},
        {"mvee_samples",
         [](RunConfig& c, const std::string& v) {
             c.environment.mvee_samples = to_u64("environment.mvee_samples", v);
         }},
        {"mvee_tolerance",
         [](RunConfig& c, const std::string& v) {
             c.environment.mvee_tolerance = to_double("environment.mvee_tolerance", v);
         }},
        {"include_squares",
         [](RunConfig& c, const std::string& v) {
             c.environment.include_squares = to_bool("environment.include_squares", v);
         }},
    };
    return keys;
}

const std::map<std::string, Setter>& agent_keys() {
    static const std::map<std::string, Setter> keys = {
        {"algorithm", [](RunConfig& c, const std::string& v) { c.agent.algorithm = v; }},
        {"span", [](RunConfig& c, const std::string& v) { c.agent.span = to_double("agent.span", v); }},
        {"delta", [](RunConfig& c, const std::string& v) { c.agent.delta = to_double("agent.delta", v); }},
        {"ridge", [](RunConfig& c, const std::string& v) { c.agent.ridge = to_double("agent.ridge", v); }},
        {"beta", [](RunConfig& c, const std::string& v) { c.agent.beta = to_double("agent.beta", v); }},
        {"beta_scale",
         [](RunConfig& c, const std::string& v) { c.agent.beta_scale = to_double("agent.beta_scale", v); }},
        {"grid_resolution",
         [](RunConfig& c, const std::string& v) { c.agent.grid_resolution = to_double("agent.grid_resolution", v); }},
        {"fp_iters", [](RunConfig& c, const std::string& v) { c.agent.fp_iters = to_u64("agent.fp_iters", v); }},
        {"horizon", [](RunConfig& c, const std::string& v) { c.agent.horizon = to_u64("agent.horizon", v); }},
        {"schedule",
         [](RunConfig& c, const std::string& v) {
             if (v == "fixed") c.agent.schedule = ScheduleKind::fixed;
             else if (v == "theory") c.agent.schedule = ScheduleKind::theory;
             else if (v == "doubling") c.agent.schedule = ScheduleKind::doubling;
             else bad_value("agent.schedule", v, "one of fixed, theory, doubling");
         }},
        {"n_len", [](RunConfig& c, const std::string& v) { c.agent.n_len = to_u64("agent.n_len", v); }},
        {"b_len", [](RunConfig& c, const std::string& v) { c.agent.b_len = to_u64("agent.b_len", v); }},
        {"eta", [](RunConfig& c, const std::string& v) { c.agent.eta = to_double("agent.eta", v); }},
        {"mix_mu", [](RunConfig& c, const std::string& v) { c.agent.mix_mu = to_double("agent.mix_mu", v); }},
        {"sigma", [](RunConfig& c, const std::string& v) { c.agent.sigma = to_double("agent.sigma", v); }},
        {"t_mix", [](RunConfig& c, const std::string& v) { c.agent.t_mix = to_double("agent.t_mix", v); }},
        {"gate", [](RunConfig& c, const std::string& v) { c.agent.gate = to_double("agent.gate", v); }},
        {"xi", [](RunConfig& c, const std::string& v) { c.agent.xi = to_double("agent.xi", v); }},
        {"retain_estimators",
         [](RunConfig& c, const std::string& v) {
             c.agent.retain_estimators = to_bool("agent.retain_estimators", v);
         }},
        {"action", [](RunConfig& c, const std::string& v) { c.agent.action = to_u64("agent.action", v); }},
    };
    return keys;
}

const std::map<std::string, Setter>& run_keys() {
    static const std::map<std::string, Setter> keys = {
        {"t_total", [](RunConfig& c, const std::string& v) { c.t_total = to_u64("run.t_total", v); }},
        {"record_stride",
         [](RunConfig& c, const std::string& v) {
             c.record_stride = to_u64("run.record_stride", v);
             if (c.record_stride == 0) throw ConfigError("config: run.record_stride must be at least 1");
         }},
        {"seed", [](RunConfig& c, const std::string& v) { c.seed = to_u64("run.seed", v); }},
        {"runs", [](RunConfig& c, const std::string& v) { c.runs = to_u64("run.runs", v); }},
        {"threads", [](RunConfig& c, const std::string& v) { c.threads = to_u64("run.threads", v); }},
        {"j_star_source",
         [](RunConfig& c, const std::string& v) {
             if (v == "solver") c.j_star_source = JStarSource::solver;
             else if (v == "fixed") c.j_star_source = JStarSource::fixed;
             else bad_value("run.j_star_source", v, "solver or fixed");
         }},
        {"j_star",
         [](RunConfig& c, const std::string& v) {
             c.j_star = to_double("run.j_star", v);
             c.j_star_source = JStarSource::fixed;
         }},
    };
    return keys;
}

struct Preset {
    std::string environment;
    std::uint64_t t_total;
    std::function<void(AgentSpec&)> agent;
};

const std::map<std::string, Preset>& presets() {
    static const std::map<std::string, Preset> table = {
        {"mdpexp2-riverswim",
         {"riverswim", 100'000,
          [](AgentSpec& a) {
              a.algorithm = "mdp-exp2";
              a.schedule = ScheduleKind::fixed;
              a.n_len = 100;
              a.b_len = 1000;
              a.eta = 10.0;
              a.mix_mu = 0.0;
          }}},
        {"mdpexp2-randomlinear",
         {"random-linear", 50'000,
          [](AgentSpec& a) {
              a.algorithm = "mdp-exp2";
              a.schedule = ScheduleKind::fixed;
              a.n_len = 10;
              a.b_len = 100;
              a.eta = 10.0;
              a.mix_mu = 0.0;
          }}},
        {"mdpexp2-cartpole",
         {"cartpole", 100'000,
          [](AgentSpec& a) {
              a.algorithm = "mdp-exp2";
              a.schedule = ScheduleKind::fixed;
              a.n_len = 500;
              a.b_len = 5000;
              a.eta = 0.002;
              a.mix_mu = 0.0;
              a.gate = 0.0;
          }}},
        {"olsvi-riverswim",
         {"riverswim", 100'000,
          [](AgentSpec& a) {
              a.algorithm = "olsvi";
              a.beta = 1.0;
              a.ridge = 0.01;
              a.metadata = {{"gamma", 0.99}, {"C", 2.0}};
          }}},
        {"olsvi-randomlinear",
         {"random-linear", 50'000,
          [](AgentSpec& a) {
              a.algorithm = "olsvi";
              a.beta = 0.01;
              a.ridge = 0.01;
              a.metadata = {{"gamma", 0.8}, {"C", 2.0}};
          }}},
        {"fopo-randomlinear",
         {"random-linear", 3'000,
          [](AgentSpec& a) {
              a.algorithm = "fopo";
              a.grid_resolution = 0.01;
              a.fp_iters = 200;
          }}},
    };
    return table;
}

void parse_section(RunConfig& config, const std::string& section, const boost::property_tree::ptree& tree,
                   const std::map<std::string, Setter>& keys) {
    for (const auto& [key, node] : tree) {
        if (!node.empty()) throw ConfigError("config: nested value under [" + section + "] " + key);
        const auto it = keys.find(key);
        if (it == keys.end()) throw ConfigError("config: unknown key '" + key + "' in [" + section + "]");
        it->second(config, value_text(node.data()));
    }
}

} // namespace

std::vector<std::string> preset_names() {
    std::vector<std::string> names;
    for (const auto& [name, p] : presets()) names.push_back(name);
    return names;
}

void apply_agent_preset(AgentSpec& spec, const std::string& name) {
    const auto it = presets().find(name);
    if (it == presets().end()) throw ConfigError("unknown preset '" + name + "'");
    it->second.agent(spec);
    spec.preset = name;
}

RunConfig preset_config(const std::string& name) {
    const auto it = presets().find(name);
    if (it == presets().end()) throw ConfigError("unknown preset '" + name + "'");
    RunConfig config;
    config.environment.name = it->second.environment;
    config.t_total = it->second.t_total;
    apply_agent_preset(config.agent, name);
    return config;
}

RunConfig parse_config(const std::string& text) {
    boost::property_tree::ptree tree;
    try {
        std::istringstream in(text);
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }

    RunConfig config;
    for (const auto& [section, body] : tree) {
        if (section != "environment" && section != "agent" && section != "run") {
            throw ConfigError("config: unknown section or top-level key '" + section + "'");
        }
    }
    // A preset supplies the defaults; explicit keys then override them.
    if (const auto agent = tree.get_child_optional("agent")) {
        if (const auto preset = agent->get_optional<std::string>("preset")) {
            config = preset_config(value_text(*preset));
        }
    }
    std::map<std::string, Setter> agent = agent_keys();
    agent.emplace("preset", [](RunConfig&, const std::string&) {});
    if (const auto env = tree.get_child_optional("environment")) {
        parse_section(config, "environment", *env, environment_keys());
    }
    if (const auto a = tree.get_child_optional("agent")) parse_section(config, "agent", *a, agent);
    if (const auto r = tree.get_child_optional("run")) parse_section(config, "run", *r, run_keys());
    if (config.t_total == 0) throw ConfigError("config: run.t_total must be at least 1");
    if (config.runs == 0) throw ConfigError("config: run.runs must be at least 1");
    return config;
}

void set_config_value(RunConfig& config, const std::string& section, const std::string& key,
                      const std::string& value) {
    const std::map<std::string, Setter>* keys = nullptr;
    if (section == "environment") keys = &environment_keys();
    else if (section == "agent") keys = &agent_keys();
    else if (section == "run") keys = &run_keys();
    else throw ConfigError("config: unknown section '" + section + "'");
    const auto it = keys->find(key);
    if (it == keys->end()) throw ConfigError("config: unknown key '" + key + "' in [" + section + "]");
    it->second(config, trimmed(value));
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config: cannot read " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

} // namespace avgrl
