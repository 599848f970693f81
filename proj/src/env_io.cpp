#include <fstream>
#include <sstream>

#include <json.hpp>

#include "avgrl/envs.hpp"

namespace avgrl {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "avgrl-environment/1";

json to_json(const MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

json to_json(const VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

MatrixXd matrix_from(const json& j, const char* what) {
    if (!j.is_array()) throw InvalidInput(std::string("environment file: ") + what + " must be an array of rows");
    const auto rows = Eigen::Index(j.size());
    const Eigen::Index cols = rows == 0 ? 0 : Eigen::Index(j.at(0).size());
    MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const json& row = j.at(std::size_t(r));
        if (Eigen::Index(row.size()) != cols) {
            throw InvalidInput(std::string("environment file: ragged rows in ") + what);
        }
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(std::size_t(c)).get<double>();
    }
    return m;
}

VectorXd vector_from(const json& j, const char* what) {
    if (!j.is_array()) throw InvalidInput(std::string("environment file: ") + what + " must be an array");
    VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(Eigen::Index(i)) = j[i].get<double>();
    return v;
}

json transform_json(const EllipsoidTransform& t) {
    return json{{"tolerance", t.tolerance}, {"matrix", to_json(t.matrix_a)}, {"inverse", to_json(t.inverse_a)}};
}

EllipsoidTransform transform_from(const json& j) {
    EllipsoidTransform t;
    t.tolerance = j.at("tolerance").get<double>();
    t.matrix_a = matrix_from(j.at("matrix"), "transform.matrix");
    t.inverse_a = matrix_from(j.at("inverse"), "transform.inverse");
    if (t.matrix_a.rows() != t.matrix_a.cols() || t.inverse_a.rows() != t.matrix_a.rows() ||
        t.inverse_a.cols() != t.matrix_a.cols()) {
        throw InvalidInput("environment file: transform matrices must be square and equal-sized");
    }
    return t;
}

json cartpole_params_json(const CartpoleParams& p) {
    return json{{"gravity", p.gravity},
                {"cart_mass", p.cart_mass},
                {"pole_mass", p.pole_mass},
                {"half_length", p.half_length},
                {"force", p.force},
                {"dt", p.dt},
                {"angle_limit_deg", p.angle_limit_deg},
                {"max_episode_steps", p.max_episode_steps},
                {"reset_probability", p.reset_probability},
                {"init_range", p.init_range},
                {"include_squares", p.include_squares}};
}

CartpoleParams cartpole_params_from(const json& j) {
    CartpoleParams p;
    p.gravity = j.at("gravity").get<double>();
    p.cart_mass = j.at("cart_mass").get<double>();
    p.pole_mass = j.at("pole_mass").get<double>();
    p.half_length = j.at("half_length").get<double>();
    p.force = j.at("force").get<double>();
    p.dt = j.at("dt").get<double>();
    p.angle_limit_deg = j.at("angle_limit_deg").get<double>();
    p.max_episode_steps = j.at("max_episode_steps").get<std::size_t>();
    p.reset_probability = j.at("reset_probability").get<double>();
    p.init_range = j.at("init_range").get<double>();
    p.include_squares = j.at("include_squares").get<bool>();
    return p;
}

} // namespace

std::string write_environment(const EnvironmentDescription& env) {
    json doc;
    doc["format"] = kFormat;
    if (env.tabular) {
        const auto& m = *env.tabular;
        doc["kind"] = "tabular";
        doc["name"] = m.name;
        doc["seed"] = m.seed;
        doc["n_states"] = m.n_states;
        doc["n_actions"] = m.n_actions;
        doc["dim"] = m.dim();
        doc["parameters"] = m.parameters;
        doc["features"] = to_json(m.features);
        doc["mu"] = to_json(m.mu);
        doc["theta"] = to_json(m.theta);
        doc["transform"] = m.transform ? transform_json(*m.transform) : json(nullptr);
    } else if (env.cartpole) {
        const auto& c = *env.cartpole;
        doc["kind"] = "cartpole";
        doc["name"] = "cartpole";
        doc["seed"] = c.seed;
        doc["physics"] = cartpole_params_json(c.params);
        doc["transform"] = c.transform ? transform_json(*c.transform) : json(nullptr);
    } else {
        throw InvalidInput("write_environment: empty description");
    }
    return doc.dump(1) + "\n";
}

EnvironmentDescription read_environment(const std::string& text) {
    EnvironmentDescription out;
    try {
        const json doc = json::parse(text);
        if (doc.at("format").get<std::string>() != kFormat) {
            throw InvalidInput("environment file: unsupported format tag");
        }
        const auto kind = doc.at("kind").get<std::string>();
        std::optional<EllipsoidTransform> transform;
        if (doc.contains("transform") && !doc.at("transform").is_null()) transform = transform_from(doc.at("transform"));
        if (kind == "tabular") {
            TabularLinearMDP m;
            m.name = doc.at("name").get<std::string>();
            m.seed = doc.at("seed").get<std::uint64_t>();
            m.n_states = doc.at("n_states").get<std::size_t>();
            m.n_actions = doc.at("n_actions").get<std::size_t>();
            m.parameters = doc.at("parameters").get<std::map<std::string, double>>();
            m.features = matrix_from(doc.at("features"), "features");
            m.mu = matrix_from(doc.at("mu"), "mu");
            m.theta = vector_from(doc.at("theta"), "theta");
            m.transform = transform;
            const auto d = doc.at("dim").get<Eigen::Index>();
            if (m.features.rows() != Eigen::Index(m.n_states * m.n_actions) || m.features.cols() != d ||
                m.mu.rows() != d || m.mu.cols() != Eigen::Index(m.n_states) || m.theta.size() != d) {
                throw InvalidInput("environment file: table shapes disagree with n_states/n_actions/dim");
            }
            if (m.transform && m.transform->dim() != d) {
                throw InvalidInput("environment file: transform dimension differs from dim");
            }
            out.tabular = std::move(m);
        } else if (kind == "cartpole") {
            CartpoleDescription c;
            c.seed = doc.at("seed").get<std::uint64_t>();
            c.params = cartpole_params_from(doc.at("physics"));
            c.transform = transform;
            out.cartpole = c;
        } else {
            throw InvalidInput("environment file: unknown kind '" + kind + "'");
        }
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("environment file: ") + e.what());
    }
    return out;
}

void save_environment(const EnvironmentDescription& env, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << write_environment(env);
    if (!out) throw std::runtime_error("write failed: " + path);
}

EnvironmentDescription load_environment(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open environment file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return read_environment(ss.str());
}

std::string write_transform(const EllipsoidTransform& transform) {
    json doc = transform_json(transform);
    doc["format"] = "avgrl-transform/1";
    doc["dim"] = transform.dim();
    return doc.dump(1) + "\n";
}

EllipsoidTransform read_transform(const std::string& text) {
    try {
        return transform_from(json::parse(text));
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("transform file: ") + e.what());
    }
}

} // namespace avgrl
