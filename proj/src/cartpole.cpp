#include <cmath>
#include <numbers>

#include "avgrl/envs.hpp"

namespace avgrl {

namespace {

constexpr double kTrackHalfWidth = 2.4;
constexpr double kVelocityRange = 3.0;
constexpr double kAngularVelocityRange = 3.5;

double angle_limit_rad(const CartpoleParams& p) { return p.angle_limit_deg * std::numbers::pi / 180.0; }

} // namespace

double cartpole_balanced_gain(const CartpoleParams& p) {
    const double balanced = double(p.max_episode_steps);
    return balanced / (balanced + 1.0 / p.reset_probability);
}

Eigen::Index cartpole_base_dim(bool include_squares) { return include_squares ? 14 : 10; }

VectorXd cartpole_base_features(const StateVector& state, bool include_squares) {
    VectorXd out = VectorXd::Zero(cartpole_base_dim(include_squares));
    if (state.size() < 5) throw InvalidInput("cartpole state must have 5 entries");
    if (state(4) != 0.0) return out;  // absorbing state
    out.head(4) = state.head(4);
    Eigen::Index k = 4;
    for (Eigen::Index i = 0; i < 4; ++i) {
        for (Eigen::Index j = include_squares ? i : i + 1; j < 4; ++j) out(k++) = state(i) * state(j);
    }
    return out;
}

FeatureMap cartpole_feature_map(const CartpoleParams& params) {
    const bool squares = params.include_squares;
    StateVector corner(5);
    corner << kTrackHalfWidth, kVelocityRange, angle_limit_rad(params), kAngularVelocityRange, 0.0;
    const double bound = cartpole_base_features(corner, squares).norm();
    return block_action_encoding([squares](const StateVector& x) { return cartpole_base_features(x, squares); },
                                 cartpole_base_dim(squares), 2, bound);
}

MatrixXd cartpole_feature_samples(const CartpoleParams& params, std::size_t n_states, std::uint64_t seed) {
    const FeatureMap map = cartpole_feature_map(params);
    Rng rng(derive_seed(seed, kBuildStream));
    const double limit = angle_limit_rad(params);
    MatrixXd out(map.dim(), Eigen::Index(2 * n_states));
    StateVector x(5);
    for (std::size_t i = 0; i < n_states; ++i) {
        x << rng.uniform(-kTrackHalfWidth, kTrackHalfWidth), rng.uniform(-kVelocityRange, kVelocityRange),
            rng.uniform(-limit, limit), rng.uniform(-kAngularVelocityRange, kAngularVelocityRange), 0.0;
        out.middleCols(Eigen::Index(2 * i), 2) = map.action_matrix(x);
    }
    return out;
}

CartpoleEnvironment::CartpoleEnvironment(CartpoleParams params, FeatureMap agent_features, std::uint64_t seed)
    : params_(params), agent_features_(std::move(agent_features)), rng_(seed) {
    if (agent_features_.n_actions() != 2) throw InvalidInput("cartpole: feature map must have 2 actions");
    begin_episode();
}

void CartpoleEnvironment::begin_episode() {
    for (Eigen::Index i = 0; i < 4; ++i) physics_(i) = rng_.uniform(-params_.init_range, params_.init_range);
    absorbing_ = false;
    episode_step_ = 0;
    refresh_observation();
}

void CartpoleEnvironment::refresh_observation() {
    current_.state_id.reset();
    current_.state.resize(5);
    current_.state.head(4) = physics_;
    current_.state(4) = absorbing_ ? 1.0 : 0.0;
    current_.features = agent_features_.action_matrix(current_.state);
}

EnvStep CartpoleEnvironment::step(std::size_t action) {
    if (action > 1) throw InvalidInput("cartpole: action must be 0 or 1");
    EnvStep out;
    if (absorbing_) {
        if (rng_.uniform() < params_.reset_probability) {
            begin_episode();
        }
        out.next = current_;
        return out;
    }

    const auto& p = params_;
    const double total_mass = p.cart_mass + p.pole_mass;
    const double pole_moment = p.pole_mass * p.half_length;
    const double force = action == 1 ? p.force : -p.force;
    const double theta = physics_(2);
    const double theta_dot = physics_(3);
    const double cos_t = std::cos(theta);
    const double sin_t = std::sin(theta);
    const double temp = (force + pole_moment * theta_dot * theta_dot * sin_t) / total_mass;
    const double theta_acc =
        (p.gravity * sin_t - cos_t * temp) /
        (p.half_length * (4.0 / 3.0 - p.pole_mass * cos_t * cos_t / total_mass));
    const double x_acc = temp - pole_moment * theta_acc * cos_t / total_mass;
    physics_(0) += p.dt * physics_(1);
    physics_(1) += p.dt * x_acc;
    physics_(2) += p.dt * theta_dot;
    physics_(3) += p.dt * theta_acc;
    ++episode_step_;

    const bool fallen = std::abs(physics_(2)) > angle_limit_rad(p);
    out.reward = fallen ? 0.0 : 1.0;
    if (fallen || episode_step_ >= p.max_episode_steps) {
        absorbing_ = true;
        out.episode_boundary = true;
    }
    refresh_observation();
    out.next = current_;
    return out;
}

} // namespace avgrl
