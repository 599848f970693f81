#include <algorithm>

#include "avgrl/envs.hpp"

namespace avgrl {

TabularEnvironment::TabularEnvironment(std::shared_ptr<const TabularLinearMDP> mdp, FeatureMap agent_features,
                                       std::uint64_t seed, std::size_t initial_state)
    : mdp_(std::move(mdp)), agent_features_(std::move(agent_features)), rng_(seed), state_(initial_state) {
    if (!mdp_) throw InvalidInput("TabularEnvironment: null MDP");
    if (agent_features_.n_actions() != mdp_->n_actions) {
        throw InvalidInput("TabularEnvironment: feature map action count differs from the MDP");
    }
    if (initial_state >= mdp_->n_states) throw InvalidInput("TabularEnvironment: initial state out of range");

    cumulative_ = mdp_->transitions();
    for (Eigen::Index r = 0; r < cumulative_.rows(); ++r) {
        double acc = 0.0;
        for (Eigen::Index c = 0; c < cumulative_.cols(); ++c) {
            acc += std::max(0.0, cumulative_(r, c));
            cumulative_(r, c) = acc;
        }
    }
    rewards_ = mdp_->rewards();
    observations_.resize(mdp_->n_states);
    for (std::size_t x = 0; x < mdp_->n_states; ++x) {
        auto& obs = observations_[x];
        obs.state_id = x;
        obs.state = StateVector::Constant(1, double(x));
        obs.features = agent_features_.action_matrix(obs.state);
    }
}

EnvStep TabularEnvironment::step(std::size_t action) {
    if (action >= mdp_->n_actions) throw InvalidInput("TabularEnvironment: action out of range");
    const auto row = Eigen::Index(mdp_->row(state_, action));
    EnvStep out;
    out.reward = rewards_(row);
    const double u = rng_.uniform() * cumulative_(row, cumulative_.cols() - 1);
    std::size_t next = std::size_t(cumulative_.cols() - 1);
    for (Eigen::Index c = 0; c < cumulative_.cols(); ++c) {
        if (u < cumulative_(row, c)) {
            next = std::size_t(c);
            break;
        }
    }
    state_ = next;
    out.next = observations_[state_];
    return out;
}

} // namespace avgrl
