#include "avgrl/agents.hpp"

namespace avgrl {

std::size_t argmax_lowest(const VectorXd& values) {
    std::size_t best = 0;
    for (Eigen::Index a = 1; a < values.size(); ++a) {
        if (values(a) > values(Eigen::Index(best))) best = std::size_t(a);
    }
    return best;
}

TransitionSums::TransitionSums(Eigen::Index dim, std::size_t n_actions)
    : dim_(dim),
      n_actions_(n_actions),
      phi_reward_(VectorXd::Zero(dim)),
      phi_sum_(VectorXd::Zero(dim)) {}

void TransitionSums::add(const VectorXd& phi, double reward, const Observation& next) {
    detail::require_dim(dim_, phi.size(), "TransitionSums::add");
    if (next.features.rows() != dim_ || next.features.cols() != Eigen::Index(n_actions_)) {
        throw InvalidInput("TransitionSums::add: next-state feature matrix has the wrong shape");
    }
    ++count_;
    phi_reward_ += reward * phi;
    phi_sum_ += phi;

    std::size_t bucket = bucket_count_;
    if (next.state_id) {
        auto [it, inserted] = by_id_.try_emplace(*next.state_id, bucket_count_);
        bucket = it->second;
    }
    if (bucket == bucket_count_) {
        features_.insert(features_.end(), next.features.data(), next.features.data() + next.features.size());
        sums_.resize(sums_.size() + std::size_t(dim_), 0.0);
        ++bucket_count_;
    }
    Eigen::Map<VectorXd>(sums_.data() + bucket * std::size_t(dim_), dim_) += phi;
}

Eigen::Map<const MatrixXd> TransitionSums::next_features() const {
    return {features_.data(), dim_, Eigen::Index(bucket_count_ * n_actions_)};
}

Eigen::Map<const MatrixXd> TransitionSums::bucket_sums() const {
    return {sums_.data(), dim_, Eigen::Index(bucket_count_)};
}

VectorXd TransitionSums::greedy_values(const VectorXd& w) const {
    const VectorXd scores = next_features().transpose() * w;
    const Eigen::Map<const MatrixXd> table(scores.data(), Eigen::Index(n_actions_), Eigen::Index(bucket_count_));
    if (bucket_count_ == 0) return VectorXd();
    return table.colwise().maxCoeff().transpose();
}

} // namespace avgrl
