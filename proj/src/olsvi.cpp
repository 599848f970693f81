#include <algorithm>
#include <cmath>

#include "avgrl/agents.hpp"

namespace avgrl {

std::size_t olsvi_horizon(double span, std::uint64_t t_total, Eigen::Index d) {
    if (span < 0.0 || t_total == 0 || d <= 0) throw InvalidInput("olsvi_horizon: need span >= 0, T >= 1, d >= 1");
    const double t = double(t_total);
    const double dd = double(d);
    const double first = std::sqrt(span) * std::pow(t, 0.25) / std::pow(dd, 0.75);
    const double second = std::cbrt(span * t / (dd * dd));
    const auto h = std::size_t(std::llround(std::max(first, second)));
    return std::min<std::size_t>(std::max<std::size_t>(h, 2), std::size_t(t_total));
}

double olsvi_beta(Eigen::Index d, std::size_t horizon, std::uint64_t t_total, double delta) {
    return 40.0 * double(d) * double(horizon) * std::sqrt(std::log(double(t_total) / delta));
}

OlsviAgent::OlsviAgent(Eigen::Index dim, std::size_t n_actions, const OlsviConfig& config)
    : config_(config),
      horizon_(config.horizon > 0 ? config.horizon : olsvi_horizon(config.span, config.t_total, dim)),
      beta_(config.beta > 0.0 ? config.beta : olsvi_beta(dim, horizon_, config.t_total, config.delta)),
      lambda_(dim, config.ridge),
      weights_(horizon_, VectorXd::Zero(dim)),
      data_(dim, n_actions) {
    beta_ *= config.beta_scale;
    lambda_inv_ = lambda_.inverse();
}

void OlsviAgent::plan() {
    const auto h_cap = double(horizon_);
    lambda_inv_ = lambda_.inverse();
    const auto next = data_.next_features();
    const auto sums = data_.bucket_sums();
    const auto n_a = Eigen::Index(data_.n_actions());
    const auto n_b = Eigen::Index(data_.buckets());

    // Exploration bonus for every stored next-state/action pair; fixed within the episode.
    const VectorXd bonus =
        beta_ * (next.array() * (lambda_inv_ * next).array()).colwise().sum().max(0.0).sqrt().transpose();

    VectorXd v_next = VectorXd::Zero(n_b);  // V_{H+1} = 0
    for (std::size_t h = horizon_; h >= 1; --h) {
        VectorXd rhs = data_.phi_reward();
        if (n_b > 0) rhs.noalias() += sums * v_next;
        weights_[h - 1] = lambda_.solve(rhs);
        if (h == 1) break;
        const VectorXd q = ((next.transpose() * weights_[h - 1]) + bonus).cwiseMin(h_cap);
        const Eigen::Map<const MatrixXd> table(q.data(), n_a, n_b);
        v_next = n_b > 0 ? VectorXd(table.colwise().maxCoeff().transpose()) : VectorXd();
    }
    ++episodes_planned_;
}

VectorXd OlsviAgent::q_values(std::size_t h, const MatrixXd& features) const {
    if (h < 1 || h > horizon_) throw InvalidInput("olsvi: step index out of range");
    const VectorXd bonus =
        beta_ * (features.array() * (lambda_inv_ * features).array()).colwise().sum().max(0.0).sqrt().transpose();
    return ((features.transpose() * weights_[h - 1]) + bonus).cwiseMin(double(horizon_));
}

std::size_t OlsviAgent::act(std::uint64_t, const Observation& x) {
    if (step_in_episode_ == 0) plan();
    return argmax_lowest(q_values(step_in_episode_ + 1, x.features));
}

void OlsviAgent::observe(const Observation& x, std::size_t action, double reward, const Observation& next) {
    episode_.push_back({x.features.col(Eigen::Index(action)), reward, next});
    if (++step_in_episode_ == horizon_) flush_episode();
}

void OlsviAgent::flush_episode() {
    for (const auto& p : episode_) {
        lambda_.absorb(p.phi);
        data_.add(p.phi, p.reward, p.next);
    }
    episode_.clear();
    step_in_episode_ = 0;
}

bool OlsviAgent::finite() const {
    return std::all_of(weights_.begin(), weights_.end(), [](const VectorXd& w) { return w.allFinite(); });
}

} // namespace avgrl
