#include <algorithm>
#include <cmath>

#include "avgrl/agents.hpp"

namespace avgrl {

namespace {

// ceil() that ignores representation noise just above an integer.
std::size_t ceil_count(double x) { return std::size_t(std::ceil(x - 1e-9 * std::max(1.0, std::abs(x)))); }

std::size_t round_up_to_multiple(double x, std::size_t unit) {
    return std::max<std::size_t>(1, ceil_count(x / double(unit))) * unit;
}

} // namespace

Exp2Schedule exp2_schedule_values(double t_total, double t_mix, double sigma, double d) {
    if (!(t_total > 1.0) || !(t_mix > 0.0) || !(sigma > 0.0) || !(d > 0.0)) {
        throw InvalidInput("exp2_schedule: T > 1 and t_mix, sigma, d > 0 required");
    }
    Exp2Schedule s;
    s.n_len = std::max<std::size_t>(1, ceil_count(8.0 * t_mix * std::log(t_total)));
    const double n = double(s.n_len);
    s.b_len = round_up_to_multiple(32.0 * n * std::log(d * t_total) / sigma, 2 * s.n_len);
    s.eta = std::min(std::sqrt(1.0 / (t_total * t_mix)), sigma / (24.0 * n));
    s.gate = double(s.b_len) * sigma / (24.0 * n);
    return s;
}

Exp2Schedule exp2_schedule(std::uint64_t t_total, double t_mix, double sigma, Eigen::Index d) {
    Exp2Schedule s = exp2_schedule_values(double(t_total), t_mix, sigma, double(d));
    if (s.b_len > t_total) {
        throw ConfigError("exp2_schedule: epoch length B = " + std::to_string(s.b_len) + " exceeds T = " +
                          std::to_string(t_total) + "; use a larger T or the doubling variant");
    }
    return s;
}

DoublingPhase doubling_schedule(std::size_t phase, double xi, Eigen::Index d) {
    if (!(xi > 0.0 && xi < 1.0)) throw InvalidInput("doubling_schedule: xi must lie in (0, 1)");
    if (phase > 56) throw InvalidInput("doubling_schedule: phase index too large");
    DoublingPhase out;
    out.phase_length = std::uint64_t(64) << phase;
    const double w = double(out.phase_length);
    const double n_raw = std::pow(w, 0.4 * xi);
    out.schedule.n_len = std::max<std::size_t>(1, ceil_count(n_raw));
    out.schedule.b_len = round_up_to_multiple(std::pow(w, 0.8 * xi), 2 * out.schedule.n_len);
    out.schedule.eta = std::sqrt(1.0 / (n_raw * w));
    out.schedule.gate = 4.0 / 3.0 * std::log(double(d) * w);
    return out;
}

std::size_t round_epoch_length(std::size_t b_len, std::size_t n_len) {
    if (n_len == 0) throw InvalidInput("round_epoch_length: N must be positive");
    const std::size_t unit = 2 * n_len;
    return std::max(unit, (b_len / unit) * unit);
}

VectorXd exp2_policy(const MatrixXd& features, const VectorXd& score_sum, double eta, double mix_mu) {
    if (!(mix_mu >= 0.0 && mix_mu <= 1.0)) throw InvalidInput("exp2_policy: mix_mu must lie in [0, 1]");
    detail::require_dim(features.rows(), score_sum.size(), "exp2_policy");
    VectorXd logits = eta * (features.transpose() * score_sum);
    logits.array() -= logits.maxCoeff();
    VectorXd p = logits.array().exp();
    p /= p.sum();
    if (mix_mu > 0.0) p = (1.0 - mix_mu) * p.array() + mix_mu / double(p.size());
    return p;
}

EpochEstimate exp2_epoch_finish(const std::vector<TrajectoryRecord>& records, std::size_t n_len, std::size_t b_len,
                                double gate) {
    if (n_len == 0 || b_len % (2 * n_len) != 0) throw InvalidInput("exp2_epoch_finish: B must be a multiple of 2N");
    if (records.size() != b_len / (2 * n_len)) {
        throw InvalidInput("exp2_epoch_finish: expected " + std::to_string(b_len / (2 * n_len)) +
                           " trajectories, got " + std::to_string(records.size()));
    }
    if (records.empty()) throw InvalidInput("exp2_epoch_finish: no trajectories");
    const Eigen::Index d = records.front().start_features.rows();
    MatrixXd m = MatrixXd::Zero(d, d);
    VectorXd rhs = VectorXd::Zero(d);
    for (const auto& rec : records) {
        detail::require_dim(rec.start_features.cols(), rec.start_policy.size(), "exp2_epoch_finish policy");
        m.noalias() += rec.start_features * rec.start_policy.asDiagonal() * rec.start_features.transpose();
        rhs += rec.start_features.col(Eigen::Index(rec.action)) * rec.reward_sum;
    }
    m = (m + m.transpose()) / 2.0;
    EpochEstimate out;
    out.min_eigenvalue = min_eigenvalue(m);
    out.gate_passed = out.min_eigenvalue >= gate && out.min_eigenvalue > 0.0;
    out.w = out.gate_passed ? VectorXd(m.ldlt().solve(rhs)) : VectorXd::Zero(d);
    return out;
}

Exp2Agent::Exp2Agent(Eigen::Index dim, std::size_t n_actions, const Exp2Config& config, std::uint64_t seed)
    : config_(config), dim_(dim), rng_(seed), score_sum_(VectorXd::Zero(dim)) {
    if (n_actions == 0) throw InvalidInput("mdp-exp2: need at least one action");
    if (config_.doubling) {
        start_phase(0);
    } else {
        schedule_.n_len = config_.n_len;
        schedule_.b_len = round_epoch_length(config_.b_len, config_.n_len);
        schedule_.eta = config_.eta;
        schedule_.gate = config_.gate_override.value_or(double(schedule_.b_len) * config_.sigma /
                                                        (24.0 * double(schedule_.n_len)));
    }
}

void Exp2Agent::start_phase(std::size_t phase) {
    const DoublingPhase p = doubling_schedule(phase, config_.xi, dim_);
    phase_ = phase;
    phase_length_ = p.phase_length;
    phase_steps_ = 0;
    schedule_ = p.schedule;
    if (config_.gate_override) schedule_.gate = *config_.gate_override;
    score_sum_.setZero();
    estimators_.clear();
    records_.clear();
    offset_ = 0;
}

VectorXd Exp2Agent::policy(const MatrixXd& features) const {
    return exp2_policy(features, score_sum_, schedule_.eta, config_.mix_mu);
}

std::size_t Exp2Agent::act(std::uint64_t, const Observation& x) {
    if (config_.doubling && phase_steps_ == phase_length_) start_phase(phase_ + 1);
    const VectorXd probs = policy(x.features);
    const std::size_t a = rng_.categorical({probs.data(), std::size_t(probs.size())});
    if (offset_ % (2 * schedule_.n_len) == schedule_.n_len) {
        records_.push_back({x.features, probs, a, 0.0});
    }
    return a;
}

void Exp2Agent::observe(const Observation&, std::size_t, double reward, const Observation&) {
    if (offset_ % (2 * schedule_.n_len) >= schedule_.n_len) records_.back().reward_sum += reward;
    ++offset_;
    ++phase_steps_;
    if (offset_ == schedule_.b_len) {
        const EpochEstimate est = exp2_epoch_finish(records_, schedule_.n_len, schedule_.b_len, schedule_.gate);
        if (!est.gate_passed) ++gate_failures_;
        score_sum_ += est.w;
        if (config_.retain_estimators) estimators_.push_back(est.w);
        records_.clear();
        offset_ = 0;
        ++epochs_;
    }
}

bool Exp2Agent::finite() const { return score_sum_.allFinite(); }

} // namespace avgrl
