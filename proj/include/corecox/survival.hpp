#pragma once

// Domain types and the Breslow partial-likelihood kernel shared by every
// estimator in the library.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace corecox {

/// Follow-up time and right-censoring indicator for one outcome.
struct OutcomeColumn {
    Eigen::VectorXd time;
    std::vector<bool> event;  // true = event observed, false = censored

    int event_count() const {
        return static_cast<int>(std::count(event.begin(), event.end(), true));
    }
};

/// Covariates plus K outcome columns over the same n subjects.
///
/// Immutable after construction; the constructor enforces the shape and
/// finiteness contract so downstream code can assume it.
class SurvivalDataset {
public:
    SurvivalDataset() = default;

    SurvivalDataset(Eigen::MatrixXd covariates, std::vector<OutcomeColumn> outcomes,
                    std::vector<std::string> predictor_names,
                    std::vector<std::string> outcome_names)
        : x_(std::move(covariates)),
          outcomes_(std::move(outcomes)),
          predictor_names_(std::move(predictor_names)),
          outcome_names_(std::move(outcome_names)) {
        validate();
    }

    const Eigen::MatrixXd& covariates() const { return x_; }
    const std::vector<OutcomeColumn>& outcomes() const { return outcomes_; }
    const OutcomeColumn& outcome(int k) const { return outcomes_.at(static_cast<std::size_t>(k)); }
    const std::vector<std::string>& predictor_names() const { return predictor_names_; }
    const std::vector<std::string>& outcome_names() const { return outcome_names_; }

    int n() const { return static_cast<int>(x_.rows()); }
    int p() const { return static_cast<int>(x_.cols()); }
    int k() const { return static_cast<int>(outcomes_.size()); }

    /// Rows in the given order; duplicates are allowed (bootstrap resamples).
    SurvivalDataset subset(const std::vector<int>& rows) const {
        Eigen::MatrixXd xs(static_cast<Eigen::Index>(rows.size()), x_.cols());
        std::vector<OutcomeColumn> outs(outcomes_.size());
        for (auto& o : outs) {
            o.time.resize(static_cast<Eigen::Index>(rows.size()));
            o.event.resize(rows.size());
        }
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const int i = rows[r];
            if (i < 0 || i >= n()) throw std::out_of_range("subset: row index out of range");
            xs.row(static_cast<Eigen::Index>(r)) = x_.row(i);
            for (std::size_t k = 0; k < outcomes_.size(); ++k) {
                outs[k].time(static_cast<Eigen::Index>(r)) = outcomes_[k].time(i);
                outs[k].event[r] = outcomes_[k].event[i];
            }
        }
        return {std::move(xs), std::move(outs), predictor_names_, outcome_names_};
    }

    /// Same subjects with a replaced covariate matrix (same n).
    SurvivalDataset with_covariates(Eigen::MatrixXd x, std::vector<std::string> names) const {
        return {std::move(x), outcomes_, std::move(names), outcome_names_};
    }

private:
    void validate() const {
        if (x_.cols() < 1) throw std::invalid_argument("SurvivalDataset: need p >= 1 predictors");
        if (outcomes_.empty()) throw std::invalid_argument("SurvivalDataset: need K >= 1 outcomes");
        if (x_.rows() < 2) throw std::invalid_argument("SurvivalDataset: need n >= 2 subjects");
        if (predictor_names_.size() != static_cast<std::size_t>(x_.cols()))
            throw std::invalid_argument("SurvivalDataset: predictor_names length != p");
        if (outcome_names_.size() != outcomes_.size())
            throw std::invalid_argument("SurvivalDataset: outcome_names length != K");
        if (!x_.allFinite()) throw std::invalid_argument("SurvivalDataset: non-finite covariate");
        for (const auto& o : outcomes_) {
            if (o.time.size() != x_.rows() || o.event.size() != static_cast<std::size_t>(x_.rows()))
                throw std::invalid_argument("SurvivalDataset: outcome column length != n");
            for (Eigen::Index i = 0; i < o.time.size(); ++i) {
                if (!std::isfinite(o.time(i)) || o.time(i) < 0.0)
                    throw std::invalid_argument("SurvivalDataset: times must be finite and >= 0");
            }
        }
    }

    Eigen::MatrixXd x_;
    std::vector<OutcomeColumn> outcomes_;
    std::vector<std::string> predictor_names_;
    std::vector<std::string> outcome_names_;
};

/// p x K log-hazard-ratio matrix; column k is the Cox model for outcome k.
struct CoefficientMatrix {
    Eigen::MatrixXd values;
    std::vector<std::string> predictor_names;
    std::vector<std::string> outcome_names;

    int p() const { return static_cast<int>(values.rows()); }
    int k() const { return static_cast<int>(values.cols()); }
};

/// Rank-r factor pair, B = u * v^T.
struct LowRankFactors {
    Eigen::MatrixXd u;  // p x r
    Eigen::MatrixXd v;  // K x r

    int rank() const { return static_cast<int>(u.cols()); }
};

inline void check_factors(const LowRankFactors& f) {
    if (f.u.cols() != f.v.cols() || f.u.cols() < 1)
        throw std::invalid_argument("LowRankFactors: u and v must share r >= 1 columns");
    if (f.u.cols() > std::min(f.u.rows(), f.v.rows()))
        throw std::invalid_argument("LowRankFactors: rank exceeds min(p, K)");
    if (!f.u.allFinite() || !f.v.allFinite())
        throw std::invalid_argument("LowRankFactors: non-finite entry");
}

/// Precomputed risk-set structure for one outcome column.
///
/// Subjects are sorted once by ascending time and grouped by tied times;
/// every evaluation is then O(n) on a linear predictor. The objective is the
/// Breslow negative log partial likelihood divided by the event count.
class RiskSets {
public:
    explicit RiskSets(const OutcomeColumn& outcome) {
        const auto n = static_cast<int>(outcome.time.size());
        order_.resize(static_cast<std::size_t>(n));
        std::iota(order_.begin(), order_.end(), 0);
        std::stable_sort(order_.begin(), order_.end(), [&](int a, int b) {
            return outcome.time(a) < outcome.time(b);
        });
        event_sorted_.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i)
            event_sorted_[i] =
                outcome.event[static_cast<std::size_t>(order_[i])] ? 1 : 0;
        int start = 0;
        while (start < n) {
            int end = start;
            const double t = outcome.time(order_[start]);
            int d = 0;
            while (end < n && outcome.time(order_[end]) == t) {
                d += event_sorted_[end];
                ++end;
            }
            group_start_.push_back(start);
            group_events_.push_back(d);
            start = end;
        }
        group_start_.push_back(n);
        events_ = std::accumulate(group_events_.begin(), group_events_.end(), 0);
    }

    int n() const { return static_cast<int>(order_.size()); }
    int events() const { return events_; }
    int groups() const { return static_cast<int>(group_events_.size()); }

    /// Event-averaged negative log partial likelihood at linear predictor eta.
    /// When d_eta is non-null it receives the derivative with respect to eta.
    double evaluate(const Eigen::VectorXd& eta, Eigen::VectorXd* d_eta = nullptr) const {
        require_events();
        if (eta.size() != n()) throw std::invalid_argument("RiskSets: eta length != n");
        const Eigen::VectorXd log_s0 = log_suffix_sums(eta, nullptr, nullptr);
        const int G = groups();
        double loss = 0.0;
        for (int g = 0; g < G; ++g)
            if (group_events_[g] > 0) loss += group_events_[g] * log_s0(g);
        for (int i = 0; i < n(); ++i)
            if (event_sorted_[i]) loss -= eta(order_[i]);
        const double inv_d = 1.0 / events_;
        if (d_eta != nullptr) {
            *d_eta = subject_weights(eta, log_s0);
            for (int i = 0; i < n(); ++i) (*d_eta)(order_[i]) -= event_sorted_[i];
            *d_eta *= inv_d;
        }
        return loss * inv_d;
    }

    /// Hessian with respect to beta for eta = x * beta (+ any offset already in eta).
    Eigen::MatrixXd hessian(const Eigen::VectorXd& eta, const Eigen::MatrixXd& x) const {
        require_events();
        Eigen::MatrixXd mean;  // risk-set weighted mean of x, one column per group
        const Eigen::VectorXd log_s0 = log_suffix_sums(eta, &x, &mean);
        for (int g = 0; g < groups(); ++g)
            mean.col(g) *= std::sqrt(static_cast<double>(group_events_[g]));
        const Eigen::VectorXd a = subject_weights(eta, log_s0);
        Eigen::MatrixXd h = -mean * mean.transpose();
        h.noalias() += x.transpose() * a.asDiagonal() * x;
        return h / static_cast<double>(events_);
    }

private:
    // log of sum_{j in R_g} exp(eta_j) per group. Suffix sums are kept relative
    // to the running maximum, so widely spread scores do not underflow. With x
    // given, mean receives the matching weighted means of the rows of x.
    Eigen::VectorXd log_suffix_sums(const Eigen::VectorXd& eta, const Eigen::MatrixXd* x,
                                    Eigen::MatrixXd* mean) const {
        const int G = groups();
        Eigen::VectorXd out(G);
        Eigen::VectorXd acc1;
        if (x != nullptr) {
            acc1 = Eigen::VectorXd::Zero(x->cols());
            mean->resize(x->cols(), G);
        }
        double m = -std::numeric_limits<double>::infinity();
        double acc0 = 0.0;
        for (int g = G - 1; g >= 0; --g) {
            double gm = m;
            for (int i = group_start_[g]; i < group_start_[g + 1]; ++i) gm = std::max(gm, eta(order_[i]));
            if (gm > m) {
                const double r = std::exp(m - gm);
                acc0 *= r;
                if (x != nullptr) acc1 *= r;
                m = gm;
            }
            for (int i = group_start_[g]; i < group_start_[g + 1]; ++i) {
                const double w = std::exp(eta(order_[i]) - m);
                acc0 += w;
                if (x != nullptr) acc1 += w * x->row(order_[i]).transpose();
            }
            out(g) = std::log(acc0) + m;
            if (x != nullptr) mean->col(g) = acc1 / acc0;
        }
        return out;
    }

    // exp(eta_i) * sum over event groups g at or before i of d_g / S_g, in
    // original subject order. The cumulative sum is carried in log space.
    Eigen::VectorXd subject_weights(const Eigen::VectorXd& eta, const Eigen::VectorXd& log_s0) const {
        Eigen::VectorXd a(n());
        double log_cum = -std::numeric_limits<double>::infinity();
        for (int g = 0; g < groups(); ++g) {
            const int d = group_events_[g];
            if (d > 0) {
                const double term = std::log(static_cast<double>(d)) - log_s0(g);
                const double hi = std::max(log_cum, term);
                log_cum = hi + std::log(std::exp(log_cum - hi) + std::exp(term - hi));
            }
            for (int i = group_start_[g]; i < group_start_[g + 1]; ++i)
                a(order_[i]) = std::exp(eta(order_[i]) + log_cum);
        }
        return a;
    }

    void require_events() const {
        if (events_ == 0) throw std::domain_error("partial likelihood: outcome has zero events");
    }

    std::vector<int> order_;
    std::vector<int> event_sorted_;
    std::vector<int> group_start_;
    std::vector<int> group_events_;
    int events_ = 0;
};

/// Smooth Cox objective in beta for one outcome: L(offset + x * beta).
class CoxObjective {
public:
    CoxObjective(const Eigen::MatrixXd& x, const RiskSets& risk, Eigen::VectorXd offset = {})
        : x_(x), risk_(risk), offset_(std::move(offset)) {
        if (x_.rows() != risk_.n()) throw std::invalid_argument("CoxObjective: x rows != n");
        if (offset_.size() != 0 && offset_.size() != x_.rows())
            throw std::invalid_argument("CoxObjective: offset length != n");
    }

    int dim() const { return static_cast<int>(x_.cols()); }

    double operator()(const Eigen::VectorXd& beta, Eigen::VectorXd* grad = nullptr) const {
        Eigen::VectorXd eta = linear_predictor(beta);
        if (grad == nullptr) return risk_.evaluate(eta);
        Eigen::VectorXd d_eta;
        const double f = risk_.evaluate(eta, &d_eta);
        *grad = x_.transpose() * d_eta;
        return f;
    }

    Eigen::MatrixXd hessian(const Eigen::VectorXd& beta) const {
        return risk_.hessian(linear_predictor(beta), x_);
    }

    const RiskSets& risk_sets() const { return risk_; }
    const Eigen::MatrixXd& design() const { return x_; }

private:
    Eigen::VectorXd linear_predictor(const Eigen::VectorXd& beta) const {
        if (beta.size() != x_.cols()) throw std::invalid_argument("CoxObjective: beta length != p");
        if (!beta.allFinite()) throw std::invalid_argument("CoxObjective: non-finite beta");
        Eigen::VectorXd eta = x_ * beta;
        if (offset_.size() != 0) eta += offset_;
        return eta;
    }

    const Eigen::MatrixXd& x_;
    const RiskSets& risk_;
    Eigen::VectorXd offset_;
};

inline void check_outcome_index(const SurvivalDataset& data, int k) {
    if (k < 0 || k >= data.k()) throw std::out_of_range("outcome index out of range");
}

inline void check_beta(const SurvivalDataset& data, const Eigen::VectorXd& beta) {
    if (beta.size() != data.p()) throw std::invalid_argument("beta length != p");
    if (!beta.allFinite()) throw std::invalid_argument("non-finite beta");
}

/// Breslow negative log partial likelihood of outcome k at beta, divided by
/// the outcome's event count.
inline double neg_log_partial_likelihood(const SurvivalDataset& data, int outcome_index,
                                         const Eigen::VectorXd& beta) {
    check_outcome_index(data, outcome_index);
    check_beta(data, beta);
    const RiskSets risk(data.outcome(outcome_index));
    return CoxObjective(data.covariates(), risk)(beta);
}

/// Analytic gradient of neg_log_partial_likelihood.
inline Eigen::VectorXd plik_gradient(const SurvivalDataset& data, int outcome_index,
                                     const Eigen::VectorXd& beta) {
    check_outcome_index(data, outcome_index);
    check_beta(data, beta);
    const RiskSets risk(data.outcome(outcome_index));
    Eigen::VectorXd g;
    CoxObjective(data.covariates(), risk)(beta, &g);
    return g;
}

/// x_i^T beta per subject. Ranking scores only, not calibrated risks.
inline Eigen::VectorXd log_risk_scores(const SurvivalDataset& data, const Eigen::VectorXd& beta) {
    if (beta.size() != data.p()) throw std::invalid_argument("log_risk_scores: beta length != p");
    return data.covariates() * beta;
}

inline CoefficientMatrix materialize(const LowRankFactors& factors,
                                     std::vector<std::string> predictor_names = {},
                                     std::vector<std::string> outcome_names = {}) {
    check_factors(factors);
    return {factors.u * factors.v.transpose(), std::move(predictor_names), std::move(outcome_names)};
}

}  // namespace corecox
