#pragma once

// Synthetic multi-outcome survival cohorts with a known low-rank source
// coefficient matrix and a sparse source-to-target shift.

#include "corecox/survival.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace corecox {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Portable generator: std::mt19937_64 (whose output sequence is fixed by
/// the standard) with hand-written variate transforms, since the standard
/// distributions are implementation-defined. Streams are derived from
/// (seed, stream id) so every replicate owns an independent sequence.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}
    Rng(std::uint64_t seed, std::uint64_t stream)
        : engine_(splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL))) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n), unbiased by rejection.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t r;
        do r = engine_(); while (r >= limit);
        return r % n;
    }

    /// Standard normal by Box-Muller; the second variate is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * 3.14159265358979323846 * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    double exponential() { return -std::log1p(-uniform()); }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

enum class BaselineKind { exponential, weibull };

struct SimConfig {
    int n_source = 20000;
    int n_target = 150;
    int p = 10;
    int k = 6;
    int true_rank = 2;
    double shift_sparsity = 0.1;
    double shift_magnitude = 0.3;
    BaselineKind baseline = BaselineKind::exponential;
    double baseline_rate = 0.1;   // exponential
    double weibull_shape = 1.5;   // weibull
    double weibull_scale = 10.0;  // weibull
    double censoring_rate_target = 0.3;
    double covariate_correlation = 0.2;
    std::uint64_t rng_seed = 20240607;

    void validate() const {
        if (n_source < 2 || n_target < 2) throw std::invalid_argument("SimConfig: need at least 2 subjects per cohort");
        if (p < 1 || k < 1) throw std::invalid_argument("SimConfig: need p >= 1 and k >= 1");
        if (true_rank < 1 || true_rank > std::min(p, k)) throw std::invalid_argument("SimConfig: true_rank must be in [1, min(p, k)]");
        if (!(shift_sparsity >= 0.0 && shift_sparsity <= 1.0)) throw std::invalid_argument("SimConfig: shift_sparsity must be in [0, 1]");
        if (!std::isfinite(shift_magnitude) || shift_magnitude < 0.0) throw std::invalid_argument("SimConfig: shift_magnitude must be >= 0");
        if (!(censoring_rate_target >= 0.0 && censoring_rate_target < 1.0))
            throw std::invalid_argument("SimConfig: censoring_rate_target must be in [0, 1)");
        if (!(covariate_correlation >= 0.0 && covariate_correlation < 1.0))
            throw std::invalid_argument("SimConfig: covariate_correlation must be in [0, 1)");
        if (baseline == BaselineKind::exponential && !(baseline_rate > 0.0))
            throw std::invalid_argument("SimConfig: baseline rate must be positive");
        if (baseline == BaselineKind::weibull && !(weibull_shape > 0.0 && weibull_scale > 0.0))
            throw std::invalid_argument("SimConfig: weibull shape and scale must be positive");
    }
};

struct SimTruth {
    Eigen::MatrixXd b_source_true;  // p x k, rank true_rank
    Eigen::MatrixXd theta_true;     // p x k
    Eigen::MatrixXd b_target_true;  // b_source_true + theta_true
    std::vector<double> censoring_rate;  // calibrated exponential censoring rate per outcome
};

struct SimData {
    SurvivalDataset source;
    SurvivalDataset target;
    SimTruth truth;
};

namespace detail {

inline Eigen::MatrixXd equicorrelated_normals(Rng& rng, int n, int p, double rho) {
    Eigen::MatrixXd x(n, p);
    const double a = std::sqrt(rho);
    const double b = std::sqrt(1.0 - rho);
    for (int i = 0; i < n; ++i) {
        const double common = rng.normal();
        for (int j = 0; j < p; ++j) x(i, j) = a * common + b * rng.normal();
    }
    return x;
}

inline double inverse_cumulative_baseline(const SimConfig& c, double h) {
    if (c.baseline == BaselineKind::exponential) return h / c.baseline_rate;
    return c.weibull_scale * std::pow(h, 1.0 / c.weibull_shape);
}

inline Eigen::MatrixXd event_times(const SimConfig& c, Rng& rng, const Eigen::MatrixXd& x, const Eigen::MatrixXd& b) {
    const Eigen::MatrixXd eta = x * b;
    Eigen::MatrixXd t(eta.rows(), eta.cols());
    for (Eigen::Index k = 0; k < eta.cols(); ++k)
        for (Eigen::Index i = 0; i < eta.rows(); ++i)
            t(i, k) = inverse_cumulative_baseline(c, rng.exponential() * std::exp(-eta(i, k)));
    return t;
}

inline double censored_fraction(const Eigen::VectorXd& t, const Eigen::VectorXd& e, double rate) {
    if (rate <= 0.0) return 0.0;
    int censored = 0;
    for (Eigen::Index i = 0; i < t.size(); ++i)
        if (e(i) / rate < t(i)) ++censored;
    return static_cast<double>(censored) / static_cast<double>(t.size());
}

// Bisection on log(rate); the realized fraction is monotone in the rate.
inline double calibrate_censoring(const Eigen::VectorXd& t, const Eigen::VectorXd& e, double target) {
    if (target <= 0.0) return 0.0;
    double lo = -40.0, hi = 40.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double f = censored_fraction(t, e, std::exp(mid));
        if (std::abs(f - target) <= 0.02) return std::exp(mid);
        if (f < target) lo = mid; else hi = mid;
    }
    throw std::domain_error("generate: censoring target " + std::to_string(target) + " is infeasible");
}

inline std::vector<std::string> numbered(const std::string& prefix, int count) {
    std::vector<std::string> out;
    for (int i = 1; i <= count; ++i) out.push_back(prefix + std::to_string(i));
    return out;
}

inline SurvivalDataset assemble(const SimConfig& c, Eigen::MatrixXd x, const Eigen::MatrixXd& t,
                                const Eigen::MatrixXd& e, const std::vector<double>& rates) {
    std::vector<OutcomeColumn> outs(static_cast<std::size_t>(c.k));
    for (int k = 0; k < c.k; ++k) {
        auto& o = outs[static_cast<std::size_t>(k)];
        o.time.resize(t.rows());
        o.event.resize(static_cast<std::size_t>(t.rows()));
        const double rate = rates[static_cast<std::size_t>(k)];
        for (Eigen::Index i = 0; i < t.rows(); ++i) {
            const double cens = rate > 0.0 ? e(i, k) / rate : std::numeric_limits<double>::infinity();
            const bool observed = t(i, k) <= cens;
            o.time(i) = observed ? t(i, k) : cens;
            o.event[static_cast<std::size_t>(i)] = observed;
        }
    }
    return {std::move(x), std::move(outs), numbered("x", c.p), numbered("y", c.k)};
}

}  // namespace detail

/// Low-rank source truth and sparse shift drawn from the truth stream.
inline SimTruth generate_truth(const SimConfig& c) {
    c.validate();
    Rng rng(c.rng_seed, 3);
    Eigen::MatrixXd u(c.p, c.true_rank), v(c.k, c.true_rank);
    for (Eigen::Index j = 0; j < u.size(); ++j) u.data()[j] = rng.uniform(-1.0, 1.0);
    for (Eigen::Index j = 0; j < v.size(); ++j) v.data()[j] = rng.uniform(-1.0, 1.0);
    SimTruth truth;
    truth.b_source_true = u * v.transpose();
    for (int k = 0; k < c.k; ++k) truth.b_source_true.col(k).normalize();

    truth.theta_true = Eigen::MatrixXd::Zero(c.p, c.k);
    const int cells = c.p * c.k;
    const int nonzero = static_cast<int>(std::lround(c.shift_sparsity * cells));
    std::vector<int> idx(static_cast<std::size_t>(cells));
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < nonzero; ++i) {
        const auto j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(cells - i)));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        truth.theta_true.data()[idx[static_cast<std::size_t>(i)]] = sign * c.shift_magnitude;
    }
    truth.b_target_true = truth.b_source_true + truth.theta_true;
    return truth;
}

/// Source and target cohorts plus the generative truth. Bit-reproducible from
/// rng_seed; each component draws from its own stream.
inline SimData generate(const SimConfig& c) {
    c.validate();
    SimTruth truth = generate_truth(c);

    Rng rx_s(c.rng_seed, 1), rx_t(c.rng_seed, 2);
    Eigen::MatrixXd xs = detail::equicorrelated_normals(rx_s, c.n_source, c.p, c.covariate_correlation);
    Eigen::MatrixXd xt = detail::equicorrelated_normals(rx_t, c.n_target, c.p, c.covariate_correlation);

    Rng rt_s(c.rng_seed, 4), rt_t(c.rng_seed, 5);
    const Eigen::MatrixXd ts = detail::event_times(c, rt_s, xs, truth.b_source_true);
    const Eigen::MatrixXd tt = detail::event_times(c, rt_t, xt, truth.b_target_true);

    Rng rc_t(c.rng_seed, 6), rc_s(c.rng_seed, 7);
    Eigen::MatrixXd et(c.n_target, c.k), es(c.n_source, c.k);
    for (Eigen::Index j = 0; j < et.size(); ++j) et.data()[j] = rc_t.exponential();
    for (Eigen::Index j = 0; j < es.size(); ++j) es.data()[j] = rc_s.exponential();

    truth.censoring_rate.resize(static_cast<std::size_t>(c.k));
    for (int k = 0; k < c.k; ++k)
        truth.censoring_rate[static_cast<std::size_t>(k)] =
            detail::calibrate_censoring(tt.col(k), et.col(k), c.censoring_rate_target);

    SurvivalDataset source = detail::assemble(c, std::move(xs), ts, es, truth.censoring_rate);
    SurvivalDataset target = detail::assemble(c, std::move(xt), tt, et, truth.censoring_rate);
    return {std::move(source), std::move(target), std::move(truth)};
}

/// ||estimate - truth||_F / ||truth||_F
inline double rrmse(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth) {
    if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols())
        throw std::invalid_argument("rrmse: dimension mismatch");
    const double denom = truth.norm();
    if (!(denom > 0.0)) throw std::domain_error("rrmse: truth has zero norm");
    return (estimate - truth).norm() / denom;
}

inline double rrmse(const CoefficientMatrix& estimate, const Eigen::MatrixXd& truth) {
    return rrmse(estimate.values, truth);
}

/// Per-outcome (column-wise) relative error, for diagnostics.
inline std::vector<double> rrmse_by_column(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth) {
    if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols())
        throw std::invalid_argument("rrmse: dimension mismatch");
    std::vector<double> out;
    for (Eigen::Index k = 0; k < truth.cols(); ++k) {
        const double denom = truth.col(k).norm();
        out.push_back(denom > 0.0 ? (estimate.col(k) - truth.col(k)).norm() / denom
                                  : std::numeric_limits<double>::quiet_NaN());
    }
    return out;
}

}  // namespace corecox
