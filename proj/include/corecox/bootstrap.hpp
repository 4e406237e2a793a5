#pragma once

// Subject-level nonparametric bootstrap for hazard-ratio intervals.

#include "corecox/estimators.hpp"
#include "corecox/simulation.hpp"
#include "corecox/util.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace corecox {

struct HazardRatioRow {
    std::string predictor;
    std::string method;
    double coefficient = 0.0;  // point estimate, log-HR scale
    double coef_low = 0.0;
    double coef_high = 0.0;
    double hr = 1.0;
    double ci_low = 1.0;
    double ci_high = 1.0;
    bool widened = false;  // percentile interval stretched to include the point estimate
    int replicates_used = 0;
};

/// Fits one outcome column. A thrown exception or a diverged report marks
/// the replicate as failed.
using ColumnFitFn = std::function<VectorFit(const SurvivalDataset&, int)>;

/// Sample quantile with linear interpolation between order statistics
/// (the "type 7" definition). `sorted` must be ascending and non-empty.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline std::vector<int> bootstrap_rows(int n, std::uint64_t seed, int replicate) {
    Rng rng(seed, 5000 + static_cast<std::uint64_t>(replicate));
    std::vector<int> rows(static_cast<std::size_t>(n));
    for (auto& r : rows) r = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    return rows;
}

/// Replicate coefficient vectors for the given outcomes; draws[o] is p x m_o
/// where m_o counts the successful replicates for outcomes[o]. All outcomes
/// of a replicate share one resample.
inline std::vector<Eigen::MatrixXd> bootstrap_draws(const ColumnFitFn& fit_fn, const SurvivalDataset& data,
                                                    const std::vector<int>& outcomes, int n_boot, std::uint64_t seed,
                                                    int jobs = 1) {
    if (n_boot < 1) throw std::invalid_argument("bootstrap: n_boot must be positive");
    const std::size_t O = outcomes.size();
    std::vector<std::vector<Eigen::VectorXd>> slots(static_cast<std::size_t>(n_boot),
                                                    std::vector<Eigen::VectorXd>(O));
    parallel_for(n_boot, jobs, [&](int b) {
        const SurvivalDataset sample = data.subset(bootstrap_rows(data.n(), seed, b));
        for (std::size_t o = 0; o < O; ++o) {
            try {
                VectorFit f = fit_fn(sample, outcomes[o]);
                if (!f.report.diverged && f.beta.allFinite())
                    slots[static_cast<std::size_t>(b)][o] = std::move(f.beta);
            } catch (const std::exception&) {
            }
        }
    });
    std::vector<Eigen::MatrixXd> out(O);
    for (std::size_t o = 0; o < O; ++o) {
        int ok = 0;
        for (const auto& s : slots) ok += s[o].size() > 0 ? 1 : 0;
        out[o].resize(data.p(), ok);
        int c = 0;
        for (const auto& s : slots)
            if (s[o].size() > 0) out[o].col(c++) = s[o];
    }
    return out;
}

/// Percentile intervals for one outcome from replicate draws (p x m).
/// Errors when more than 20% of the n_boot replicates failed.
inline std::vector<HazardRatioRow> percentile_rows(const Eigen::VectorXd& estimate, const Eigen::MatrixXd& draws,
                                                   int n_boot, double level, const std::vector<std::string>& names,
                                                   const std::string& method) {
    const int failed = n_boot - static_cast<int>(draws.cols());
    if (failed * 5 > n_boot)
        throw std::runtime_error("bootstrap: " + std::to_string(failed) + " of " + std::to_string(n_boot) +
                                 " replicates failed");
    const double alpha = (1.0 - level) / 2.0;
    std::vector<HazardRatioRow> rows;
    for (Eigen::Index j = 0; j < estimate.size(); ++j) {
        std::vector<double> v(static_cast<std::size_t>(draws.cols()));
        for (Eigen::Index b = 0; b < draws.cols(); ++b) v[static_cast<std::size_t>(b)] = draws(j, b);
        std::sort(v.begin(), v.end());
        HazardRatioRow r;
        r.predictor = names[static_cast<std::size_t>(j)];
        r.method = method;
        r.coefficient = estimate(j);
        r.coef_low = quantile_sorted(v, alpha);
        r.coef_high = quantile_sorted(v, 1.0 - alpha);
        if (r.coefficient < r.coef_low || r.coefficient > r.coef_high) {
            r.widened = true;
            r.coef_low = std::min(r.coef_low, r.coefficient);
            r.coef_high = std::max(r.coef_high, r.coefficient);
        }
        r.hr = std::exp(r.coefficient);
        r.ci_low = std::exp(r.coef_low);
        r.ci_high = std::exp(r.coef_high);
        r.replicates_used = static_cast<int>(draws.cols());
        rows.push_back(std::move(r));
    }
    return rows;
}

/// Hazard ratios with percentile bootstrap intervals for one outcome. Target
/// rows are resampled with replacement; anything the closure captures (such
/// as a frozen source model) stays fixed across replicates.
inline std::vector<HazardRatioRow> bootstrap_hazard_ratios(const ColumnFitFn& fit_fn, const SurvivalDataset& data,
                                                           int outcome_index, int n_boot, double level,
                                                           std::uint64_t seed, const std::string& method = "",
                                                           int jobs = 1) {
    check_outcome_index(data, outcome_index);
    if (n_boot < 100) throw std::invalid_argument("bootstrap_hazard_ratios: n_boot must be >= 100");
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("bootstrap_hazard_ratios: level must be in (0, 1)");
    const VectorFit point = fit_fn(data, outcome_index);
    if (point.report.diverged || !point.beta.allFinite())
        throw std::runtime_error("bootstrap_hazard_ratios: fit on the full data diverged");
    const auto draws = bootstrap_draws(fit_fn, data, {outcome_index}, n_boot, seed, jobs);
    return percentile_rows(point.beta, draws[0], n_boot, level, data.predictor_names(), method);
}

}  // namespace corecox
