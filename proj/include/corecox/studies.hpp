#pragma once

// Simulation studies: coefficient recovery (RRMSE) and bootstrap interval
// coverage/width, both on data from the low-rank generator.

#include "corecox/bootstrap.hpp"
#include "corecox/cv.hpp"
#include "corecox/simulation.hpp"

#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace corecox {

inline std::uint64_t replicate_seed(std::uint64_t base, int replicate) {
    return base + static_cast<std::uint64_t>(replicate);
}

struct StudyTuning {
    HyperGrid grid;
    TuningCriterion criterion = TuningCriterion::partial_likelihood;
    int inner_folds = 5;
    std::map<Method, HyperPoint> fixed;  // bypasses tuning for the listed methods
};

struct RecoveryRow {
    int replicate = 0;
    std::uint64_t seed = 0;
    std::string method;
    double rrmse = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> column_rrmse;
    std::map<std::string, double> hyperparameters;
    bool ok = false;
    std::string error;
};

struct MethodSummary {
    std::string method;
    double mean = std::numeric_limits<double>::quiet_NaN();
    double se = std::numeric_limits<double>::quiet_NaN();
    int n_ok = 0;
    int n_total = 0;
    // Fraction of replicates (both fits ok) where this method's RRMSE is
    // below Cox's; NaN when Cox is not in the study.
    double beats_cox = std::numeric_limits<double>::quiet_NaN();
};

struct RecoveryStudy {
    std::vector<RecoveryRow> rows;  // replicate-major, methods in the order given
    std::vector<MethodSummary> summary;
};

inline std::pair<double, double> mean_and_se(const std::vector<double>& v) {
    if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    if (v.size() < 2) return {m, std::numeric_limits<double>::quiet_NaN()};
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return {m, std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()))};
}

/// Chooses hyperparameters for m on `target` without looking at the truth,
/// then fits on all of `target`.
inline std::pair<MethodFit, HyperPoint> tune_and_fit(Method m, const SurvivalDataset& target, SourceModels& src,
                                                     const StudyTuning& tuning, std::uint64_t seed) {
    HyperPoint hp;
    if (auto it = tuning.fixed.find(m); it != tuning.fixed.end()) {
        hp = it->second;
    } else {
        Rng rng(seed, 200);
        hp = tune_method(m, tuning.grid, target, src, tuning.inner_folds, rng, tuning.criterion).best;
    }
    return {fit_method(m, hp, target, src, tuning.grid.residual_kind), hp};
}

inline RecoveryStudy run_recovery_study(const SimConfig& config, const std::vector<Method>& methods,
                                        const StudyTuning& tuning, int n_replicates, int jobs = 1) {
    config.validate();
    if (n_replicates < 10) throw std::invalid_argument("run_recovery_study: need at least 10 replicates");
    if (methods.empty()) throw std::invalid_argument("run_recovery_study: no methods");
    const std::size_t M = methods.size();
    RecoveryStudy out;
    out.rows.resize(static_cast<std::size_t>(n_replicates) * M);
    parallel_for(n_replicates, jobs, [&](int r) {
        SimConfig c = config;
        c.rng_seed = replicate_seed(config.rng_seed, r);
        const SimData data = generate(c);
        SourceModels src(&data.source);
        for (std::size_t m = 0; m < M; ++m) {
            RecoveryRow& row = out.rows[static_cast<std::size_t>(r) * M + m];
            row.replicate = r;
            row.seed = c.rng_seed;
            row.method = method_name(methods[m]);
            try {
                auto [fit, hp] = tune_and_fit(methods[m], data.target, src, tuning, c.rng_seed);
                row.rrmse = rrmse(fit.coefficients, data.truth.b_target_true);
                row.column_rrmse = rrmse_by_column(fit.coefficients.values, data.truth.b_target_true);
                row.hyperparameters = hp.as_map(methods[m]);
                row.ok = true;
            } catch (const std::exception& e) {
                row.error = e.what();
            }
        }
    });

    std::optional<std::size_t> cox;
    for (std::size_t m = 0; m < M; ++m)
        if (methods[m] == Method::cox) cox = m;
    for (std::size_t m = 0; m < M; ++m) {
        MethodSummary s;
        s.method = method_name(methods[m]);
        s.n_total = n_replicates;
        std::vector<double> vals;
        int wins = 0, paired = 0;
        for (int r = 0; r < n_replicates; ++r) {
            const RecoveryRow& row = out.rows[static_cast<std::size_t>(r) * M + m];
            if (!row.ok) continue;
            vals.push_back(row.rrmse);
            if (cox) {
                const RecoveryRow& ref = out.rows[static_cast<std::size_t>(r) * M + *cox];
                if (ref.ok) {
                    ++paired;
                    wins += row.rrmse < ref.rrmse ? 1 : 0;
                }
            }
        }
        s.n_ok = static_cast<int>(vals.size());
        std::tie(s.mean, s.se) = mean_and_se(vals);
        if (cox && paired > 0) s.beats_cox = static_cast<double>(wins) / paired;
        out.summary.push_back(s);
    }
    return out;
}

struct CoverageOptions {
    int n_boot = 200;
    double level = 0.95;
    StudyTuning tuning;  // pilot tuning for CORE-Cox
    int jobs = 1;
};

struct CoverageRow {
    int experiment = 0;
    std::uint64_t seed = 0;
    std::string method;
    int cells = 0;
    int covered = 0;
    double mean_width_log = std::numeric_limits<double>::quiet_NaN();
    double mean_width_hr = std::numeric_limits<double>::quiet_NaN();
    int widened = 0;
    bool ok = false;
    std::string error;
};

struct CoverageSummary {
    std::string method;
    double coverage = std::numeric_limits<double>::quiet_NaN();
    double mean_width_log = std::numeric_limits<double>::quiet_NaN();
    double mean_width_hr = std::numeric_limits<double>::quiet_NaN();
    int experiments_ok = 0;
    int experiments = 0;
    long cells = 0;
};

struct CoverageStudy {
    HyperPoint core_point;  // pilot-tuned CORE-Cox hyperparameters
    std::vector<CoverageRow> rows;
    std::vector<CoverageSummary> summary;  // Cox, then CORE-Cox
};

inline std::uint64_t pilot_seed(std::uint64_t base) { return splitmix64(base ^ 0x70696c6f74ULL); }

/// CORE-Cox hyperparameters chosen once on a pilot replicate that no
/// experiment reuses.
inline HyperPoint pilot_core_point(const SimConfig& config, const StudyTuning& tuning) {
    if (auto it = tuning.fixed.find(Method::core_cox); it != tuning.fixed.end()) return it->second;
    SimConfig c = config;
    c.rng_seed = pilot_seed(config.rng_seed);
    const SimData pilot = generate(c);
    SourceModels src(&pilot.source);
    Rng rng(c.rng_seed, 200);
    return tune_method(Method::core_cox, tuning.grid, pilot.target, src, tuning.inner_folds, rng, tuning.criterion)
        .best;
}

inline CoverageStudy run_coverage_study(const SimConfig& config, int n_experiments, const CoverageOptions& opt = {}) {
    config.validate();
    if (n_experiments < 1) throw std::invalid_argument("run_coverage_study: need at least 1 experiment");
    if (opt.n_boot < 100) throw std::invalid_argument("run_coverage_study: n_boot must be >= 100");
    CoverageStudy out;
    out.core_point = pilot_core_point(config, opt.tuning);
    const HyperPoint hp = out.core_point;
    const PenaltyKind kind = opt.tuning.grid.residual_kind;
    out.rows.resize(static_cast<std::size_t>(n_experiments) * 2);

    parallel_for(n_experiments, opt.jobs, [&](int e) {
        SimConfig c = config;
        c.rng_seed = replicate_seed(config.rng_seed, e);
        const SimData data = generate(c);
        const int K = data.target.k();
        std::vector<int> outcomes(static_cast<std::size_t>(K));
        std::iota(outcomes.begin(), outcomes.end(), 0);

        auto score = [&](CoverageRow& row, const Eigen::MatrixXd& estimate, const std::vector<Eigen::MatrixXd>& draws) {
            double wl = 0.0, wh = 0.0;
            for (int k = 0; k < K; ++k) {
                const auto rows = percentile_rows(estimate.col(k), draws[static_cast<std::size_t>(k)], opt.n_boot,
                                                  opt.level, data.target.predictor_names(), row.method);
                for (std::size_t j = 0; j < rows.size(); ++j) {
                    const double truth = data.truth.b_target_true(static_cast<Eigen::Index>(j), k);
                    row.covered += rows[j].coef_low <= truth && truth <= rows[j].coef_high ? 1 : 0;
                    row.widened += rows[j].widened ? 1 : 0;
                    wl += rows[j].coef_high - rows[j].coef_low;
                    wh += rows[j].ci_high - rows[j].ci_low;
                    ++row.cells;
                }
            }
            row.mean_width_log = wl / row.cells;
            row.mean_width_hr = wh / row.cells;
            row.ok = true;
        };

        CoverageRow& cox_row = out.rows[static_cast<std::size_t>(e) * 2];
        cox_row.experiment = e;
        cox_row.seed = c.rng_seed;
        cox_row.method = method_name(Method::cox);
        try {
            const ColumnFitFn fit = [](const SurvivalDataset& d, int k) { return fit_cox(d, k); };
            Eigen::MatrixXd est(data.target.p(), K);
            for (int k = 0; k < K; ++k) {
                VectorFit f = fit(data.target, k);
                if (f.report.diverged) throw std::runtime_error("Cox diverged on the full target");
                est.col(k) = f.beta;
            }
            score(cox_row, est, bootstrap_draws(fit, data.target, outcomes, opt.n_boot, c.rng_seed));
        } catch (const std::exception& ex) {
            cox_row.error = ex.what();
        }

        CoverageRow& core_row = out.rows[static_cast<std::size_t>(e) * 2 + 1];
        core_row.experiment = e;
        core_row.seed = c.rng_seed;
        core_row.method = method_name(Method::core_cox);
        try {
            const LowRankFit stage1 = fit_lowrank_mtl(data.source, hp.rank, PenaltySpec::l2(hp.factor_lambda));
            const Eigen::MatrixXd b_source = stage1.factors.u * stage1.factors.v.transpose();
            const ColumnFitFn fit = [&](const SurvivalDataset& d, int k) {
                const double lambda = hp.per_outcome_residual.empty()
                                          ? hp.residual_lambda
                                          : hp.per_outcome_residual[static_cast<std::size_t>(k)];
                VectorFit f = fit_residual_column(d, k, b_source.col(k), {kind, lambda});
                f.beta += b_source.col(k);
                return f;
            };
            Eigen::MatrixXd est(data.target.p(), K);
            for (int k = 0; k < K; ++k) est.col(k) = fit(data.target, k).beta;
            score(core_row, est, bootstrap_draws(fit, data.target, outcomes, opt.n_boot, c.rng_seed));
        } catch (const std::exception& ex) {
            core_row.error = ex.what();
        }
    });

    for (int m = 0; m < 2; ++m) {
        CoverageSummary s;
        s.method = out.rows[static_cast<std::size_t>(m)].method;
        s.experiments = n_experiments;
        long covered = 0;
        double wl = 0.0, wh = 0.0;
        for (int e = 0; e < n_experiments; ++e) {
            const CoverageRow& row = out.rows[static_cast<std::size_t>(e) * 2 + static_cast<std::size_t>(m)];
            if (!row.ok) continue;
            ++s.experiments_ok;
            covered += row.covered;
            s.cells += row.cells;
            wl += row.mean_width_log * row.cells;
            wh += row.mean_width_hr * row.cells;
        }
        if (s.cells > 0) {
            s.coverage = static_cast<double>(covered) / static_cast<double>(s.cells);
            s.mean_width_log = wl / static_cast<double>(s.cells);
            s.mean_width_hr = wh / static_cast<double>(s.cells);
        }
        out.summary.push_back(s);
    }
    return out;
}

}  // namespace corecox
