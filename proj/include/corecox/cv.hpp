#pragma once

// Repeated nested cross-validation on the target cohort. Outer folds are
// shared by every method; tuning happens on inner folds of the outer-training
// rows only; the source cohort is used for fitting and never split.

#include "corecox/methods.hpp"
#include "corecox/metrics.hpp"
#include "corecox/simulation.hpp"
#include "corecox/util.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace corecox {

struct CVPlan {
    int outer_folds = 5;
    int inner_folds = 4;
    std::uint64_t seed = 0;
    bool stratify_by_event = true;

    void validate() const {
        if (outer_folds < 2) throw std::invalid_argument("CVPlan: outer_folds must be >= 2");
        if (inner_folds < 2) throw std::invalid_argument("CVPlan: inner_folds must be >= 2");
    }
};

/// Fold label in [0, folds) for every subject. With stratification, subjects
/// are grouped by the event pattern of the three most prevalent outcomes,
/// each stratum is shuffled, and the concatenated strata are dealt
/// round-robin so every fold receives a share of every stratum.
inline std::vector<int> assign_folds(const SurvivalDataset& data, int folds, Rng& rng, bool stratify = true) {
    const int n = data.n();
    if (folds < 2) throw std::invalid_argument("assign_folds: need at least 2 folds");
    if (n < folds) throw std::invalid_argument("assign_folds: fewer subjects than folds");
    std::vector<int> key(static_cast<std::size_t>(n), 0);
    if (stratify) {
        std::vector<int> by_prevalence(static_cast<std::size_t>(data.k()));
        std::iota(by_prevalence.begin(), by_prevalence.end(), 0);
        std::stable_sort(by_prevalence.begin(), by_prevalence.end(), [&](int a, int b) {
            return data.outcome(a).event_count() > data.outcome(b).event_count();
        });
        const int used = std::min(3, data.k());
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < used; ++j)
                if (data.outcome(by_prevalence[static_cast<std::size_t>(j)]).event[static_cast<std::size_t>(i)])
                    key[static_cast<std::size_t>(i)] |= 1 << j;
    }
    std::map<int, std::vector<int>> strata;
    for (int i = 0; i < n; ++i) strata[key[static_cast<std::size_t>(i)]].push_back(i);
    std::vector<int> fold(static_cast<std::size_t>(n));
    int deal = 0;
    for (auto& [k, members] : strata) {
        for (std::size_t i = members.size(); i > 1; --i)
            std::swap(members[i - 1], members[static_cast<std::size_t>(rng.below(i))]);
        for (int m : members) fold[static_cast<std::size_t>(m)] = deal++ % folds;
    }
    return fold;
}

inline std::string fold_hash(const std::vector<int>& fold) {
    Fnv1a h;
    for (int f : fold) h.update_int(f);
    return hex64(h.digest());
}

inline std::vector<int> rows_where(const std::vector<int>& fold, int f, bool equal) {
    std::vector<int> out;
    for (std::size_t i = 0; i < fold.size(); ++i)
        if ((fold[i] == f) == equal) out.push_back(static_cast<int>(i));
    return out;
}

enum class TuningCriterion { c_index, partial_likelihood };

/// Every dataset handed to an estimator passes through the observer first.
/// `rows` are indices into the full target cohort.
struct FitEvent {
    Method method;
    std::uint64_t seed;
    int outer_fold;
    int inner_fold;  // -1 for the outer refit
    const SurvivalDataset& train;
    const std::vector<int>& rows;
};
using FitObserver = std::function<void(const FitEvent&)>;

struct TuneResult {
    HyperPoint best;
    double score = -std::numeric_limits<double>::infinity();
    std::vector<HyperPoint> points;
    std::vector<double> scores;  // -inf where a point failed
    bool skipped = false;        // single-point grid
};

struct TuneContext {
    std::uint64_t seed = 0;
    int outer_fold = -1;
    const std::vector<int>* rows = nullptr;  // train rows in cohort indexing
    FitObserver observer;
};

namespace detail {

// Per-outcome validation score of coefficient matrix b on val. For the
// C-index, NaN marks an outcome with no usable pairs. For the partial
// likelihood criterion, returns the log-likelihood contribution
// l_full(b) - l_train(b) (larger is better) summed, not averaged.
inline double outcome_score(TuningCriterion crit, const Eigen::MatrixXd& b, int k, const SurvivalDataset& val,
                            const SurvivalDataset& full, const SurvivalDataset& train) {
    const Eigen::VectorXd beta = b.col(k);
    if (crit == TuningCriterion::c_index) {
        const OutcomeColumn& o = val.outcome(k);
        if (o.event_count() == 0) return std::numeric_limits<double>::quiet_NaN();
        const ConcordanceCounts c = concordance_counts(o.time, o.event, val.covariates() * beta);
        if (c.comparable == 0) return std::numeric_limits<double>::quiet_NaN();
        return (static_cast<double>(c.concordant) + 0.5 * static_cast<double>(c.tied_score)) /
               static_cast<double>(c.comparable);
    }
    auto loglik = [&](const SurvivalDataset& d) {
        const RiskSets risk(d.outcome(k));
        if (risk.events() == 0) return 0.0;
        return -risk.evaluate(d.covariates() * beta, nullptr) * risk.events();
    };
    return loglik(full) - loglik(train);
}

}  // namespace detail

/// Chooses the hyperparameters of method m by inner cross-validation on
/// `data`. Grid points are scored by the unweighted mean over outcomes of
/// the per-outcome validation score; ties keep the earliest point in
/// enumeration order.
inline TuneResult tune_method(Method m, const HyperGrid& grid, const SurvivalDataset& data, SourceModels& src,
                              int inner_folds, Rng& rng, TuningCriterion crit = TuningCriterion::c_index,
                              bool stratify = true, const TuneContext& ctx = {}) {
    TuneResult out;
    out.points = enumerate_points(m, grid, data.p(), data.k());
    const bool per_outcome = grid.per_outcome_residual_lambda &&
                             (m == Method::core_cox || m == Method::cox_transfer) && data.k() > 1;
    if (out.points.size() == 1) {
        out.best = out.points.front();
        out.scores = {std::numeric_limits<double>::quiet_NaN()};
        out.skipped = true;
        return out;
    }
    const int K = data.k();
    const std::size_t P = out.points.size();
    const std::vector<int> fold = assign_folds(data, inner_folds, rng, stratify);

    // sums[point][k], counts[point][k]
    std::vector<std::vector<double>> sums(P, std::vector<double>(static_cast<std::size_t>(K), 0.0));
    std::vector<std::vector<int>> counts(P, std::vector<int>(static_cast<std::size_t>(K), 0));
    std::vector<char> failed(P, 0);
    for (int f = 0; f < inner_folds; ++f) {
        const std::vector<int> tr = rows_where(fold, f, false);
        const std::vector<int> va = rows_where(fold, f, true);
        const SurvivalDataset train = data.subset(tr);
        const SurvivalDataset val = data.subset(va);
        if (ctx.observer) {
            std::vector<int> cohort_rows;
            for (int r : tr) cohort_rows.push_back(ctx.rows ? (*ctx.rows)[static_cast<std::size_t>(r)] : r);
            ctx.observer({m, ctx.seed, ctx.outer_fold, f, train, cohort_rows});
        }
        for (int k = 0; k < K; ++k)
            if (val.outcome(k).event_count() == 0 && crit == TuningCriterion::c_index)
                log_warning("inner fold " + std::to_string(f) + " has no events for outcome " +
                            data.outcome_names()[static_cast<std::size_t>(k)] + "; skipped in tuning");
        for (std::size_t q = 0; q < P; ++q) {
            if (failed[q]) continue;
            Eigen::MatrixXd b;
            try {
                b = fit_method(m, out.points[q], train, src, grid.residual_kind).coefficients.values;
            } catch (const std::exception&) {
                failed[q] = 1;
                continue;
            }
            for (int k = 0; k < K; ++k) {
                const double s = detail::outcome_score(crit, b, k, val, data, train);
                if (std::isnan(s)) continue;
                sums[q][static_cast<std::size_t>(k)] += s;
                counts[q][static_cast<std::size_t>(k)] += 1;
            }
        }
    }

    // Per-outcome score for point q, normalized so outcomes weigh equally.
    auto outcome_value = [&](std::size_t q, int k) {
        const auto kk = static_cast<std::size_t>(k);
        if (failed[q] || counts[q][kk] == 0) return std::numeric_limits<double>::quiet_NaN();
        if (crit == TuningCriterion::c_index) return sums[q][kk] / counts[q][kk];
        const int ev = data.outcome(k).event_count();
        return ev > 0 ? sums[q][kk] / ev : std::numeric_limits<double>::quiet_NaN();
    };
    auto mean_over_outcomes = [&](const std::function<double(int)>& v) {
        double s = 0.0;
        int c = 0;
        for (int k = 0; k < K; ++k) {
            const double x = v(k);
            if (std::isnan(x)) continue;
            s += x;
            ++c;
        }
        return c ? s / c : -std::numeric_limits<double>::infinity();
    };

    out.scores.resize(P);
    for (std::size_t q = 0; q < P; ++q)
        out.scores[q] = failed[q] ? -std::numeric_limits<double>::infinity()
                                  : mean_over_outcomes([&](int k) { return outcome_value(q, k); });

    if (!per_outcome) {
        for (std::size_t q = 0; q < P; ++q)
            if (out.scores[q] > out.score) {
                out.score = out.scores[q];
                out.best = out.points[q];
            }
    } else {
        // Stage-2 columns are separable, so each outcome takes its own best
        // residual lambda within a (rank, factor lambda) group.
        std::map<std::pair<int, double>, std::vector<std::size_t>> groups;
        std::vector<std::pair<int, double>> order;
        for (std::size_t q = 0; q < P; ++q) {
            const auto key = std::make_pair(out.points[q].rank, out.points[q].factor_lambda);
            if (!groups.count(key)) order.push_back(key);
            groups[key].push_back(q);
        }
        for (const auto& key : order) {
            const auto& members = groups[key];
            std::vector<double> lambdas(static_cast<std::size_t>(K), out.points[members.front()].residual_lambda);
            std::vector<double> best(static_cast<std::size_t>(K), std::numeric_limits<double>::quiet_NaN());
            for (int k = 0; k < K; ++k)
                for (std::size_t q : members) {
                    const double v = outcome_value(q, k);
                    auto& b = best[static_cast<std::size_t>(k)];
                    if (!std::isnan(v) && (std::isnan(b) || v > b)) {
                        b = v;
                        lambdas[static_cast<std::size_t>(k)] = out.points[q].residual_lambda;
                    }
                }
            const double score = mean_over_outcomes([&](int k) { return best[static_cast<std::size_t>(k)]; });
            if (score > out.score) {
                out.score = score;
                out.best = out.points[members.front()];
                out.best.per_outcome_residual = lambdas;
            }
        }
    }
    if (!std::isfinite(out.score)) throw std::runtime_error(method_name(m) + ": every grid point failed in tuning");
    return out;
}

struct MethodResult {
    std::string method_name;
    std::uint64_t seed = 0;
    int fold_index = 0;
    std::string fold_hash;
    std::vector<double> per_outcome_cindex;  // NaN where the held-out fold has no comparable pairs
    std::vector<double> per_outcome_lift;    // NaN where the held-out fold has no events
    std::map<std::string, double> chosen_hyperparameters;
    double tuning_score = std::numeric_limits<double>::quiet_NaN();
    int n_train = 0;
    int n_test = 0;
    bool ok = false;
    std::string error;
};

struct NestedCVOptions {
    double lift_fraction = 0.15;
    TuningCriterion criterion = TuningCriterion::c_index;
    int jobs = 1;
    FitObserver observer;
};

/// Outer split for one seed; identical for every method.
inline std::vector<int> outer_folds_for(const SurvivalDataset& target, const CVPlan& plan, std::uint64_t seed) {
    Rng rng(seed, 100);
    return assign_folds(target, plan.outer_folds, rng, plan.stratify_by_event);
}

/// Evaluates one (method, seed, outer fold) unit. Failures are captured in
/// the result rather than thrown.
inline MethodResult evaluate_unit(Method m, const SurvivalDataset& target, SourceModels& src, const HyperGrid& grid,
                                  const CVPlan& plan, std::uint64_t seed, int f, const std::vector<int>& fold,
                                  const NestedCVOptions& opt) {
    MethodResult r;
    r.method_name = method_name(m);
    r.seed = seed;
    r.fold_index = f;
    r.fold_hash = fold_hash(fold);
    try {
        const std::vector<int> tr = rows_where(fold, f, false);
        const std::vector<int> te = rows_where(fold, f, true);
        r.n_train = static_cast<int>(tr.size());
        r.n_test = static_cast<int>(te.size());
        const SurvivalDataset train = target.subset(tr);
        const SurvivalDataset test = target.subset(te);

        Rng inner(seed, 1000 + static_cast<std::uint64_t>(f));
        TuneContext ctx{seed, f, &tr, opt.observer};
        const TuneResult tuned =
            tune_method(m, grid, train, src, plan.inner_folds, inner, opt.criterion, plan.stratify_by_event, ctx);
        r.chosen_hyperparameters = tuned.best.as_map(m);
        r.tuning_score = tuned.skipped ? std::numeric_limits<double>::quiet_NaN() : tuned.score;

        if (opt.observer) opt.observer({m, seed, f, -1, train, tr});
        const MethodFit fit = fit_method(m, tuned.best, train, src, grid.residual_kind);
        for (int k = 0; k < target.k(); ++k) {
            const OutcomeColumn& o = test.outcome(k);
            const Eigen::VectorXd score = test.covariates() * fit.coefficients.values.col(k);
            double c = std::numeric_limits<double>::quiet_NaN();
            double lift = std::numeric_limits<double>::quiet_NaN();
            const ConcordanceCounts cc = concordance_counts(o.time, o.event, score);
            if (cc.comparable > 0)
                c = (static_cast<double>(cc.concordant) + 0.5 * static_cast<double>(cc.tied_score)) /
                    static_cast<double>(cc.comparable);
            else
                log_warning("held-out fold " + std::to_string(f) + " (seed " + std::to_string(seed) +
                            ") has no comparable pairs for outcome " + target.outcome_names()[static_cast<std::size_t>(k)]);
            if (o.event_count() > 0) lift = top_k_lift(o.time, o.event, score, opt.lift_fraction);
            r.per_outcome_cindex.push_back(c);
            r.per_outcome_lift.push_back(lift);
        }
        r.ok = true;
    } catch (const std::exception& e) {
        r.ok = false;
        r.error = e.what();
        log_warning(r.method_name + " failed on seed " + std::to_string(seed) + " fold " + std::to_string(f) + ": " +
                    e.what());
    }
    return r;
}

/// Runs every method on every (seed, outer fold). Results are ordered by
/// seed, then fold, then method (in the order given), independent of the
/// number of worker threads.
inline std::vector<MethodResult> run_nested_cv(const SurvivalDataset* source, const SurvivalDataset& target,
                                               const std::vector<Method>& methods, const HyperGrid& grid,
                                               const CVPlan& plan, const std::vector<std::uint64_t>& seeds,
                                               const NestedCVOptions& opt = {}, SourceModels* shared = nullptr) {
    plan.validate();
    if (methods.empty()) throw std::invalid_argument("run_nested_cv: no methods");
    if (seeds.empty()) throw std::invalid_argument("run_nested_cv: no seeds");
    if (!(opt.lift_fraction > 0.0 && opt.lift_fraction < 1.0))
        throw std::invalid_argument("run_nested_cv: lift fraction must be in (0, 1)");
    for (Method m : methods) {
        if (uses_source(m) && source == nullptr)
            throw std::invalid_argument(method_name(m) + " requires a source cohort");
        enumerate_points(m, grid, target.p(), target.k());
    }
    if (source != nullptr) check_shared_schema(*source, target);

    SourceModels local(source);
    SourceModels& src = shared ? *shared : local;

    std::vector<std::vector<int>> folds;
    for (std::uint64_t s : seeds) folds.push_back(outer_folds_for(target, plan, s));

    const int M = static_cast<int>(methods.size());
    const int F = plan.outer_folds;
    const int units = static_cast<int>(seeds.size()) * F * M;
    std::vector<MethodResult> results(static_cast<std::size_t>(units));
    parallel_for(units, opt.jobs, [&](int u) {
        const int s = u / (F * M);
        const int f = (u / M) % F;
        const int m = u % M;
        results[static_cast<std::size_t>(u)] =
            evaluate_unit(methods[static_cast<std::size_t>(m)], target, src, grid, plan,
                          seeds[static_cast<std::size_t>(s)], f, folds[static_cast<std::size_t>(s)], opt);
    });
    return results;
}

}  // namespace corecox
