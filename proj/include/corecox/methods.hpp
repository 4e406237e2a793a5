#pragma once

// The eight compared methods behind one interface: a method name, a
// hyperparameter point, target training data and (for transfer methods)
// cached source-cohort fits.

#include "corecox/estimators.hpp"
#include "corecox/transfer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace corecox {

enum class Method { cox, cox_lasso, cox_ridge, lr_mtl_target, lr_mtl_source, lr_mtl_both, cox_transfer, core_cox };

inline constexpr std::array<Method, 8> all_methods{Method::cox,           Method::cox_lasso,     Method::cox_ridge,
                                                   Method::lr_mtl_target, Method::lr_mtl_source, Method::lr_mtl_both,
                                                   Method::cox_transfer,  Method::core_cox};

inline std::string method_name(Method m) {
    switch (m) {
        case Method::cox: return "Cox";
        case Method::cox_lasso: return "Cox-Lasso";
        case Method::cox_ridge: return "Cox-Ridge";
        case Method::lr_mtl_target: return "LR-MTL-Target";
        case Method::lr_mtl_source: return "LR-MTL-Source";
        case Method::lr_mtl_both: return "LR-MTL-Both";
        case Method::cox_transfer: return "Cox-Transfer";
        case Method::core_cox: return "CORE-Cox";
    }
    return "?";
}

inline Method method_from_name(const std::string& name) {
    for (Method m : all_methods)
        if (method_name(m) == name) return m;
    throw std::invalid_argument("unknown method: " + name);
}

inline bool uses_source(Method m) {
    return m == Method::lr_mtl_source || m == Method::lr_mtl_both || m == Method::cox_transfer ||
           m == Method::core_cox;
}

/// Log-spaced grid from lo to hi inclusive.
inline std::vector<double> log_grid(double lo, double hi, int points) {
    if (points < 1 || !(lo > 0.0) || !(hi >= lo)) throw std::invalid_argument("log_grid: bad range");
    std::vector<double> out;
    for (int i = 0; i < points; ++i) {
        const double t = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
        out.push_back(std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo))));
    }
    return out;
}

struct HyperGrid {
    std::vector<int> ranks;
    std::vector<double> lambdas;           // Cox-Lasso / Cox-Ridge penalty
    std::vector<double> factor_lambdas;    // Frobenius penalty on low-rank factors
    std::vector<double> residual_lambdas;  // residual penalty (Cox-Transfer, CORE-Cox)
    PenaltyKind residual_kind = PenaltyKind::l1;
    bool per_outcome_residual_lambda = false;

    /// rank in {1, 2, 3, min(p, K)}; every lambda on 7 log-spaced points in [1e-3, 1e1].
    static HyperGrid defaults(int p, int k) {
        HyperGrid g;
        g.ranks = {1, 2, 3, std::min(p, k)};
        g.lambdas = log_grid(1e-3, 1e1, 7);
        g.factor_lambdas = g.lambdas;
        g.residual_lambdas = g.lambdas;
        return g;
    }
};

struct HyperPoint {
    int rank = 0;
    double lambda = 0.0;
    double factor_lambda = 0.0;
    double residual_lambda = 0.0;
    std::vector<double> per_outcome_residual;  // overrides residual_lambda when non-empty

    std::map<std::string, double> as_map(Method m) const {
        std::map<std::string, double> out;
        switch (m) {
            case Method::cox: break;
            case Method::cox_lasso:
            case Method::cox_ridge: out["lambda"] = lambda; break;
            case Method::lr_mtl_target:
            case Method::lr_mtl_source:
            case Method::lr_mtl_both:
                out["rank"] = rank;
                out["factor_lambda"] = factor_lambda;
                break;
            case Method::cox_transfer: out["residual_lambda"] = residual_lambda; break;
            case Method::core_cox:
                out["rank"] = rank;
                out["factor_lambda"] = factor_lambda;
                out["residual_lambda"] = residual_lambda;
                break;
        }
        for (std::size_t k = 0; k < per_outcome_residual.size(); ++k)
            out["residual_lambda[" + std::to_string(k) + "]"] = per_outcome_residual[k];
        return out;
    }
};

/// Grid points relevant to method m, in a fixed enumeration order. Ranks
/// above min(p, K) are dropped and duplicates removed.
inline std::vector<HyperPoint> enumerate_points(Method m, const HyperGrid& grid, int p, int k) {
    std::vector<int> ranks;
    for (int r : grid.ranks)
        if (r >= 1 && r <= std::min(p, k) && std::find(ranks.begin(), ranks.end(), r) == ranks.end()) ranks.push_back(r);
    auto require = [&](bool ok, const char* what) {
        if (!ok) throw std::invalid_argument(method_name(m) + ": empty " + what + " grid");
    };
    std::vector<HyperPoint> out;
    switch (m) {
        case Method::cox: out.push_back({}); break;
        case Method::cox_lasso:
        case Method::cox_ridge:
            require(!grid.lambdas.empty(), "lambda");
            for (double l : grid.lambdas) out.push_back({0, l, 0.0, 0.0, {}});
            break;
        case Method::lr_mtl_target:
        case Method::lr_mtl_source:
        case Method::lr_mtl_both:
            require(!ranks.empty(), "rank");
            require(!grid.factor_lambdas.empty(), "factor lambda");
            for (int r : ranks)
                for (double f : grid.factor_lambdas) out.push_back({r, 0.0, f, 0.0, {}});
            break;
        case Method::cox_transfer:
            require(!grid.residual_lambdas.empty(), "residual lambda");
            for (double l : grid.residual_lambdas) out.push_back({0, 0.0, 0.0, l, {}});
            break;
        case Method::core_cox:
            require(!ranks.empty(), "rank");
            require(!grid.factor_lambdas.empty(), "factor lambda");
            require(!grid.residual_lambdas.empty(), "residual lambda");
            for (int r : ranks)
                for (double f : grid.factor_lambdas)
                    for (double l : grid.residual_lambdas) out.push_back({r, 0.0, f, l, {}});
            break;
    }
    return out;
}

/// Source-cohort fits shared by every fold, seed and grid point. The source
/// never participates in evaluation splits, so each fit depends only on its
/// hyperparameters and is computed once. Thread-safe.
class SourceModels {
public:
    explicit SourceModels(const SurvivalDataset* source, LowRankOptions opt = {})
        : source_(source), opt_(opt) {}

    const SurvivalDataset& source() const {
        if (source_ == nullptr) throw std::invalid_argument("method requires a source cohort");
        return *source_;
    }
    bool has_source() const { return source_ != nullptr; }
    const LowRankOptions& options() const { return opt_; }

    const LowRankFit& lowrank(int rank, double factor_lambda) {
        auto entry = lowrank_entry({rank, factor_lambda});
        std::call_once(entry->once, [&] {
            entry->fit = fit_lowrank_mtl(source(), rank, PenaltySpec::l2(factor_lambda), opt_);
        });
        return entry->fit;
    }

    const VectorFit& transfer_column(int k) {
        std::shared_ptr<ColumnEntry> entry;
        {
            std::lock_guard<std::mutex> lock(mu_);
            auto& slot = columns_[k];
            if (!slot) slot = std::make_shared<ColumnEntry>();
            entry = slot;
        }
        std::call_once(entry->once, [&] { entry->fit = fit_transfer_source_column(source(), k); });
        return entry->fit;
    }

private:
    struct LowRankEntry {
        std::once_flag once;
        LowRankFit fit;
    };
    struct ColumnEntry {
        std::once_flag once;
        VectorFit fit;
    };

    std::shared_ptr<LowRankEntry> lowrank_entry(std::pair<int, double> key) {
        std::lock_guard<std::mutex> lock(mu_);
        auto& slot = lowrank_[key];
        if (!slot) slot = std::make_shared<LowRankEntry>();
        return slot;
    }

    const SurvivalDataset* source_;
    LowRankOptions opt_;
    std::mutex mu_;
    std::map<std::pair<int, double>, std::shared_ptr<LowRankEntry>> lowrank_;
    std::map<int, std::shared_ptr<ColumnEntry>> columns_;
};

struct MethodFit {
    CoefficientMatrix coefficients;
    std::vector<FitReport> reports;
    std::shared_ptr<const TransferFit> transfer;  // set for CORE-Cox and Cox-Transfer
};

/// Fits method m at one hyperparameter point on target training data.
inline MethodFit fit_method(Method m, const HyperPoint& hp, const SurvivalDataset& target, SourceModels& src,
                            PenaltyKind residual_kind = PenaltyKind::l1) {
    MethodFit out;
    auto& names_p = target.predictor_names();
    auto& names_k = target.outcome_names();
    out.coefficients = {Eigen::MatrixXd::Zero(target.p(), target.k()), names_p, names_k};
    auto per_column = [&](auto&& fit_col) {
        for (int k = 0; k < target.k(); ++k) {
            VectorFit f = fit_col(k);
            out.coefficients.values.col(k) = f.beta;
            out.reports.push_back(std::move(f.report));
        }
    };
    const LowRankOptions& lo = src.options();
    switch (m) {
        case Method::cox:
            per_column([&](int k) { return fit_cox(target, k); });
            break;
        case Method::cox_lasso:
            per_column([&](int k) { return fit_cox_penalized(target, k, PenaltySpec::l1(hp.lambda)); });
            break;
        case Method::cox_ridge:
            per_column([&](int k) { return fit_cox_penalized(target, k, PenaltySpec::l2(hp.lambda)); });
            break;
        case Method::lr_mtl_target: {
            LowRankFit f = fit_lowrank_mtl(target, hp.rank, PenaltySpec::l2(hp.factor_lambda), lo);
            out.coefficients.values = f.factors.u * f.factors.v.transpose();
            out.reports.push_back(std::move(f.report));
            break;
        }
        case Method::lr_mtl_source: {
            const LowRankFit& f = src.lowrank(hp.rank, hp.factor_lambda);
            out.coefficients.values = direct_transfer(f.factors).values;
            out.reports.push_back(f.report);
            break;
        }
        case Method::lr_mtl_both: {
            check_shared_schema(src.source(), target);
            const LowRankFit& warm = src.lowrank(hp.rank, hp.factor_lambda);
            const SurvivalDataset pooled = pool_datasets(src.source(), target);
            LowRankFit f = fit_lowrank_mtl(pooled, hp.rank, PenaltySpec::l2(hp.factor_lambda), lo, &warm.factors);
            out.coefficients.values = f.factors.u * f.factors.v.transpose();
            out.reports.push_back(std::move(f.report));
            break;
        }
        case Method::cox_transfer: {
            check_shared_schema(src.source(), target);
            auto fit = std::make_shared<TransferFit>();
            fit->source_matrix = {Eigen::MatrixXd::Zero(target.p(), target.k()), names_p, names_k};
            fit->residual = Eigen::MatrixXd::Zero(target.p(), target.k());
            fit->residual_penalty = {residual_kind, hp.residual_lambda};
            for (int k = 0; k < target.k(); ++k) {
                const VectorFit& base = src.transfer_column(k);
                const double lambda = hp.per_outcome_residual.empty()
                                          ? hp.residual_lambda
                                          : hp.per_outcome_residual[static_cast<std::size_t>(k)];
                VectorFit f = fit_residual_column(target, k, base.beta, {residual_kind, lambda});
                fit->source_matrix.values.col(k) = base.beta;
                fit->residual.col(k) = f.beta;
                out.reports.push_back(base.report);
                out.reports.push_back(f.report);
                fit->residual_reports.push_back(std::move(f.report));
            }
            fit->target_matrix = {fit->source_matrix.values + fit->residual, names_p, names_k};
            out.coefficients = fit->target_matrix;
            out.transfer = std::move(fit);
            break;
        }
        case Method::core_cox: {
            check_shared_schema(src.source(), target);
            const LowRankFit* stage1_ptr = nullptr;
            try {
                stage1_ptr = &src.lowrank(hp.rank, hp.factor_lambda);
            } catch (const std::exception& e) {
                throw std::runtime_error(std::string("stage 1 (source low-rank fit): ") + e.what());
            }
            const LowRankFit& stage1 = *stage1_ptr;
            const CoefficientMatrix b_source = materialize(stage1.factors, names_p, names_k);
            std::shared_ptr<TransferFit> fit;
            try {
                fit = std::make_shared<TransferFit>(
                    fit_residual(target, b_source, {residual_kind, hp.residual_lambda}, hp.per_outcome_residual));
            } catch (const std::exception& e) {
                throw std::runtime_error(std::string("stage 2 (target residual fit): ") + e.what());
            }
            fit->rank_used = hp.rank;
            fit->factor_penalty = PenaltySpec::l2(hp.factor_lambda);
            fit->source_report = stage1.report;
            out.coefficients = fit->target_matrix;
            out.reports.push_back(stage1.report);
            for (const auto& r : fit->residual_reports) out.reports.push_back(r);
            out.transfer = std::move(fit);
            break;
        }
    }
    return out;
}

}  // namespace corecox
