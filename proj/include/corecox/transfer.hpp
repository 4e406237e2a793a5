#pragma once

// Two-stage transfer: a frozen source coefficient matrix plus a penalized
// residual fitted on target data only.

#include "corecox/estimators.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace corecox {

struct TransferFit {
    CoefficientMatrix source_matrix;  // frozen after stage 1
    Eigen::MatrixXd residual;         // Theta
    CoefficientMatrix target_matrix;  // source_matrix + residual, exactly
    int rank_used = 0;
    PenaltySpec factor_penalty;
    PenaltySpec residual_penalty;
    FitReport source_report;
    std::vector<FitReport> residual_reports;  // one per outcome column
};

inline void check_shared_schema(const SurvivalDataset& source, const SurvivalDataset& target) {
    if (source.predictor_names() != target.predictor_names())
        throw std::invalid_argument("source and target predictor names differ");
    if (source.outcome_names() != target.outcome_names())
        throw std::invalid_argument("source and target outcome names differ");
}

/// Stage 2 for one column: minimizes L_target(base + theta) + penalty(theta),
/// starting from theta = 0 (the source model) unless a warm start is given.
inline VectorFit fit_residual_column(const SurvivalDataset& target, int outcome_index,
                                     const Eigen::VectorXd& source_beta, const PenaltySpec& penalty,
                                     const Eigen::VectorXd* init = nullptr) {
    penalty.validate();
    check_fit_outcome(target, outcome_index, 1);
    const RiskSets risk(target.outcome(outcome_index));
    return fit_offset_column(target.covariates(), risk, source_beta, penalty, init);
}

/// Stage 2 for all columns given a frozen source matrix. Columns decouple
/// under elementwise penalties, so each is solved independently.
/// per_outcome_lambda, when non-empty, overrides penalty.lambda per column.
inline TransferFit fit_residual(const SurvivalDataset& target, const CoefficientMatrix& source_matrix,
                                const PenaltySpec& residual_penalty,
                                const std::vector<double>& per_outcome_lambda = {},
                                const Eigen::MatrixXd* warm_start = nullptr) {
    if (source_matrix.p() != target.p() || source_matrix.k() != target.k())
        throw std::invalid_argument("fit_residual: source matrix shape does not match target data");
    if (!per_outcome_lambda.empty() && static_cast<int>(per_outcome_lambda.size()) != target.k())
        throw std::invalid_argument("fit_residual: per-outcome lambda count != K");
    TransferFit out;
    out.source_matrix = source_matrix;
    out.residual_penalty = residual_penalty;
    out.residual = Eigen::MatrixXd::Zero(target.p(), target.k());
    for (int k = 0; k < target.k(); ++k) {
        PenaltySpec pen = residual_penalty;
        if (!per_outcome_lambda.empty()) pen.lambda = per_outcome_lambda[static_cast<std::size_t>(k)];
        Eigen::VectorXd init;
        if (warm_start != nullptr) init = warm_start->col(k);
        VectorFit col = fit_residual_column(target, k, source_matrix.values.col(k), pen,
                                            warm_start != nullptr ? &init : nullptr);
        out.residual.col(k) = col.beta;
        out.residual_reports.push_back(col.report);
    }
    out.target_matrix = {source_matrix.values + out.residual, target.predictor_names(), target.outcome_names()};
    return out;
}

/// CORE-Cox: stage 1 fits the low-rank multi-task model on the source cohort
/// alone; stage 2 holds it fixed and fits the penalized residual on target.
inline TransferFit fit_core_cox(const SurvivalDataset& source, const SurvivalDataset& target, int rank,
                                const PenaltySpec& factor_penalty, const PenaltySpec& residual_penalty,
                                const LowRankOptions& opt = {}) {
    check_shared_schema(source, target);
    const LowRankFit stage1 = fit_lowrank_mtl(source, rank, factor_penalty, opt);
    const CoefficientMatrix b_source = materialize(stage1.factors, source.predictor_names(), source.outcome_names());
    TransferFit out = fit_residual(target, b_source, residual_penalty);
    out.rank_used = rank;
    out.factor_penalty = factor_penalty;
    out.source_report = stage1.report;
    return out;
}

/// Lightly ridge-regularized source fit used by the single-outcome transfer
/// benchmark; the tiny penalty guarantees a finite solution under separation.
inline VectorFit fit_transfer_source_column(const SurvivalDataset& source, int outcome_index) {
    return fit_cox_penalized(source, outcome_index, PenaltySpec::l2(1e-4));
}

/// Cox-Transfer: single-outcome source fit followed by the stage-2 residual
/// problem for that column only. No cross-outcome structure is used.
inline VectorFit fit_cox_transfer(const SurvivalDataset& source, const SurvivalDataset& target,
                                  int outcome_index, const PenaltySpec& residual_penalty) {
    check_shared_schema(source, target);
    const VectorFit src = fit_transfer_source_column(source, outcome_index);
    VectorFit res = fit_residual_column(target, outcome_index, src.beta, residual_penalty);
    res.beta += src.beta;
    if (!src.report.converged) {
        res.report.converged = false;
        res.report.message = "source fit did not converge: " + src.report.message;
    }
    return res;
}

/// LR-MTL-Source applied unchanged to the target cohort.
inline CoefficientMatrix direct_transfer(const LowRankFactors& source_fit,
                                         std::vector<std::string> predictor_names = {},
                                         std::vector<std::string> outcome_names = {}) {
    return materialize(source_fit, std::move(predictor_names), std::move(outcome_names));
}

}  // namespace corecox
