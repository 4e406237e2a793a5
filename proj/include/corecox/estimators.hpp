#pragma once

// Single-cohort estimators: Cox, penalized Cox (lasso / ridge) and the
// low-rank multi-task Cox fit behind the LR-MTL family.

#include "corecox/optim.hpp"
#include "corecox/survival.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace corecox {

struct CoxOptions {
    int max_iter = 200;
    double tol = 1e-7;
    double divergence_bound = 50.0;
};

inline void check_fit_outcome(const SurvivalDataset& data, int k, int min_events) {
    check_outcome_index(data, k);
    const int d = data.outcome(k).event_count();
    if (d < min_events)
        throw std::domain_error("outcome '" + data.outcome_names()[static_cast<std::size_t>(k)] +
                                "' has " + std::to_string(d) + " events; need at least " +
                                std::to_string(min_events));
}

/// Unpenalized Cox fit for outcome k by damped Newton from beta = 0.
inline VectorFit fit_cox(const SurvivalDataset& data, int outcome_index, const CoxOptions& opt = {}) {
    check_fit_outcome(data, outcome_index, 1);
    const RiskSets risk(data.outcome(outcome_index));
    const CoxObjective f(data.covariates(), risk);
    SolverOptions so{opt.max_iter, opt.tol, opt.divergence_bound};
    VectorFit fit = minimize_newton(
        f, [&](const Eigen::VectorXd& b) { return f.hessian(b); },
        Eigen::VectorXd::Zero(data.p()), so);
    const auto warn = [&](const char* w) {
        fit.report.message += fit.report.message.empty() ? "" : "; ";
        fit.report.message += w;
    };
    if (risk.events() < 2) warn("warning: fewer than 2 events");
    if (data.p() >= risk.events()) warn("warning: p >= event count");
    return fit;
}

/// Penalized fit of one column around a fixed base coefficient vector:
/// minimizes L(x * (base + theta)) + penalty(theta) over theta.
/// With an empty base this is an ordinary penalized Cox fit.
inline VectorFit fit_offset_column(const Eigen::MatrixXd& x, const RiskSets& risk,
                                   const Eigen::VectorXd& base, const PenaltySpec& penalty,
                                   const Eigen::VectorXd* init = nullptr,
                                   const SolverOptions& opt = {}) {
    Eigen::VectorXd offset;
    if (base.size() != 0) {
        if (base.size() != x.cols()) throw std::invalid_argument("fit_offset_column: base length != p");
        offset = x * base;
    }
    const CoxObjective f(x, risk, std::move(offset));
    Eigen::VectorXd x0 = init != nullptr ? *init : Eigen::VectorXd::Zero(x.cols());
    return minimize_proximal(f, penalty, std::move(x0), opt);
}

/// Penalized Cox for outcome k: L(beta) + lambda*||beta||_1 or lambda*||beta||^2/2.
inline VectorFit fit_cox_penalized(const SurvivalDataset& data, int outcome_index,
                                   const PenaltySpec& penalty, const SolverOptions& opt = {}) {
    penalty.validate();
    check_fit_outcome(data, outcome_index, 1);
    const RiskSets risk(data.outcome(outcome_index));
    return fit_offset_column(data.covariates(), risk, Eigen::VectorXd(), penalty, nullptr, opt);
}

struct LowRankOptions {
    int max_alternations = 100;
    double rel_tol = 1e-6;
    SolverOptions block{50, 1e-9, 50.0};
};

struct LowRankFit {
    LowRankFactors factors;
    FitReport report;
};

namespace detail {

// Joint low-rank objective sum_k L_k(U v_k) + lambda/2 (||U||^2 + ||V||^2).
class LowRankObjective {
public:
    LowRankObjective(const Eigen::MatrixXd& x, const std::vector<RiskSets>& risk, double lambda)
        : x_(x), risk_(risk), lambda_(lambda) {}

    double loss(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v, Eigen::MatrixXd* grad_u = nullptr) const {
        const Eigen::MatrixXd z = x_ * u;
        const Eigen::MatrixXd eta = z * v.transpose();
        double total = 0.0;
        Eigen::MatrixXd d(eta.rows(), eta.cols());
        for (std::size_t k = 0; k < risk_.size(); ++k) {
            const auto kk = static_cast<Eigen::Index>(k);
            if (grad_u != nullptr) {
                Eigen::VectorXd dk;
                total += risk_[k].evaluate(eta.col(kk), &dk);
                d.col(kk) = dk;
            } else {
                total += risk_[k].evaluate(eta.col(kk));
            }
        }
        if (grad_u != nullptr) *grad_u = x_.transpose() * (d * v);
        return total;
    }

    double objective(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v) const {
        return loss(u, v) + 0.5 * lambda_ * (u.squaredNorm() + v.squaredNorm());
    }

    // Max-norm of the gradient of the full objective in (U, V).
    double stationarity(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v) const {
        Eigen::MatrixXd gu;
        loss(u, v, &gu);
        gu += lambda_ * u;
        const Eigen::MatrixXd z = x_ * u;
        double gv = 0.0;
        for (std::size_t k = 0; k < risk_.size(); ++k) {
            const auto kk = static_cast<Eigen::Index>(k);
            Eigen::VectorXd dk;
            risk_[k].evaluate(z * v.row(kk).transpose(), &dk);
            const Eigen::VectorXd g = z.transpose() * dk + lambda_ * v.row(kk).transpose();
            gv = std::max(gv, g.lpNorm<Eigen::Infinity>());
        }
        return std::max(gu.lpNorm<Eigen::Infinity>(), gv);
    }

private:
    const Eigen::MatrixXd& x_;
    const std::vector<RiskSets>& risk_;
    double lambda_;
};

}  // namespace detail

/// Ridge-then-SVD warm start: top-r singular pairs of the per-outcome
/// ridge (lambda = 1) solutions, split symmetrically between U and V.
inline LowRankFactors lowrank_initialization(const SurvivalDataset& data, int rank) {
    Eigen::MatrixXd b0(data.p(), data.k());
    for (int k = 0; k < data.k(); ++k)
        b0.col(k) = fit_cox_penalized(data, k, PenaltySpec::l2(1.0)).beta;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(b0, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd root = svd.singularValues().head(rank).cwiseSqrt();
    LowRankFactors f;
    f.u = svd.matrixU().leftCols(rank) * root.asDiagonal();
    f.v = svd.matrixV().leftCols(rank) * root.asDiagonal();
    return f;
}

/// Low-rank multi-task Cox fit: B = U V^T minimizing
///   sum_k L_k(U v_k) + lambda/2 (||U||_F^2 + ||V||_F^2)
/// by alternating block minimization over U, then each row of V. Both blocks
/// are smooth (Frobenius penalty), so each is solved by damped Newton.
/// Tasks enter with equal weight; every L_k is already event-averaged.
inline LowRankFit fit_lowrank_mtl(const SurvivalDataset& data, int rank, const PenaltySpec& penalty,
                                  const LowRankOptions& opt = {},
                                  const LowRankFactors* init = nullptr) {
    penalty.validate();
    if (penalty.kind == PenaltyKind::l1)
        throw std::invalid_argument("fit_lowrank_mtl: factor penalty must be none or l2 (Frobenius)");
    if (rank < 1 || rank > std::min(data.p(), data.k()))
        throw std::invalid_argument("fit_lowrank_mtl: rank must be in [1, min(p, K)]");
    for (int k = 0; k < data.k(); ++k) check_fit_outcome(data, k, 1);

    const double lambda = penalty.active() ? penalty.lambda : 0.0;
    std::vector<RiskSets> risk;
    risk.reserve(static_cast<std::size_t>(data.k()));
    for (const auto& o : data.outcomes()) risk.emplace_back(o);
    const Eigen::MatrixXd& x = data.covariates();
    const detail::LowRankObjective obj(x, risk, lambda);

    LowRankFactors f = init != nullptr ? *init : lowrank_initialization(data, rank);
    if (f.u.rows() != data.p() || f.v.rows() != data.k() || f.u.cols() != rank || f.v.cols() != rank)
        throw std::invalid_argument("fit_lowrank_mtl: initial factors have wrong shape");

    const Eigen::Index p = data.p();
    LowRankFit out;
    double prev = obj.objective(f.u, f.v);
    int it = 0;
    bool converged = false;
    for (; it < opt.max_alternations; ++it) {
        // U block: smooth in vec(U); Hessian block (a, b) is sum_k v_ka v_kb H_k + lambda I.
        {
            const Eigen::MatrixXd& v = f.v;
            auto smooth = [&](const Eigen::VectorXd& uvec, Eigen::VectorXd* grad) {
                const Eigen::Map<const Eigen::MatrixXd> u(uvec.data(), p, rank);
                const double pen = 0.5 * lambda * uvec.squaredNorm();
                if (grad == nullptr) return obj.loss(u, v) + pen;
                Eigen::MatrixXd gu;
                const double val = obj.loss(u, v, &gu);
                *grad = Eigen::Map<const Eigen::VectorXd>(gu.data(), gu.size()) + lambda * uvec;
                return val + pen;
            };
            auto hess = [&](const Eigen::VectorXd& uvec) {
                const Eigen::Map<const Eigen::MatrixXd> u(uvec.data(), p, rank);
                const Eigen::MatrixXd eta = x * u * v.transpose();
                Eigen::MatrixXd h = lambda * Eigen::MatrixXd::Identity(p * rank, p * rank);
                for (int k = 0; k < data.k(); ++k) {
                    const Eigen::MatrixXd hk = risk[static_cast<std::size_t>(k)].hessian(eta.col(k), x);
                    for (int a = 0; a < rank; ++a)
                        for (int b = 0; b < rank; ++b)
                            h.block(a * p, b * p, p, p) += (v(k, a) * v(k, b)) * hk;
                }
                return h;
            };
            Eigen::VectorXd u0 = Eigen::Map<const Eigen::VectorXd>(f.u.data(), f.u.size());
            VectorFit fu = minimize_newton(smooth, hess, std::move(u0), opt.block);
            f.u = Eigen::Map<const Eigen::MatrixXd>(fu.beta.data(), p, rank);
        }
        // V block: rows decouple given U; each is a ridge Cox in the r scores X U.
        {
            const Eigen::MatrixXd z = x * f.u;
            for (int k = 0; k < data.k(); ++k) {
                const CoxObjective fk(z, risk[static_cast<std::size_t>(k)]);
                auto smooth = [&](const Eigen::VectorXd& vk, Eigen::VectorXd* grad) {
                    const double val = fk(vk, grad) + 0.5 * lambda * vk.squaredNorm();
                    if (grad != nullptr) *grad += lambda * vk;
                    return val;
                };
                auto hess = [&](const Eigen::VectorXd& vk) {
                    Eigen::MatrixXd h = fk.hessian(vk);
                    h.diagonal().array() += lambda;
                    return h;
                };
                VectorFit fv = minimize_newton(smooth, hess, f.v.row(k).transpose(), opt.block);
                f.v.row(k) = fv.beta.transpose();
            }
        }
        const double cur = obj.objective(f.u, f.v);
        const Eigen::MatrixXd b = f.u * f.v.transpose();
        if (!b.allFinite() || b.lpNorm<Eigen::Infinity>() > opt.block.divergence_bound) {
            out.report.diverged = true;
            out.report.message = "coefficient magnitude exceeded divergence bound";
            prev = cur;
            ++it;
            break;
        }
        const double decrease = prev - cur;
        prev = cur;
        if (decrease < opt.rel_tol * std::max(std::abs(cur), 1e-12)) {
            converged = true;
            ++it;
            break;
        }
    }
    out.report.iterations = it;
    out.report.final_objective = prev;
    out.report.grad_norm_at_exit = obj.stationarity(f.u, f.v);
    out.report.converged = converged && !out.report.diverged;
    out.factors = std::move(f);
    return out;
}

/// Row-concatenation of two cohorts with identical schemas. A default
/// constructed (empty) dataset acts as the identity.
inline SurvivalDataset pool_datasets(const SurvivalDataset& a, const SurvivalDataset& b) {
    if (a.n() == 0) return b;
    if (b.n() == 0) return a;
    if (a.predictor_names() != b.predictor_names() || a.outcome_names() != b.outcome_names())
        throw std::invalid_argument("pool_datasets: schema mismatch (predictor or outcome names differ)");
    Eigen::MatrixXd x(a.n() + b.n(), a.p());
    x << a.covariates(), b.covariates();
    std::vector<OutcomeColumn> outs(static_cast<std::size_t>(a.k()));
    for (int k = 0; k < a.k(); ++k) {
        auto& o = outs[static_cast<std::size_t>(k)];
        o.time.resize(a.n() + b.n());
        o.time << a.outcome(k).time, b.outcome(k).time;
        o.event = a.outcome(k).event;
        o.event.insert(o.event.end(), b.outcome(k).event.begin(), b.outcome(k).event.end());
    }
    return {std::move(x), std::move(outs), a.predictor_names(), a.outcome_names()};
}

}  // namespace corecox
