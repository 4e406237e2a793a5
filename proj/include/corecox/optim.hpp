#pragma once

// Penalties and the two solvers every fitter is built on: monotone proximal
// gradient (Barzilai-Borwein trial steps + backtracking) and damped Newton.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace corecox {

enum class PenaltyKind { none, l1, l2 };

inline std::string to_string(PenaltyKind kind) {
    switch (kind) {
        case PenaltyKind::none: return "none";
        case PenaltyKind::l1: return "l1";
        case PenaltyKind::l2: return "l2";
    }
    return "none";
}

inline PenaltyKind penalty_kind_from_string(const std::string& s) {
    if (s == "none") return PenaltyKind::none;
    if (s == "l1") return PenaltyKind::l1;
    if (s == "l2") return PenaltyKind::l2;
    throw std::invalid_argument("unknown penalty kind: " + s);
}

/// lambda * ||b||_1 (l1) or lambda * ||b||_2^2 / 2 (l2).
struct PenaltySpec {
    PenaltyKind kind = PenaltyKind::none;
    double lambda = 0.0;

    static PenaltySpec none() { return {}; }
    static PenaltySpec l1(double lambda) { return {PenaltyKind::l1, lambda}; }
    static PenaltySpec l2(double lambda) { return {PenaltyKind::l2, lambda}; }

    bool active() const { return kind != PenaltyKind::none && lambda > 0.0; }

    void validate() const {
        if (!(lambda >= 0.0) || !std::isfinite(lambda))
            throw std::invalid_argument("PenaltySpec: lambda must be finite and >= 0");
    }

    double value(const Eigen::VectorXd& b) const {
        if (!active()) return 0.0;
        if (kind == PenaltyKind::l1) return lambda * b.lpNorm<1>();
        return 0.5 * lambda * b.squaredNorm();
    }

    /// argmin_z penalty(z) + ||z - v||^2 / (2 step)
    Eigen::VectorXd prox(const Eigen::VectorXd& v, double step) const;
};

/// Elementwise soft threshold; entries with |v| <= threshold become exactly 0.
inline Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double threshold) {
    Eigen::VectorXd out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double a = std::abs(v(i));
        out(i) = a <= threshold ? 0.0 : std::copysign(a - threshold, v(i));
    }
    return out;
}

inline Eigen::VectorXd PenaltySpec::prox(const Eigen::VectorXd& v, double step) const {
    if (!active()) return v;
    if (kind == PenaltyKind::l1) return soft_threshold(v, step * lambda);
    return v / (1.0 + step * lambda);
}

struct FitReport {
    bool converged = false;
    bool diverged = false;  // coefficient magnitude guard or monotone likelihood
    int iterations = 0;
    double final_objective = std::numeric_limits<double>::quiet_NaN();
    double grad_norm_at_exit = std::numeric_limits<double>::quiet_NaN();
    std::string message;
};

struct SolverOptions {
    int max_iter = 5000;
    double tol = 1e-7;              // max-norm of the gradient mapping
    double divergence_bound = 50.0;  // any |coefficient| beyond this aborts
};

struct VectorFit {
    Eigen::VectorXd beta;
    FitReport report;
};

/// Minimizes f(x) + penalty(x) by proximal gradient.
///
/// f(x, grad*) returns the smooth value and optionally writes its gradient.
/// Trial steps are Barzilai-Borwein; a step is accepted only under the
/// standard quadratic upper-bound test, which makes the composite objective
/// non-increasing across accepted iterations.
template <class Smooth>
VectorFit minimize_proximal(const Smooth& f, const PenaltySpec& penalty, Eigen::VectorXd x,
                            const SolverOptions& opt = {}) {
    penalty.validate();
    VectorFit out;
    Eigen::VectorXd g;
    double fx = f(x, &g);
    double step = 1.0;
    auto residual = [&](const Eigen::VectorXd& at, const Eigen::VectorXd& grad) {
        if (at.size() == 0) return 0.0;
        return (at - penalty.prox(at - grad, 1.0)).lpNorm<Eigen::Infinity>();
    };
    double res = residual(x, g);
    int it = 0;
    for (; it < opt.max_iter && res > opt.tol; ++it) {
        Eigen::VectorXd z;
        double fz = 0.0;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            z = penalty.prox(x - step * g, step);
            const Eigen::VectorXd d = z - x;
            fz = f(z, nullptr);
            const double bound = fx + g.dot(d) + d.squaredNorm() / (2.0 * step);
            if (std::isfinite(fz) && fz <= bound + 1e-14 * std::abs(fx)) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            out.report.message = "line search failed";
            break;
        }
        Eigen::VectorXd gz;
        fz = f(z, &gz);
        const Eigen::VectorXd s = z - x;
        const Eigen::VectorXd y = gz - g;
        x = std::move(z);
        g = std::move(gz);
        fx = fz;
        res = residual(x, g);
        if (x.size() > 0 && x.lpNorm<Eigen::Infinity>() > opt.divergence_bound) {
            out.report.diverged = true;
            out.report.message = "coefficient magnitude exceeded divergence bound";
            ++it;
            break;
        }
        const double sy = s.dot(y);
        const double ss = s.squaredNorm();
        if (sy > 0.0 && ss > 0.0)
            step = std::clamp(ss / sy, 1e-10, 1e10);
        else
            step = std::min(step * 2.0, 1e10);
    }
    out.report.iterations = it;
    out.report.final_objective = fx + penalty.value(x);
    out.report.grad_norm_at_exit = res;
    out.report.converged = !out.report.diverged && res <= opt.tol;
    out.beta = std::move(x);
    return out;
}

/// Damped Newton for a smooth objective with analytic Hessian.
///
/// Converged means the gradient max-norm is below tol and the Newton step is
/// small. A vanishing gradient paired with a large Newton step is the
/// signature of a monotone likelihood (separation); that is flagged as
/// divergence rather than convergence.
template <class Smooth, class Hessian>
VectorFit minimize_newton(const Smooth& f, const Hessian& hess, Eigen::VectorXd x,
                          const SolverOptions& opt) {
    VectorFit out;
    Eigen::VectorXd g;
    double fx = f(x, &g);
    double gnorm = g.size() ? g.lpNorm<Eigen::Infinity>() : 0.0;
    double step_norm = std::numeric_limits<double>::infinity();
    double last_accepted = 0.0;
    int it = 0;
    for (; it < opt.max_iter; ++it) {
        const Eigen::MatrixXd h = hess(x);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
        Eigen::VectorXd dir = -ldlt.solve(g);
        if (!dir.allFinite() || g.dot(dir) >= 0.0) dir = -g;  // fall back to steepest descent
        step_norm = dir.size() ? dir.lpNorm<Eigen::Infinity>() : 0.0;
        if (gnorm <= opt.tol && step_norm <= 1e-4) break;

        const double slope = g.dot(dir);
        double t = 1.0;
        bool accepted = false;
        Eigen::VectorXd xn;
        double fn = 0.0;
        // Predicted decrease below the objective's rounding level: the
        // Armijo test is noise there, so take the full Newton step.
        if (-slope <= 1e-13 * std::max(1.0, std::abs(fx))) {
            xn = x + dir;
            fn = f(xn, nullptr);
            accepted = std::isfinite(fn);
        }
        for (int ls = 0; ls < 50 && !accepted; ++ls) {
            xn = x + t * dir;
            fn = f(xn, nullptr);
            if (std::isfinite(fn) && fn <= fx + 1e-4 * t * slope) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            out.report.message = "line search made no progress";
            break;
        }
        last_accepted = (xn - x).size() ? (xn - x).lpNorm<Eigen::Infinity>() : 0.0;
        x = std::move(xn);
        fx = f(x, &g);
        gnorm = g.size() ? g.lpNorm<Eigen::Infinity>() : 0.0;
        if (x.size() && x.lpNorm<Eigen::Infinity>() > opt.divergence_bound) {
            out.report.diverged = true;
            out.report.message = "coefficient magnitude exceeded divergence bound";
            ++it;
            break;
        }
    }
    // The gradient can also underflow to exactly zero far out along the
    // unbounded direction, leaving a singular Hessian and a tiny final step.
    if (!out.report.diverged && gnorm <= opt.tol && std::max(step_norm, last_accepted) > 1.0) {
        out.report.diverged = true;
        out.report.message = "monotone likelihood: gradient vanished along an unbounded direction";
    }
    out.report.iterations = it;
    out.report.final_objective = fx;
    out.report.grad_norm_at_exit = gnorm;
    out.report.converged = !out.report.diverged && gnorm <= opt.tol;
    out.beta = std::move(x);
    return out;
}

}  // namespace corecox
