#include "corecox/estimators.hpp"
#include "corecox/simulation.hpp"
#include "corecox/studies.hpp"

#include <gtest/gtest.h>

using namespace corecox;

namespace {

SimConfig small_config(std::uint64_t seed) {
    SimConfig c;
    c.n_source = 500;
    c.n_target = 100;
    c.rng_seed = seed;
    return c;
}

}  // namespace

TEST(Rng, StreamsAreReproducibleAndDistinct) {
    Rng a(5, 1), b(5, 1), c(5, 2), d(6, 1);
    const auto va = a.next();
    EXPECT_EQ(va, b.next());
    EXPECT_NE(va, c.next());
    EXPECT_NE(va, d.next());
    Rng u(1);
    for (int i = 0; i < 1000; ++i) {
        const double x = u.uniform();
        EXPECT_GE(x, 0.0);
        EXPECT_LT(x, 1.0);
        EXPECT_LT(u.below(7), 7u);
    }
}

TEST(Rng, NormalMoments) {
    Rng r(3);
    double s = 0.0, s2 = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double z = r.normal();
        s += z;
        s2 += z * z;
    }
    EXPECT_NEAR(s / n, 0.0, 0.01);
    EXPECT_NEAR(s2 / n, 1.0, 0.01);
}

TEST(Simulation, NoShiftMeansIdenticalTruth) {
    SimConfig c = small_config(1);
    c.shift_magnitude = 0.0;
    const SimTruth t = generate_truth(c);
    EXPECT_EQ(t.b_target_true, t.b_source_true);
    EXPECT_TRUE(t.theta_true.isZero(0.0));
}

TEST(Simulation, TruthHasRequestedRankAndSparsity) {
    for (int r = 1; r <= 3; ++r) {
        SimConfig c = small_config(2);
        c.true_rank = r;
        const SimTruth t = generate_truth(c);
        const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(t.b_source_true).singularValues();
        for (Eigen::Index i = 0; i < sv.size(); ++i) {
            if (i < r)
                EXPECT_GT(sv(i), 1e-8);
            else
                EXPECT_LT(sv(i), 1e-10 * sv(0));
        }
        const long nonzero = (t.theta_true.array() != 0.0).count();
        EXPECT_EQ(nonzero, std::lround(c.shift_sparsity * c.p * c.k));
        EXPECT_TRUE(((t.theta_true.array() == 0.0) || (t.theta_true.array().abs() == c.shift_magnitude)).all());
    }
}

TEST(Simulation, ExponentialMeanWithNullEffects) {
    SimConfig c = small_config(3);
    c.n_source = 10000;
    c.p = 2;
    c.k = 1;
    c.true_rank = 1;
    c.baseline_rate = 1.0;
    c.censoring_rate_target = 0.0;
    c.shift_magnitude = 0.0;
    // The generator never emits an all-zero B, so draw times straight from the
    // baseline with zero effects.
    Rng rng(c.rng_seed, 4);
    double total = 0.0;
    const Eigen::MatrixXd x = Eigen::MatrixXd::Zero(c.n_source, c.p);
    const Eigen::MatrixXd t = detail::event_times(c, rng, x, Eigen::MatrixXd::Zero(c.p, 1));
    for (int i = 0; i < c.n_source; ++i) total += t(i, 0);
    EXPECT_NEAR(total / c.n_source, 1.0, 0.05);
}

TEST(Simulation, CensoringCalibrated) {
    for (double rate : {0.2, 0.3, 0.5}) {
        SimConfig c = small_config(4);
        c.n_source = 20000;
        c.n_target = 20000;
        c.censoring_rate_target = rate;
        const SimData s = generate(c);
        for (int k = 0; k < c.k; ++k) {
            const double tgt = 1.0 - static_cast<double>(s.target.outcome(k).event_count()) / c.n_target;
            EXPECT_NEAR(tgt, rate, 0.02);
            const double src = 1.0 - static_cast<double>(s.source.outcome(k).event_count()) / c.n_source;
            EXPECT_NEAR(src, rate, 0.05);
        }
    }
}

TEST(Simulation, NoCensoringMeansAllEvents) {
    SimConfig c = small_config(5);
    c.censoring_rate_target = 0.0;
    const SimData s = generate(c);
    for (int k = 0; k < c.k; ++k) EXPECT_EQ(s.target.outcome(k).event_count(), c.n_target);
}

TEST(Simulation, Reproducible) {
    const SimData a = generate(small_config(6));
    const SimData b = generate(small_config(6));
    const SimData d = generate(small_config(7));
    EXPECT_EQ(a.source.covariates(), b.source.covariates());
    EXPECT_EQ(a.target.covariates(), b.target.covariates());
    for (int k = 0; k < a.target.k(); ++k) {
        EXPECT_EQ(a.target.outcome(k).time, b.target.outcome(k).time);
        EXPECT_EQ(a.target.outcome(k).event, b.target.outcome(k).event);
    }
    EXPECT_NE(a.target.covariates(), d.target.covariates());
}

TEST(Simulation, WeibullBaseline) {
    SimConfig c = small_config(8);
    c.baseline = BaselineKind::weibull;
    const SimData s = generate(c);
    EXPECT_TRUE(s.target.outcome(0).time.allFinite());
    EXPECT_GT(s.target.outcome(0).time.minCoeff(), 0.0);
}

TEST(Simulation, InvalidConfig) {
    SimConfig c;
    c.true_rank = 7;
    EXPECT_THROW(generate(c), std::invalid_argument);
    c = SimConfig{};
    c.censoring_rate_target = 1.0;
    EXPECT_THROW(generate(c), std::invalid_argument);
    c = SimConfig{};
    c.shift_sparsity = 1.5;
    EXPECT_THROW(generate(c), std::invalid_argument);
}

TEST(Simulation, LargeSampleCoxRecoversTruth) {
    SimConfig c = small_config(9);
    c.n_source = 50000;
    c.p = 5;
    c.k = 2;
    c.true_rank = 1;
    const SimData s = generate(c);
    for (int k = 0; k < c.k; ++k) {
        const VectorFit f = fit_cox(s.source, k);
        ASSERT_TRUE(f.report.converged);
        EXPECT_LE((f.beta - s.truth.b_source_true.col(k)).lpNorm<Eigen::Infinity>(), 0.03);
    }
}

TEST(Rrmse, Anchors) {
    const Eigen::MatrixXd t = (Eigen::MatrixXd(2, 2) << 1, -2, 0.5, 3).finished();
    EXPECT_EQ(rrmse(t, t), 0.0);
    EXPECT_EQ(rrmse(Eigen::MatrixXd::Zero(2, 2), t), 1.0);
    EXPECT_EQ(rrmse(Eigen::MatrixXd(2.0 * t), t), 1.0);
    EXPECT_THROW(rrmse(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 2)), std::domain_error);
    EXPECT_THROW(rrmse(Eigen::MatrixXd::Zero(2, 3), t), std::invalid_argument);
    const auto cols = rrmse_by_column(Eigen::MatrixXd::Zero(2, 2), t);
    EXPECT_EQ(cols[0], 1.0);
    EXPECT_EQ(cols[1], 1.0);
}

TEST(RecoveryStudy, OnlyCoxGivesOneRowPerReplicate) {
    SimConfig c = small_config(10);
    StudyTuning tuning;
    const RecoveryStudy st = run_recovery_study(c, {Method::cox}, tuning, 10, 1);
    EXPECT_EQ(st.rows.size(), 10u);
    for (const auto& r : st.rows) EXPECT_EQ(r.method, "Cox");
}

TEST(RecoveryStudy, ShiftDoseResponse) {
    // The residual norm grows with the true shift at a fixed penalty.
    SimConfig c = small_config(11);
    c.n_target = 400;
    double prev = -1.0;
    for (double mag : {0.0, 0.3, 0.8}) {
        c.shift_magnitude = mag;
        const SimData s = generate(c);
        SourceModels src(&s.source);
        const MethodFit f = fit_method(Method::core_cox, {2, 0.0, 1e-3, 0.02, {}}, s.target, src);
        const double norm = f.transfer->residual.norm();
        EXPECT_GT(norm, prev);
        prev = norm;
    }
}

TEST(RecoveryStudy, LargeTargetNoShiftCoreTracksCox) {
    SimConfig c;
    c.n_source = 5000;
    c.n_target = 3000;
    c.shift_magnitude = 0.0;
    c.rng_seed = 12;
    const SimData s = generate(c);
    SourceModels src(&s.source);
    const MethodFit cox = fit_method(Method::cox, {}, s.target, src);
    const MethodFit core = fit_method(Method::core_cox, {2, 0.0, 1e-3, 0.01, {}}, s.target, src);
    const double r_cox = rrmse(cox.coefficients, s.truth.b_target_true);
    const double r_core = rrmse(core.coefficients, s.truth.b_target_true);
    EXPECT_LT(r_cox, 0.1);
    EXPECT_LT(r_core, r_cox + 0.02);
}
