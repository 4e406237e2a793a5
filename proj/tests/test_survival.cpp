#include "corecox/survival.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace corecox;

namespace {

SurvivalDataset tiny(Eigen::MatrixXd x, Eigen::VectorXd t, std::vector<bool> e) {
    std::vector<std::string> pn;
    for (Eigen::Index j = 0; j < x.cols(); ++j) pn.push_back("x" + std::to_string(j));
    return {std::move(x), {OutcomeColumn{std::move(t), std::move(e)}}, pn, {"y"}};
}

}  // namespace

TEST(Dataset, RejectsBadShapesAndValues) {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(3, 1);
    OutcomeColumn ok{Eigen::Vector3d(1, 2, 3), {true, false, true}};
    EXPECT_NO_THROW(SurvivalDataset(x, {ok}, {"a"}, {"y"}));
    EXPECT_THROW(SurvivalDataset(Eigen::MatrixXd::Zero(1, 1), {OutcomeColumn{Eigen::VectorXd::Ones(1), {true}}}, {"a"}, {"y"}),
                 std::invalid_argument);
    EXPECT_THROW(SurvivalDataset(x, {}, {"a"}, {}), std::invalid_argument);
    EXPECT_THROW(SurvivalDataset(x, {OutcomeColumn{Eigen::Vector2d(1, 2), {true, true}}}, {"a"}, {"y"}),
                 std::invalid_argument);
    EXPECT_THROW(SurvivalDataset(x, {OutcomeColumn{Eigen::Vector3d(1, -2, 3), {true, true, true}}}, {"a"}, {"y"}),
                 std::invalid_argument);
    Eigen::MatrixXd bad = x;
    bad(1, 0) = std::nan("");
    EXPECT_THROW(SurvivalDataset(bad, {ok}, {"a"}, {"y"}), std::invalid_argument);
    EXPECT_THROW(SurvivalDataset(x, {ok}, {"a", "b"}, {"y"}), std::invalid_argument);
}

TEST(PartialLikelihood, DistinctTimesAtZero) {
    const auto d = tiny(Eigen::MatrixXd::Zero(3, 1), Eigen::Vector3d(1, 2, 3), {true, true, true});
    const double expected = (std::log(3.0) + std::log(2.0) + std::log(1.0)) / 3.0;
    EXPECT_NEAR(neg_log_partial_likelihood(d, 0, Eigen::VectorXd::Zero(1)), expected, 1e-12);
    EXPECT_NEAR(expected, 0.59725, 1e-5);
}

TEST(PartialLikelihood, TwoSubjectClosedForm) {
    Eigen::MatrixXd x(2, 1);
    x << 1, 0;
    const auto d = tiny(x, Eigen::Vector2d(1, 2), {true, false});
    for (double b : {-2.0, -0.3, 0.0, 0.7, 3.0}) {
        const double expected = std::log(std::exp(b) + 1.0) - b;
        EXPECT_NEAR(neg_log_partial_likelihood(d, 0, Eigen::VectorXd::Constant(1, b)), expected, 1e-12);
    }
    EXPECT_NEAR(neg_log_partial_likelihood(d, 0, Eigen::VectorXd::Zero(1)), std::log(2.0), 1e-15);
}

TEST(PartialLikelihood, TiedEventsMatchDirectSum) {
    Eigen::MatrixXd x(6, 2);
    x << 0.3, -1.0, 1.2, 0.4, -0.7, 0.9, 0.0, 0.2, 2.0, -0.5, -1.1, 1.5;
    Eigen::VectorXd t(6);
    t << 2, 5, 2, 7, 3, 5;  // two tied event times: 2 and 5
    const std::vector<bool> e{true, true, true, false, true, true};
    const auto d = tiny(x, t, e);
    const Eigen::Vector2d beta(0.37, -0.81);
    // Frozen from the direct-sum oracle.
    EXPECT_NEAR(neg_log_partial_likelihood(d, 0, beta), oracle::breslow_loss(x, t, e, beta), 1e-13);
    EXPECT_NEAR(neg_log_partial_likelihood(d, 0, beta), 1.5716590907331365, 1e-12);
}

TEST(PartialLikelihood, RandomInstancesMatchDirectSum) {
    std::mt19937_64 g(11);
    for (int rep = 0; rep < 50; ++rep) {
        const auto d = fixture::random_dataset(g, 5 + rep % 20, 1 + rep % 4, 1, rep % 2 == 0);
        const Eigen::VectorXd beta = fixture::random_vector(g, d.p());
        const double a = neg_log_partial_likelihood(d, 0, beta);
        const double b = oracle::breslow_loss(d.covariates(), d.outcome(0).time, d.outcome(0).event, beta);
        EXPECT_NEAR(a, b, 1e-11 * std::max(1.0, std::abs(b)));
    }
}

TEST(PartialLikelihood, Errors) {
    const auto d = tiny(Eigen::MatrixXd::Zero(3, 1), Eigen::Vector3d(1, 2, 3), {false, false, false});
    EXPECT_THROW(neg_log_partial_likelihood(d, 0, Eigen::VectorXd::Zero(1)), std::domain_error);
    const auto d2 = tiny(Eigen::MatrixXd::Zero(3, 1), Eigen::Vector3d(1, 2, 3), {true, false, false});
    EXPECT_THROW(neg_log_partial_likelihood(d2, 0, Eigen::VectorXd::Zero(2)), std::invalid_argument);
    EXPECT_THROW(neg_log_partial_likelihood(d2, 0, Eigen::VectorXd::Constant(1, INFINITY)), std::invalid_argument);
    EXPECT_THROW(neg_log_partial_likelihood(d2, 1, Eigen::VectorXd::Zero(1)), std::out_of_range);
}

TEST(PartialLikelihood, LargeScoresStayFinite) {
    std::mt19937_64 g(3);
    const auto d = fixture::random_dataset(g, 30, 2, 1, false);
    const Eigen::VectorXd beta = Eigen::Vector2d(400.0, -300.0);
    EXPECT_TRUE(std::isfinite(neg_log_partial_likelihood(d, 0, beta)));
    EXPECT_TRUE(plik_gradient(d, 0, beta).allFinite());
}

TEST(Gradient, ThreeSubjectScoreStatistic) {
    // x = (a, b, c), distinct event times, beta = 0: the score is
    // sum over events of (x_i - mean of x over the risk set), negated and
    // divided by 3.
    Eigen::MatrixXd x(3, 1);
    x << 1.0, -2.0, 0.5;
    const auto d = tiny(x, Eigen::Vector3d(1, 2, 3), {true, true, true});
    const double score = (1.0 - (1.0 - 2.0 + 0.5) / 3.0) + (-2.0 - (-2.0 + 0.5) / 2.0) + (0.5 - 0.5);
    EXPECT_NEAR(plik_gradient(d, 0, Eigen::VectorXd::Zero(1))(0), -score / 3.0, 1e-14);
}

TEST(Gradient, MatchesFiniteDifferences) {
    std::mt19937_64 g(5);
    for (int rep = 0; rep < 30; ++rep) {
        const auto d = fixture::random_dataset(g, 8, 4, 1, rep % 3 == 0);
        const Eigen::VectorXd beta = fixture::random_vector(g, 4, 0.5);
        const Eigen::VectorXd ga = plik_gradient(d, 0, beta);
        const Eigen::VectorXd gf = oracle::finite_difference(
            [&](const Eigen::VectorXd& b) { return neg_log_partial_likelihood(d, 0, b); }, beta);
        EXPECT_LE((ga - gf).norm(), 1e-6 * std::max(1.0, gf.norm()));
    }
}

TEST(Hessian, MatchesFiniteDifferenceOfGradient) {
    std::mt19937_64 g(8);
    for (int rep = 0; rep < 10; ++rep) {
        const auto d = fixture::random_dataset(g, 25, 3, 1, rep % 2 == 1);
        const RiskSets risk(d.outcome(0));
        const CoxObjective f(d.covariates(), risk);
        const Eigen::VectorXd beta = fixture::random_vector(g, 3, 0.4);
        const Eigen::MatrixXd h = f.hessian(beta);
        for (int j = 0; j < 3; ++j) {
            const Eigen::VectorXd col = oracle::finite_difference(
                [&](const Eigen::VectorXd& b) {
                    Eigen::VectorXd gr;
                    f(b, &gr);
                    return gr(j);
                },
                beta);
            EXPECT_LE((h.col(j) - col).norm(), 1e-6);
        }
    }
}

TEST(PartialLikelihoodProperty, MidpointConvexity) {
    std::mt19937_64 g(21);
    for (int rep = 0; rep < 100; ++rep) {
        const auto d = fixture::random_dataset(g, 12, 3, 1, rep % 2 == 0);
        const Eigen::VectorXd a = fixture::random_vector(g, 3), b = fixture::random_vector(g, 3);
        const double fa = neg_log_partial_likelihood(d, 0, a);
        const double fb = neg_log_partial_likelihood(d, 0, b);
        const double fm = neg_log_partial_likelihood(d, 0, 0.5 * (a + b));
        EXPECT_LE(fm, 0.5 * (fa + fb) + 1e-10);
    }
}

TEST(PartialLikelihoodProperty, TermCountEqualsEventCount) {
    std::mt19937_64 g(4);
    auto d = fixture::random_dataset(g, 15, 2, 1, false, 0.0);
    OutcomeColumn o = d.outcome(0);
    int before = RiskSets(o).events();
    EXPECT_EQ(before, o.event_count());
    for (int i = 0; i < 5; ++i) {
        o.event[static_cast<std::size_t>(i)] = false;
        const int after = RiskSets(o).events();
        EXPECT_LE(after, before);
        EXPECT_EQ(after, o.event_count());
        before = after;
    }
}

TEST(PartialLikelihoodProperty, TimeShiftInvariance) {
    std::mt19937_64 g(9);
    for (int rep = 0; rep < 20; ++rep) {
        const auto d = fixture::random_dataset(g, 20, 3, 1, rep % 2 == 0);
        const Eigen::VectorXd beta = fixture::random_vector(g, 3);
        OutcomeColumn shifted = d.outcome(0);
        shifted.time.array() += 17.0;
        const SurvivalDataset d2(d.covariates(), {shifted}, d.predictor_names(), d.outcome_names());
        EXPECT_DOUBLE_EQ(neg_log_partial_likelihood(d, 0, beta), neg_log_partial_likelihood(d2, 0, beta));
    }
}

TEST(RiskScores, ZeroUnitAndRandom) {
    std::mt19937_64 g(1);
    const auto d = fixture::random_dataset(g, 10, 4, 1, false);
    EXPECT_TRUE(log_risk_scores(d, Eigen::VectorXd::Zero(4)).isZero(0.0));
    for (int j = 0; j < 4; ++j) {
        const Eigen::VectorXd s = log_risk_scores(d, Eigen::VectorXd::Unit(4, j));
        EXPECT_EQ(s, d.covariates().col(j));
    }
    const Eigen::VectorXd beta = fixture::random_vector(g, 4);
    const Eigen::VectorXd s = log_risk_scores(d, beta);
    for (int i = 0; i < d.n(); ++i) {
        double v = 0.0;
        for (int j = 0; j < 4; ++j) v += d.covariates()(i, j) * beta(j);
        EXPECT_NEAR(s(i), v, 1e-13);
    }
    EXPECT_THROW(log_risk_scores(d, Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST(Materialize, OnesIdentityAndRandom) {
    LowRankFactors ones{Eigen::MatrixXd::Ones(4, 1), Eigen::MatrixXd::Ones(3, 1)};
    EXPECT_EQ(materialize(ones).values, Eigen::MatrixXd::Ones(4, 3));

    std::mt19937_64 g(2);
    Eigen::MatrixXd u(5, 3);
    for (Eigen::Index i = 0; i < u.size(); ++i) u.data()[i] = fixture::random_vector(g, 1)(0);
    LowRankFactors id{u, Eigen::MatrixXd::Identity(3, 3)};
    EXPECT_EQ(materialize(id).values, u);

    Eigen::MatrixXd a(5, 2), b(4, 2);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = fixture::random_vector(g, 1)(0);
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = fixture::random_vector(g, 1)(0);
    EXPECT_LE((materialize({a, b}).values - oracle::naive_product(a, b)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Materialize, RankBound) {
    std::mt19937_64 g(6);
    for (int r = 1; r <= 3; ++r) {
        Eigen::MatrixXd a(8, r), b(6, r);
        for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = fixture::random_vector(g, 1)(0);
        for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = fixture::random_vector(g, 1)(0);
        const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(materialize({a, b}).values).singularValues();
        for (Eigen::Index i = r; i < sv.size(); ++i) EXPECT_LT(sv(i), 1e-10 * sv(0));
    }
}

TEST(Materialize, RejectsBadFactors) {
    LowRankFactors f{Eigen::MatrixXd::Ones(4, 2), Eigen::MatrixXd::Ones(3, 1)};
    EXPECT_THROW(materialize(f), std::invalid_argument);
    LowRankFactors nan{Eigen::MatrixXd::Constant(2, 1, NAN), Eigen::MatrixXd::Ones(2, 1)};
    EXPECT_THROW(materialize(nan), std::invalid_argument);
}

TEST(Dataset, SubsetAllowsDuplicates) {
    std::mt19937_64 g(1);
    const auto d = fixture::random_dataset(g, 6, 2, 2, false);
    const auto s = d.subset({2, 2, 5});
    EXPECT_EQ(s.n(), 3);
    EXPECT_EQ(s.covariates().row(0), d.covariates().row(2));
    EXPECT_EQ(s.covariates().row(1), d.covariates().row(2));
    EXPECT_EQ(s.outcome(1).time(2), d.outcome(1).time(5));
    EXPECT_THROW(d.subset({0, 6}), std::out_of_range);
}
