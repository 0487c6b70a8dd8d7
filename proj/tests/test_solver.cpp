#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "robustmsd/solver.hpp"

using namespace robustmsd;

namespace {

const std::vector<double> kPenalty = {7.5, 8.0, 8.5, 9.0};

class ExampleModel : public ::testing::Test {
protected:
    NominalModel model{oracle::example_mu(), oracle::example_sigma()};
    PortfolioSpec spec{3, 5, 1.0};
    ReturnSample sample = nominal_sample(model, 50000, 2024);
};

Vector random_budget_direction(std::mt19937_64& rng, Eigen::Index d, double scale) {
    std::uniform_real_distribution<double> unif(-scale, scale);
    Vector e(d);
    for (Eigen::Index j = 0; j < d; ++j) e[j] = unif(rng);
    e.array() -= e.mean();
    return e;
}

} // namespace

TEST(SolveInner, ConstantPayoffCannotBeTilted) {
    const ReturnSample s(Matrix::Ones(100, 3), 0);
    try {
        solve_inner(s, Vector::Constant(3, 1.0 / 3.0), 0.01);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::EtaTooLargeForSample);
    }
}

TEST(SolveInner, RadiusBeyondSampleReach) {
    Matrix d(4, 2);
    d << 1.0, 1.0, 1.1, 1.1, 1.2, 1.2, 1.3, 1.3;
    EXPECT_THROW(solve_inner(ReturnSample(d, 0), Vector::Constant(2, 0.5), std::log(4.0)), Error);
    EXPECT_NO_THROW(solve_inner(ReturnSample(d, 0), Vector::Constant(2, 0.5), std::log(4.0) - 0.01));
}

TEST(SolveInner, TwoPointClosedForm) {
    const double delta = 0.02;
    Matrix d(2, 2);
    d << 1.0, 1.0, 1.0 + delta, 1.0 + delta;
    const ReturnSample s(d, 0);
    for (double eta : {0.01, 0.3, std::log(2.0) - 1e-3}) {
        const auto inner = solve_inner(s, Vector::Constant(2, 0.5), eta);
        const double expect = oracle::two_point_theta(delta, eta);
        EXPECT_NEAR(inner.measure.theta, expect, 1e-6 * expect) << "eta " << eta;
        EXPECT_NEAR(inner.kl, eta, 1e-8);
    }
}

TEST_F(ExampleModel, InnerBindsKlConstraint) {
    const Vector u = Vector::Constant(3, 1.0 / 3.0);
    for (double eta : {1e-6, 0.005, 0.05, 0.5, 2.0}) {
        const auto inner = solve_inner(sample, u, eta);
        EXPECT_NEAR(kl_of_ratio_weights(inner.measure.weights), eta, 1e-8);
        EXPECT_NEAR(inner.measure.weights.mean(), 1.0, 1e-12);
    }
}

TEST_F(ExampleModel, NonRobustLimitAtTinyRadius) {
    const Vector mean_r = sample.mean();
    const auto plain = solve_period_nonrobust(model.sigma(), 3.0, mean_r);
    const auto robust = solve_period(sample, model.sigma(), 3.0, 1e-8, 0.0, mean_r);
    EXPECT_LE((robust.u - plain.u).cwiseAbs().maxCoeff(), 1e-4);
    EXPECT_NEAR(robust.kl_achieved, 1e-8, 1e-8);
}

TEST(SolvePeriod, ExchangeableAssetsSplitEvenly) {
    Matrix sigma(2, 2);
    sigma << 4e-4, 1e-4, 1e-4, 4e-4;
    const auto base = sample_mvn(Vector::Constant(2, 1.001), sigma, 20000, 3).draws();
    Matrix sym(40000, 2);
    sym << base, base.rowwise().reverse();
    const ReturnSample s(sym, 0);
    const auto sol = solve_period(s, sigma, 3.0, 0.05, 0.0, s.mean());
    EXPECT_NEAR(sol.u[0], 0.5, 1e-8);
    EXPECT_NEAR(sol.u[1], 0.5, 1e-8);
    const auto plain = solve_period_nonrobust(sigma, 3.0, s.mean());
    EXPECT_NEAR(plain.u[0], 0.5, 1e-12);
}

TEST_F(ExampleModel, LocalOptimalityAgainstRandomProbes) {
    const double eta = 0.05, kappa = 3.0;
    const auto sol = solve_period(sample, model.sigma(), kappa, eta, 0.0, sample.mean());
    auto worst_case = [&](const Vector& u) {
        return solve_inner(sample, u, eta, 1e-10).dual_value - kappa * std::sqrt(u.dot(model.sigma() * u));
    };
    const double best = worst_case(sol.u);
    EXPECT_NEAR(best, sol.G, 1e-9);
    std::mt19937_64 rng(77);
    int beaten = 0;
    for (int t = 0; t < 1000; ++t) {
        const Vector probe = sol.u + random_budget_direction(rng, 3, 0.02);
        if (worst_case(probe) > best + 1e-12) ++beaten;
    }
    EXPECT_EQ(beaten, 0);
}

TEST_F(ExampleModel, ClosedFormMatchesInverseOracle) {
    const Vector x = 1.3 * sample.mean();
    const auto sol = solve_period_nonrobust(model.sigma(), 3.0, x);
    EXPECT_LE((sol.u - oracle::closed_form_u(model.sigma(), 3.0, x)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST_F(ExampleModel, PeriodInvariants) {
    const auto sol = solve_period(sample, model.sigma(), 3.0, 0.1, 0.002, sample.mean());
    EXPECT_LE(std::abs(sol.u.sum() - 1.0), 1e-12);
    EXPECT_GT(1.0 - sol.g / 9.0, 0.0);
    EXPECT_NEAR(sol.S, std::sqrt((1.0 / sol.a) / (1.0 - sol.g / 9.0)), 1e-10);
    // second form of S in terms of a, b, h
    EXPECT_NEAR(sol.S, std::sqrt(9.0 / (sol.a * 9.0 - (sol.a * sol.h - sol.b * sol.b))), 1e-10);
    // S is the standard deviation of the optimal portfolio
    const Vector u_x = oracle::closed_form_u(model.sigma(), 3.0, sol.X);
    EXPECT_NEAR(sol.S, std::sqrt(u_x.dot(model.sigma() * u_x)), 1e-10);
    EXPECT_NEAR(sol.kl_achieved, 0.1, 1e-6);
    EXPECT_GT(sol.theta, 0.0);
}

TEST_F(ExampleModel, KappaTooSmallIsReported) {
    try {
        solve_period_nonrobust(model.sigma(), 0.05, 10.0 * sample.mean());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::KappaTooSmall);
    }
}

TEST_F(ExampleModel, LargeKappaApproachesMinimumVariance) {
    const auto sol = solve_period_nonrobust(model.sigma(), 1e8, sample.mean());
    const Vector mv = model.chol().solve(Vector::Ones(3).eval());
    EXPECT_LE((sol.u - mv / mv.sum()).cwiseAbs().maxCoeff(), 1e-6);
}

TEST_F(ExampleModel, ConcavityProbeOfDualObjective) {
    const double theta = solve_inner(sample, Vector::Constant(3, 1.0 / 3.0), 0.05).measure.theta;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int t = 0; t < 100; ++t) {
        Vector u = Vector::Constant(3, 1.0 / 3.0) + random_budget_direction(rng, 3, 1.0);
        Vector v = Vector::Constant(3, 1.0 / 3.0) + random_budget_direction(rng, 3, 1.0);
        const double s = unif(rng);
        const Vector w = s * u + (1.0 - s) * v;
        const double lhs = dual_objective(sample, model.sigma(), w, theta, 3.0);
        const double rhs = s * dual_objective(sample, model.sigma(), u, theta, 3.0) +
                           (1.0 - s) * dual_objective(sample, model.sigma(), v, theta, 3.0);
        EXPECT_GE(lhs, rhs - 1e-10);
    }
}

TEST_F(ExampleModel, SinglePeriodHorizonIsTheBaseCase) {
    const PortfolioSpec one{3, 1, 1.0};
    const RiskProfile profile(Vector::Constant(1, 3.0), Vector::Constant(1, 0.05), Vector(0));
    const auto h = solve_horizon(one, model, profile, sample, SolveMode::Robust);
    const auto p = solve_period(sample, model.sigma(), 3.0, 0.05, 0.0, sample.mean());
    EXPECT_EQ(h.value_at_w0, p.G);
    const auto inner = solve_inner(sample, p.u, 0.05, 1e-8, p.theta);
    EXPECT_NEAR(p.G, -p.theta * inner.measure.log_moment - 3.0 * p.S - 0.05 * p.theta, 1e-12);
}

TEST_F(ExampleModel, ZeroRadiusRobustEqualsNonRobust) {
    const auto profile = RiskProfile::constant(5, 3.0, 0.0, kPenalty);
    const auto r = solve_horizon(spec, model, profile, sample, SolveMode::Robust);
    const auto n = solve_horizon(spec, model, profile, sample, SolveMode::NonRobust);
    EXPECT_LE((r.strategy().weights() - n.strategy().weights()).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_NEAR(r.value_at_w0, n.value_at_w0, 1e-6);
}

TEST_F(ExampleModel, ValueIsLinearInWealthAndStrategyIsWealthFree) {
    const auto profile = RiskProfile::constant(5, 3.0, 0.1, kPenalty);
    const auto a = solve_horizon(spec, model, profile, sample, SolveMode::Robust);
    const auto b = solve_horizon({3, 5, 2.0}, model, profile, sample, SolveMode::Robust);
    EXPECT_EQ(b.value_at_w0, 2.0 * a.value_at_w0);
    EXPECT_TRUE(a.strategy().weights() == b.strategy().weights());
    EXPECT_EQ(a.value_at_w0, a.periods.front().G);
}

TEST_F(ExampleModel, HorizonIsDeterministic) {
    const auto profile = RiskProfile::constant(5, 3.0, 0.2, kPenalty);
    const auto again = nominal_sample(model, 50000, 2024, Parallelism{3});
    const auto a = solve_horizon(spec, model, profile, sample, SolveMode::Robust);
    const auto b = solve_horizon(spec, model, profile, again, SolveMode::Robust);
    EXPECT_TRUE(a.strategy().weights() == b.strategy().weights());
    EXPECT_EQ(a.value_at_w0, b.value_at_w0);
    for (std::size_t n = 0; n < 5; ++n) EXPECT_EQ(a.periods[n].theta, b.periods[n].theta);
}

TEST_F(ExampleModel, PerPeriodSamplesAndErrorsNamePeriod) {
    std::vector<ReturnSample> per;
    for (int n = 0; n < 5; ++n) per.push_back(nominal_sample(model, 20000, 100 + static_cast<std::uint64_t>(n)));
    const auto profile = RiskProfile::constant(5, 3.0, 0.05, kPenalty);
    const auto sol = solve_horizon(spec, model, profile, per, SolveMode::Robust);
    for (const auto& p : sol.periods) EXPECT_NEAR(p.kl_achieved, 0.05, 1e-6);

    // kappa too small for the last period's X only
    Vector kappa = Vector::Constant(5, 3.0);
    kappa[4] = 0.05;
    Matrix big = per[0].draws();
    big.array() *= 10.0;
    const RiskProfile tight(kappa, Vector::Zero(5), Vector::Zero(4));
    try {
        solve_horizon(spec, model, tight, ReturnSample(big, 0), SolveMode::NonRobust);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::KappaTooSmall);
        EXPECT_NE(std::string(e.what()).find("period 4"), std::string::npos);
    }
}

TEST_F(ExampleModel, UniquenessCheckAgrees) {
    PeriodOptions opt;
    opt.check_uniqueness = true;
    const auto sol = solve_period(sample, model.sigma(), 3.0, 0.2, 0.0, sample.mean(), opt);
    EXPECT_FALSE(sol.multiple_solutions);
}

TEST(Positivity, PositiveReturnsAndLongOnlyAccept) {
    const ReturnSample s(Matrix::Constant(50, 2, 1.01), 0);
    Matrix w(2, 2);
    w << 0.3, 0.7, 1.0, 0.0;
    const RiskProfile profile(Vector::Constant(2, 3.0), Vector::Zero(2), Vector::Zero(1));
    const auto gate = check_positivity(Strategy(w), std::span<const ReturnSample>(&s, 1), profile);
    EXPECT_TRUE(gate.accepted);
    EXPECT_EQ(gate.probs[0], 1.0);
    EXPECT_EQ(gate.probs[1], 1.0);
}

TEST(Positivity, CraftedSampleBelowThresholdRejects) {
    // 94 of 100 outcomes positive; kappa = 3 requires more than 1 - e^-3 = 0.9502
    Matrix d = Matrix::Constant(100, 2, 1.0);
    d.topRows(6).setConstant(-0.5);
    const ReturnSample s(d, 0);
    const Matrix w = Matrix::Constant(1, 2, 0.5);
    const RiskProfile k3(Vector::Constant(1, 3.0), Vector::Zero(1), Vector(0));
    const auto gate = check_positivity(Strategy(w), std::span<const ReturnSample>(&s, 1), k3);
    EXPECT_NEAR(gate.probs[0], 0.94, 1e-15);
    EXPECT_FALSE(gate.accepted);
    // raising kappa can only tighten the gate; lowering it to 2.5 (0.9179) lets 0.94 pass
    const RiskProfile k25(Vector::Constant(1, 2.5), Vector::Zero(1), Vector(0));
    EXPECT_TRUE(check_positivity(Strategy(w), std::span<const ReturnSample>(&s, 1), k25).accepted);
    double prev = 0.0;
    for (double k = 0.5; k < 10.0; k += 0.5) {
        const double threshold = 1.0 - std::exp(-k);
        EXPECT_GT(threshold, prev);
        prev = threshold;
    }
}
