#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "robustmsd/core.hpp"
#include "robustmsd/sampling.hpp"

using namespace robustmsd;

namespace {

Strategy constant_strategy(int horizon, const Vector& u) {
    Matrix w(horizon, u.size());
    for (int n = 0; n < horizon; ++n) w.row(n) = u.transpose();
    return Strategy(w);
}

Vector vec(std::initializer_list<double> xs) {
    Vector v(static_cast<Eigen::Index>(xs.size()));
    std::copy(xs.begin(), xs.end(), v.data());
    return v;
}

} // namespace

TEST(PortfolioSpec, Validation) {
    EXPECT_NO_THROW((PortfolioSpec{2, 1, 1.0}.validate()));
    EXPECT_THROW((PortfolioSpec{1, 1, 1.0}.validate()), Error);
    EXPECT_THROW((PortfolioSpec{3, 0, 1.0}.validate()), Error);
    EXPECT_THROW((PortfolioSpec{3, 5, 0.0}.validate()), Error);
}

TEST(NominalModel, ValidatesCovariance) {
    EXPECT_NO_THROW(NominalModel(oracle::example_mu(), oracle::example_sigma()));
    EXPECT_THROW(NominalModel(vec({0.1, 0.2}), oracle::example_sigma()), Error);
    Matrix singular = Matrix::Ones(3, 3);
    EXPECT_THROW(NominalModel(oracle::example_mu(), singular), Error);
    const NominalModel m(oracle::example_mu(), oracle::example_sigma());
    EXPECT_DOUBLE_EQ(m.gross_mean()[1], 1.0022);
}

TEST(RiskProfile, ValidationAndZeroRadiusPenalty) {
    EXPECT_THROW(RiskProfile(vec({3, 3}), vec({0.1, 0.1}), vec({1, 2})), Error);
    EXPECT_THROW(RiskProfile(vec({3, 0}), vec({0.1, 0.1}), vec({1})), Error);
    EXPECT_THROW(RiskProfile(vec({3, 3}), vec({0.1, -0.1}), vec({1})), Error);
    EXPECT_THROW(RiskProfile(vec({3, 3}), vec({0.1, 0.1}), vec({-1})), Error);
    const RiskProfile p(vec({3, 3, 3}), vec({0.1, 0.0, 0.2}), vec({7.5, 8.0}));
    EXPECT_EQ(p.penalty()[0], 0.0);
    EXPECT_EQ(p.penalty()[1], 8.0);
    EXPECT_EQ(p.discount(0), 1.0);
    EXPECT_DOUBLE_EQ(p.discount(1), std::exp(-8.0));
    EXPECT_EQ(p.discount(2), 1.0);
}

TEST(RiskProfile, FromScaling) {
    const auto p = RiskProfile::from_scaling(vec({3, 3, 3}), vec({0.5, 0.5, 0.5}), vec({5.0, 6.0}));
    EXPECT_DOUBLE_EQ(p.penalty()[0], 7.5);
    EXPECT_DOUBLE_EQ(p.penalty()[1], 9.0);
}

TEST(Strategy, RowsMustSumToOne) {
    Matrix w(2, 2);
    w << 0.5, 0.5, 0.3, 0.7;
    EXPECT_NO_THROW(Strategy{w});
    w(1, 1) = 0.7 + 1e-9;
    EXPECT_THROW(Strategy{w}, Error);
}

TEST(Budget, EnforceBudgetIsExact) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> unif(-3.0, 3.0);
    for (int t = 0; t < 1000; ++t) {
        Vector u(5);
        for (int j = 0; j < 5; ++j) u[j] = unif(rng);
        u /= u.sum();
        enforce_budget(u);
        EXPECT_TRUE(in_budget_set(u));
    }
}

TEST(WealthPath, HandProduct) {
    Matrix w(2, 2);
    w << 1.0, 0.0, 0.0, 1.0;
    Matrix gross(2, 2);
    gross << 1.1, 5.0, 7.0, 0.9;
    const auto path = wealth_path(2.0, Strategy(w), gross);
    EXPECT_DOUBLE_EQ(path.values[0], 2.0);
    EXPECT_DOUBLE_EQ(path.values[1], 2.2);
    EXPECT_DOUBLE_EQ(path.values[2], 2.2 * 0.9);
}

class ObjectiveTest : public ::testing::Test {
protected:
    NominalModel model{oracle::example_mu(), oracle::example_sigma()};
    ReturnSample sample = nominal_sample(model, 1000, 99);
};

TEST_F(ObjectiveTest, SingleStepMatchesLoopOracle) {
    const PortfolioSpec spec{3, 1, 1.0};
    const RiskProfile profile(vec({3.0}), vec({0.0}), Vector(0));
    const Vector u = vec({0.2, 0.5, 0.3});
    const double got = evaluate_objective(spec, model, profile, constant_strategy(1, u), sample);
    long double mean = 0.0L;
    for (int i = 0; i < 1000; ++i) {
        double p = 0.0;
        for (int j = 0; j < 3; ++j) p += sample.draws()(i, j) * u[j];
        mean += p;
    }
    double var = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) var += u[i] * oracle::example_sigma()(i, j) * u[j];
    EXPECT_NEAR(got, static_cast<double>(mean / 1000) - 3.0 * std::sqrt(var), 1e-12);
}

TEST_F(ObjectiveTest, ZeroRiskAversionIsPureExpectation) {
    const PortfolioSpec spec{3, 3, 1.0};
    const RiskProfile profile(vec({1e-300, 1e-300, 1e-300}), vec({0, 0, 0}), vec({0, 0}));
    const Vector u = vec({0.1, 0.6, 0.3});
    const double g = numerics::mean(numerics::as_span(Vector(sample.draws() * u)));
    const double got = evaluate_objective(spec, model, profile, constant_strategy(3, u), sample);
    EXPECT_NEAR(got, g + g * g + g * g * g, 1e-12);
}

TEST(Objective, ExchangeablePenaltyIdentity) {
    Matrix sigma(2, 2);
    sigma << 4e-4, 1e-4, 1e-4, 4e-4;
    Vector mu = Vector::Constant(2, 0.001);
    const NominalModel model(mu, sigma);
    const auto sample = nominal_sample(model, 500, 5);
    const PortfolioSpec spec{2, 1, 1.0};
    const RiskProfile profile(vec({2.0}), vec({0.0}), Vector(0));
    const double half = evaluate_objective(spec, model, profile, constant_strategy(1, vec({0.5, 0.5})), sample);
    const double mean_half = numerics::mean(numerics::as_span(Vector(sample.draws() * vec({0.5, 0.5}))));
    EXPECT_NEAR(mean_half - half, 2.0 * std::sqrt((4e-4 + 2e-4 + 4e-4) / 4.0), 1e-15);
}

TEST_F(ObjectiveTest, PermutationInvariant) {
    const PortfolioSpec spec{3, 2, 1.0};
    const RiskProfile profile(vec({3, 3}), vec({0, 0}), vec({0}));
    const auto strat = constant_strategy(2, vec({0.3, 0.3, 0.4}));
    std::vector<int> idx(1000);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), std::mt19937(4));
    Matrix permuted(1000, 3);
    for (int i = 0; i < 1000; ++i) permuted.row(i) = sample.draws().row(idx[static_cast<std::size_t>(i)]);
    const double a = evaluate_objective(spec, model, profile, strat, sample);
    const double b = evaluate_objective(spec, model, profile, strat, ReturnSample(permuted, 0));
    EXPECT_NEAR(a, b, 1e-13);
}

TEST_F(ObjectiveTest, LinearInInitialWealth) {
    const RiskProfile profile(vec({3, 3, 3}), vec({0, 0, 0}), vec({0, 0}));
    const auto strat = constant_strategy(3, vec({0.2, 0.2, 0.6}));
    const double base = evaluate_objective({3, 3, 1.0}, model, profile, strat, sample);
    EXPECT_EQ(evaluate_objective({3, 3, 2.0}, model, profile, strat, sample), 2.0 * base);
    EXPECT_EQ(evaluate_objective({3, 3, 0.25}, model, profile, strat, sample), 0.25 * base);
    EXPECT_NEAR(evaluate_objective({3, 3, 3.7}, model, profile, strat, sample), 3.7 * base, 1e-14);
}

TEST_F(ObjectiveTest, DimensionMismatchThrows) {
    const RiskProfile profile(vec({3, 3}), vec({0, 0}), vec({0}));
    EXPECT_THROW(evaluate_objective({3, 3, 1.0}, model, profile, constant_strategy(3, vec({0.2, 0.2, 0.6})), sample),
                 Error);
}
