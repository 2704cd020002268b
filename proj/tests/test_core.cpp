#include <gtest/gtest.h>

#include <cmath>

#include "blin/core.hpp"
#include "blin/error.hpp"
#include "oracles.hpp"

using namespace blin;
using Eigen::MatrixXd;

namespace {

InfluencePair random_pair(Index s, Index l, std::uint64_t seed) {
    return InfluencePair(oracle::gaussian(s, s, seed), oracle::gaussian(l, l, seed + 1000));
}

}  // namespace

TEST(TensorSeries, RejectsBadInput) {
    EXPECT_THROW(TensorSeries({2}, {Eigen::VectorXd::Zero(2)}), Error);
    EXPECT_THROW(TensorSeries({2, 2}, {}), Error);
    EXPECT_THROW(TensorSeries({2, 2}, {Eigen::VectorXd::Zero(3)}), Error);
    Eigen::VectorXd bad = Eigen::VectorXd::Zero(4);
    bad(1) = std::nan("");
    EXPECT_THROW(TensorSeries({2, 2}, {bad}), Error);
    EXPECT_THROW(TensorSeries::from_matrices({MatrixXd::Zero(2, 2), MatrixXd::Zero(2, 3)}), Error);
}

TEST(TensorSeries, MatrixViewIsModeOneUnfolding) {
    const auto slices = oracle::gaussian_slices(3, 3, 4, 1);
    const auto series = TensorSeries::from_matrices(slices);
    EXPECT_EQ(series.horizon(), 3);
    EXPECT_EQ(series.slice_size(), 12);
    for (int t = 0; t < 3; ++t) EXPECT_EQ(MatrixXd(series.matrix(t)), slices[static_cast<std::size_t>(t)]);
    EXPECT_THROW(series.slice(3), Error);
}

TEST(LagSpec, DerivedQuantities) {
    const LagSpec l(3, 1);
    EXPECT_EQ(l.p(), 3);
    EXPECT_EQ(l.q_lag(), 1);
    EXPECT_FALSE(l.p_c().has_value());
    const LagSpec m(2, 1, 4);
    EXPECT_EQ(m.p(), 4);
    EXPECT_EQ(*m.p_c(), 4);
    EXPECT_THROW(LagSpec(0, 1), Error);
    EXPECT_THROW(LagSpec(std::vector<int>{1}), Error);
}

TEST(Preprocess, StandardizeGivesUnitSampleSd) {
    auto slices = oracle::gaussian_slices(9, 2, 3, 4);
    for (auto& m : slices) m(1, 2) = 5.0;  // constant cell
    const auto z = standardize(TensorSeries::from_matrices(slices));
    for (Index c = 0; c < 6; ++c) {
        double mean = 0, ss = 0;
        for (Index t = 0; t < 9; ++t) mean += z.slice(t)(c);
        mean /= 9;
        for (Index t = 0; t < 9; ++t) ss += std::pow(z.slice(t)(c) - mean, 2);
        EXPECT_NEAR(mean, 0.0, 1e-12);
        if (c == 5)
            EXPECT_EQ(ss, 0.0);
        else
            EXPECT_NEAR(std::sqrt(ss / 8), 1.0, 1e-12);
    }
}

TEST(Preprocess, CenterRemovesTimeMean) {
    const auto c = center(oracle::gaussian_series(7, 3, 2, 8));
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(6);
    for (Index t = 0; t < 7; ++t) mean += c.slice(t);
    EXPECT_LT(mean.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(LagSum, SingleLagIsPreviousSlice) {
    const auto slices = oracle::gaussian_slices(5, 3, 2, 2);
    const auto series = TensorSeries::from_matrices(slices);
    for (Index t = 1; t < 5; ++t) EXPECT_EQ(lag_sum(series, 1, t), slices[static_cast<std::size_t>(t - 1)]);
}

TEST(LagSum, IdentitySlicesAdd) {
    const auto series = TensorSeries::from_matrices({MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2), MatrixXd::Zero(2, 2)});
    EXPECT_EQ(lag_sum(series, 2, 2), 2.0 * MatrixXd::Identity(2, 2));
}

TEST(LagSum, MatchesNaiveLoopExactly) {
    const auto slices = oracle::gaussian_slices(8, 4, 3, 17);
    const auto series = TensorSeries::from_matrices(slices);
    for (int t = 3; t < 8; ++t) {
        const MatrixXd got = lag_sum(series, 3, t);
        EXPECT_EQ(got, oracle::lag_sum(slices, 3, t));
    }
}

TEST(LagSum, ErrorNamesEarliestLegalT) {
    const auto series = oracle::gaussian_series(6, 2, 2, 3);
    try {
        lag_sum(series, 3, 2);
        FAIL() << "expected an index error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::index);
        EXPECT_NE(std::string(e.what()).find("earliest legal t is 3"), std::string::npos);
    }
}

TEST(LagSum, IsLinear) {
    const auto a = oracle::gaussian_slices(6, 3, 3, 21);
    const auto b = oracle::gaussian_slices(6, 3, 3, 22);
    std::vector<MatrixXd> sum;
    for (std::size_t t = 0; t < a.size(); ++t) sum.push_back(a[t] + b[t]);
    const auto sa = TensorSeries::from_matrices(a), sb = TensorSeries::from_matrices(b),
               ss = TensorSeries::from_matrices(sum);
    for (Index t = 2; t < 6; ++t)
        EXPECT_LT((lag_sum(ss, 2, t) - lag_sum(sa, 2, t) - lag_sum(sb, 2, t)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(BlinMean, ZeroPairGivesZero) {
    const InfluencePair p(MatrixXd::Zero(3, 3), MatrixXd::Zero(4, 4));
    EXPECT_EQ(blin_mean(p, oracle::gaussian(3, 4, 1), oracle::gaussian(3, 4, 2)), MatrixXd::Zero(3, 4));
}

TEST(BlinMean, IdentityAActsAsIdentity) {
    const InfluencePair p(MatrixXd::Identity(3, 3), MatrixXd::Zero(4, 4));
    const MatrixXd x = oracle::gaussian(3, 4, 5);
    EXPECT_EQ(blin_mean(p, x, oracle::gaussian(3, 4, 6)), x);
}

TEST(BlinMean, MatchesVectorizedForm) {
    const InfluencePair p = random_pair(3, 4, 31);
    const MatrixXd x = oracle::gaussian(3, 4, 32), z = oracle::gaussian(3, 4, 33);
    const Eigen::VectorXd v = oracle::kron(x.transpose(), MatrixXd::Identity(3, 3)) * oracle::vec(p.a().transpose()) +
                              oracle::kron(MatrixXd::Identity(4, 4), z) * oracle::vec(p.b());
    const MatrixXd m = blin_mean(p, x, z);
    EXPECT_LT((oracle::vec(m) - v).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BlinMean, ShapeMismatchThrows) {
    const InfluencePair p = random_pair(3, 4, 1);
    try {
        blin_mean(p, MatrixXd::Zero(4, 3), MatrixXd::Zero(3, 4));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::shape);
    }
}

TEST(BuildDesign, ScalarCase) {
    const auto series = TensorSeries::from_matrices({MatrixXd::Constant(1, 1, 2.5), MatrixXd::Constant(1, 1, -1.0)});
    const auto d = build_design(series, LagSpec(1, 1));
    ASSERT_EQ(d.design.rows(), 1);
    ASSERT_EQ(d.design.cols(), 2);
    EXPECT_EQ(d.design(0, 0), 2.5);
    EXPECT_EQ(d.design(0, 1), 2.5);
    EXPECT_EQ(d.response(0), -1.0);
}

TEST(BuildDesign, ReproducesBlinMean) {
    const auto slices = oracle::gaussian_slices(3, 2, 2, 41);
    const auto series = TensorSeries::from_matrices(slices);
    const auto d = build_design(series, LagSpec(1, 1));
    EXPECT_EQ(d.design.cols(), 8);
    const InfluencePair p = random_pair(2, 2, 42);
    const Eigen::VectorXd fitted = d.design * pack_theta(p);
    for (int t = 1; t < 3; ++t) {
        const MatrixXd m = blin_mean(p, slices[static_cast<std::size_t>(t - 1)], slices[static_cast<std::size_t>(t - 1)]);
        EXPECT_LT((fitted.segment((t - 1) * 4, 4) - oracle::vec(m)).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(BuildDesign, MatchesOracleAndDimensions) {
    for (auto [s, l, t, pa, pb] : std::vector<std::tuple<int, int, int, int, int>>{
             {2, 3, 6, 1, 2}, {3, 2, 7, 3, 1}, {4, 4, 5, 2, 2}}) {
        const auto slices = oracle::gaussian_slices(t, s, l, static_cast<std::uint64_t>(s * 100 + t));
        const auto d = build_design(TensorSeries::from_matrices(slices), LagSpec(pa, pb));
        const int p = std::max(pa, pb);
        EXPECT_EQ(d.design.rows(), s * l * (t - p));
        EXPECT_EQ(d.design.cols(), s * s + l * l);
        const auto ref = oracle::blin_design(slices, pa, pb);
        EXPECT_EQ(d.design, ref.x);
        EXPECT_EQ(d.response, ref.y);
    }
}

TEST(BuildDesign, Errors) {
    const auto series = oracle::gaussian_series(3, 2, 2, 1);
    try {
        build_design(series, LagSpec(3, 1));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::insufficient_data);
    }
    try {
        build_design(series, LagSpec(1, 1), 10.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::budget_exceeded);
    }
}

TEST(Companion, ZeroPair) {
    const auto sys = companion(InfluencePair(MatrixXd::Zero(2, 2), MatrixXd::Zero(3, 3)), LagSpec(1, 1));
    EXPECT_EQ(sys.f, MatrixXd::Zero(6, 6));
    EXPECT_EQ(sys.spectral_radius, 0.0);
    EXPECT_TRUE(is_stationary(sys));
}

TEST(Companion, LagOneIsThetaOne) {
    const InfluencePair p = random_pair(2, 3, 7);
    const auto sys = companion(p, LagSpec(1, 1));
    EXPECT_EQ(sys.f, sys.theta1);
    const MatrixXd ref = oracle::kron(MatrixXd::Identity(3, 3), p.a().transpose()) +
                         oracle::kron(p.b().transpose(), MatrixXd::Identity(2, 2));
    EXPECT_EQ(sys.theta1, ref);
}

TEST(Companion, DiagonalPairRadius) {
    const InfluencePair p(0.3 * MatrixXd::Identity(2, 2), 0.2 * MatrixXd::Identity(2, 2));
    const auto sys = companion(p, LagSpec(1, 1));
    EXPECT_NEAR(sys.spectral_radius, 0.5, 1e-12);
    EXPECT_TRUE(is_stationary(sys, 0.0));
    const InfluencePair big(2.2 * p.a(), 2.2 * p.b());
    const auto sys2 = companion(big, LagSpec(1, 1));
    EXPECT_NEAR(sys2.spectral_radius, 1.1, 1e-12);
    EXPECT_FALSE(is_stationary(sys2));
}

TEST(Companion, BlockLayoutForUnequalLags) {
    const InfluencePair p = random_pair(2, 2, 9);
    const auto sys = companion(p, LagSpec(3, 1));
    const Index n = 4;
    ASSERT_EQ(sys.f.rows(), 12);
    EXPECT_EQ(sys.f.block(0, 0, n, n), sys.theta1);
    EXPECT_EQ(sys.f.block(0, n, n, n), sys.theta2);
    EXPECT_EQ(sys.f.block(0, 2 * n, n, n), sys.theta2);
    EXPECT_EQ(sys.theta2, oracle::kron(MatrixXd::Identity(2, 2), p.a().transpose()));
    EXPECT_EQ(sys.f.block(n, 0, 2 * n, 2 * n), MatrixXd::Identity(2 * n, 2 * n));
    EXPECT_EQ(sys.f.block(n, 2 * n, 2 * n, n), MatrixXd::Zero(2 * n, n));

    const auto sysb = companion(p, LagSpec(1, 2));
    EXPECT_EQ(sysb.theta2, oracle::kron(p.b().transpose(), MatrixXd::Identity(2, 2)));
}

TEST(Companion, RadiusMatchesEigenvalues) {
    const InfluencePair p(0.2 * oracle::gaussian(3, 3, 3), 0.2 * oracle::gaussian(2, 2, 4));
    const auto sys = companion(p, LagSpec(2, 1));
    Eigen::EigenSolver<MatrixXd> es(sys.f);
    EXPECT_NEAR(sys.spectral_radius, es.eigenvalues().cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Companion, LagOneActionMatchesMean) {
    const InfluencePair p = random_pair(3, 2, 12);
    const MatrixXd y = oracle::gaussian(3, 2, 13);
    const auto sys = companion(p, LagSpec(1, 1));
    EXPECT_LT((sys.f * oracle::vec(y) - oracle::vec(blin_mean(p, y, y))).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Canonicalize, AlreadyCanonicalUnchanged) {
    const InfluencePair p(MatrixXd::Identity(2, 2), MatrixXd::Identity(3, 3));
    const auto c = canonicalize(p);
    EXPECT_EQ(c.a(), p.a());
    EXPECT_EQ(c.b(), p.b());
    EXPECT_EQ(c.canonical_shift(), 0.0);
}

TEST(Canonicalize, IdentityAndZero) {
    const auto c = canonicalize(InfluencePair(MatrixXd::Identity(2, 2), MatrixXd::Zero(2, 2)));
    EXPECT_DOUBLE_EQ(c.canonical_shift(), -0.5);
    EXPECT_EQ(c.a(), 0.5 * MatrixXd::Identity(2, 2));
    EXPECT_EQ(c.b(), 0.5 * MatrixXd::Identity(2, 2));
}

TEST(Canonicalize, PropertiesOnRandomPairs) {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        const InfluencePair p = random_pair(2 + seed % 4, 2 + (seed / 4) % 4, seed);
        const auto c = canonicalize(p);
        EXPECT_NEAR(c.a().diagonal().mean(), c.b().diagonal().mean(), 1e-12);
        EXPECT_LT((c.diag_effect() - p.diag_effect()).cwiseAbs().maxCoeff(), 1e-12);
        // The shift cancels only when both terms share a regressor (p_a == p_b).
        const MatrixXd x = oracle::gaussian(p.s(), p.l(), seed + 50);
        EXPECT_LT((blin_mean(p, x, x) - blin_mean(c, x, x)).cwiseAbs().maxCoeff(), 1e-10);
        for (double shift : {-3.0, 0.7, 10.0})
            EXPECT_LT((p.shifted(shift).diag_effect() - p.diag_effect()).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(DiagEffect, Entries) {
    MatrixXd a = MatrixXd::Zero(2, 2), b = MatrixXd::Zero(3, 3);
    a.diagonal() << 1, 2;
    b.diagonal() << 10, 20, 30;
    const MatrixXd d = InfluencePair(a, b).diag_effect();
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 3; ++j) EXPECT_EQ(d(i, j), a(i, i) + b(j, j));
}
