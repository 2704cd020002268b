#include <gtest/gtest.h>

#include <cmath>

#include "blin/error.hpp"
#include "blin/linalg.hpp"
#include "blin/rng.hpp"
#include "blin/simulate.hpp"
#include "oracles.hpp"

using namespace blin;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Index offdiag_nonzeros(const MatrixXd& m) {
    Index n = 0;
    for (Index j = 0; j < m.cols(); ++j)
        for (Index i = 0; i < m.rows(); ++i)
            if (i != j && m(i, j) != 0.0) ++n;
    return n;
}

SimulationSpec scalar_spec(Index t) {
    SimulationSpec spec;
    spec.s = 1;
    spec.l = 1;
    spec.q_sparsity = 0.0;
    spec.horizon = t;
    spec.seed = 5;
    return spec;
}

}  // namespace

TEST(InfluencePairGen, DenseOffDiagonals) {
    const auto p = make_influence_pair(6, 4, 0.0, 1);
    EXPECT_EQ(p.a().diagonal(), VectorXd::Zero(6));
    EXPECT_EQ(p.b().diagonal(), VectorXd::Zero(4));
    EXPECT_EQ(offdiag_nonzeros(p.a()), 30);
    EXPECT_EQ(offdiag_nonzeros(p.b()), 12);
}

TEST(InfluencePairGen, SparsityCount) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto p = make_influence_pair(10, 10, 0.9, seed);
        EXPECT_EQ(offdiag_nonzeros(p.a()), 9);
        EXPECT_EQ(offdiag_nonzeros(p.b()), 9);
        const auto h = make_influence_pair(10, 10, 0.5, seed);
        EXPECT_EQ(offdiag_nonzeros(h.a()), 45);
    }
}

TEST(InfluencePairGen, SurvivorsAreTheLargest) {
    const auto dense = make_influence_pair(8, 5, 0.0, 3);
    const auto sparse = make_influence_pair(8, 5, 0.6, 3);
    double kept_min = INFINITY, dropped_max = 0.0;
    for (Index j = 0; j < 8; ++j)
        for (Index i = 0; i < 8; ++i) {
            if (i == j) continue;
            if (sparse.a()(i, j) != 0.0) {
                EXPECT_EQ(sparse.a()(i, j), dense.a()(i, j));
                kept_min = std::min(kept_min, std::abs(dense.a()(i, j)));
            } else {
                dropped_max = std::max(dropped_max, std::abs(dense.a()(i, j)));
            }
        }
    EXPECT_GE(kept_min, dropped_max);
}

// With q = 0 the network is a rank-1 matrix minus its diagonal.
TEST(InfluencePairGen, RankOneUpToDiagonal) {
    const auto p = make_influence_pair(7, 5, 0.0, 9);
    Rng rng(9, 0);
    const VectorXd u = rng.normal_vector(7), v = rng.normal_vector(7);
    const MatrixXd restored = p.a() + MatrixXd((u.array() * v.array()).matrix().asDiagonal());
    EXPECT_LT((restored - u * v.transpose()).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_EQ(linalg::numerical_rank(restored), 1);
}

TEST(InfluencePairGen, RejectsBadInput) {
    EXPECT_THROW(make_influence_pair(1, 4, 0.0, 0), Error);
    EXPECT_THROW(make_influence_pair(3, 4, 1.0, 0), Error);
}

TEST(VarMatrix, MatchesVectorizedMean) {
    const InfluencePair p(oracle::gaussian(3, 3, 1), oracle::gaussian(4, 4, 2));
    const MatrixXd y = oracle::gaussian(3, 4, 3);
    EXPECT_LT((var_matrix(p, Generator::blin) * oracle::vec(y) - oracle::vec(p.a().transpose() * y + y * p.b()))
                  .cwiseAbs()
                  .maxCoeff(),
              1e-12);
    EXPECT_LT((var_matrix(p, Generator::bilinear) * oracle::vec(y) -
               oracle::vec(p.a().transpose() * y * p.b()))
                  .cwiseAbs()
                  .maxCoeff(),
              1e-12);
}

TEST(StationaryCovariance, ClosedForms) {
    EXPECT_LT((stationary_covariance(MatrixXd::Zero(5, 5)) - MatrixXd::Identity(5, 5)).norm(), 1e-14);
    EXPECT_NEAR(stationary_covariance(MatrixXd::Constant(1, 1, 0.5))(0, 0), 4.0 / 3.0, 1e-14);
    const MatrixXd s4 = stationary_covariance(0.5 * MatrixXd::Identity(4, 4));
    EXPECT_LT((s4 - 4.0 / 3.0 * MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_THROW(stationary_covariance(MatrixXd::Identity(2, 2)), Error);
}

TEST(StationaryCovariance, MonteCarlo) {
    const MatrixXd theta = 0.5 * MatrixXd::Identity(4, 4);
    Rng rng(77, 0);
    VectorXd y = VectorXd::Zero(4);
    MatrixXd acc = MatrixXd::Zero(4, 4);
    const int n = 1000000;
    for (int t = 0; t < 100 + n; ++t) {
        y = theta * y + rng.normal_vector(4);
        if (t >= 100) acc.noalias() += y * y.transpose();
    }
    const MatrixXd sample = acc / n;
    const MatrixXd exact = stationary_covariance(theta);
    EXPECT_LT((sample - exact).norm() / exact.norm(), 0.01);
}

// The doubling path (n > 30) against a direct Kronecker solve.
TEST(StationaryCovariance, DoublingMatchesDirect) {
    MatrixXd theta = oracle::gaussian(36, 36, 4);
    theta *= 0.9 / linalg::spectral_radius(theta);
    const MatrixXd k = oracle::kron(theta, theta);
    const MatrixXd lhs = MatrixXd::Identity(k.rows(), k.cols()) - k;
    const VectorXd direct = lhs.partialPivLu().solve(oracle::vec(MatrixXd::Identity(36, 36)));
    const MatrixXd sigma = stationary_covariance(theta);
    EXPECT_LT((oracle::vec(sigma) - direct).cwiseAbs().maxCoeff() / direct.cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((sigma - theta * sigma * theta.transpose() - MatrixXd::Identity(36, 36)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Calibrate, ScalarClosedForm) {
    auto spec = scalar_spec(10);
    const InfluencePair unit(MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1));
    const auto cal = calibrate_snr(spec, unit);
    const double theta = 2.0 * cal.scale;
    EXPECT_NEAR(theta * theta, 0.75, 0.005);
    EXPECT_NEAR(cal.r2, theta * theta, 1e-12);
    EXPECT_NEAR(theta, std::sqrt(0.75), 0.005);
    EXPECT_DOUBLE_EQ(cal.scale_limit, 0.5);
}

TEST(Calibrate, SmallTargetSmallScale) {
    SimulationSpec spec;
    spec.target_r2 = 1e-3;
    const auto pair0 = make_influence_pair(10, 10, 0.9, 2);
    const auto lo = calibrate_snr(spec, pair0);
    spec.target_r2 = 0.75;
    const auto hi = calibrate_snr(spec, pair0);
    EXPECT_LT(lo.scale, 0.1 * hi.scale);
    EXPECT_NEAR(lo.r2, 1e-3, 0.005);
    EXPECT_NEAR(hi.r2, 0.75, 0.005);
    EXPECT_NEAR(large_sample_r2(var_matrix(hi.pair, Generator::blin)), hi.r2, 1e-12);
}

TEST(Calibrate, BilinearUsesSquaredScale) {
    SimulationSpec spec;
    spec.generator = Generator::bilinear;
    spec.s = 4;
    spec.l = 3;
    const auto pair0 = make_influence_pair(4, 3, 0.0, 8);
    const auto cal = calibrate_snr(spec, pair0);
    const MatrixXd theta = cal.scale * cal.scale * var_matrix(pair0, Generator::bilinear);
    EXPECT_NEAR(large_sample_r2(theta), 0.75, 0.005);
    EXPECT_LT(linalg::spectral_radius(theta), 1.0);
}

TEST(Calibrate, UnreachableReportsMaximum) {
    SimulationSpec spec;
    spec.s = 2;
    spec.l = 2;
    const InfluencePair zero(MatrixXd::Zero(2, 2), MatrixXd::Zero(2, 2));
    try {
        calibrate_snr(spec, zero);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::unreachable_target);
        EXPECT_NE(std::string(e.what()).find("maximum achievable"), std::string::npos);
    }
}

TEST(Generate, WhiteNoise) {
    SimulationSpec spec;
    spec.s = 3;
    spec.l = 2;
    spec.horizon = 20000;
    const InfluencePair zero(MatrixXd::Zero(3, 3), MatrixXd::Zero(2, 2));
    const auto y = generate(spec, zero);
    ASSERT_EQ(y.horizon(), 20000);
    double ss = 0.0;
    for (Index t = 0; t < y.horizon(); ++t) ss += y.slice(t).squaredNorm();
    EXPECT_NEAR(ss / (6.0 * 20000), 1.0, 0.03);
}

TEST(Generate, Deterministic) {
    SimulationSpec spec;
    spec.horizon = 30;
    spec.seed = 11;
    const auto a = simulate(spec, 2);
    const auto b = simulate(spec, 2);
    const auto c = simulate(spec, 3);
    for (Index t = 0; t < 30; ++t) EXPECT_EQ(a.slice(t), b.slice(t));
    EXPECT_NE(a.slice(0), c.slice(0));
    EXPECT_EQ(spec.effective_burn_in(), 70);
    spec.horizon = 80;
    EXPECT_EQ(spec.effective_burn_in(), 50);
}

TEST(Generate, ScalarAutocovariance) {
    auto spec = scalar_spec(100000);
    const InfluencePair half(MatrixXd::Constant(1, 1, 0.25), MatrixXd::Constant(1, 1, 0.25));
    const auto y = generate(spec, half);
    double c1 = 0.0;
    for (Index t = 1; t < y.horizon(); ++t) c1 += y.slice(t)(0) * y.slice(t - 1)(0);
    c1 /= static_cast<double>(y.horizon() - 1);
    EXPECT_NEAR(c1 / (0.5 * 4.0 / 3.0), 1.0, 0.02);
}

TEST(Generate, RejectsNonStationary) {
    auto spec = scalar_spec(10);
    const InfluencePair big(MatrixXd::Constant(1, 1, 0.6), MatrixXd::Constant(1, 1, 0.6));
    EXPECT_THROW(generate(spec, big), Error);
}

TEST(Generate, CalibratedLongRunR2) {
    SimulationSpec spec;
    spec.horizon = 10000;
    spec.seed = 4;
    const auto cal = calibrate_snr(spec, make_influence_pair(10, 10, 0.9, spec.seed));
    const auto y = generate(spec, cal.pair);
    double num = 0.0, den = 0.0;
    for (Index t = 1; t < y.horizon(); ++t) {
        const MatrixXd x = y.matrix(t - 1);
        num += (y.matrix(t) - blin_mean(cal.pair, x, x)).squaredNorm();
        den += y.slice(t).squaredNorm();
    }
    EXPECT_NEAR(1.0 - num / den, 0.75, 0.02);
}

TEST(Generate, IidRegressorMode) {
    SimulationSpec spec;
    spec.s = 4;
    spec.l = 3;
    spec.horizon = 12;
    const InfluencePair p(oracle::gaussian(4, 4, 1), oracle::gaussian(3, 3, 2));
    const auto f = generate_iid(spec, p);
    ASSERT_EQ(f.rows(), 12);
    EXPECT_TRUE(f.shared_lags);
    for (Index r = 0; r < 12; ++r) EXPECT_EQ(f.x[r], f.z[r]);
    spec.generator = Generator::bilinear;
    const auto g = generate_iid(spec, p);
    EXPECT_EQ(g.x[0], f.x[0]);
}

TEST(Generate, MultiwayTwoModeMatchesBlin) {
    SimulationSpec spec;
    spec.s = 3;
    spec.l = 4;
    spec.horizon = 15;
    spec.seed = 21;
    const InfluencePair p(0.2 * oracle::gaussian(3, 3, 5), 0.2 * oracle::gaussian(4, 4, 6));
    const auto a = generate(spec, p, 1);
    const auto b = generate_multi({p.a(), p.b()}, {1, 1}, 15, spec.effective_burn_in(), 21, 1);
    for (Index t = 0; t < 15; ++t) EXPECT_LT((a.slice(t) - b.slice(t)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(PseudoTrue, Reductions) {
    const InfluencePair p(oracle::gaussian(4, 4, 1), oracle::gaussian(3, 3, 2));
    const auto c = pseudo_true_offdiag_constant(p, MatrixXd::Identity(3, 3), MatrixXd::Identity(4, 4),
                                                Direction::bilinear_to_blin);
    EXPECT_NEAR(c.first, p.b().trace() / 3.0, 1e-14);
    EXPECT_NEAR(c.second, p.a().trace() / 4.0, 1e-14);
    const MatrixXd g = oracle::gaussian(3, 3, 3);
    const MatrixXd omega = g * g.transpose() + MatrixXd::Identity(3, 3);
    const InfluencePair eye(p.a(), MatrixXd::Identity(3, 3));
    EXPECT_NEAR(pseudo_true_offdiag_constant(eye, omega, MatrixXd::Identity(4, 4), Direction::bilinear_to_blin).first,
                1.0, 1e-14);
}

TEST(PseudoTrue, LoopOracle) {
    const InfluencePair p(oracle::gaussian(4, 4, 7), oracle::gaussian(3, 3, 8));
    const MatrixXd g = oracle::gaussian(3, 3, 9);
    const MatrixXd omega = g * g.transpose();
    const MatrixXd h = oracle::gaussian(4, 4, 10);
    const MatrixXd psi = h * h.transpose();
    double num = 0.0, den = 0.0, num2 = 0.0;
    for (int i = 0; i < 3; ++i) {
        den += omega(i, i);
        for (int k = 0; k < 3; ++k) {
            num += omega(i, k) * p.b()(k, i);
            for (int m = 0; m < 3; ++m) num2 += omega(i, k) * p.b()(k, m) * p.b()(i, m);
        }
    }
    const auto fwd = pseudo_true_offdiag_constant(p, omega, psi, Direction::bilinear_to_blin);
    EXPECT_NEAR(fwd.first, num / den, 1e-12);
    const auto back = pseudo_true_offdiag_constant(p, omega, psi, Direction::blin_to_bilinear);
    EXPECT_NEAR(back.first, num / num2, 1e-12);
    EXPECT_THROW(pseudo_true_offdiag_constant(p, MatrixXd::Zero(3, 3), psi, Direction::bilinear_to_blin), Error);
}
