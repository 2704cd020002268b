#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <set>

#include "blin/error.hpp"
#include "blin/evaluate.hpp"
#include "blin/rng.hpp"
#include "oracles.hpp"

using namespace blin;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Frame with i.i.d. Gaussian regressors shared by both networks.
LaggedFrame iid_frame(const InfluencePair& p, int rows, std::uint64_t seed, double noise) {
    const auto xs = oracle::gaussian_slices(rows, p.s(), p.l(), seed);
    const auto es = oracle::gaussian_slices(rows, p.s(), p.l(), seed + 1000);
    LaggedFrame f;
    for (int r = 0; r < rows; ++r) {
        f.x.push_back(xs[r]);
        f.z.push_back(xs[r]);
        f.y.push_back(blin_mean(p, xs[r], xs[r]) + noise * es[r]);
        f.times.push_back(r);
    }
    return f;
}

InfluencePair random_pair(Index s, Index l, std::uint64_t seed, double scale = 0.3) {
    return InfluencePair(scale * oracle::gaussian(s, s, seed), scale * oracle::gaussian(l, l, seed + 1));
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

EstimatorConfig with_method(Method m) {
    EstimatorConfig c;
    c.method = m;
    c.eta = 1e-14;
    c.max_iter = 20000;
    return c;
}

}  // namespace

TEST(RSquared, Examples) {
    const VectorXd y = oracle::vec(oracle::gaussian(4, 3, 1));
    EXPECT_DOUBLE_EQ(r_squared(y, y), 1.0);
    EXPECT_DOUBLE_EQ(r_squared(y, VectorXd::Zero(12)), 0.0);
    EXPECT_NEAR(r_squared(y, -y), -3.0, 1e-14);
    EXPECT_THROW(r_squared(VectorXd::Zero(3), VectorXd::Ones(3)), Error);
    EXPECT_THROW(r_squared(y, VectorXd::Zero(2)), Error);
}

TEST(Folds, PartitionIsDeterministicAndBalanced) {
    const auto a = fold_assignment(47, 10, 7);
    EXPECT_EQ(a, fold_assignment(47, 10, 7));
    EXPECT_NE(a, fold_assignment(47, 10, 8));
    std::vector<int> counts(10, 0);
    for (int f : a) {
        ASSERT_GE(f, 0);
        ASSERT_LT(f, 10);
        ++counts[static_cast<std::size_t>(f)];
    }
    for (int c : counts) EXPECT_TRUE(c == 4 || c == 5);
    EXPECT_THROW(fold_assignment(9, 10, 0), Error);
    EXPECT_THROW(fold_assignment(9, 1, 0), Error);
}

TEST(Parallel, MatchesSerialAndPropagates) {
    std::vector<double> out(100, 0.0);
    parallel_for(100, 4, [&](Index i) { out[static_cast<std::size_t>(i)] = std::sqrt(static_cast<double>(i)); });
    for (int i = 0; i < 100; ++i) EXPECT_EQ(out[static_cast<std::size_t>(i)], std::sqrt(static_cast<double>(i)));
    EXPECT_THROW(parallel_for(50, 3, [](Index i) {
                     if (i == 17) fail(ErrorCode::internal, "boom");
                 }),
                 Error);
}

TEST(KFold, NoiselessGeneralizes) {
    const auto p = random_pair(3, 3, 3);
    const auto frame = iid_frame(p, 30, 4, 0.0);
    CvOptions opts;
    opts.seed = 2;
    const auto rep = kfold_cv(frame, {with_method(Method::exact), with_method(Method::bcd)}, opts);
    ASSERT_EQ(rep.methods.size(), 2u);
    for (const auto& m : rep.methods) {
        EXPECT_GE(m.r2_out, 0.999);
        EXPECT_NEAR(m.r2_in, 1.0, 1e-9);
        for (const auto& pr : m.predictions) EXPECT_GT(pr.size(), 0);
    }
}

TEST(KFold, PredictionsMatchFoldFits) {
    const auto frame = iid_frame(random_pair(3, 2, 5), 20, 6, 1.0);
    CvOptions opts;
    opts.folds = 4;
    opts.seed = 9;
    opts.in_sample = false;
    const auto rep = kfold_cv(frame, {with_method(Method::exact)}, opts);
    std::vector<Index> train, test;
    for (Index r = 0; r < 20; ++r) (rep.assignment[static_cast<std::size_t>(r)] == 1 ? test : train).push_back(r);
    const auto fit = fit_blin_exact(subset(frame, train));
    for (Index r : test)
        EXPECT_LT((rep.methods[0].predictions[static_cast<std::size_t>(r)] -
                   blin_mean(fit.pair, frame.x[static_cast<std::size_t>(r)], frame.z[static_cast<std::size_t>(r)]))
                      .cwiseAbs()
                      .maxCoeff(),
                  1e-10);
}

TEST(KFold, ShuffledResponsesDestroyFit) {
    std::vector<double> exact, sparse;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto frame = iid_frame(random_pair(3, 3, 10 + seed), 40, 20 + seed, 1.0);
        std::vector<MatrixXd> y = frame.y;
        Rng rng(seed, 3);
        for (std::size_t i = y.size() - 1; i > 0; --i) std::swap(y[i], y[rng.below(i + 1)]);
        frame.y = y;
        CvOptions opts;
        opts.seed = seed;
        opts.in_sample = false;
        opts.inner_folds = 5;
        const auto rep = kfold_cv(frame, {with_method(Method::exact), with_method(Method::sparse)}, opts);
        exact.push_back(rep.methods[0].r2_out);
        sparse.push_back(rep.methods[1].r2_out);
    }
    EXPECT_LE(median(exact), 0.0);
    EXPECT_LE(median(sparse), 0.0);
}

// Gram downdating inside the lambda CV against explicit refits.
TEST(LambdaCv, MatchesExplicitRefits) {
    const auto frame = iid_frame(random_pair(3, 3, 30), 24, 31, 1.0);
    EstimatorConfig cfg = with_method(Method::sparse);
    cfg.lambda_count = 8;
    const auto choice = select_lambda_cv(frame, cfg, 4, 5);
    ASSERT_EQ(choice.cv_rss.size(), 8u);
    const auto assignment = fold_assignment(24, 4, 5);
    for (std::size_t k : {1u, 4u, 7u}) {
        double rss = 0.0;
        for (int f = 0; f < 4; ++f) {
            std::vector<Index> train, test;
            for (Index r = 0; r < 24; ++r) (assignment[static_cast<std::size_t>(r)] == f ? test : train).push_back(r);
            const auto fit = fit_blin_sparse(subset(frame, train), choice.lambdas[k], cfg);
            for (Index r : test) {
                const auto i = static_cast<std::size_t>(r);
                rss += (frame.y[i] - blin_mean(fit.pair, frame.x[i], frame.z[i])).squaredNorm();
            }
        }
        EXPECT_NEAR(choice.cv_rss[k] / rss, 1.0, 1e-6);
    }
    const auto best = std::min_element(choice.cv_rss.begin(), choice.cv_rss.end());
    EXPECT_EQ(choice.lambda, choice.lambdas[static_cast<std::size_t>(best - choice.cv_rss.begin())]);
}

TEST(Aic, PenaltyArithmetic) {
    EXPECT_DOUBLE_EQ(aic_hat(6, 100, 3.5) - aic_hat(5, 100, 3.5), 2.0);
    EXPECT_NEAR(aic_hat(0, 10, std::exp(1.0)), 10.0, 1e-12);
}

TEST(Aic, SortedAndAligned) {
    const std::vector<Index> dims{3, 3, 2};
    std::vector<MatrixXd> nets{MatrixXd::Zero(3, 3), MatrixXd::Zero(3, 3), MatrixXd::Zero(2, 2)};
    nets[0](0, 1) = 0.2;
    nets[0](2, 0) = -0.2;
    nets[1](1, 2) = 0.3;
    nets[2](0, 1) = 0.25;
    const auto series = generate_multi(nets, {2, 1, 1}, 200, 50, 3);
    const std::vector<std::vector<int>> grid{{1, 1, 1}, {2, 1, 1}, {1, 2, 1}, {1, 1, 2}};
    const auto cells = aic_select(series, grid, EstimatorConfig{}, 2);
    ASSERT_EQ(cells.size(), 4u);
    for (std::size_t i = 1; i < cells.size(); ++i) EXPECT_LE(cells[i - 1].aic, cells[i].aic);
    EXPECT_EQ(cells[0].lags, (std::vector<int>{2, 1, 1}));
    for (const auto& c : cells) {
        EXPECT_FALSE(c.flagged);
        EXPECT_EQ(static_cast<double>(c.nonzeros), std::round(static_cast<double>(c.nonzeros)));
        EXPECT_NEAR(c.aic, aic_hat(c.nonzeros, 198 * 18, c.rss), 1e-9 * std::abs(c.aic));
    }
}

TEST(Aic, ZeroResidualIsFlagged) {
    std::vector<VectorXd> zero(6, VectorXd::Zero(4));
    const TensorSeries series({2, 2}, zero);
    const auto cells = aic_select(series, {{1, 1}}, EstimatorConfig{});
    ASSERT_EQ(cells.size(), 1u);
    EXPECT_TRUE(cells[0].flagged);
    EXPECT_THROW(aic_select(series, {{1, 1, 1}}, EstimatorConfig{}), Error);
}

TEST(StudyMetrics, ScaleFreeOffDiagonals) {
    const MatrixXd a = oracle::gaussian(5, 5, 1);
    EXPECT_NEAR(normalized_offdiag_mse(3.7 * a, a), 0.0, 1e-30);
    EXPECT_NEAR(normalized_offdiag_mse(-0.2 * a, a), 0.0, 1e-30);
    MatrixXd d = a;
    d.diagonal() *= 10.0;
    EXPECT_NEAR(normalized_offdiag_mse(d, a), 0.0, 1e-30);
    EXPECT_GT(normalized_offdiag_mse(oracle::gaussian(5, 5, 2), a), 0.0);
}

TEST(StudyMetrics, DiagonalContract) {
    MatrixXd a = MatrixXd::Zero(2, 2), b = MatrixXd::Zero(3, 3);
    a.diagonal() << 1.0, 2.0;
    b.diagonal() << 0.5, -1.0, 3.0;
    const InfluencePair truth(a, b);
    // Truth against itself is exact under the matching contract.
    EXPECT_EQ(diagonal_mse(truth, Method::exact, truth, Generator::blin), 0.0);
    EXPECT_EQ(diagonal_mse(truth, Method::bilinear, truth, Generator::bilinear), 0.0);
    // BLIN estimate against bilinear truth: sum_ij (a_i + b_j - a_i b_j)^2.
    double expect = 0.0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 3; ++j) {
            const double d = a(i, i) + b(j, j) - a(i, i) * b(j, j);
            expect += d * d;
        }
    EXPECT_NEAR(diagonal_mse(truth, Method::exact, truth, Generator::bilinear), expect, 1e-12);
}

TEST(StudyMetrics, SlopeOfExactLine) {
    const auto s = fit_slope({1, 2, 3, 4}, {3, 1, -1, -3});
    EXPECT_NEAR(s.slope, -2.0, 1e-14);
    EXPECT_NEAR(s.intercept, 5.0, 1e-14);
    EXPECT_NEAR(s.se, 0.0, 1e-14);
    EXPECT_THROW(fit_slope({1, 1}, {2, 3}), Error);
}

TEST(ConvergenceStudy, SmallGrid) {
    StudyConfig cfg;
    cfg.s = 4;
    cfg.l = 3;
    cfg.horizons = {100, 1000, 10000};
    cfg.reps = 4;
    cfg.seed = 3;
    cfg.jobs = 2;
    const auto res = convergence_study(cfg);
    EXPECT_EQ(res.records.size(), 2u * 3u * 4u * 2u);
    ASSERT_EQ(res.cells.size(), 4u);
    for (const auto& c : res.cells) {
        if (c.generator == Generator::blin && c.method == Method::exact) {
            EXPECT_NEAR(c.a.slope, -1.0, 0.3);
            EXPECT_NEAR(c.diag.slope, -1.0, 0.3);
        }
        if (c.generator == Generator::bilinear && c.method == Method::bilinear) EXPECT_NEAR(c.a.slope, -1.0, 0.3);
    }
    const auto again = convergence_study(cfg);
    for (std::size_t i = 0; i < res.records.size(); ++i) EXPECT_EQ(res.records[i].mse_a, again.records[i].mse_a);
}

TEST(LineScan, EndpointsAndQuadratic) {
    const auto truth = random_pair(3, 3, 40);
    const auto train = iid_frame(truth, 15, 41, 1.0);
    const auto test = iid_frame(truth, 10, 42, 1.0);
    const auto fit = fit_blin_exact(train);
    std::vector<double> xi;
    for (int k = 0; k <= 10; ++k) xi.push_back(0.1 * k);
    const auto curve = likelihood_line_scan(train, test, truth, fit.pair, xi, Generator::blin);
    EXPECT_NEAR(curve.back().r2_in, fit.r2_in, 1e-12);
    const auto truth_only = likelihood_line_scan(train, test, truth, truth, {0.0}, Generator::blin);
    EXPECT_NEAR(curve.front().r2_in, truth_only[0].r2_in, 1e-14);
    // Quadratic through xi = 0, 0.5, 1 predicts every other point.
    const double f0 = curve[0].r2_in, f5 = curve[5].r2_in, f1 = curve[10].r2_in;
    const double c2 = 2.0 * (f1 - 2.0 * f5 + f0), c1 = f1 - f0 - c2;
    for (const auto& pt : curve) {
        EXPECT_NEAR(pt.r2_in, f0 + c1 * pt.xi + c2 * pt.xi * pt.xi, 1e-8);
        EXPECT_GE(pt.r2_in, std::min(f0, f1) - 1e-12);
    }
}

TEST(LineScan, BilinearGaugeAlignment) {
    const auto truth = random_pair(3, 3, 50);
    const auto train = iid_frame(truth, 12, 51, 1.0);
    const InfluencePair rescaled(-2.5 * truth.a(), truth.b() / -2.5);
    const auto curve = likelihood_line_scan(train, train, truth, rescaled, {0.0, 0.3, 0.7, 1.0}, Generator::bilinear);
    for (const auto& pt : curve) EXPECT_NEAR(pt.r2_in, curve[0].r2_in, 1e-10);
    const auto raw =
        likelihood_line_scan(train, train, truth, rescaled, {0.0, 0.5}, Generator::bilinear, /*align_gauge=*/false);
    EXPECT_GT(std::abs(raw[1].r2_in - raw[0].r2_in), 1e-3);
}
