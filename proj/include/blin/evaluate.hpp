#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "blin/core.hpp"
#include "blin/estimators.hpp"
#include "blin/multiway.hpp"
#include "blin/simulate.hpp"

namespace blin {

/// Worker count from BLIN_JOBS, else 1.
int default_jobs();

/// Runs fn(0), ..., fn(n - 1) on up to `jobs` threads. The first exception
/// thrown by any task is rethrown after all workers stop.
void parallel_for(Index n, int jobs, const std::function<void(Index)>& fn);

/// 1 - sum ||yhat - y||^2 / sum ||y||^2 (no intercept adjustment).
double r_squared(const Eigen::VectorXd& y, const Eigen::VectorXd& y_hat);
double r_squared(const std::vector<Eigen::MatrixXd>& y, const std::vector<Eigen::MatrixXd>& y_hat);

/// Fold id in [0, folds) for each of n rows: a seeded shuffle dealt round-robin.
std::vector<int> fold_assignment(Index n, int folds, std::uint64_t seed);

struct CvOptions {
    int folds = 10;
    std::uint64_t seed = 0;
    /// Folds of the inner CV that picks lambda for sparse configs without one.
    int inner_folds = 10;
    /// Also fit every config on all rows for the in-sample R^2.
    bool in_sample = true;
    int jobs = 1;
};

struct MethodCv {
    EstimatorConfig config;
    std::vector<Eigen::MatrixXd> predictions;  // one per row of the frame
    double r2_out = 0.0;
    double r2_in = 0.0;
    std::vector<double> fold_lambdas;  // sparse only
    int nonconverged_folds = 0;
};

struct CvReport {
    std::vector<Index> times;
    std::vector<int> assignment;
    int folds = 0;
    std::vector<MethodCv> methods;
};

/// K-fold CV over rows of the frame. Held-out rows are removed from estimation
/// and predicted from their observed lagged regressors.
CvReport kfold_cv(const LaggedFrame& frame, const std::vector<EstimatorConfig>& configs, const CvOptions& opts = {});
CvReport kfold_cv(const TensorSeries& series, const LagSpec& lags, const std::vector<EstimatorConfig>& configs,
                  const CvOptions& opts = {});

struct LambdaChoice {
    double lambda = 0.0;
    std::vector<double> lambdas;
    std::vector<double> cv_rss;
};

/// Lambda minimizing K-fold prediction error over the automatic path of the
/// frame (ties go to the larger lambda).
LambdaChoice select_lambda_cv(const LaggedFrame& frame, const EstimatorConfig& cfg, int folds, std::uint64_t seed);

/// Sparse fit with lambda from cfg.lambda, or chosen by inner CV.
InfluenceFit fit_sparse_cv(const LaggedFrame& frame, const EstimatorConfig& cfg, int folds, std::uint64_t seed);

/// 2 * nonzeros + n * log(rss).
double aic_hat(Index nonzeros, Index n, double rss);

struct AicCell {
    std::vector<int> lags;
    double aic = 0.0;
    double r2 = 0.0;
    Index nonzeros = 0;
    double lambda = 0.0;
    double rss = 0.0;
    /// Zero residual: the log term is undefined.
    bool flagged = false;
};

/// Sparse multiway fit per lag cell, lambda chosen along the path by AIC-hat.
/// All cells use the rows t >= the largest lag in the grid. Sorted by AIC-hat
/// with flagged cells last.
std::vector<AicCell> aic_select(const TensorSeries& series, const std::vector<std::vector<int>>& lag_grid,
                                const EstimatorConfig& cfg, int jobs = 1);

struct StudyConfig {
    Index s = 10;
    Index l = 9;
    std::vector<Index> horizons{100, 316, 1000, 3162};
    int reps = 50;
    std::vector<Generator> generators{Generator::blin, Generator::bilinear};
    std::vector<Method> methods{Method::exact, Method::bilinear};
    std::uint64_t seed = 0;
    EstimatorConfig estimator;
    int jobs = 1;
};

/// One (generator, method, T, replication) fit.
struct StudyRecord {
    Generator generator = Generator::blin;
    Method method = Method::exact;
    Index horizon = 0;
    int rep = 0;
    bool converged = true;
    double mse_a = 0.0;
    double mse_b = 0.0;
    double mse_diag = 0.0;
};

struct SlopeFit {
    double slope = 0.0;
    double se = 0.0;
    double intercept = 0.0;
    Index points = 0;
};

struct StudyCell {
    Generator generator = Generator::blin;
    Method method = Method::exact;
    SlopeFit a, b, diag;
    int excluded = 0;
};

struct StudyResult {
    StudyConfig config;
    InfluencePair truth{Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Zero(1, 1)};
    std::vector<StudyRecord> records;
    std::vector<StudyCell> cells;
};

/// Off-diagonals of each matrix divided by their sum, then the mean squared
/// difference.
double normalized_offdiag_mse(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth);

/// sum_ij (d_hat_ij - d_ij)^2 where d is a_ii + b_jj (BLIN) or a_ii b_jj
/// (bilinear) for the estimating and generating model respectively.
double diagonal_mse(const InfluencePair& estimate, Method method, const InfluencePair& truth, Generator generator);

/// Least-squares slope of y on x with its standard error.
SlopeFit fit_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Regression-mode study of estimator error against T. The true networks are
/// A^T = U V^T and B = R S^T with standard-normal factors drawn from
/// Rng(seed, 0). Non-converged fits are excluded from the slopes and counted.
StudyResult convergence_study(const StudyConfig& cfg);

struct ScanPoint {
    double xi = 0.0;
    double r2_in = 0.0;
    double r2_out = 0.0;
};

/// R^2 on train and test frames along (1 - xi) * truth + xi * fitted. For the
/// bilinear model `align_gauge` first rescales the fitted pair by the c
/// minimizing ||c A_hat - A||^2 + ||B_hat / c - B||^2.
std::vector<ScanPoint> likelihood_line_scan(const LaggedFrame& train, const LaggedFrame& test,
                                            const InfluencePair& truth, const InfluencePair& fitted,
                                            const std::vector<double>& xi, Generator model,
                                            bool align_gauge = true);

}  // namespace blin
