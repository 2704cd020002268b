#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "blin/core.hpp"
#include "blin/lasso.hpp"

namespace blin {

enum class Method { exact, bcd, sparse, reduced_rank, bilinear };

const char* method_name(Method m) noexcept;
/// Accepts "exact", "bcd", "sparse", "reduced_rank" (or "reduced-rank") and "bilinear".
Method parse_method(const std::string& name);

struct EstimatorConfig {
    Method method = Method::bcd;
    /// Stop when |Q_v - Q_{v-1}| <= eta, scaled by Q_0 = sum ||Y_t||^2 when eta_relative.
    double eta = 1e-8;
    bool eta_relative = true;
    int max_iter = 500;

    /// Sparse only. `lambda` picks a single penalty; `lambdas` overrides the
    /// automatic log-spaced path.
    std::optional<double> lambda;
    std::vector<double> lambdas;
    int lambda_count = 50;
    double lambda_min_ratio = 1e-4;
    LassoOptions lasso;

    /// Reduced-rank only.
    Index rank_a = 1;
    Index rank_b = 1;

    /// Bilinear only.
    int restarts = 10;

    std::uint64_t seed = 0;
    double element_budget = kDefaultElementBudget;

    /// Throws invalid_argument when fields are out of range for an S x L problem.
    void validate(Index s, Index l) const;
};

struct ReducedRankFactors {
    Eigen::MatrixXd u, v;    // A^T = U V^T
    Eigen::MatrixXd rf, sf;  // B = Rf Sf^T
};

struct InfluenceFit {
    Method method = Method::bcd;
    InfluencePair pair{Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Zero(1, 1)};
    /// Criterion at the starting point followed by one entry per iteration.
    std::vector<double> criterion_trace;
    double criterion = 0.0;
    int iterations = 0;
    bool converged = false;
    double r2_in = 0.0;
    std::optional<ReducedRankFactors> factors;
    /// Rank of the normal equations (exact fits); -1 when not computed.
    Index design_rank = -1;
    std::vector<std::string> warnings;

    double lambda = 0.0;  // sparse
    Index nonzeros = 0;

    std::vector<double> restart_criteria;  // bilinear
    std::vector<bool> restart_converged;
    int best_restart = -1;
};

/// Model mean for a fit: A^T X + Z B, or A^T X B for bilinear fits.
Eigen::MatrixXd fitted_mean(const InfluenceFit& fit, const Eigen::MatrixXd& x, const Eigen::MatrixXd& z);

/// sum_t ||Y_t - mean_t||^2 for a BLIN pair.
double blin_criterion(const LaggedFrame& frame, const InfluencePair& pair);
/// sum_t ||Y_t - A^T X_t B||^2.
double bilinear_criterion(const LaggedFrame& frame, const InfluencePair& pair);

/// Normal equations of the stacked BLIN design, assembled from per-time blocks.
GramSystem blin_normal_equations(const LaggedFrame& frame);

InfluenceFit fit_blin_exact(const LaggedFrame& frame, const EstimatorConfig& cfg = {});
InfluenceFit fit_blin_exact(const TensorSeries& series, const LagSpec& lags, const EstimatorConfig& cfg = {});

InfluenceFit fit_blin_bcd(const LaggedFrame& frame, const EstimatorConfig& cfg = {});
InfluenceFit fit_blin_bcd(const TensorSeries& series, const LagSpec& lags, const EstimatorConfig& cfg = {});

struct SparsePath {
    double lambda_max = 0.0;
    std::vector<double> lambdas;
    std::vector<InfluenceFit> fits;
};

/// Warm-started path over cfg.lambdas, or the automatic grid when empty.
SparsePath fit_blin_sparse_path(const LaggedFrame& frame, const EstimatorConfig& cfg = {});
SparsePath fit_blin_sparse_path(const TensorSeries& series, const LagSpec& lags, const EstimatorConfig& cfg = {});

/// Single-penalty fit, warm-started along the grid points above `lambda`.
InfluenceFit fit_blin_sparse(const LaggedFrame& frame, double lambda, const EstimatorConfig& cfg = {});
InfluenceFit fit_blin_sparse(const TensorSeries& series, const LagSpec& lags, double lambda,
                             const EstimatorConfig& cfg = {});

InfluenceFit fit_blin_reduced_rank(const LaggedFrame& frame, const EstimatorConfig& cfg);
InfluenceFit fit_blin_reduced_rank(const TensorSeries& series, const LagSpec& lags, const EstimatorConfig& cfg);

/// Alternating least squares for Y_t = A^T X_t B. Uses the x regressors of
/// the frame; the lag spec must have p_a == p_b.
InfluenceFit fit_bilinear(const LaggedFrame& frame, const EstimatorConfig& cfg = {});
InfluenceFit fit_bilinear(const TensorSeries& series, const LagSpec& lags, const EstimatorConfig& cfg = {});

/// Dispatches on cfg.method. Sparse requires cfg.lambda.
InfluenceFit fit(const LaggedFrame& frame, const EstimatorConfig& cfg);

struct RankReport {
    bool checked = false;
    Index rank = -1;
    Index parameters = 0;  // S^2 + L^2
    Index rows = 0;        // S L T_eff
    bool unique = false;
    /// sigma_r / sigma_{r+1}, or infinity when rank is full column rank.
    double gap = 0.0;
    std::string note;
};

/// Numerical rank of the dense design. Returns checked=false instead of
/// throwing when the design would exceed the element budget.
RankReport design_rank_check(const TensorSeries& series, const LagSpec& lags,
                             double element_budget = kDefaultElementBudget);
RankReport design_rank_check(const LaggedFrame& frame, double element_budget = kDefaultElementBudget);

}  // namespace blin
