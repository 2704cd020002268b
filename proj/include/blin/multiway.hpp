#pragma once

#include <vector>

#include <Eigen/Dense>

#include "blin/core.hpp"
#include "blin/estimators.hpp"
#include "blin/lasso.hpp"
#include "blin/series.hpp"

namespace blin {

/// First differences d_t = y_{t+1} - y_t; T - 1 slices.
TensorSeries difference(const TensorSeries& series);

/// Responses and per-mode lag sums for a K-mode series, one row per usable t.
struct MultiFrame {
    std::vector<Index> dims;
    std::vector<int> lags;
    std::vector<Eigen::VectorXd> y;
    std::vector<std::vector<Eigen::VectorXd>> x;  // x[k][row]
    std::vector<Index> times;

    Index rows() const noexcept { return static_cast<Index>(y.size()); }
    Index modes() const noexcept { return static_cast<Index>(dims.size()); }
    double response_energy() const;
};

MultiFrame make_multi_frame(const TensorSeries& series, const LagSpec& lags, Index first = -1);
MultiFrame subset(const MultiFrame& frame, const std::vector<Index>& rows);

/// sum_k X^(k) x_k B_k^T.
Eigen::VectorXd multi_mean(const std::vector<Eigen::MatrixXd>& networks, const std::vector<Index>& dims,
                           const std::vector<Eigen::VectorXd>& regressors);

double multi_criterion(const MultiFrame& frame, const std::vector<Eigen::MatrixXd>& networks);

/// Normal equations for theta = [vec(B_1); ...; vec(B_K)], built blockwise from
/// mode unfoldings without forming the stacked design.
GramSystem multi_normal_equations(const MultiFrame& frame);

std::vector<Eigen::MatrixXd> unpack_networks(const Eigen::VectorXd& theta, const std::vector<Index>& dims);
Eigen::VectorXd pack_networks(const std::vector<Eigen::MatrixXd>& networks);

/// Equalizes mean diagonals within each group of modes sharing a lag; shifts
/// across groups would change fitted values and are left alone.
std::vector<Eigen::MatrixXd> canonicalize_networks(const std::vector<Eigen::MatrixXd>& networks,
                                                   const std::vector<int>& lags);

/// K-mode array with entries sum_k (B_k)_{i_k i_k}.
Eigen::VectorXd multi_diag_effect(const std::vector<Eigen::MatrixXd>& networks);

struct MultiFit {
    Method method = Method::bcd;
    std::vector<Eigen::MatrixXd> networks;
    std::vector<int> lags;
    Eigen::VectorXd diag_effect;
    std::vector<double> criterion_trace;
    double criterion = 0.0;
    int iterations = 0;
    bool converged = false;
    double r2_in = 0.0;
    Index design_rank = -1;
    double lambda = 0.0;
    Index nonzeros = 0;
    std::vector<std::string> warnings;
};

/// cfg.method selects bcd (default), exact or sparse (needs cfg.lambda).
MultiFit fit_multiblin(const MultiFrame& frame, const EstimatorConfig& cfg = {});
MultiFit fit_multiblin(const TensorSeries& series, const LagSpec& lags, const EstimatorConfig& cfg = {});

/// Sparse fits along a descending lambda path (cfg.lambdas or the automatic grid).
std::vector<MultiFit> fit_multiblin_sparse_path(const MultiFrame& frame, const EstimatorConfig& cfg = {});

/// Lag-l coefficient blocks: Theta_l = sum over modes with p_k >= l of the
/// vectorized mode-k action of B_k^T.
std::vector<Eigen::MatrixXd> multi_theta(const std::vector<Eigen::MatrixXd>& networks, const std::vector<int>& lags);

/// Companion matrix and its spectral radius for the K-mode model.
CompanionSystem multi_companion(const std::vector<Eigen::MatrixXd>& networks, const std::vector<int>& lags);

}  // namespace blin
