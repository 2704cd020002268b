#pragma once

#include <vector>

#include <Eigen/Dense>

#include "blin/series.hpp"

namespace blin {

/// Default cap on the number of entries of an explicitly built design matrix.
inline constexpr double kDefaultElementBudget = 2e8;

/// Row (A, S x S) and column (B, L x L) influence networks.
///
/// Only a_ii + b_jj is identified; `canonical_shift` records the c applied by
/// canonicalize() so that callers can undo it.
class InfluencePair {
public:
    InfluencePair(Eigen::MatrixXd a, Eigen::MatrixXd b, double canonical_shift = 0.0);

    const Eigen::MatrixXd& a() const noexcept { return a_; }
    const Eigen::MatrixXd& b() const noexcept { return b_; }
    Index s() const noexcept { return a_.rows(); }
    Index l() const noexcept { return b_.rows(); }
    double canonical_shift() const noexcept { return shift_; }

    /// S x L matrix with entries a_ii + b_jj.
    Eigen::MatrixXd diag_effect() const;

    /// (A + cI, B - cI) with the shift accumulated.
    InfluencePair shifted(double c) const;

private:
    Eigen::MatrixXd a_;
    Eigen::MatrixXd b_;
    double shift_;
};

/// Equalizes the mean diagonals of A and B.
InfluencePair canonicalize(const InfluencePair& pair);

/// Sum of the p slices preceding t, as a flat slice.
Eigen::VectorXd lag_sum_flat(const TensorSeries& series, int p, Index t);

/// Sum of the p slices preceding t, viewed as its mode-1 unfolding.
Eigen::MatrixXd lag_sum(const TensorSeries& series, int p, Index t);

/// A^T X + Z B.
Eigen::MatrixXd blin_mean(const InfluencePair& pair, const Eigen::MatrixXd& x, const Eigen::MatrixXd& z);

/// Responses with their lag sums, one row per usable time index.
struct LaggedFrame {
    std::vector<Eigen::MatrixXd> y;
    std::vector<Eigen::MatrixXd> x;  // sum of the previous p_a slices
    std::vector<Eigen::MatrixXd> z;  // sum of the previous p_b slices
    std::vector<Index> times;
    /// p_a == p_b, so x and z coincide and the diagonal shift is unidentified.
    bool shared_lags = true;

    Index rows() const noexcept { return static_cast<Index>(y.size()); }
    Index s() const { return y.empty() ? 0 : y.front().rows(); }
    Index l() const { return y.empty() ? 0 : y.front().cols(); }
    double response_energy() const;
};

/// Frame over t = first, ..., T-1. `first` defaults to lags.p() and must not
/// be smaller.
LaggedFrame make_frame(const TensorSeries& series, const LagSpec& lags, Index first = -1);

/// Rows selected by position.
LaggedFrame subset(const LaggedFrame& frame, const std::vector<Index>& rows);

struct DesignSystem {
    Eigen::MatrixXd design;
    Eigen::VectorXd response;
};

/// Row-stacked [X_t^T (x) I_S, I_L (x) Z_t] and vec(Y_t) over usable t. The
/// coefficient vector is [vec(A^T); vec(B)].
DesignSystem build_design(const LaggedFrame& frame, double element_budget = kDefaultElementBudget);
DesignSystem build_design(const TensorSeries& series, const LagSpec& lags,
                          double element_budget = kDefaultElementBudget);

/// [vec(A^T); vec(B)].
Eigen::VectorXd pack_theta(const InfluencePair& pair);
InfluencePair unpack_theta(const Eigen::VectorXd& theta, Index s, Index l);

struct CompanionSystem {
    Eigen::MatrixXd theta1;
    Eigen::MatrixXd theta2;
    Eigen::MatrixXd f;
    double spectral_radius = 0.0;
};

CompanionSystem companion(const InfluencePair& pair, const LagSpec& lags);

bool is_stationary(const CompanionSystem& sys, double margin = 0.0);

}  // namespace blin
