#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "blin/core.hpp"
#include "blin/series.hpp"

namespace blin {

enum class Generator { blin, bilinear };

const char* generator_name(Generator g) noexcept;
Generator parse_generator(const std::string& name);

struct SimulationSpec {
    Generator generator = Generator::blin;
    Index s = 10;
    Index l = 10;
    double q_sparsity = 0.9;
    double target_r2 = 0.75;
    Index horizon = 50;
    /// Defaults to max(100 - T, 50).
    std::optional<Index> burn_in;
    std::uint64_t seed = 0;
    /// Regression mode: X_t drawn i.i.d. standard normal instead of lagged Y.
    bool iid_regressor = false;

    void validate() const;
    Index effective_burn_in() const;
};

// Random streams: the influence pair of a seed draws from Rng(seed, 0) and
// replication r of a series draws from Rng(seed, r + 1).

/// Rank-1 networks u v^T and r s^T with zero diagonals and the smallest
/// floor(q * (n^2 - n)) off-diagonal magnitudes set to zero.
InfluencePair make_influence_pair(Index s, Index l, double q_sparsity, std::uint64_t seed);

/// Lag-1 VAR matrix acting on vec(Y): I (x) A^T + B^T (x) I for BLIN,
/// B^T (x) A^T for bilinear.
Eigen::MatrixXd var_matrix(const InfluencePair& pair, Generator g);

/// Spectral radius of var_matrix(pair, g) from the eigenvalues of A and B:
/// max |lambda_i + mu_j| for BLIN, max |lambda_i mu_j| for bilinear.
double var_spectral_radius(const InfluencePair& pair, Generator g);

/// E[y y^T] of y_t = Theta y_{t-1} + e_t with standard-normal e_t.
Eigen::MatrixXd stationary_covariance(const Eigen::MatrixXd& theta);

/// tr(Theta Theta^T Sigma) / (tr(Theta Theta^T Sigma) + n).
double large_sample_r2(const Eigen::MatrixXd& theta);

struct Calibration {
    double scale = 0.0;
    double r2 = 0.0;
    /// Maximum scale keeping Theta stationary.
    double scale_limit = 0.0;
    InfluencePair pair{Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Zero(1, 1)};
};

/// Scale k applied to both networks (Theta = k Theta_0 for BLIN, k^2 Theta_0
/// for bilinear) so that the large-sample R^2 hits spec.target_r2 within 0.005.
Calibration calibrate_snr(const SimulationSpec& spec, const InfluencePair& pair0);

/// VAR run from y_0 = 0 through burn_in + T steps; the last T slices.
TensorSeries generate(const SimulationSpec& spec, const InfluencePair& pair, std::uint64_t replication = 0);

/// Regression-mode data: X_t i.i.d. standard normal, Y_t = mean(X_t) + E_t,
/// with X_t serving as both regressors.
LaggedFrame generate_iid(const SimulationSpec& spec, const InfluencePair& pair, std::uint64_t replication = 0);

/// Calibrated pair of a spec followed by `generate`.
TensorSeries simulate(const SimulationSpec& spec, std::uint64_t replication = 0);

/// y_t = sum_k (sum of the previous p_k slices) x_k B_k^T + e_t from zero,
/// keeping the last `horizon` slices.
TensorSeries generate_multi(const std::vector<Eigen::MatrixXd>& networks, const std::vector<int>& lags,
                            Index horizon, Index burn_in, std::uint64_t seed, std::uint64_t replication = 0);

enum class Direction { bilinear_to_blin, blin_to_bilinear };

/// Multipliers relating off-diagonals across the two models under Kronecker
/// regressor covariance Omega (L x L) (x) Psi (S x S). For bilinear_to_blin
/// `pair` holds the bilinear truth and the result is
/// (tr(Omega B) / tr(Omega), tr(Psi A) / tr(Psi)). For blin_to_bilinear it
/// holds the bilinear pseudo-true pair and the result is
/// (tr(Omega B) / tr(Omega B B^T), tr(Psi A) / tr(Psi A A^T)).
std::pair<double, double> pseudo_true_offdiag_constant(const InfluencePair& pair, const Eigen::MatrixXd& omega,
                                                       const Eigen::MatrixXd& psi, Direction direction);

}  // namespace blin
