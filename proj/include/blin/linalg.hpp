#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace blin::linalg {

/// Relative singular-value cutoff used for generalized inverses and ranks.
inline constexpr double kRankTolerance = 1e-10;

struct SymmetricPinv {
    Eigen::MatrixXd inverse;
    Eigen::Index rank = 0;
    bool full_rank = false;
};

/// Moore-Penrose inverse of a symmetric positive semidefinite matrix. Eigen
/// values at or below rel_tol * max eigenvalue are treated as zero.
SymmetricPinv pinv_symmetric(const Eigen::MatrixXd& h, double rel_tol = kRankTolerance);

/// Inverse of a symmetric PSD Gram matrix, falling back to the pseudo-inverse
/// when it is singular. The fallback appends a message naming `what` to
/// `warnings` (when provided).
Eigen::MatrixXd gram_inverse(const Eigen::MatrixXd& gram, const std::string& what,
                             std::vector<std::string>* warnings);

/// Largest eigenvalue modulus of a general square matrix.
double spectral_radius(const Eigen::MatrixXd& m);

/// Number of singular values above rel_tol * sigma_max.
Eigen::Index numerical_rank(const Eigen::MatrixXd& m, double rel_tol = kRankTolerance);

/// Kronecker product a (x) b.
Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Column-major vectorization.
inline Eigen::VectorXd vec(const Eigen::MatrixXd& m) {
    return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
}

inline Eigen::MatrixXd unvec(const Eigen::VectorXd& v, Eigen::Index rows, Eigen::Index cols) {
    return Eigen::Map<const Eigen::MatrixXd>(v.data(), rows, cols);
}

}  // namespace blin::linalg
