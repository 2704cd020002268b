#pragma once

#include <vector>

#include <Eigen/Dense>

#include "blin/series.hpp"

namespace blin {

// Multiway arrays are stored flat in column-major order over their mode sizes.
//
// The mode-k unfolding is the m_k x (prod_{j != k} m_j) matrix whose columns
// enumerate the remaining modes fastest-first in their original order. With
// that convention the Tucker identity reads
//   (X x {C_1, ..., C_K})_(k) = C_k X_(k) (C_K (x) ... (x) C_{k+1} (x) C_{k-1} (x) ... (x) C_1)^T.

Eigen::MatrixXd mode_matricize(const Eigen::VectorXd& array, const std::vector<Index>& dims, Index mode);

/// Inverse of mode_matricize.
Eigen::VectorXd fold(const Eigen::MatrixXd& unfolding, const std::vector<Index>& dims, Index mode);

/// Mode-k product X x_k M: every mode-k fiber is multiplied by M. The result
/// has M.rows() entries along mode k.
Eigen::VectorXd mode_product(const Eigen::VectorXd& array, const std::vector<Index>& dims, Index mode,
                             const Eigen::MatrixXd& m);

/// Full Tucker product X x {C_1, ..., C_K}.
Eigen::VectorXd tucker_product(const Eigen::VectorXd& array, const std::vector<Index>& dims,
                               const std::vector<Eigen::MatrixXd>& factors);

Index element_count(const std::vector<Index>& dims);

}  // namespace blin
