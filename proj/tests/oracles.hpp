#pragma once

// Test-side reference computations. Everything here is written with plain
// index loops so it shares no code paths with the library.

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "blin/series.hpp"

namespace oracle {

inline std::vector<Eigen::MatrixXd> gaussian_slices(int t, Eigen::Index s, Eigen::Index l, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd;
    std::vector<Eigen::MatrixXd> out;
    for (int k = 0; k < t; ++k) {
        Eigen::MatrixXd m(s, l);
        for (Eigen::Index j = 0; j < l; ++j)
            for (Eigen::Index i = 0; i < s; ++i) m(i, j) = nd(gen);
        out.push_back(m);
    }
    return out;
}

inline Eigen::MatrixXd gaussian(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
    return gaussian_slices(1, r, c, seed).front();
}

inline blin::TensorSeries gaussian_series(int t, Eigen::Index s, Eigen::Index l, std::uint64_t seed) {
    return blin::TensorSeries::from_matrices(gaussian_slices(t, s, l, seed));
}

// Kronecker product by explicit enumeration.
inline Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            for (Eigen::Index k = 0; k < b.rows(); ++k)
                for (Eigen::Index m = 0; m < b.cols(); ++m) out(i * b.rows() + k, j * b.cols() + m) = a(i, j) * b(k, m);
    return out;
}

inline Eigen::VectorXd vec(const Eigen::MatrixXd& m) {
    Eigen::VectorXd v(m.size());
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) v(i + j * m.rows()) = m(i, j);
    return v;
}

// Sum of the p slices before t.
inline Eigen::MatrixXd lag_sum(const std::vector<Eigen::MatrixXd>& y, int p, int t) {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(y[0].rows(), y[0].cols());
    for (int k = 1; k <= p; ++k) acc += y[static_cast<std::size_t>(t - k)];
    return acc;
}

// Dense BLIN design [X^T (x) I, I (x) Z] and stacked response.
struct Dense {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
};

inline Dense blin_design(const std::vector<Eigen::MatrixXd>& y, int pa, int pb) {
    const Eigen::Index s = y[0].rows();
    const Eigen::Index l = y[0].cols();
    const int p = std::max(pa, pb);
    const int n = static_cast<int>(y.size()) - p;
    Dense d;
    d.x = Eigen::MatrixXd::Zero(n * s * l, s * s + l * l);
    d.y.resize(n * s * l);
    for (int r = 0; r < n; ++r) {
        const int t = p + r;
        const Eigen::MatrixXd x = lag_sum(y, pa, t);
        const Eigen::MatrixXd z = lag_sum(y, pb, t);
        d.x.block(r * s * l, 0, s * l, s * s) = kron(x.transpose(), Eigen::MatrixXd::Identity(s, s));
        d.x.block(r * s * l, s * s, s * l, l * l) = kron(Eigen::MatrixXd::Identity(l, l), z);
        d.y.segment(r * s * l, s * l) = vec(y[static_cast<std::size_t>(t)]);
    }
    return d;
}

// Minimum-norm least-squares fitted values via complete orthogonal decomposition.
inline Eigen::VectorXd min_norm_fitted(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(x);
    cod.setThreshold(1e-10);
    return x * cod.solve(y);
}

inline double rel_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const double den = std::max(b.norm(), 1e-300);
    return (a - b).norm() / den;
}

}  // namespace oracle

namespace oracle {

// y_t = A^T y_{t-1} + y_{t-1} B (+ noise), or A^T y_{t-1} B when bilinear.
inline std::vector<Eigen::MatrixXd> var_slices(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int t,
                                               std::uint64_t seed, double noise, bool bilinear = false) {
    const auto innov = gaussian_slices(t, a.rows(), b.rows(), seed);
    std::vector<Eigen::MatrixXd> y{innov[0]};
    for (int k = 1; k < t; ++k) {
        const Eigen::MatrixXd& prev = y.back();
        Eigen::MatrixXd next = bilinear ? Eigen::MatrixXd(a.transpose() * prev * b)
                                        : Eigen::MatrixXd(a.transpose() * prev + prev * b);
        y.push_back(next + noise * innov[static_cast<std::size_t>(k)]);
    }
    return y;
}

}  // namespace oracle

namespace oracle {

// Multi-index (column-major) of a linear offset.
inline std::vector<Eigen::Index> unravel(Eigen::Index lin, const std::vector<Eigen::Index>& dims) {
    std::vector<Eigen::Index> idx(dims.size());
    for (std::size_t k = 0; k < dims.size(); ++k) {
        idx[k] = lin % dims[k];
        lin /= dims[k];
    }
    return idx;
}

inline Eigen::Index ravel(const std::vector<Eigen::Index>& idx, const std::vector<Eigen::Index>& dims) {
    Eigen::Index lin = 0, stride = 1;
    for (std::size_t k = 0; k < dims.size(); ++k) {
        lin += idx[k] * stride;
        stride *= dims[k];
    }
    return lin;
}

// Dense K-mode design: the column for B_k(c, r) holds X^(k) with mode k moved
// from c to r (zero elsewhere). Rows stack vec(Y_t) over usable t.
inline Dense multi_design(const std::vector<Eigen::VectorXd>& y, const std::vector<Eigen::Index>& dims,
                          const std::vector<int>& lags) {
    const int p = *std::max_element(lags.begin(), lags.end());
    Eigen::Index n = 1, params = 0;
    for (auto d : dims) {
        n *= d;
        params += d * d;
    }
    const int rows = static_cast<int>(y.size()) - p;
    Dense out;
    out.x = Eigen::MatrixXd::Zero(rows * n, params);
    out.y.resize(rows * n);
    for (int r = 0; r < rows; ++r) {
        const int t = p + r;
        out.y.segment(r * n, n) = y[static_cast<std::size_t>(t)];
        Eigen::Index col0 = 0;
        for (std::size_t k = 0; k < dims.size(); ++k) {
            Eigen::VectorXd xk = Eigen::VectorXd::Zero(n);
            for (int l = 1; l <= lags[k]; ++l) xk += y[static_cast<std::size_t>(t - l)];
            for (Eigen::Index lin = 0; lin < n; ++lin) {
                auto idx = unravel(lin, dims);
                const Eigen::Index row_mode = idx[k];
                for (Eigen::Index c = 0; c < dims[k]; ++c) {
                    idx[k] = c;
                    out.x(r * n + lin, col0 + c + dims[k] * row_mode) = xk(ravel(idx, dims));
                }
            }
            col0 += dims[k] * dims[k];
        }
    }
    return out;
}

}  // namespace oracle
