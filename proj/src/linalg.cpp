#include "blin/linalg.hpp"

#include <Eigen/Eigenvalues>

#include "blin/error.hpp"

namespace blin::linalg {

SymmetricPinv pinv_symmetric(const Eigen::MatrixXd& h, double rel_tol) {
    if (h.rows() != h.cols()) fail(ErrorCode::shape, "pseudo-inverse needs a square matrix");
    SymmetricPinv out;
    const Eigen::Index n = h.rows();
    if (n == 0) {
        out.inverse.resize(0, 0);
        out.full_rank = true;
        return out;
    }
    const Eigen::MatrixXd sym = 0.5 * (h + h.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    if (es.info() != Eigen::Success) fail(ErrorCode::internal, "symmetric eigen decomposition failed");
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double top = ev.cwiseAbs().maxCoeff();
    const double cut = rel_tol * top;
    Eigen::VectorXd inv_ev = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (top > 0.0 && ev(i) > cut) {
            inv_ev(i) = 1.0 / ev(i);
            ++out.rank;
        }
    }
    const Eigen::MatrixXd& q = es.eigenvectors();
    out.inverse = q * inv_ev.asDiagonal() * q.transpose();
    out.full_rank = out.rank == n;
    return out;
}

Eigen::MatrixXd gram_inverse(const Eigen::MatrixXd& gram, const std::string& what,
                             std::vector<std::string>* warnings) {
    SymmetricPinv p = pinv_symmetric(gram);
    if (!p.full_rank && warnings)
        warnings->push_back(what + " is singular (rank " + std::to_string(p.rank) + " of " +
                            std::to_string(gram.rows()) + "); using the pseudo-inverse");
    return std::move(p.inverse);
}

double spectral_radius(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) fail(ErrorCode::shape, "spectral radius needs a square matrix");
    if (m.size() == 0) return 0.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(m, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success) fail(ErrorCode::internal, "eigenvalue computation failed");
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

Eigen::Index numerical_rank(const Eigen::MatrixXd& m, double rel_tol) {
    if (m.size() == 0) return 0;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
    const Eigen::VectorXd& s = svd.singularValues();
    if (s.size() == 0 || s(0) <= 0.0) return 0;
    return (s.array() > rel_tol * s(0)).count();
}

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index j = 0; j < a.cols(); ++j)
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

}  // namespace blin::linalg
