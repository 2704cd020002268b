#include "blin/lasso.hpp"

#include <algorithm>
#include <cmath>

#include "blin/error.hpp"

namespace blin {

namespace {

double soft_threshold(double z, double lambda) {
    if (z > lambda) return z - lambda;
    if (z < -lambda) return z + lambda;
    return 0.0;
}

// Coordinate update keeping grad = X^T (y - X beta) in sync.
double update(const GramSystem& sys, double lambda, Eigen::Index j, Eigen::VectorXd& beta, Eigen::VectorXd& grad) {
    const double gjj = sys.gram(j, j);
    if (gjj <= 0.0) {
        if (beta(j) != 0.0) {
            grad.noalias() += sys.gram.col(j) * beta(j);
            beta(j) = 0.0;
        }
        return 0.0;
    }
    const double old = beta(j);
    const double next = soft_threshold(grad(j) + gjj * old, lambda) / gjj;
    const double delta = next - old;
    if (delta != 0.0) {
        beta(j) = next;
        grad.noalias() -= sys.gram.col(j) * delta;
    }
    return std::abs(delta) * gjj;
}

double violation(double g, double b, double lambda) {
    if (b > 0.0) return std::abs(g - lambda);
    if (b < 0.0) return std::abs(g + lambda);
    return std::max(std::abs(g) - lambda, 0.0);
}

}  // namespace

double lasso_lambda_max(const GramSystem& sys) {
    return sys.xty.size() ? sys.xty.cwiseAbs().maxCoeff() : 0.0;
}

std::vector<double> lasso_lambda_grid(double lambda_max, int count, double min_ratio) {
    if (count < 1) fail(ErrorCode::invalid_argument, "lambda grid needs at least one point");
    if (!(min_ratio > 0.0 && min_ratio <= 1.0)) fail(ErrorCode::invalid_argument, "lambda ratio must be in (0, 1]");
    std::vector<double> grid(static_cast<std::size_t>(count));
    if (count == 1) {
        grid[0] = lambda_max;
        return grid;
    }
    const double step = std::log(min_ratio) / (count - 1);
    for (int k = 0; k < count; ++k) grid[static_cast<std::size_t>(k)] = lambda_max * std::exp(step * k);
    return grid;
}

double lasso_kkt_violation(const GramSystem& sys, const Eigen::VectorXd& beta, double lambda) {
    const Eigen::VectorXd grad = sys.xty - sys.gram * beta;
    double worst = 0.0;
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
        if (sys.gram(j, j) <= 0.0) continue;
        worst = std::max(worst, violation(grad(j), beta(j), lambda));
    }
    return worst;
}

double gram_half_rss(const GramSystem& sys, const Eigen::VectorXd& beta) {
    return 0.5 * (sys.yty - 2.0 * beta.dot(sys.xty) + beta.dot(sys.gram * beta));
}

LassoSolution lasso_cd(const GramSystem& sys, double lambda, const Eigen::VectorXd& warm, const LassoOptions& opts) {
    const Eigen::Index n = sys.xty.size();
    if (sys.gram.rows() != n || sys.gram.cols() != n) fail(ErrorCode::shape, "Gram matrix does not match X^T y");
    if (!(lambda >= 0.0)) fail(ErrorCode::invalid_argument, "lambda must be >= 0");
    LassoSolution out;
    out.beta = warm.size() == n ? warm : Eigen::VectorXd::Zero(n);
    const double tol = opts.tol * std::max(lasso_lambda_max(sys), 1.0);

    // At or above lambda_max (up to rounding in how x^T y was accumulated) zero is optimal.
    if (lambda >= lasso_lambda_max(sys) * (1.0 - 1e-12)) {
        out.beta.setZero();
        out.converged = true;
        out.kkt_violation = lasso_kkt_violation(sys, out.beta, lambda);
        return out;
    }

    Eigen::VectorXd grad = sys.xty - sys.gram * out.beta;
    std::vector<Eigen::Index> active;
    while (out.sweeps < opts.max_sweeps) {
        ++out.sweeps;
        for (Eigen::Index j = 0; j < n; ++j) update(sys, lambda, j, out.beta, grad);

        active.clear();
        for (Eigen::Index j = 0; j < n; ++j)
            if (out.beta(j) != 0.0) active.push_back(j);
        while (out.sweeps < opts.max_sweeps) {
            ++out.sweeps;
            double change = 0.0;
            for (Eigen::Index j : active) change = std::max(change, update(sys, lambda, j, out.beta, grad));
            if (change <= tol) break;
        }

        grad = sys.xty - sys.gram * out.beta;
        double worst = 0.0;
        for (Eigen::Index j = 0; j < n; ++j)
            if (sys.gram(j, j) > 0.0) worst = std::max(worst, violation(grad(j), out.beta(j), lambda));
        out.kkt_violation = worst;
        if (worst <= tol) {
            out.converged = true;
            break;
        }
    }
    return out;
}

}  // namespace blin
