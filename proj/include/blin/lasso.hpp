#pragma once

#include <vector>

#include <Eigen/Dense>

namespace blin {

/// Quadratic data for 0.5 * ||y - X b||^2 held in covariance form.
struct GramSystem {
    Eigen::MatrixXd gram;  // X^T X
    Eigen::VectorXd xty;   // X^T y
    double yty = 0.0;
};

struct LassoOptions {
    /// Stop once every KKT violation is below tol * max(lambda_max, 1).
    double tol = 1e-10;
    int max_sweeps = 20000;
};

struct LassoSolution {
    Eigen::VectorXd beta;
    int sweeps = 0;
    bool converged = false;
    /// Largest KKT violation, measured with a freshly computed gradient.
    double kkt_violation = 0.0;
};

/// Coordinate descent for 0.5 * ||y - X b||^2 + lambda * ||b||_1 in Gram form
/// with active-set sweeps. `warm` may be empty.
LassoSolution lasso_cd(const GramSystem& sys, double lambda, const Eigen::VectorXd& warm,
                       const LassoOptions& opts = {});

/// Smallest lambda at which the zero vector is optimal: max_j |x_j^T y|.
double lasso_lambda_max(const GramSystem& sys);

/// `count` log-spaced values from lambda_max down to min_ratio * lambda_max.
std::vector<double> lasso_lambda_grid(double lambda_max, int count, double min_ratio);

/// Largest KKT violation of beta at lambda.
double lasso_kkt_violation(const GramSystem& sys, const Eigen::VectorXd& beta, double lambda);

/// 0.5 * ||y - X b||^2 evaluated from the Gram form.
double gram_half_rss(const GramSystem& sys, const Eigen::VectorXd& beta);

}  // namespace blin
