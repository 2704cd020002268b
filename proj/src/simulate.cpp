#include "blin/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "blin/error.hpp"
#include "blin/linalg.hpp"
#include "blin/multiway.hpp"
#include "blin/rng.hpp"
#include "blin/tensor.hpp"

namespace blin {

const char* generator_name(Generator g) noexcept {
    return g == Generator::blin ? "blin" : "bilinear";
}

Generator parse_generator(const std::string& name) {
    if (name == "blin") return Generator::blin;
    if (name == "bilinear") return Generator::bilinear;
    fail(ErrorCode::invalid_argument, "unknown generator '" + name + "' (expected blin or bilinear)");
}

void SimulationSpec::validate() const {
    if (s < 1 || l < 1) fail(ErrorCode::invalid_argument, "dimensions must be positive");
    if (!(q_sparsity >= 0.0 && q_sparsity < 1.0)) fail(ErrorCode::invalid_argument, "q must lie in [0, 1)");
    if (!(target_r2 > 0.0 && target_r2 < 1.0)) fail(ErrorCode::invalid_argument, "target R^2 must lie in (0, 1)");
    if (horizon < 1) fail(ErrorCode::invalid_argument, "horizon must be positive");
    if (burn_in && *burn_in < 0) fail(ErrorCode::invalid_argument, "burn-in must be nonnegative");
}

Index SimulationSpec::effective_burn_in() const {
    return burn_in ? *burn_in : std::max<Index>(100 - horizon, 50);
}

namespace {

Eigen::MatrixXd sparse_rank_one(Rng& rng, Index n, double q) {
    const Eigen::VectorXd u = rng.normal_vector(n);
    const Eigen::VectorXd v = rng.normal_vector(n);
    Eigen::MatrixXd m = u * v.transpose();
    m.diagonal().setZero();
    std::vector<Index> off;
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < n; ++i)
            if (i != j) off.push_back(i + n * j);
    const auto drop = static_cast<std::size_t>(std::floor(q * static_cast<double>(off.size()) + 1e-9));
    std::stable_sort(off.begin(), off.end(),
                     [&](Index a, Index b) { return std::abs(m(a)) < std::abs(m(b)); });
    for (std::size_t k = 0; k < drop; ++k) m(off[k]) = 0.0;
    return m;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

void require_square(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) fail(ErrorCode::shape, "VAR matrix must be square");
}

Eigen::MatrixXd lyapunov_direct(const Eigen::MatrixXd& theta) {
    const Index n = theta.rows();
    const Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(n * n, n * n) - linalg::kron(theta, theta);
    const Eigen::VectorXd rhs = linalg::vec(Eigen::MatrixXd::Identity(n, n));
    return linalg::unvec(lhs.partialPivLu().solve(rhs), n, n);
}

// Sigma = sum_k Theta^k Theta^kT accumulated by squaring.
Eigen::MatrixXd lyapunov_doubling(const Eigen::MatrixXd& theta) {
    const Index n = theta.rows();
    Eigen::MatrixXd a = theta;
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(n, n);
    for (int it = 0; it < 200; ++it) {
        const Eigen::MatrixXd add = a * sigma * a.transpose();
        sigma += add;
        if (!sigma.allFinite()) break;
        if (add.cwiseAbs().maxCoeff() <= 1e-16 * sigma.cwiseAbs().maxCoeff()) return 0.5 * (sigma + sigma.transpose());
        a = a * a;
    }
    fail(ErrorCode::non_stationary,
         "VAR matrix is not stationary (spectral radius " + fmt(linalg::spectral_radius(theta)) + ")");
}

Eigen::MatrixXd scaled_theta(const Eigen::MatrixXd& theta0, Generator g, double k) {
    return g == Generator::blin ? Eigen::MatrixXd(k * theta0) : Eigen::MatrixXd(k * k * theta0);
}

}  // namespace

InfluencePair make_influence_pair(Index s, Index l, double q_sparsity, std::uint64_t seed) {
    if (s < 2 || l < 2) fail(ErrorCode::invalid_argument, "influence networks need dimensions >= 2");
    if (!(q_sparsity >= 0.0 && q_sparsity < 1.0)) fail(ErrorCode::invalid_argument, "q must lie in [0, 1)");
    Rng rng(seed, 0);
    Eigen::MatrixXd a = sparse_rank_one(rng, s, q_sparsity);
    Eigen::MatrixXd b = sparse_rank_one(rng, l, q_sparsity);
    return InfluencePair(std::move(a), std::move(b));
}

Eigen::MatrixXd var_matrix(const InfluencePair& pair, Generator g) {
    const Eigen::MatrixXd is = Eigen::MatrixXd::Identity(pair.s(), pair.s());
    const Eigen::MatrixXd il = Eigen::MatrixXd::Identity(pair.l(), pair.l());
    if (g == Generator::bilinear) return linalg::kron(pair.b().transpose(), pair.a().transpose());
    return linalg::kron(il, pair.a().transpose()) + linalg::kron(pair.b().transpose(), is);
}

double var_spectral_radius(const InfluencePair& pair, Generator g) {
    Eigen::EigenSolver<Eigen::MatrixXd> ea(pair.a(), false), eb(pair.b(), false);
    if (ea.info() != Eigen::Success || eb.info() != Eigen::Success)
        fail(ErrorCode::internal, "eigenvalue computation failed");
    double rho = 0.0;
    for (Index i = 0; i < pair.s(); ++i)
        for (Index j = 0; j < pair.l(); ++j) {
            const auto li = ea.eigenvalues()(i), mj = eb.eigenvalues()(j);
            rho = std::max(rho, std::abs(g == Generator::blin ? li + mj : li * mj));
        }
    return rho;
}

// Eigenvalues of defective (e.g. nilpotent) matrices are unreliable, so
// stationarity is decided by whether the doubling sum converges.
Eigen::MatrixXd stationary_covariance(const Eigen::MatrixXd& theta) {
    require_square(theta);
    Eigen::MatrixXd sigma = lyapunov_doubling(theta);
    if (theta.rows() <= 30) sigma = lyapunov_direct(theta);
    return sigma;
}

double large_sample_r2(const Eigen::MatrixXd& theta) {
    const Eigen::MatrixXd sigma = stationary_covariance(theta);
    const double g = (theta * sigma * theta.transpose()).trace();
    return g / (g + static_cast<double>(theta.rows()));
}

Calibration calibrate_snr(const SimulationSpec& spec, const InfluencePair& pair0) {
    spec.validate();
    const Eigen::MatrixXd theta0 = var_matrix(pair0, spec.generator);
    const double rho0 = var_spectral_radius(pair0, spec.generator);
    auto r2_at = [&](double k) { return large_sample_r2(scaled_theta(theta0, spec.generator, k)); };

    Calibration out;
    double hi;
    if (rho0 > 1e-6 * std::max(theta0.norm(), 1e-300)) {
        out.scale_limit = spec.generator == Generator::blin ? 1.0 / rho0 : 1.0 / std::sqrt(rho0);
        hi = out.scale_limit * (1.0 - 1e-6);
    } else {
        // Nilpotent Theta (zero spectral radius up to rounding): every scale is stationary.
        out.scale_limit = std::numeric_limits<double>::infinity();
        hi = 1.0;
        while (r2_at(hi) < spec.target_r2 && hi < 1e6) hi *= 2.0;
    }
    const double best = r2_at(hi);
    if (best < spec.target_r2)
        fail(ErrorCode::unreachable_target, "target R^2 " + fmt(spec.target_r2) +
                                                " is unreachable while stationary; maximum achievable R^2 is " +
                                                fmt(best));
    double lo = 0.0;
    const double resolution = 1e-4 * hi;
    double mid = 0.5 * (lo + hi);
    double r2 = r2_at(mid);
    for (int it = 0; it < 200; ++it) {
        if (hi - lo <= resolution && std::abs(r2 - spec.target_r2) <= 0.005) break;
        if (r2 < spec.target_r2)
            lo = mid;
        else
            hi = mid;
        mid = 0.5 * (lo + hi);
        r2 = r2_at(mid);
    }
    if (std::abs(r2 - spec.target_r2) > 0.005)
        fail(ErrorCode::unreachable_target, "calibration did not reach the target R^2");
    out.scale = mid;
    out.r2 = r2;
    out.pair = InfluencePair(mid * pair0.a(), mid * pair0.b());
    return out;
}

TensorSeries generate(const SimulationSpec& spec, const InfluencePair& pair, std::uint64_t replication) {
    spec.validate();
    if (pair.s() != spec.s || pair.l() != spec.l) fail(ErrorCode::shape, "influence pair does not match the spec");
    const double rho = var_spectral_radius(pair, spec.generator);
    if (!(rho < 1.0)) fail(ErrorCode::non_stationary, "VAR matrix has spectral radius " + fmt(rho) + " >= 1");

    Rng rng(spec.seed, replication + 1);
    const Index burn = spec.effective_burn_in();
    const Eigen::MatrixXd at = pair.a().transpose();
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(spec.s, spec.l);
    std::vector<Eigen::VectorXd> keep;
    keep.reserve(static_cast<std::size_t>(spec.horizon));
    for (Index t = 0; t < burn + spec.horizon; ++t) {
        Eigen::MatrixXd next = rng.normal_matrix(spec.s, spec.l);
        if (spec.generator == Generator::blin)
            next.noalias() += at * y + y * pair.b();
        else
            next.noalias() += at * y * pair.b();
        y = std::move(next);
        if (t >= burn) keep.push_back(linalg::vec(y));
    }
    return TensorSeries({spec.s, spec.l}, std::move(keep));
}

LaggedFrame generate_iid(const SimulationSpec& spec, const InfluencePair& pair, std::uint64_t replication) {
    spec.validate();
    if (pair.s() != spec.s || pair.l() != spec.l) fail(ErrorCode::shape, "influence pair does not match the spec");
    Rng rng(spec.seed, replication + 1);
    const Eigen::MatrixXd at = pair.a().transpose();
    LaggedFrame f;
    f.shared_lags = true;
    for (Index t = 0; t < spec.horizon; ++t) {
        Eigen::MatrixXd x = rng.normal_matrix(spec.s, spec.l);
        Eigen::MatrixXd y = rng.normal_matrix(spec.s, spec.l);
        if (spec.generator == Generator::blin)
            y.noalias() += at * x + x * pair.b();
        else
            y.noalias() += at * x * pair.b();
        f.y.push_back(std::move(y));
        f.z.push_back(x);
        f.x.push_back(std::move(x));
        f.times.push_back(t);
    }
    return f;
}

TensorSeries simulate(const SimulationSpec& spec, std::uint64_t replication) {
    const auto cal = calibrate_snr(spec, make_influence_pair(spec.s, spec.l, spec.q_sparsity, spec.seed));
    return generate(spec, cal.pair, replication);
}

TensorSeries generate_multi(const std::vector<Eigen::MatrixXd>& networks, const std::vector<int>& lags,
                            Index horizon, Index burn_in, std::uint64_t seed, std::uint64_t replication) {
    if (networks.size() != lags.size() || networks.size() < 2)
        fail(ErrorCode::shape, "one lag per network and at least two modes are required");
    if (horizon < 1 || burn_in < 0) fail(ErrorCode::invalid_argument, "horizon must be positive");
    const auto sys = multi_companion(networks, lags);
    if (!is_stationary(sys))
        fail(ErrorCode::non_stationary, "companion matrix has spectral radius " + fmt(sys.spectral_radius) + " >= 1");
    std::vector<Index> dims;
    for (const auto& b : networks) dims.push_back(b.rows());
    const Index n = element_count(dims);
    const int p = *std::max_element(lags.begin(), lags.end());

    Rng rng(seed, replication + 1);
    std::vector<Eigen::VectorXd> hist(static_cast<std::size_t>(p), Eigen::VectorXd::Zero(n));
    std::vector<Eigen::VectorXd> keep;
    for (Index t = 0; t < burn_in + horizon; ++t) {
        Eigen::VectorXd next = rng.normal_vector(n);
        for (std::size_t k = 0; k < networks.size(); ++k) {
            Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
            for (int l = 1; l <= lags[k]; ++l) x += hist[hist.size() - static_cast<std::size_t>(l)];
            next += mode_product(x, dims, static_cast<Index>(k), networks[k].transpose());
        }
        hist.erase(hist.begin());
        hist.push_back(next);
        if (t >= burn_in) keep.push_back(std::move(next));
    }
    return TensorSeries(dims, std::move(keep));
}

std::pair<double, double> pseudo_true_offdiag_constant(const InfluencePair& pair, const Eigen::MatrixXd& omega,
                                                       const Eigen::MatrixXd& psi, Direction direction) {
    if (omega.rows() != pair.l() || omega.cols() != pair.l() || psi.rows() != pair.s() || psi.cols() != pair.s())
        fail(ErrorCode::shape, "Omega must be L x L and Psi S x S");
    double num_b, den_b, num_a, den_a;
    if (direction == Direction::bilinear_to_blin) {
        num_b = (omega * pair.b()).trace();
        den_b = omega.trace();
        num_a = (psi * pair.a()).trace();
        den_a = psi.trace();
    } else {
        num_b = (omega * pair.b()).trace();
        den_b = (omega * pair.b() * pair.b().transpose()).trace();
        num_a = (psi * pair.a()).trace();
        den_a = (psi * pair.a() * pair.a().transpose()).trace();
    }
    if (den_a == 0.0 || den_b == 0.0) fail(ErrorCode::degenerate, "zero trace in the pseudo-true constant");
    return {num_b / den_b, num_a / den_a};
}

}  // namespace blin
