#include "blin/multiway.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "blin/error.hpp"
#include "blin/linalg.hpp"
#include "blin/tensor.hpp"

namespace blin {

TensorSeries difference(const TensorSeries& series) {
    if (series.horizon() < 2) fail(ErrorCode::insufficient_data, "differencing needs at least two time slices");
    std::vector<Eigen::VectorXd> out;
    out.reserve(static_cast<std::size_t>(series.horizon() - 1));
    for (Index t = 1; t < series.horizon(); ++t) out.push_back(series.slice(t) - series.slice(t - 1));
    return TensorSeries(series.dims(), std::move(out), series.labels());
}

double MultiFrame::response_energy() const {
    double e = 0.0;
    for (const auto& v : y) e += v.squaredNorm();
    return e;
}

MultiFrame make_multi_frame(const TensorSeries& series, const LagSpec& lags, Index first) {
    if (lags.modes() != series.modes())
        fail(ErrorCode::invalid_argument, "need one lag per mode (" + std::to_string(series.modes()) + ")");
    if (first < 0) first = lags.p();
    if (first < lags.p()) fail(ErrorCode::invalid_argument, "frame start precedes the largest lag");
    if (series.horizon() <= first)
        fail(ErrorCode::insufficient_data, "horizon " + std::to_string(series.horizon()) +
                                               " leaves no usable responses after " + std::to_string(first) +
                                               " initial lags");
    MultiFrame f;
    f.dims = series.dims();
    f.lags = lags.per_mode();
    f.x.resize(f.dims.size());
    for (Index t = first; t < series.horizon(); ++t) {
        f.y.push_back(series.slice(t));
        std::map<int, Eigen::VectorXd> by_lag;
        for (std::size_t k = 0; k < f.dims.size(); ++k) {
            const int p = f.lags[k];
            auto it = by_lag.find(p);
            if (it == by_lag.end()) it = by_lag.emplace(p, lag_sum_flat(series, p, t)).first;
            f.x[k].push_back(it->second);
        }
        f.times.push_back(t);
    }
    return f;
}

MultiFrame subset(const MultiFrame& frame, const std::vector<Index>& rows) {
    MultiFrame out;
    out.dims = frame.dims;
    out.lags = frame.lags;
    out.x.resize(frame.x.size());
    for (Index r : rows) {
        if (r < 0 || r >= frame.rows()) fail(ErrorCode::index, "frame row out of range");
        const auto i = static_cast<std::size_t>(r);
        out.y.push_back(frame.y[i]);
        for (std::size_t k = 0; k < frame.x.size(); ++k) out.x[k].push_back(frame.x[k][i]);
        out.times.push_back(frame.times[i]);
    }
    return out;
}

Eigen::VectorXd multi_mean(const std::vector<Eigen::MatrixXd>& networks, const std::vector<Index>& dims,
                           const std::vector<Eigen::VectorXd>& regressors) {
    if (networks.size() != dims.size() || regressors.size() != dims.size())
        fail(ErrorCode::shape, "need one network and one regressor per mode");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(element_count(dims));
    for (std::size_t k = 0; k < dims.size(); ++k) {
        if (networks[k].rows() != dims[k] || networks[k].cols() != dims[k])
            fail(ErrorCode::shape, "network " + std::to_string(k) + " does not match its mode size");
        out += mode_product(regressors[k], dims, static_cast<Index>(k), networks[k].transpose());
    }
    return out;
}

double multi_criterion(const MultiFrame& frame, const std::vector<Eigen::MatrixXd>& networks) {
    double q = 0.0;
    std::vector<Eigen::VectorXd> regs(frame.dims.size());
    for (Index r = 0; r < frame.rows(); ++r) {
        const auto i = static_cast<std::size_t>(r);
        for (std::size_t k = 0; k < regs.size(); ++k) regs[k] = frame.x[k][i];
        q += (frame.y[i] - multi_mean(networks, frame.dims, regs)).squaredNorm();
    }
    return q;
}

namespace {

// Index maps placing modes (j, k) first: row i_j + m_j i_k, column over the
// remaining modes fastest-first.
struct PairLayout {
    std::vector<Index> row, col;
    Index rows = 0, cols = 0;
};

PairLayout pair_layout(const std::vector<Index>& dims, std::size_t j, std::size_t k) {
    PairLayout p;
    const Index n = element_count(dims);
    p.rows = dims[j] * dims[k];
    p.cols = n / p.rows;
    p.row.resize(static_cast<std::size_t>(n));
    p.col.resize(static_cast<std::size_t>(n));
    std::vector<Index> idx(dims.size(), 0);
    for (Index lin = 0; lin < n; ++lin) {
        Index c = 0, stride = 1;
        for (std::size_t m = 0; m < dims.size(); ++m) {
            if (m == j || m == k) continue;
            c += idx[m] * stride;
            stride *= dims[m];
        }
        p.row[static_cast<std::size_t>(lin)] = idx[j] + dims[j] * idx[k];
        p.col[static_cast<std::size_t>(lin)] = c;
        for (std::size_t m = 0; m < dims.size(); ++m) {
            if (++idx[m] < dims[m]) break;
            idx[m] = 0;
        }
    }
    return p;
}

std::vector<Index> offsets(const std::vector<Index>& dims) {
    std::vector<Index> off(dims.size() + 1, 0);
    for (std::size_t k = 0; k < dims.size(); ++k) off[k + 1] = off[k] + dims[k] * dims[k];
    return off;
}

}  // namespace

GramSystem multi_normal_equations(const MultiFrame& frame) {
    if (frame.rows() < 1) fail(ErrorCode::insufficient_data, "no usable responses to fit");
    const auto& dims = frame.dims;
    const std::size_t modes = dims.size();
    const std::vector<Index> off = offsets(dims);
    GramSystem sys;
    sys.gram = Eigen::MatrixXd::Zero(off.back(), off.back());
    sys.xty.resize(off.back());
    sys.yty = frame.response_energy();

    for (std::size_t k = 0; k < modes; ++k) {
        const Index m = dims[k];
        Eigen::MatrixXd g = Eigen::MatrixXd::Zero(m, m);
        Eigen::MatrixXd xy = Eigen::MatrixXd::Zero(m, m);
        for (Index r = 0; r < frame.rows(); ++r) {
            const auto i = static_cast<std::size_t>(r);
            const Eigen::MatrixXd xu = mode_matricize(frame.x[k][i], dims, static_cast<Index>(k));
            g.noalias() += xu * xu.transpose();
            xy.noalias() += xu * mode_matricize(frame.y[i], dims, static_cast<Index>(k)).transpose();
        }
        for (Index r = 0; r < m; ++r) sys.gram.block(off[k] + r * m, off[k] + r * m, m, m) = g;
        sys.xty.segment(off[k], m * m) = linalg::vec(xy);
    }

    for (std::size_t j = 0; j < modes; ++j) {
        for (std::size_t k = j + 1; k < modes; ++k) {
            const PairLayout lay = pair_layout(dims, j, k);
            const Index n = frame.rows();
            Eigen::MatrixXd p(lay.rows, lay.cols * n), q(lay.rows, lay.cols * n);
            for (Index r = 0; r < n; ++r) {
                const auto i = static_cast<std::size_t>(r);
                const Eigen::VectorXd& xj = frame.x[j][i];
                const Eigen::VectorXd& xk = frame.x[k][i];
                for (std::size_t lin = 0; lin < lay.row.size(); ++lin) {
                    p(lay.row[lin], r * lay.cols + lay.col[lin]) = xj(static_cast<Index>(lin));
                    q(lay.row[lin], r * lay.cols + lay.col[lin]) = xk(static_cast<Index>(lin));
                }
            }
            const Eigen::MatrixXd mm = p * q.transpose();
            const Index mj = dims[j], mk = dims[k];
            for (Index rp = 0; rp < mk; ++rp)
                for (Index cp = 0; cp < mk; ++cp)
                    for (Index r = 0; r < mj; ++r)
                        for (Index c = 0; c < mj; ++c) {
                            const double v = mm(c + mj * rp, r + mj * cp);
                            sys.gram(off[j] + c + mj * r, off[k] + cp + mk * rp) = v;
                            sys.gram(off[k] + cp + mk * rp, off[j] + c + mj * r) = v;
                        }
        }
    }
    return sys;
}

std::vector<Eigen::MatrixXd> unpack_networks(const Eigen::VectorXd& theta, const std::vector<Index>& dims) {
    const std::vector<Index> off = offsets(dims);
    if (theta.size() != off.back()) fail(ErrorCode::shape, "coefficient vector has the wrong length");
    std::vector<Eigen::MatrixXd> nets;
    for (std::size_t k = 0; k < dims.size(); ++k)
        nets.push_back(linalg::unvec(theta.segment(off[k], dims[k] * dims[k]), dims[k], dims[k]));
    return nets;
}

Eigen::VectorXd pack_networks(const std::vector<Eigen::MatrixXd>& networks) {
    Index n = 0;
    for (const auto& b : networks) n += b.size();
    Eigen::VectorXd theta(n);
    Index at = 0;
    for (const auto& b : networks) {
        theta.segment(at, b.size()) = linalg::vec(b);
        at += b.size();
    }
    return theta;
}

std::vector<Eigen::MatrixXd> canonicalize_networks(const std::vector<Eigen::MatrixXd>& networks,
                                                   const std::vector<int>& lags) {
    if (lags.size() != networks.size()) fail(ErrorCode::shape, "need one lag per network");
    std::vector<Eigen::MatrixXd> out = networks;
    std::map<int, std::vector<std::size_t>> groups;
    for (std::size_t k = 0; k < lags.size(); ++k) groups[lags[k]].push_back(k);
    for (const auto& [lag, members] : groups) {
        if (members.size() < 2) continue;
        double target = 0.0;
        for (std::size_t k : members) target += networks[k].diagonal().mean();
        target /= static_cast<double>(members.size());
        for (std::size_t k : members) out[k].diagonal().array() += target - networks[k].diagonal().mean();
    }
    return out;
}

Eigen::VectorXd multi_diag_effect(const std::vector<Eigen::MatrixXd>& networks) {
    std::vector<Index> dims;
    for (const auto& b : networks) dims.push_back(b.rows());
    const Index n = element_count(dims);
    Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
    std::vector<Index> idx(dims.size(), 0);
    for (Index lin = 0; lin < n; ++lin) {
        for (std::size_t k = 0; k < dims.size(); ++k) d(lin) += networks[k](idx[k], idx[k]);
        for (std::size_t k = 0; k < dims.size(); ++k) {
            if (++idx[k] < dims[k]) break;
            idx[k] = 0;
        }
    }
    return d;
}

namespace {

void finish(MultiFit& fit, const MultiFrame& frame, std::vector<Eigen::MatrixXd> nets, bool canonical) {
    fit.lags = frame.lags;
    fit.networks = canonical ? canonicalize_networks(nets, frame.lags) : std::move(nets);
    fit.diag_effect = multi_diag_effect(fit.networks);
    fit.criterion = multi_criterion(frame, fit.networks);
    const double e = frame.response_energy();
    fit.r2_in = e > 0.0 ? 1.0 - fit.criterion / e : std::numeric_limits<double>::quiet_NaN();
}

MultiFit multi_bcd(const MultiFrame& frame, const EstimatorConfig& cfg) {
    const auto& dims = frame.dims;
    const std::size_t modes = dims.size();
    const auto n = static_cast<std::size_t>(frame.rows());
    MultiFit fit;
    fit.method = Method::bcd;

    std::vector<Eigen::MatrixXd> ginv(modes);
    for (std::size_t k = 0; k < modes; ++k) {
        Eigen::MatrixXd g = Eigen::MatrixXd::Zero(dims[k], dims[k]);
        for (std::size_t i = 0; i < n; ++i) {
            const Eigen::MatrixXd xu = mode_matricize(frame.x[k][i], dims, static_cast<Index>(k));
            g.noalias() += xu * xu.transpose();
        }
        std::vector<std::string> w;
        ginv[k] = linalg::gram_inverse(g, "mode " + std::to_string(k) + " regressor Gram", &w);
        fit.warnings.insert(fit.warnings.end(), w.begin(), w.end());
    }

    std::vector<Eigen::MatrixXd> nets;
    for (Index d : dims) nets.push_back(Eigen::MatrixXd::Identity(d, d));
    // contrib[k][i]: mode-k term of the mean at row i
    std::vector<std::vector<Eigen::VectorXd>> contrib(modes, std::vector<Eigen::VectorXd>(n));
    std::vector<Eigen::VectorXd> total(n, Eigen::VectorXd::Zero(element_count(dims)));
    for (std::size_t k = 0; k < modes; ++k)
        for (std::size_t i = 0; i < n; ++i) {
            contrib[k][i] = frame.x[k][i];  // identity network
            total[i] += contrib[k][i];
        }
    auto sse = [&] {
        double q = 0.0;
        for (std::size_t i = 0; i < n; ++i) q += (frame.y[i] - total[i]).squaredNorm();
        return q;
    };

    const double q0 = frame.response_energy();
    const double eta = cfg.eta_relative ? cfg.eta * q0 : cfg.eta;
    fit.criterion_trace.push_back(sse());
    double prev = q0;
    for (int it = 1; it <= cfg.max_iter; ++it) {
        // Last mode first, so two modes update B before A.
        for (std::size_t k = modes; k-- > 0;) {
            const auto mode = static_cast<Index>(k);
            Eigen::MatrixXd xr = Eigen::MatrixXd::Zero(dims[k], dims[k]);
            for (std::size_t i = 0; i < n; ++i) {
                const Eigen::VectorXd resid = frame.y[i] - total[i] + contrib[k][i];
                xr.noalias() += mode_matricize(frame.x[k][i], dims, mode) * mode_matricize(resid, dims, mode).transpose();
            }
            nets[k] = ginv[k] * xr;
            for (std::size_t i = 0; i < n; ++i) {
                total[i] -= contrib[k][i];
                contrib[k][i] = mode_product(frame.x[k][i], dims, mode, nets[k].transpose());
                total[i] += contrib[k][i];
            }
        }
        const double q = sse();
        fit.criterion_trace.push_back(q);
        fit.iterations = it;
        const bool done = std::abs(q - prev) <= eta;
        prev = q;
        if (done) {
            fit.converged = true;
            break;
        }
    }
    finish(fit, frame, std::move(nets), true);
    return fit;
}

MultiFit multi_exact(const MultiFrame& frame, const EstimatorConfig& cfg) {
    double n = 0.0;
    for (Index d : frame.dims) n += static_cast<double>(d * d);
    if (n * n > cfg.element_budget) fail(ErrorCode::budget_exceeded, "normal equations exceed the element budget");
    const GramSystem sys = multi_normal_equations(frame);
    const linalg::SymmetricPinv pinv = linalg::pinv_symmetric(sys.gram);
    MultiFit fit;
    fit.method = Method::exact;
    fit.iterations = 1;
    fit.converged = true;
    fit.design_rank = pinv.rank;
    finish(fit, frame, unpack_networks(pinv.inverse * sys.xty, frame.dims), true);
    fit.criterion_trace = {sys.yty, fit.criterion};
    return fit;
}

MultiFit multi_sparse_from(const MultiFrame& frame, double lambda, const LassoSolution& sol) {
    MultiFit fit;
    fit.method = Method::sparse;
    fit.lambda = lambda;
    fit.nonzeros = (sol.beta.array() != 0.0).count();
    fit.iterations = sol.sweeps;
    fit.converged = sol.converged;
    if (!sol.converged)
        fit.warnings.push_back("coordinate descent stopped after " + std::to_string(sol.sweeps) + " sweeps");
    finish(fit, frame, unpack_networks(sol.beta, frame.dims), false);
    fit.criterion_trace = {fit.criterion};
    return fit;
}

}  // namespace

MultiFit fit_multiblin(const MultiFrame& frame, const EstimatorConfig& cfg) {
    if (frame.rows() < 1) fail(ErrorCode::insufficient_data, "no usable responses to fit");
    if (!(cfg.eta > 0.0)) fail(ErrorCode::invalid_argument, "eta must be > 0");
    if (cfg.max_iter < 1) fail(ErrorCode::invalid_argument, "max_iter must be >= 1");
    switch (cfg.method) {
        case Method::bcd: return multi_bcd(frame, cfg);
        case Method::exact: return multi_exact(frame, cfg);
        case Method::sparse: {
            if (!cfg.lambda) fail(ErrorCode::invalid_argument, "sparse fit needs a lambda");
            const double lambda = *cfg.lambda;
            if (!(lambda >= 0.0)) fail(ErrorCode::invalid_argument, "lambda must be >= 0");
            const GramSystem sys = multi_normal_equations(frame);
            Eigen::VectorXd warm = Eigen::VectorXd::Zero(sys.xty.size());
            for (double lam : lasso_lambda_grid(lasso_lambda_max(sys), cfg.lambda_count, cfg.lambda_min_ratio)) {
                if (lam <= lambda) break;
                warm = lasso_cd(sys, lam, warm, cfg.lasso).beta;
            }
            return multi_sparse_from(frame, lambda, lasso_cd(sys, lambda, warm, cfg.lasso));
        }
        default: fail(ErrorCode::invalid_argument, std::string("multiway fits do not support method ") + method_name(cfg.method));
    }
}

MultiFit fit_multiblin(const TensorSeries& series, const LagSpec& lags, const EstimatorConfig& cfg) {
    return fit_multiblin(make_multi_frame(series, lags), cfg);
}

std::vector<MultiFit> fit_multiblin_sparse_path(const MultiFrame& frame, const EstimatorConfig& cfg) {
    const GramSystem sys = multi_normal_equations(frame);
    std::vector<double> grid = cfg.lambdas;
    if (grid.empty())
        grid = lasso_lambda_grid(lasso_lambda_max(sys), cfg.lambda_count, cfg.lambda_min_ratio);
    else
        std::sort(grid.begin(), grid.end(), std::greater<>());
    std::vector<MultiFit> out;
    Eigen::VectorXd warm = Eigen::VectorXd::Zero(sys.xty.size());
    for (double lam : grid) {
        LassoSolution sol = lasso_cd(sys, lam, warm, cfg.lasso);
        warm = sol.beta;
        out.push_back(multi_sparse_from(frame, lam, sol));
    }
    return out;
}

std::vector<Eigen::MatrixXd> multi_theta(const std::vector<Eigen::MatrixXd>& networks, const std::vector<int>& lags) {
    if (lags.size() != networks.size()) fail(ErrorCode::shape, "need one lag per network");
    std::vector<Index> dims;
    for (const auto& b : networks) dims.push_back(b.rows());
    const Index n = element_count(dims);
    const int p = *std::max_element(lags.begin(), lags.end());
    std::vector<Eigen::MatrixXd> theta(static_cast<std::size_t>(p), Eigen::MatrixXd::Zero(n, n));
    for (std::size_t k = 0; k < networks.size(); ++k) {
        Index before = 1, after = 1;
        for (std::size_t m = 0; m < k; ++m) before *= dims[m];
        for (std::size_t m = k + 1; m < dims.size(); ++m) after *= dims[m];
        const Eigen::MatrixXd action =
            linalg::kron(Eigen::MatrixXd::Identity(after, after),
                         linalg::kron(networks[k].transpose(), Eigen::MatrixXd::Identity(before, before)));
        for (int l = 0; l < lags[k]; ++l) theta[static_cast<std::size_t>(l)] += action;
    }
    return theta;
}

CompanionSystem multi_companion(const std::vector<Eigen::MatrixXd>& networks, const std::vector<int>& lags) {
    const auto theta = multi_theta(networks, lags);
    const Index n = theta.front().rows();
    const auto p = static_cast<Index>(theta.size());
    CompanionSystem sys;
    sys.theta1 = theta.front();
    sys.theta2 = p > 1 ? theta.back() : Eigen::MatrixXd::Zero(n, n);
    sys.f = Eigen::MatrixXd::Zero(n * p, n * p);
    for (Index k = 0; k < p; ++k) sys.f.block(0, k * n, n, n) = theta[static_cast<std::size_t>(k)];
    if (p > 1) sys.f.block(n, 0, n * (p - 1), n * (p - 1)).setIdentity();
    sys.spectral_radius = linalg::spectral_radius(sys.f);
    return sys;
}

}  // namespace blin
