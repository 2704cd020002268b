#include "blin/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "blin/error.hpp"
#include "blin/linalg.hpp"
#include "blin/rng.hpp"

namespace blin {

const char* method_name(Method m) noexcept {
    switch (m) {
        case Method::exact: return "exact";
        case Method::bcd: return "bcd";
        case Method::sparse: return "sparse";
        case Method::reduced_rank: return "reduced_rank";
        case Method::bilinear: return "bilinear";
    }
    return "unknown";
}

Method parse_method(const std::string& name) {
    if (name == "exact") return Method::exact;
    if (name == "bcd") return Method::bcd;
    if (name == "sparse") return Method::sparse;
    if (name == "reduced_rank" || name == "reduced-rank") return Method::reduced_rank;
    if (name == "bilinear") return Method::bilinear;
    fail(ErrorCode::invalid_argument, "unknown method '" + name + "'");
}

void EstimatorConfig::validate(Index s, Index l) const {
    if (!(eta > 0.0)) fail(ErrorCode::invalid_argument, "eta must be > 0");
    if (max_iter < 1) fail(ErrorCode::invalid_argument, "max_iter must be >= 1");
    if (lambda && !(*lambda >= 0.0)) fail(ErrorCode::invalid_argument, "lambda must be >= 0");
    for (double v : lambdas)
        if (!(v >= 0.0)) fail(ErrorCode::invalid_argument, "lambda grid values must be >= 0");
    if (lambda_count < 1) fail(ErrorCode::invalid_argument, "lambda_count must be >= 1");
    if (method == Method::reduced_rank) {
        if (rank_a < 1 || rank_a >= s)
            fail(ErrorCode::invalid_argument, "rank_a must lie in [1, S) with S=" + std::to_string(s));
        if (rank_b < 1 || rank_b >= l)
            fail(ErrorCode::invalid_argument, "rank_b must lie in [1, L) with L=" + std::to_string(l));
    }
    if (restarts < 1) fail(ErrorCode::invalid_argument, "restarts must be >= 1");
}

namespace {

struct Moments {
    Eigen::MatrixXd sxx;  // sum X X^T
    Eigen::MatrixXd szz;  // sum Z^T Z
    Eigen::MatrixXd syx;  // sum Y X^T
    Eigen::MatrixXd szy;  // sum Z^T Y
    double yy = 0.0;
};

Moments moments(const LaggedFrame& f) {
    const Index s = f.s();
    const Index l = f.l();
    Moments m;
    m.sxx = Eigen::MatrixXd::Zero(s, s);
    m.szz = Eigen::MatrixXd::Zero(l, l);
    m.syx = Eigen::MatrixXd::Zero(s, s);
    m.szy = Eigen::MatrixXd::Zero(l, l);
    for (std::size_t t = 0; t < f.y.size(); ++t) {
        m.sxx.noalias() += f.x[t] * f.x[t].transpose();
        m.szz.noalias() += f.z[t].transpose() * f.z[t];
        m.syx.noalias() += f.y[t] * f.x[t].transpose();
        m.szy.noalias() += f.z[t].transpose() * f.y[t];
        m.yy += f.y[t].squaredNorm();
    }
    return m;
}

// Canonical form only applies when the shift leaves fitted values unchanged.
InfluencePair canonical_for(const LaggedFrame& f, InfluencePair pair) {
    return f.shared_lags ? canonicalize(pair) : pair;
}

void require_rows(const LaggedFrame& f) {
    if (f.rows() < 1) fail(ErrorCode::insufficient_data, "no usable responses to fit");
}

double threshold(const EstimatorConfig& cfg, double q0) { return cfg.eta_relative ? cfg.eta * q0 : cfg.eta; }

double r2_from(double criterion, double energy) {
    return energy > 0.0 ? 1.0 - criterion / energy : std::numeric_limits<double>::quiet_NaN();
}

void add_warning(std::vector<std::string>& w, const std::string& msg) {
    if (std::find(w.begin(), w.end(), msg) == w.end()) w.push_back(msg);
}

Eigen::MatrixXd inverse_noting(const Eigen::MatrixXd& g, const std::string& what, std::vector<std::string>& w) {
    std::vector<std::string> local;
    Eigen::MatrixXd inv = linalg::gram_inverse(g, what, &local);
    for (auto& m : local) add_warning(w, m);
    return inv;
}

LagSpec check_lags(const TensorSeries& series, const LagSpec& lags) {
    if (lags.modes() != 2) fail(ErrorCode::invalid_argument, "bipartite fits need exactly two lags");
    if (series.horizon() <= lags.p())
        fail(ErrorCode::insufficient_data, "horizon " + std::to_string(series.horizon()) +
                                               " must exceed the largest lag " + std::to_string(lags.p()));
    return lags;
}

}  // namespace

Eigen::MatrixXd fitted_mean(const InfluenceFit& fit, const Eigen::MatrixXd& x, const Eigen::MatrixXd& z) {
    if (fit.method == Method::bilinear) {
        if (x.rows() != fit.pair.s() || x.cols() != fit.pair.l())
            fail(ErrorCode::shape, "regressor dimensions do not match the influence pair");
        return fit.pair.a().transpose() * x * fit.pair.b();
    }
    return blin_mean(fit.pair, x, z);
}

double blin_criterion(const LaggedFrame& frame, const InfluencePair& pair) {
    double q = 0.0;
    for (std::size_t t = 0; t < frame.y.size(); ++t)
        q += (frame.y[t] - blin_mean(pair, frame.x[t], frame.z[t])).squaredNorm();
    return q;
}

double bilinear_criterion(const LaggedFrame& frame, const InfluencePair& pair) {
    double q = 0.0;
    for (std::size_t t = 0; t < frame.y.size(); ++t)
        q += (frame.y[t] - pair.a().transpose() * frame.x[t] * pair.b()).squaredNorm();
    return q;
}

GramSystem blin_normal_equations(const LaggedFrame& frame) {
    require_rows(frame);
    const Index s = frame.s();
    const Index l = frame.l();
    const Moments m = moments(frame);
    const Index na = s * s;
    GramSystem sys;
    sys.gram = Eigen::MatrixXd::Zero(na + l * l, na + l * l);
    sys.gram.topLeftCorner(na, na) = linalg::kron(m.sxx, Eigen::MatrixXd::Identity(s, s));
    sys.gram.bottomRightCorner(l * l, l * l) = linalg::kron(Eigen::MatrixXd::Identity(l, l), m.szz);
    auto h12 = sys.gram.topRightCorner(na, l * l);
    for (std::size_t t = 0; t < frame.y.size(); ++t) {
        const Eigen::MatrixXd& x = frame.x[t];
        const Eigen::MatrixXd& z = frame.z[t];
        for (Index c = 0; c < l; ++c)
            for (Index r = 0; r < s; ++r) h12.block(r * s, c * l, s, l) += x(r, c) * z;
    }
    sys.gram.bottomLeftCorner(l * l, na) = h12.transpose();
    sys.xty.resize(na + l * l);
    sys.xty.head(na) = linalg::vec(m.syx);
    sys.xty.tail(l * l) = linalg::vec(m.szy);
    sys.yty = m.yy;
    return sys;
}

InfluenceFit fit_blin_exact(const LaggedFrame& frame, const EstimatorConfig& cfg) {
    require_rows(frame);
    const Index s = frame.s();
    const Index l = frame.l();
    const double n = static_cast<double>(s * s + l * l);
    if (n * n > cfg.element_budget)
        fail(ErrorCode::budget_exceeded, "normal equations of order " + std::to_string(s * s + l * l) +
                                             " exceed the element budget");
    const GramSystem sys = blin_normal_equations(frame);
    const linalg::SymmetricPinv pinv = linalg::pinv_symmetric(sys.gram);
    const Eigen::VectorXd theta = pinv.inverse * sys.xty;

    InfluenceFit fit;
    fit.method = Method::exact;
    fit.pair = canonical_for(frame, unpack_theta(theta, s, l));
    fit.criterion = blin_criterion(frame, fit.pair);
    fit.criterion_trace = {sys.yty, fit.criterion};
    fit.iterations = 1;
    fit.converged = true;
    fit.r2_in = r2_from(fit.criterion, sys.yty);
    fit.design_rank = pinv.rank;
    return fit;
}

InfluenceFit fit_blin_exact(const TensorSeries& series, const LagSpec& lags, const EstimatorConfig& cfg) {
    return fit_blin_exact(make_frame(series, check_lags(series, lags)), cfg);
}

InfluenceFit fit_blin_bcd(const LaggedFrame& frame, const EstimatorConfig& cfg) {
    require_rows(frame);
    const Index s = frame.s();
    const Index l = frame.l();
    cfg.validate(s, l);
    const Moments m = moments(frame);

    InfluenceFit fit;
    fit.method = Method::bcd;
    const Eigen::MatrixXd sxx_inv = inverse_noting(m.sxx, "sum of X_t X_t^T", fit.warnings);
    const Eigen::MatrixXd szz_inv = inverse_noting(m.szz, "sum of Z_t^T Z_t", fit.warnings);

    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(s, s);
    Eigen::MatrixXd b = Eigen::MatrixXd::Identity(l, l);
    const double eta = threshold(cfg, m.yy);
    fit.criterion_trace.push_back(blin_criterion(frame, InfluencePair(a, b)));
    double prev = m.yy;  // Q_0

    Eigen::MatrixXd ax(s, l);
    for (int it = 1; it <= cfg.max_iter; ++it) {
        Eigen::MatrixXd zax = Eigen::MatrixXd::Zero(l, l);
        for (std::size_t t = 0; t < frame.y.size(); ++t) {
            ax.noalias() = a.transpose() * frame.x[t];
            zax.noalias() += frame.z[t].transpose() * ax;
        }
        b.noalias() = szz_inv * (m.szy - zax);

        Eigen::MatrixXd zbx = Eigen::MatrixXd::Zero(s, s);
        for (std::size_t t = 0; t < frame.y.size(); ++t) zbx.noalias() += frame.z[t] * b * frame.x[t].transpose();
        const Eigen::MatrixXd at = (m.syx - zbx) * sxx_inv;
        a = at.transpose();

        const double q = blin_criterion(frame, InfluencePair(a, b));
        fit.criterion_trace.push_back(q);
        fit.iterations = it;
        const bool done = std::abs(q - prev) <= eta;
        prev = q;
        if (done) {
            fit.converged = true;
            break;
        }
    }
    fit.pair = canonical_for(frame, InfluencePair(a, b));
    fit.criterion = fit.criterion_trace.back();
    fit.r2_in = r2_from(fit.criterion, m.yy);
    return fit;
}

InfluenceFit fit_blin_bcd(const TensorSeries& series, const LagSpec& lags, const EstimatorConfig& cfg) {
    return fit_blin_bcd(make_frame(series, check_lags(series, lags)), cfg);
}

namespace {

InfluenceFit sparse_fit_from(const LaggedFrame& frame, const GramSystem& sys, double lambda,
                             const LassoSolution& sol) {
    InfluenceFit fit;
    fit.method = Method::sparse;
    fit.pair = unpack_theta(sol.beta, frame.s(), frame.l());
    fit.lambda = lambda;
    fit.nonzeros = (sol.beta.array() != 0.0).count();
    fit.criterion = blin_criterion(frame, fit.pair);
    fit.criterion_trace = {fit.criterion};
    fit.iterations = sol.sweeps;
    fit.converged = sol.converged;
    fit.r2_in = r2_from(fit.criterion, sys.yty);
    if (!sol.converged)
        fit.warnings.push_back("coordinate descent stopped after " + std::to_string(sol.sweeps) +
                               " sweeps with KKT violation " + std::to_string(sol.kkt_violation));
    return fit;
}

std::vector<double> descending(std::vector<double> v) {
    std::sort(v.begin(), v.end(), std::greater<>());
    return v;
}

}  // namespace

SparsePath fit_blin_sparse_path(const LaggedFrame& frame, const EstimatorConfig& cfg) {
    require_rows(frame);
    cfg.validate(frame.s(), frame.l());
    const GramSystem sys = blin_normal_equations(frame);
    SparsePath path;
    path.lambda_max = lasso_lambda_max(sys);
    path.lambdas = cfg.lambdas.empty()
                       ? lasso_lambda_grid(path.lambda_max, cfg.lambda_count, cfg.lambda_min_ratio)
                       : descending(cfg.lambdas);
    Eigen::VectorXd warm = Eigen::VectorXd::Zero(sys.xty.size());
    for (double lam : path.lambdas) {
        LassoSolution sol = lasso_cd(sys, lam, warm, cfg.lasso);
        warm = sol.beta;
        path.fits.push_back(sparse_fit_from(frame, sys, lam, sol));
    }
    return path;
}

SparsePath fit_blin_sparse_path(const TensorSeries& series, const LagSpec& lags, const EstimatorConfig& cfg) {
    return fit_blin_sparse_path(make_frame(series, check_lags(series, lags)), cfg);
}

InfluenceFit fit_blin_sparse(const LaggedFrame& frame, double lambda, const EstimatorConfig& cfg) {
    require_rows(frame);
    cfg.validate(frame.s(), frame.l());
    if (!(lambda >= 0.0)) fail(ErrorCode::invalid_argument, "lambda must be >= 0");
    const GramSystem sys = blin_normal_equations(frame);
    const double lmax = lasso_lambda_max(sys);
    Eigen::VectorXd warm = Eigen::VectorXd::Zero(sys.xty.size());
    for (double lam : lasso_lambda_grid(lmax, cfg.lambda_count, cfg.lambda_min_ratio)) {
        if (lam <= lambda) break;
        warm = lasso_cd(sys, lam, warm, cfg.lasso).beta;
    }
    return sparse_fit_from(frame, sys, lambda, lasso_cd(sys, lambda, warm, cfg.lasso));
}

InfluenceFit fit_blin_sparse(const TensorSeries& series, const LagSpec& lags, double lambda,
                             const EstimatorConfig& cfg) {
    return fit_blin_sparse(make_frame(series, check_lags(series, lags)), lambda, cfg);
}

InfluenceFit fit_blin_reduced_rank(const LaggedFrame& frame, const EstimatorConfig& cfg) {
    require_rows(frame);
    const Index s = frame.s();
    const Index l = frame.l();
    EstimatorConfig checked = cfg;
    checked.method = Method::reduced_rank;
    checked.validate(s, l);
    const Moments m = moments(frame);

    InfluenceFit fit;
    fit.method = Method::reduced_rank;
    const Eigen::MatrixXd sxx_inv = inverse_noting(m.sxx, "sum of X_t X_t^T", fit.warnings);
    const Eigen::MatrixXd szz_inv = inverse_noting(m.szz, "sum of Z_t^T Z_t", fit.warnings);

    Rng rng(cfg.seed);
    ReducedRankFactors f;
    f.u = rng.normal_matrix(s, cfg.rank_a);
    f.v = rng.normal_matrix(s, cfg.rank_a);
    f.rf = rng.normal_matrix(l, cfg.rank_b);
    f.sf = rng.normal_matrix(l, cfg.rank_b);

    auto pair_of = [](const ReducedRankFactors& g) {
        return InfluencePair((g.u * g.v.transpose()).transpose(), g.rf * g.sf.transpose());
    };
    const double eta = threshold(cfg, m.yy);
    fit.criterion_trace.push_back(blin_criterion(frame, pair_of(f)));

    for (int it = 1; it <= cfg.max_iter; ++it) {
        // A-side target: sum (Y - Z B) X^T
        const Eigen::MatrixXd b = f.rf * f.sf.transpose();
        Eigen::MatrixXd syx = m.syx;
        for (std::size_t t = 0; t < frame.y.size(); ++t) syx.noalias() -= frame.z[t] * b * frame.x[t].transpose();

        const Eigen::MatrixXd vsv = f.v.transpose() * m.sxx * f.v;
        f.u = syx * f.v * inverse_noting(vsv, "V^T (sum X X^T) V", fit.warnings);
        const Eigen::MatrixXd utu = f.u.transpose() * f.u;
        f.v = sxx_inv * syx.transpose() * f.u * inverse_noting(utu, "U^T U", fit.warnings);

        // B-side target: sum Z^T (Y - A^T X)
        const Eigen::MatrixXd at = f.u * f.v.transpose();
        Eigen::MatrixXd szy = m.szy;
        for (std::size_t t = 0; t < frame.y.size(); ++t) szy.noalias() -= frame.z[t].transpose() * (at * frame.x[t]);

        const Eigen::MatrixXd sts = f.sf.transpose() * f.sf;
        f.rf = szz_inv * szy * f.sf * inverse_noting(sts, "Sf^T Sf", fit.warnings);
        const Eigen::MatrixXd rzr = f.rf.transpose() * m.szz * f.rf;
        f.sf = szy.transpose() * f.rf * inverse_noting(rzr, "Rf^T (sum Z^T Z) Rf", fit.warnings);

        const double q = blin_criterion(frame, pair_of(f));
        const double prev = fit.criterion_trace.back();
        fit.criterion_trace.push_back(q);
        fit.iterations = it;
        if (std::abs(q - prev) <= eta) {
            fit.converged = true;
            break;
        }
    }
    fit.pair = pair_of(f);
    fit.factors = std::move(f);
    fit.criterion = fit.criterion_trace.back();
    fit.r2_in = r2_from(fit.criterion, m.yy);
    return fit;
}

InfluenceFit fit_blin_reduced_rank(const TensorSeries& series, const LagSpec& lags, const EstimatorConfig& cfg) {
    return fit_blin_reduced_rank(make_frame(series, check_lags(series, lags)), cfg);
}

namespace {

// Second moments of vec(X_t) and vec(Y_t), indexed (i + S l).
struct BilinearMoments {
    Index s = 0, l = 0;
    Eigen::MatrixXd c;  // sum vec(X) vec(X)^T
    Eigen::MatrixXd d;  // sum vec(X) vec(Y)^T
    double yy = 0.0;

    // sum X^T M X for M (S x S)
    Eigen::MatrixXd gram_b(const Eigen::MatrixXd& mm) const {
        Eigen::MatrixXd g(l, l);
        for (Index q = 0; q < l; ++q)
            for (Index p = 0; p < l; ++p) g(p, q) = (mm.array() * c.block(s * p, s * q, s, s).array()).sum();
        return g;
    }
    // sum (A^T X)^T Y
    Eigen::MatrixXd cross_b(const Eigen::MatrixXd& a) const {
        Eigen::MatrixXd r(l, l);
        for (Index q = 0; q < l; ++q)
            for (Index p = 0; p < l; ++p) r(p, q) = (a.array() * d.block(s * p, s * q, s, s).array()).sum();
        return r;
    }
    // sum X N X^T for N (L x L)
    Eigen::MatrixXd gram_a(const Eigen::MatrixXd& nn) const {
        Eigen::MatrixXd g = Eigen::MatrixXd::Zero(s, s);
        for (Index q = 0; q < l; ++q)
            for (Index p = 0; p < l; ++p) g += nn(p, q) * c.block(s * p, s * q, s, s);
        return g;
    }
    // (sum Y B^T X^T)^T
    Eigen::MatrixXd cross_a(const Eigen::MatrixXd& b) const {
        Eigen::MatrixXd r = Eigen::MatrixXd::Zero(s, s);
        for (Index q = 0; q < l; ++q)
            for (Index p = 0; p < l; ++p) r += b(p, q) * d.block(s * p, s * q, s, s);
        return r;
    }
};

BilinearMoments bilinear_moments(const LaggedFrame& f) {
    BilinearMoments m;
    m.s = f.s();
    m.l = f.l();
    const Index n = m.s * m.l;
    Eigen::MatrixXd xs(n, f.rows());
    Eigen::MatrixXd ys(n, f.rows());
    for (Index t = 0; t < f.rows(); ++t) {
        xs.col(t) = linalg::vec(f.x[static_cast<std::size_t>(t)]);
        ys.col(t) = linalg::vec(f.y[static_cast<std::size_t>(t)]);
    }
    m.c.noalias() = xs * xs.transpose();
    m.d.noalias() = xs * ys.transpose();
    m.yy = ys.squaredNorm();
    return m;
}

struct AlsRun {
    Eigen::MatrixXd a, b;
    std::vector<double> trace;
    int iterations = 0;
    bool converged = false;
};

AlsRun run_als(const BilinearMoments& m, Eigen::MatrixXd a, const EstimatorConfig& cfg,
               std::vector<std::string>& warnings) {
    AlsRun run;
    const double eta = threshold(cfg, m.yy);
    run.trace.push_back(m.yy);
    Eigen::MatrixXd gb = m.gram_b(a * a.transpose());
    Eigen::MatrixXd rb = m.cross_b(a);
    Eigen::MatrixXd b;
    for (int it = 1; it <= cfg.max_iter; ++it) {
        b = inverse_noting(gb, "sum X^T A A^T X", warnings) * rb;
        const Eigen::MatrixXd ga = m.gram_a(b * b.transpose());
        a = inverse_noting(ga, "sum X B B^T X^T", warnings) * m.cross_a(b);

        gb = m.gram_b(a * a.transpose());
        rb = m.cross_b(a);
        const double q = m.yy - 2.0 * (b.array() * rb.array()).sum() + (b.array() * (gb * b).array()).sum();
        const double prev = run.trace.back();
        run.trace.push_back(q);
        run.iterations = it;
        if (std::abs(q - prev) <= eta) {
            run.converged = true;
            break;
        }
    }
    run.a = std::move(a);
    run.b = std::move(b);
    return run;
}

}  // namespace

InfluenceFit fit_bilinear(const LaggedFrame& frame, const EstimatorConfig& cfg) {
    require_rows(frame);
    const Index s = frame.s();
    const Index l = frame.l();
    cfg.validate(s, l);
    const BilinearMoments m = bilinear_moments(frame);

    InfluenceFit fit;
    fit.method = Method::bilinear;
    std::vector<AlsRun> runs;
    runs.reserve(static_cast<std::size_t>(cfg.restarts));
    for (int r = 0; r < cfg.restarts; ++r) {
        Eigen::MatrixXd a0;
        if (r == 0) {
            a0 = Eigen::MatrixXd::Identity(s, s);
        } else {
            Rng rng(cfg.seed, static_cast<std::uint64_t>(r));
            a0 = rng.normal_matrix(s, s);
        }
        runs.push_back(run_als(m, std::move(a0), cfg, fit.warnings));
        fit.restart_criteria.push_back(runs.back().trace.back());
        fit.restart_converged.push_back(runs.back().converged);
    }
    std::size_t best = 0;
    for (std::size_t r = 1; r < runs.size(); ++r)
        if (fit.restart_criteria[r] < fit.restart_criteria[best]) best = r;
    AlsRun& win = runs[best];

    const double na = win.a.norm();
    const double nb = win.b.norm();
    if (na > 0.0 && nb > 0.0) {
        const double k = std::sqrt(nb / na);
        win.a *= k;
        win.b /= k;
    }
    if (win.a.trace() < 0.0) {
        win.a = -win.a;
        win.b = -win.b;
    }
    fit.pair = InfluencePair(win.a, win.b);
    fit.best_restart = static_cast<int>(best);
    fit.criterion_trace = win.trace;
    fit.iterations = win.iterations;
    fit.converged = win.converged;
    fit.criterion = bilinear_criterion(frame, fit.pair);
    fit.r2_in = r2_from(fit.criterion, m.yy);
    if (std::none_of(fit.restart_converged.begin(), fit.restart_converged.end(), [](bool c) { return c; }))
        fit.warnings.push_back("no restart converged; returning the best-effort fit");
    return fit;
}

InfluenceFit fit_bilinear(const TensorSeries& series, const LagSpec& lags, const EstimatorConfig& cfg) {
    check_lags(series, lags);
    if (lags.p_a() != lags.p_b()) fail(ErrorCode::invalid_argument, "the bilinear model needs p_a == p_b");
    return fit_bilinear(make_frame(series, lags), cfg);
}

InfluenceFit fit(const LaggedFrame& frame, const EstimatorConfig& cfg) {
    switch (cfg.method) {
        case Method::exact: return fit_blin_exact(frame, cfg);
        case Method::bcd: return fit_blin_bcd(frame, cfg);
        case Method::sparse:
            if (!cfg.lambda) fail(ErrorCode::invalid_argument, "sparse fit needs a lambda");
            return fit_blin_sparse(frame, *cfg.lambda, cfg);
        case Method::reduced_rank: return fit_blin_reduced_rank(frame, cfg);
        case Method::bilinear: return fit_bilinear(frame, cfg);
    }
    fail(ErrorCode::internal, "unhandled method");
}

RankReport design_rank_check(const LaggedFrame& frame, double element_budget) {
    RankReport rep;
    const Index s = frame.s();
    const Index l = frame.l();
    rep.parameters = s * s + l * l;
    rep.rows = frame.rows() * s * l;
    DesignSystem d;
    try {
        d = build_design(frame, element_budget);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::budget_exceeded) throw;
        rep.note = "unchecked: " + std::string(e.what());
        return rep;
    }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(d.design);
    const Eigen::VectorXd& sv = svd.singularValues();
    rep.checked = true;
    rep.rank = sv.size() && sv(0) > 0.0 ? (sv.array() > linalg::kRankTolerance * sv(0)).count() : 0;
    rep.unique = rep.rank == rep.parameters - 1;
    if (rep.rank == 0)
        rep.gap = 0.0;
    else if (rep.rank < sv.size())
        rep.gap = sv(rep.rank) > 0.0 ? sv(rep.rank - 1) / sv(rep.rank) : std::numeric_limits<double>::infinity();
    else
        rep.gap = std::numeric_limits<double>::infinity();
    return rep;
}

RankReport design_rank_check(const TensorSeries& series, const LagSpec& lags, double element_budget) {
    return design_rank_check(make_frame(series, check_lags(series, lags)), element_budget);
}

}  // namespace blin
