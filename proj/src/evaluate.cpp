#include "blin/evaluate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include <Eigen/Eigenvalues>

#include "blin/error.hpp"
#include "blin/lasso.hpp"
#include "blin/rng.hpp"
#include "blin/tensor.hpp"

namespace blin {

int default_jobs() {
    if (const char* env = std::getenv("BLIN_JOBS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1) return static_cast<int>(std::min<long>(v, 1024));
    }
    return 1;
}

void parallel_for(Index n, int jobs, const std::function<void(Index)>& fn) {
    if (n <= 0) return;
    const int workers = static_cast<int>(std::min<Index>(std::max(jobs, 1), n));
    if (workers == 1) {
        for (Index i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<Index> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        while (!stop.load()) {
            const Index i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                stop = true;
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

double r_squared(const Eigen::VectorXd& y, const Eigen::VectorXd& y_hat) {
    if (y.size() != y_hat.size() || y.size() == 0) fail(ErrorCode::shape, "R^2 needs equal nonempty vectors");
    const double den = y.squaredNorm();
    if (den == 0.0) fail(ErrorCode::degenerate, "R^2 is undefined for an all-zero response");
    return 1.0 - (y_hat - y).squaredNorm() / den;
}

double r_squared(const std::vector<Eigen::MatrixXd>& y, const std::vector<Eigen::MatrixXd>& y_hat) {
    if (y.size() != y_hat.size() || y.empty()) fail(ErrorCode::shape, "R^2 needs equal nonempty sequences");
    double num = 0.0, den = 0.0;
    for (std::size_t t = 0; t < y.size(); ++t) {
        if (y[t].rows() != y_hat[t].rows() || y[t].cols() != y_hat[t].cols())
            fail(ErrorCode::shape, "R^2 slices differ in shape");
        num += (y_hat[t] - y[t]).squaredNorm();
        den += y[t].squaredNorm();
    }
    if (den == 0.0) fail(ErrorCode::degenerate, "R^2 is undefined for an all-zero response");
    return 1.0 - num / den;
}

std::vector<int> fold_assignment(Index n, int folds, std::uint64_t seed) {
    if (folds < 2) fail(ErrorCode::invalid_argument, "at least two folds are required");
    if (n < folds)
        fail(ErrorCode::insufficient_data, std::to_string(n) + " usable rows cannot fill " + std::to_string(folds) +
                                               " folds");
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    Rng rng(seed, 0x0F01D5ULL);
    for (Index i = n - 1; i > 0; --i) {
        const auto j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(i + 1)));
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    std::vector<int> fold(static_cast<std::size_t>(n));
    for (Index k = 0; k < n; ++k) fold[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = static_cast<int>(k % folds);
    return fold;
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t k) {
    return seed + 0x9E3779B97F4A7C15ULL * (k + 1);
}

std::vector<Index> rows_where(const std::vector<int>& assignment, int fold, bool equal) {
    std::vector<Index> out;
    for (std::size_t r = 0; r < assignment.size(); ++r)
        if ((assignment[r] == fold) == equal) out.push_back(static_cast<Index>(r));
    return out;
}

GramSystem minus(const GramSystem& a, const GramSystem& b) {
    return {a.gram - b.gram, a.xty - b.xty, a.yty - b.yty};
}

InfluenceFit fit_config(const LaggedFrame& frame, const EstimatorConfig& cfg, int inner_folds, std::uint64_t seed) {
    if (cfg.method == Method::sparse && !cfg.lambda) return fit_sparse_cv(frame, cfg, inner_folds, seed);
    return fit(frame, cfg);
}

}  // namespace

LambdaChoice select_lambda_cv(const LaggedFrame& frame, const EstimatorConfig& cfg, int folds, std::uint64_t seed) {
    if (frame.rows() < 2) fail(ErrorCode::insufficient_data, "choosing lambda by CV needs at least two rows");
    folds = static_cast<int>(std::min<Index>(folds, frame.rows()));
    const GramSystem full = blin_normal_equations(frame);
    LambdaChoice out;
    out.lambdas = cfg.lambdas;
    if (out.lambdas.empty())
        out.lambdas = lasso_lambda_grid(lasso_lambda_max(full), cfg.lambda_count, cfg.lambda_min_ratio);
    else
        std::sort(out.lambdas.begin(), out.lambdas.end(), std::greater<>());
    out.cv_rss.assign(out.lambdas.size(), 0.0);
    const auto assignment = fold_assignment(frame.rows(), folds, seed);
    for (int f = 0; f < folds; ++f) {
        const GramSystem hold = blin_normal_equations(subset(frame, rows_where(assignment, f, true)));
        const GramSystem train = minus(full, hold);
        Eigen::VectorXd warm = Eigen::VectorXd::Zero(full.xty.size());
        for (std::size_t k = 0; k < out.lambdas.size(); ++k) {
            warm = lasso_cd(train, out.lambdas[k], warm, cfg.lasso).beta;
            out.cv_rss[k] += 2.0 * gram_half_rss(hold, warm);
        }
    }
    std::size_t best = 0;
    for (std::size_t k = 1; k < out.cv_rss.size(); ++k)
        if (out.cv_rss[k] < out.cv_rss[best]) best = k;
    out.lambda = out.lambdas[best];
    return out;
}

InfluenceFit fit_sparse_cv(const LaggedFrame& frame, const EstimatorConfig& cfg, int folds, std::uint64_t seed) {
    if (cfg.lambda) return fit_blin_sparse(frame, *cfg.lambda, cfg);
    return fit_blin_sparse(frame, select_lambda_cv(frame, cfg, folds, seed).lambda, cfg);
}

CvReport kfold_cv(const LaggedFrame& frame, const std::vector<EstimatorConfig>& configs, const CvOptions& opts) {
    if (configs.empty()) fail(ErrorCode::invalid_argument, "no estimator configurations given");
    CvReport rep;
    rep.folds = opts.folds;
    rep.times = frame.times;
    rep.assignment = fold_assignment(frame.rows(), opts.folds, opts.seed);
    for (int f = 0; f < opts.folds; ++f)
        if (rows_where(rep.assignment, f, true).empty()) fail(ErrorCode::insufficient_data, "empty CV fold");

    const auto nc = static_cast<Index>(configs.size());
    rep.methods.resize(configs.size());
    for (std::size_t c = 0; c < configs.size(); ++c) {
        rep.methods[c].config = configs[c];
        rep.methods[c].predictions.resize(static_cast<std::size_t>(frame.rows()));
        if (configs[c].method == Method::sparse) rep.methods[c].fold_lambdas.assign(static_cast<std::size_t>(opts.folds), 0.0);
    }
    std::vector<int> nonconverged(configs.size() * static_cast<std::size_t>(opts.folds), 0);
    std::vector<double> in_sample(configs.size(), std::numeric_limits<double>::quiet_NaN());
    const Index tasks = nc * (opts.folds + (opts.in_sample ? 1 : 0));

    parallel_for(tasks, opts.jobs, [&](Index task) {
        const auto c = static_cast<std::size_t>(task % nc);
        const int f = static_cast<int>(task / nc);
        const EstimatorConfig& cfg = configs[c];
        if (f == opts.folds) {
            const InfluenceFit all = fit_config(frame, cfg, opts.folds, opts.seed);
            in_sample[c] = all.r2_in;
            return;
        }
        const auto train_rows = rows_where(rep.assignment, f, false);
        const auto test_rows = rows_where(rep.assignment, f, true);
        const InfluenceFit fold_fit =
            fit_config(subset(frame, train_rows), cfg, opts.inner_folds, mix_seed(opts.seed, static_cast<std::uint64_t>(f)));
        MethodCv& m = rep.methods[c];
        for (Index r : test_rows) {
            const auto i = static_cast<std::size_t>(r);
            m.predictions[i] = fitted_mean(fold_fit, frame.x[i], frame.z[i]);
        }
        if (cfg.method == Method::sparse) m.fold_lambdas[static_cast<std::size_t>(f)] = fold_fit.lambda;
        if (!fold_fit.converged) nonconverged[c * static_cast<std::size_t>(opts.folds) + static_cast<std::size_t>(f)] = 1;
    });

    for (std::size_t c = 0; c < configs.size(); ++c) {
        MethodCv& m = rep.methods[c];
        m.r2_out = r_squared(frame.y, m.predictions);
        m.r2_in = in_sample[c];
        for (int f = 0; f < opts.folds; ++f)
            m.nonconverged_folds += nonconverged[c * static_cast<std::size_t>(opts.folds) + static_cast<std::size_t>(f)];
    }
    return rep;
}

CvReport kfold_cv(const TensorSeries& series, const LagSpec& lags, const std::vector<EstimatorConfig>& configs,
                  const CvOptions& opts) {
    return kfold_cv(make_frame(series, lags), configs, opts);
}

double aic_hat(Index nonzeros, Index n, double rss) {
    return 2.0 * static_cast<double>(nonzeros) + static_cast<double>(n) * std::log(rss);
}

std::vector<AicCell> aic_select(const TensorSeries& series, const std::vector<std::vector<int>>& lag_grid,
                                const EstimatorConfig& cfg, int jobs) {
    if (lag_grid.empty()) fail(ErrorCode::invalid_argument, "lag grid is empty");
    int p_max = 0;
    for (const auto& cell : lag_grid) {
        if (cell.size() != series.dims().size())
            fail(ErrorCode::shape, "each lag cell needs one lag per mode of the series");
        p_max = std::max(p_max, LagSpec(cell).p());
    }
    if (series.horizon() <= p_max)
        fail(ErrorCode::insufficient_data, "series is too short for the largest lag in the grid");
    std::vector<AicCell> cells(lag_grid.size());
    parallel_for(static_cast<Index>(lag_grid.size()), jobs, [&](Index i) {
        const auto& lags = lag_grid[static_cast<std::size_t>(i)];
        const MultiFrame frame = make_multi_frame(series, LagSpec(lags), p_max);
        const Index n = frame.rows() * element_count(frame.dims);
        const double energy = frame.response_energy();
        AicCell best;
        best.lags = lags;
        best.aic = std::numeric_limits<double>::infinity();
        bool any = false;
        for (const MultiFit& fit : fit_multiblin_sparse_path(frame, cfg)) {
            const double rss = fit.criterion;
            AicCell c;
            c.lags = lags;
            c.nonzeros = fit.nonzeros;
            c.lambda = fit.lambda;
            c.rss = rss;
            c.r2 = energy > 0.0 ? 1.0 - rss / energy : std::numeric_limits<double>::quiet_NaN();
            if (!(rss > 0.0)) {
                c.flagged = true;
                c.aic = -std::numeric_limits<double>::infinity();
                if (!any) best = c;
                continue;
            }
            c.aic = aic_hat(c.nonzeros, n, rss);
            if (!any || best.flagged || c.aic < best.aic) best = c;
            any = true;
        }
        cells[static_cast<std::size_t>(i)] = best;
    });
    std::stable_sort(cells.begin(), cells.end(), [](const AicCell& a, const AicCell& b) {
        if (a.flagged != b.flagged) return !a.flagged;
        return a.aic < b.aic;
    });
    return cells;
}

double normalized_offdiag_mse(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth) {
    if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols() || truth.rows() != truth.cols())
        fail(ErrorCode::shape, "off-diagonal MSE needs square matrices of equal size");
    const Index n = truth.rows();
    if (n < 2) fail(ErrorCode::shape, "off-diagonal MSE needs at least two rows");
    double se = 0.0, te = 0.0;
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < n; ++i)
            if (i != j) {
                se += estimate(i, j);
                te += truth(i, j);
            }
    if (se == 0.0 || te == 0.0) fail(ErrorCode::degenerate, "off-diagonal entries sum to zero");
    double acc = 0.0;
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < n; ++i)
            if (i != j) {
                const double d = estimate(i, j) / se - truth(i, j) / te;
                acc += d * d;
            }
    return acc / static_cast<double>(n * (n - 1));
}

double diagonal_mse(const InfluencePair& estimate, Method method, const InfluencePair& truth, Generator generator) {
    const Eigen::VectorXd ea = estimate.a().diagonal(), eb = estimate.b().diagonal();
    const Eigen::VectorXd ta = truth.a().diagonal(), tb = truth.b().diagonal();
    double acc = 0.0;
    for (Index j = 0; j < eb.size(); ++j)
        for (Index i = 0; i < ea.size(); ++i) {
            const double e = method == Method::bilinear ? ea(i) * eb(j) : ea(i) + eb(j);
            const double t = generator == Generator::bilinear ? ta(i) * tb(j) : ta(i) + tb(j);
            acc += (e - t) * (e - t);
        }
    return acc;
}

SlopeFit fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) fail(ErrorCode::shape, "slope needs paired samples");
    SlopeFit out;
    out.points = static_cast<Index>(x.size());
    if (x.size() < 2) {
        out.slope = out.se = out.intercept = std::numeric_limits<double>::quiet_NaN();
        return out;
    }
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) fail(ErrorCode::degenerate, "slope needs at least two distinct x values");
    out.slope = sxy / sxx;
    out.intercept = my - out.slope * mx;
    if (x.size() > 2) {
        double rss = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double r = y[i] - out.intercept - out.slope * x[i];
            rss += r * r;
        }
        out.se = std::sqrt(rss / (n - 2.0) / sxx);
    } else {
        out.se = std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

StudyResult convergence_study(const StudyConfig& cfg) {
    if (cfg.s < 2 || cfg.l < 2) fail(ErrorCode::invalid_argument, "study dimensions must be >= 2");
    if (cfg.reps < 1 || cfg.horizons.empty() || cfg.generators.empty() || cfg.methods.empty())
        fail(ErrorCode::invalid_argument, "study grid is empty");
    for (Method m : cfg.methods)
        if (m != Method::exact && m != Method::bcd && m != Method::bilinear)
            fail(ErrorCode::invalid_argument, std::string("the study does not run method ") + method_name(m));

    StudyResult res;
    res.config = cfg;
    {
        Rng rng(cfg.seed, 0);
        const Eigen::MatrixXd u = rng.normal_matrix(cfg.s, cfg.s), v = rng.normal_matrix(cfg.s, cfg.s);
        const Eigen::MatrixXd r = rng.normal_matrix(cfg.l, cfg.l), sf = rng.normal_matrix(cfg.l, cfg.l);
        res.truth = InfluencePair(v * u.transpose(), r * sf.transpose());
    }
    const auto ng = static_cast<Index>(cfg.generators.size());
    const auto nt = static_cast<Index>(cfg.horizons.size());
    const auto nm = static_cast<Index>(cfg.methods.size());
    const Index datasets = ng * nt * cfg.reps;
    res.records.resize(static_cast<std::size_t>(datasets * nm));

    parallel_for(datasets, cfg.jobs, [&](Index d) {
        const Index rep = d % cfg.reps;
        const Index ti = (d / cfg.reps) % nt;
        const Index gi = d / (cfg.reps * nt);
        SimulationSpec spec;
        spec.generator = cfg.generators[static_cast<std::size_t>(gi)];
        spec.s = cfg.s;
        spec.l = cfg.l;
        spec.horizon = cfg.horizons[static_cast<std::size_t>(ti)];
        spec.seed = cfg.seed;
        spec.iid_regressor = true;
        const LaggedFrame frame = generate_iid(spec, res.truth, static_cast<std::uint64_t>(d));
        for (Index mi = 0; mi < nm; ++mi) {
            EstimatorConfig ecfg = cfg.estimator;
            ecfg.method = cfg.methods[static_cast<std::size_t>(mi)];
            ecfg.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(d));
            const InfluenceFit f = fit(frame, ecfg);
            StudyRecord& rec = res.records[static_cast<std::size_t>(d * nm + mi)];
            rec.generator = spec.generator;
            rec.method = ecfg.method;
            rec.horizon = spec.horizon;
            rec.rep = static_cast<int>(rep);
            rec.converged = f.converged;
            rec.mse_a = normalized_offdiag_mse(f.pair.a(), res.truth.a());
            rec.mse_b = normalized_offdiag_mse(f.pair.b(), res.truth.b());
            rec.mse_diag = diagonal_mse(f.pair, ecfg.method, res.truth, spec.generator);
        }
    });

    for (Generator g : cfg.generators)
        for (Method m : cfg.methods) {
            StudyCell cell;
            cell.generator = g;
            cell.method = m;
            std::vector<double> x, ya, yb, yd;
            for (const auto& rec : res.records) {
                if (rec.generator != g || rec.method != m) continue;
                if (!rec.converged || !(rec.mse_a > 0.0) || !(rec.mse_b > 0.0) || !(rec.mse_diag > 0.0)) {
                    ++cell.excluded;
                    continue;
                }
                x.push_back(std::log10(static_cast<double>(rec.horizon)));
                ya.push_back(std::log10(rec.mse_a));
                yb.push_back(std::log10(rec.mse_b));
                yd.push_back(std::log10(rec.mse_diag));
            }
            cell.a = fit_slope(x, ya);
            cell.b = fit_slope(x, yb);
            cell.diag = fit_slope(x, yd);
            res.cells.push_back(cell);
        }
    return res;
}

namespace {

Eigen::MatrixXd model_mean(const InfluencePair& p, const Eigen::MatrixXd& x, const Eigen::MatrixXd& z, Generator g) {
    if (g == Generator::bilinear) return p.a().transpose() * x * p.b();
    return blin_mean(p, x, z);
}

double frame_r2(const LaggedFrame& f, const InfluencePair& p, Generator g) {
    std::vector<Eigen::MatrixXd> hat;
    hat.reserve(f.y.size());
    for (std::size_t r = 0; r < f.y.size(); ++r) hat.push_back(model_mean(p, f.x[r], f.z[r], g));
    return r_squared(f.y, hat);
}

// c minimizing ||c A_hat - A||^2 + ||B_hat / c - B||^2: a real root of
// alpha c^4 - p c^3 + q c - beta = 0.
double gauge_scale(const InfluencePair& fitted, const InfluencePair& truth) {
    const double alpha = fitted.a().squaredNorm(), beta = fitted.b().squaredNorm();
    if (alpha == 0.0 || beta == 0.0) return 1.0;
    const double p = (fitted.a().array() * truth.a().array()).sum();
    const double q = (fitted.b().array() * truth.b().array()).sum();
    auto objective = [&](double c) {
        return (c * fitted.a() - truth.a()).squaredNorm() + (fitted.b() / c - truth.b()).squaredNorm();
    };
    // Companion matrix of c^4 + (-p/alpha) c^3 + 0 c^2 + (q/alpha) c - beta/alpha.
    Eigen::Matrix4d comp = Eigen::Matrix4d::Zero();
    comp(0, 0) = p / alpha;
    comp(0, 2) = -q / alpha;
    comp(0, 3) = beta / alpha;
    comp(1, 0) = comp(2, 1) = comp(3, 2) = 1.0;
    Eigen::EigenSolver<Eigen::Matrix4d> es(comp, false);
    double best_c = 1.0, best = objective(1.0);
    for (Index i = 0; i < 4; ++i) {
        const auto root = es.eigenvalues()(i);
        if (std::abs(root.imag()) > 1e-9 * std::max(1.0, std::abs(root.real())) || root.real() == 0.0) continue;
        const double v = objective(root.real());
        if (v < best) {
            best = v;
            best_c = root.real();
        }
    }
    return best_c;
}

}  // namespace

std::vector<ScanPoint> likelihood_line_scan(const LaggedFrame& train, const LaggedFrame& test,
                                            const InfluencePair& truth, const InfluencePair& fitted,
                                            const std::vector<double>& xi, Generator model, bool align_gauge) {
    if (truth.s() != fitted.s() || truth.l() != fitted.l()) fail(ErrorCode::shape, "true and fitted pairs differ in shape");
    InfluencePair end = fitted;
    if (model == Generator::bilinear && align_gauge) {
        const double c = gauge_scale(fitted, truth);
        end = InfluencePair(c * fitted.a(), fitted.b() / c);
    }
    std::vector<ScanPoint> out;
    out.reserve(xi.size());
    for (double x : xi) {
        const InfluencePair p((1.0 - x) * truth.a() + x * end.a(), (1.0 - x) * truth.b() + x * end.b());
        out.push_back({x, frame_r2(train, p, model), frame_r2(test, p, model)});
    }
    return out;
}

}  // namespace blin
