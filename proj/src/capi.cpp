#include "blin/blin.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <map>
#include <memory>
#include <new>
#include <sstream>

#include <json.hpp>

#include "blin/error.hpp"
#include "blin/estimators.hpp"
#include "blin/evaluate.hpp"
#include "blin/io.hpp"
#include "blin/multiway.hpp"
#include "blin/rng.hpp"
#include "blin/simulate.hpp"
#include "blin/tensor.hpp"

using nlohmann::json;
using namespace blin;

struct blin_series {
    TensorSeries series;
};

struct blin_config {
    std::map<std::string, std::string> values;
};

struct blin_fit {
    Method method = Method::bcd;
    std::vector<Eigen::MatrixXd> networks;
    Eigen::VectorXd diag;
    bool converged = false;
    json summary;
};

namespace {

thread_local std::string g_last_error;

template <class Fn>
int guard(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return BLIN_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return static_cast<int>(e.code());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return BLIN_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return BLIN_ERR_INTERNAL;
    }
}

void need(const void* p, const char* what) {
    if (!p) fail(ErrorCode::invalid_argument, std::string(what) + " is NULL");
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void put(char** out, const std::string& s) {
    if (out) *out = dup_string(s);
}

// ---- configuration keys -------------------------------------------------

enum class Kind { integer, count, real, boolean, text, int_list, real_list, text_list };

const std::map<std::string, Kind>& key_kinds() {
    static const std::map<std::string, Kind> kinds{
        {"method", Kind::text},          {"lags", Kind::int_list},         {"eta", Kind::real},
        {"eta_relative", Kind::boolean}, {"max_iter", Kind::count},        {"lambda", Kind::real},
        {"lambdas", Kind::real_list},    {"lambda_count", Kind::count},    {"lambda_min_ratio", Kind::real},
        {"lasso_tol", Kind::real},       {"lasso_max_sweeps", Kind::count}, {"rank_a", Kind::count},
        {"rank_b", Kind::count},         {"restarts", Kind::count},        {"seed", Kind::count},
        {"element_budget", Kind::real},  {"jobs", Kind::count},            {"folds", Kind::count},
        {"inner_folds", Kind::count},    {"in_sample", Kind::boolean},     {"methods", Kind::text_list},
        {"generator", Kind::text},       {"s", Kind::count},               {"l", Kind::count},
        {"q_sparsity", Kind::real},      {"target_r2", Kind::real},        {"horizon", Kind::count},
        {"burn_in", Kind::count},        {"replication", Kind::count},     {"horizons", Kind::int_list},
        {"reps", Kind::count},           {"generators", Kind::text_list},  {"study_methods", Kind::text_list},
        {"test_horizon", Kind::count},   {"scan_points", Kind::count},     {"align_gauge", Kind::boolean},
    };
    return kinds;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b == std::string::npos) fail(ErrorCode::parse, "empty item in list '" + s + "'");
        out.push_back(item.substr(b, e - b + 1));
    }
    if (out.empty()) fail(ErrorCode::parse, "empty list");
    return out;
}

double to_real(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos == v.size() && std::isfinite(d)) return d;
    } catch (const std::exception&) {
    }
    fail(ErrorCode::parse, key + ": '" + v + "' is not a finite number");
}

long long to_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long long i = std::stoll(v, &pos);
        if (pos == v.size()) return i;
    } catch (const std::exception&) {
    }
    fail(ErrorCode::parse, key + ": '" + v + "' is not an integer");
}

std::uint64_t to_count(const std::string& key, const std::string& v) {
    if (v.empty() || v[0] == '-') fail(ErrorCode::parse, key + ": '" + v + "' is not a non-negative integer");
    try {
        std::size_t pos = 0;
        const unsigned long long i = std::stoull(v, &pos);
        if (pos == v.size()) return i;
    } catch (const std::exception&) {
    }
    fail(ErrorCode::parse, key + ": '" + v + "' is not a non-negative integer");
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    fail(ErrorCode::parse, key + ": '" + v + "' is not a boolean");
}

void check_value(const std::string& key, Kind kind, const std::string& v) {
    switch (kind) {
        case Kind::integer: to_int(key, v); break;
        case Kind::count: to_count(key, v); break;
        case Kind::real: to_real(key, v); break;
        case Kind::boolean: to_bool(key, v); break;
        case Kind::text:
            if (key == "method") parse_method(v);
            if (key == "generator") parse_generator(v);
            break;
        case Kind::int_list:
            for (const auto& x : split_list(v)) to_int(key, x);
            break;
        case Kind::real_list:
            for (const auto& x : split_list(v)) to_real(key, x);
            break;
        case Kind::text_list:
            for (const auto& x : split_list(v)) {
                if (key == "methods" || key == "study_methods") parse_method(x);
                if (key == "generators") parse_generator(x);
            }
            break;
    }
}

// Typed reads with per-command defaults.
struct Conf {
    const std::map<std::string, std::string>& v;

    bool has(const std::string& k) const { return v.count(k) > 0; }
    const std::string* find(const std::string& k) const {
        const auto it = v.find(k);
        return it == v.end() ? nullptr : &it->second;
    }
    std::string text(const std::string& k, const std::string& def) const {
        const auto* s = find(k);
        return s ? *s : def;
    }
    double real(const std::string& k, double def) const {
        const auto* s = find(k);
        return s ? to_real(k, *s) : def;
    }
    std::uint64_t count(const std::string& k, std::uint64_t def) const {
        const auto* s = find(k);
        return s ? to_count(k, *s) : def;
    }
    int small(const std::string& k, int def) const {
        const std::uint64_t c = count(k, static_cast<std::uint64_t>(def));
        if (c > static_cast<std::uint64_t>(std::numeric_limits<int>::max())) fail(ErrorCode::invalid_argument, k + " is too large");
        return static_cast<int>(c);
    }
    bool boolean(const std::string& k, bool def) const {
        const auto* s = find(k);
        return s ? to_bool(k, *s) : def;
    }
    std::vector<std::string> list(const std::string& k, const std::vector<std::string>& def) const {
        const auto* s = find(k);
        return s ? split_list(*s) : def;
    }
    std::vector<int> ints(const std::string& k, const std::vector<int>& def) const {
        const auto* s = find(k);
        if (!s) return def;
        std::vector<int> out;
        for (const auto& x : split_list(*s)) {
            const long long i = to_int(k, x);
            if (i < std::numeric_limits<int>::min() || i > std::numeric_limits<int>::max())
                fail(ErrorCode::invalid_argument, k + " entry out of range");
            out.push_back(static_cast<int>(i));
        }
        return out;
    }
    std::vector<double> reals(const std::string& k) const {
        const auto* s = find(k);
        std::vector<double> out;
        if (s)
            for (const auto& x : split_list(*s)) out.push_back(to_real(k, x));
        return out;
    }
};

Conf conf_of(const blin_config* c) {
    static const std::map<std::string, std::string> empty;
    return Conf{c ? c->values : empty};
}

EstimatorConfig estimator_config(const Conf& c, Method def = Method::bcd) {
    EstimatorConfig e;
    e.method = c.has("method") ? parse_method(c.text("method", "")) : def;
    e.eta = c.real("eta", e.eta);
    e.eta_relative = c.boolean("eta_relative", e.eta_relative);
    e.max_iter = c.small("max_iter", e.max_iter);
    if (c.has("lambda")) e.lambda = c.real("lambda", 0.0);
    e.lambdas = c.reals("lambdas");
    e.lambda_count = c.small("lambda_count", e.lambda_count);
    e.lambda_min_ratio = c.real("lambda_min_ratio", e.lambda_min_ratio);
    e.lasso.tol = c.real("lasso_tol", e.lasso.tol);
    e.lasso.max_sweeps = c.small("lasso_max_sweeps", e.lasso.max_sweeps);
    e.rank_a = static_cast<Index>(c.count("rank_a", 1));
    e.rank_b = static_cast<Index>(c.count("rank_b", 1));
    e.restarts = c.small("restarts", e.restarts);
    e.seed = c.count("seed", 0);
    e.element_budget = c.real("element_budget", e.element_budget);
    return e;
}

json estimator_json(const EstimatorConfig& e) {
    json j{{"method", method_name(e.method)},
           {"eta", e.eta},
           {"eta_relative", e.eta_relative},
           {"max_iter", e.max_iter},
           {"lambda", e.lambda ? json(*e.lambda) : json(nullptr)},
           {"lambdas", e.lambdas},
           {"lambda_count", e.lambda_count},
           {"lambda_min_ratio", e.lambda_min_ratio},
           {"lasso_tol", e.lasso.tol},
           {"lasso_max_sweeps", e.lasso.max_sweeps},
           {"rank_a", e.rank_a},
           {"rank_b", e.rank_b},
           {"restarts", e.restarts},
           {"seed", e.seed},
           {"element_budget", e.element_budget}};
    return j;
}

LagSpec lag_spec(const Conf& c, Index modes) {
    const auto lags = c.ints("lags", std::vector<int>(static_cast<std::size_t>(modes), 1));
    if (static_cast<Index>(lags.size()) != modes)
        fail(ErrorCode::invalid_argument, "lags has " + std::to_string(lags.size()) + " entries for a " +
                                              std::to_string(modes) + "-mode series");
    return LagSpec(lags);
}

int jobs_of(const Conf& c) { return std::max(1, c.small("jobs", default_jobs())); }

// Spectral radius of the companion of y_t = Theta (y_{t-1} + ... + y_{t-p}).
double repeated_lag_radius(const Eigen::MatrixXd& theta, int p) {
    const Index n = theta.rows();
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(n * p, n * p);
    for (int k = 0; k < p; ++k) f.block(0, n * k, n, n) = theta;
    if (p > 1) f.block(n, 0, n * (p - 1), n * (p - 1)).setIdentity();
    return f.eigenvalues().cwiseAbs().maxCoeff();
}

constexpr Index kCompanionLimit = 3000;

json stationarity(double radius) {
    return json{{"spectral_radius", radius}, {"stationary", radius < 1.0}};
}

json unchecked_stationarity(Index order) {
    return json{{"spectral_radius", nullptr},
                {"stationary", nullptr},
                {"note", "companion order " + std::to_string(order) + " exceeds " + std::to_string(kCompanionLimit)}};
}

void fill_two_mode(blin_fit& out, const InfluenceFit& f, const LagSpec& lags, const LaggedFrame& frame,
                   const EstimatorConfig& cfg, const TensorSeries& series) {
    out.method = f.method;
    out.networks = {f.pair.a(), f.pair.b()};
    out.converged = f.converged;
    const Index s = f.pair.s(), l = f.pair.l();
    Eigen::MatrixXd d(s, l);
    for (Index j = 0; j < l; ++j)
        for (Index i = 0; i < s; ++i)
            d(i, j) = f.method == Method::bilinear ? f.pair.a()(i, i) * f.pair.b()(j, j)
                                                   : f.pair.a()(i, i) + f.pair.b()(j, j);
    out.diag = Eigen::Map<const Eigen::VectorXd>(d.data(), d.size());

    json j;
    j["method"] = method_name(f.method);
    j["dims"] = series.dims();
    j["horizon"] = series.horizon();
    j["rows"] = frame.rows();
    j["lags"] = lags.per_mode();
    j["iterations"] = f.iterations;
    j["converged"] = f.converged;
    j["criterion"] = f.criterion;
    j["criterion_trace"] = f.criterion_trace;
    j["r2_in"] = f.r2_in;
    j["design_rank"] = f.design_rank >= 0 ? json(f.design_rank) : json(nullptr);
    j["canonical_shift"] = f.pair.canonical_shift();
    j["warnings"] = f.warnings;
    if (f.method == Method::sparse) {
        j["lambda"] = f.lambda;
        j["nonzeros"] = f.nonzeros;
    }
    if (f.method == Method::bilinear) {
        j["restart_criteria"] = f.restart_criteria;
        j["best_restart"] = f.best_restart;
    }
    const Index n = s * l;
    if (f.method == Method::bilinear) {
        const Index order = n * lags.p_a();
        j["stationarity"] = order > kCompanionLimit
                                ? unchecked_stationarity(order)
                                : stationarity(repeated_lag_radius(var_matrix(f.pair, Generator::bilinear), lags.p_a()));
    } else {
        const Index order = n * lags.p();
        j["stationarity"] = order > kCompanionLimit ? unchecked_stationarity(order)
                                                    : stationarity(companion(f.pair, lags).spectral_radius);
    }
    j["config"] = estimator_json(cfg);
    out.summary = std::move(j);
}

void fill_multi(blin_fit& out, const MultiFit& f, const MultiFrame& frame, const EstimatorConfig& cfg,
                const TensorSeries& series, const json& selection) {
    out.method = f.method;
    out.networks = f.networks;
    out.converged = f.converged;
    out.diag = f.diag_effect;
    json j;
    j["method"] = method_name(f.method);
    j["dims"] = series.dims();
    j["horizon"] = series.horizon();
    j["rows"] = frame.rows();
    j["lags"] = f.lags;
    j["iterations"] = f.iterations;
    j["converged"] = f.converged;
    j["criterion"] = f.criterion;
    j["criterion_trace"] = f.criterion_trace;
    j["r2_in"] = f.r2_in;
    j["design_rank"] = f.design_rank >= 0 ? json(f.design_rank) : json(nullptr);
    j["warnings"] = f.warnings;
    if (f.method == Method::sparse) {
        j["lambda"] = f.lambda;
        j["nonzeros"] = f.nonzeros;
        if (!selection.is_null()) j["lambda_selection"] = selection;
    }
    const Index order = element_count(series.dims()) * LagSpec(f.lags).p();
    j["stationarity"] = order > kCompanionLimit ? unchecked_stationarity(order)
                                                : stationarity(multi_companion(f.networks, f.lags).spectral_radius);
    j["config"] = estimator_json(cfg);
    out.summary = std::move(j);
}

// Multiway sparse fits without a fixed lambda take the AIC-hat minimizer
// along the path.
MultiFit multi_sparse_by_aic(const MultiFrame& frame, const EstimatorConfig& cfg, json& selection) {
    const auto path = fit_multiblin_sparse_path(frame, cfg);
    const Index n = frame.rows() * element_count(frame.dims);
    std::size_t best = 0;
    double best_aic = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < path.size(); ++i) {
        if (!(path[i].criterion > 0.0)) continue;
        const double aic = aic_hat(path[i].nonzeros, n, path[i].criterion);
        if (aic < best_aic) {
            best_aic = aic;
            best = i;
        }
    }
    selection = json{{"rule", "aic_hat"}, {"aic_hat", std::isfinite(best_aic) ? json(best_aic) : json(nullptr)},
                     {"path_length", path.size()}};
    return path.at(best);
}

const TensorSeries& two_mode(const blin_series* s) {
    need(s, "series");
    if (s->series.modes() != 2) fail(ErrorCode::shape, "this operation needs a two-mode series");
    return s->series;
}

SimulationSpec simulation_spec(const Conf& c) {
    SimulationSpec spec;
    spec.generator = parse_generator(c.text("generator", "blin"));
    spec.s = static_cast<Index>(c.count("s", 10));
    spec.l = static_cast<Index>(c.count("l", 10));
    spec.q_sparsity = c.real("q_sparsity", spec.q_sparsity);
    spec.target_r2 = c.real("target_r2", spec.target_r2);
    spec.horizon = static_cast<Index>(c.count("horizon", 50));
    if (c.has("burn_in")) spec.burn_in = static_cast<Index>(c.count("burn_in", 0));
    spec.seed = c.count("seed", 0);
    spec.validate();
    return spec;
}

json spec_json(const SimulationSpec& spec) {
    return json{{"generator", generator_name(spec.generator)},
                {"s", spec.s},
                {"l", spec.l},
                {"q_sparsity", spec.q_sparsity},
                {"target_r2", spec.target_r2},
                {"horizon", spec.horizon},
                {"burn_in", spec.effective_burn_in()},
                {"seed", spec.seed}};
}

void copy_out(const double* src, std::size_t n, double* out, std::size_t cap, std::size_t* len) {
    if (len) *len = n;
    if (!out) return;
    if (cap < n) fail(ErrorCode::shape, "output buffer holds " + std::to_string(cap) + " values, need " + std::to_string(n));
    std::copy(src, src + n, out);
}

}  // namespace

extern "C" {

const char* blin_version(void) { return "1.0.0"; }

const char* blin_status_name(int status) {
    switch (status) {
        case BLIN_OK: return "ok";
        case BLIN_ERR_INVALID_ARGUMENT: return "invalid_argument";
        case BLIN_ERR_SHAPE: return "shape";
        case BLIN_ERR_INDEX: return "index";
        case BLIN_ERR_INSUFFICIENT_DATA: return "insufficient_data";
        case BLIN_ERR_BUDGET_EXCEEDED: return "budget_exceeded";
        case BLIN_ERR_NON_STATIONARY: return "non_stationary";
        case BLIN_ERR_UNREACHABLE_TARGET: return "unreachable_target";
        case BLIN_ERR_PARSE: return "parse";
        case BLIN_ERR_IO: return "io";
        case BLIN_ERR_DEGENERATE: return "degenerate";
        case BLIN_ERR_INTERNAL: return "internal";
        default: return "unknown";
    }
}

const char* blin_last_error(void) { return g_last_error.c_str(); }

void blin_string_free(char* s) { std::free(s); }

int blin_series_new(const size_t* dims, size_t modes, size_t horizon, const double* data, blin_series** out) {
    return guard([&] {
        need(dims, "dims");
        need(out, "out");
        *out = nullptr;
        if (modes < 1) fail(ErrorCode::invalid_argument, "a series needs at least one mode");
        std::vector<Index> d(dims, dims + modes);
        const Index n = element_count(d);
        if (horizon > 0) need(data, "data");
        std::vector<Eigen::VectorXd> slices;
        for (size_t t = 0; t < horizon; ++t)
            slices.emplace_back(Eigen::Map<const Eigen::VectorXd>(data + static_cast<Index>(t) * n, n));
        *out = new blin_series{TensorSeries(d, std::move(slices))};
    });
}

int blin_series_gaussian(const size_t* dims, size_t modes, size_t horizon, uint64_t seed, uint64_t stream,
                         blin_series** out) {
    return guard([&] {
        need(dims, "dims");
        need(out, "out");
        *out = nullptr;
        std::vector<Index> d(dims, dims + modes);
        Rng rng(seed, stream);
        std::vector<Eigen::VectorXd> slices;
        for (size_t t = 0; t < horizon; ++t) slices.push_back(rng.normal_vector(element_count(d)));
        *out = new blin_series{TensorSeries(d, std::move(slices))};
    });
}

void blin_series_free(blin_series* s) { delete s; }

int blin_series_shape(const blin_series* s, size_t* modes, size_t* dims, size_t cap, size_t* horizon) {
    return guard([&] {
        need(s, "series");
        const auto& d = s->series.dims();
        if (modes) *modes = d.size();
        if (horizon) *horizon = static_cast<size_t>(s->series.horizon());
        if (dims) {
            if (cap < d.size()) fail(ErrorCode::shape, "dims buffer is too small");
            for (std::size_t k = 0; k < d.size(); ++k) dims[k] = static_cast<size_t>(d[k]);
        }
    });
}

int blin_series_data(const blin_series* s, double* out, size_t cap, size_t* len) {
    return guard([&] {
        need(s, "series");
        const Index n = s->series.slice_size();
        const auto total = static_cast<size_t>(n * s->series.horizon());
        if (len) *len = total;
        if (!out) return;
        if (cap < total) fail(ErrorCode::shape, "output buffer is too small");
        for (Index t = 0; t < s->series.horizon(); ++t)
            std::copy(s->series.slice(t).data(), s->series.slice(t).data() + n, out + t * n);
    });
}

int blin_series_read_csv(const char* path, int difference, int center, int standardize, int strict,
                         const char* label_map_path, blin_series** out, char** report_json) {
    return guard([&] {
        need(path, "path");
        need(out, "out");
        *out = nullptr;
        IngestOptions opts;
        opts.difference = difference != 0;
        opts.center = center != 0;
        opts.standardize = standardize != 0;
        opts.strict = strict != 0;
        if (label_map_path) opts.label_maps = read_label_map(label_map_path);
        Ingested in = ingest_csv(path, opts);
        const auto& r = in.report;
        json j{{"path", path},
               {"records", r.records},
               {"filled", r.filled},
               {"first_time", r.first_time},
               {"last_time", r.last_time},
               {"labels", r.labels},
               {"transforms", r.transforms},
               {"dims", in.series.dims()},
               {"horizon", in.series.horizon()}};
        auto* handle = new blin_series{std::move(in.series)};
        try {
            put(report_json, j.dump(2));
        } catch (...) {
            delete handle;
            throw;
        }
        *out = handle;
    });
}

int blin_series_write_csv(const blin_series* s, const char* path) {
    return guard([&] {
        need(s, "series");
        need(path, "path");
        write_series_csv(s->series, path);
    });
}

int blin_series_difference(const blin_series* s, blin_series** out) {
    return guard([&] {
        need(s, "series");
        need(out, "out");
        *out = new blin_series{difference(s->series)};
    });
}

int blin_config_new(blin_config** out) {
    return guard([&] {
        need(out, "out");
        *out = new blin_config;
    });
}

void blin_config_free(blin_config* c) { delete c; }

int blin_config_set(blin_config* c, const char* key, const char* value) {
    return guard([&] {
        need(c, "config");
        need(key, "key");
        need(value, "value");
        const auto it = key_kinds().find(key);
        if (it == key_kinds().end()) fail(ErrorCode::invalid_argument, std::string("unknown configuration key '") + key + "'");
        check_value(key, it->second, value);
        c->values[key] = value;
    });
}

int blin_config_json(const blin_config* c, char** out) {
    return guard([&] {
        need(c, "config");
        need(out, "out");
        json j = json::object();
        for (const auto& [k, v] : c->values) j[k] = v;
        *out = dup_string(j.dump(2));
    });
}

int blin_config_ini(const blin_config* c, char** out) {
    return guard([&] {
        need(c, "config");
        need(out, "out");
        std::string s;
        for (const auto& [k, v] : c->values) s += k + " = " + v + "\n";
        *out = dup_string(s);
    });
}

const char* blin_config_keys(void) {
    static const std::string keys = [] {
        std::string s;
        for (const auto& kv : key_kinds()) s += kv.first + "\n";
        return s;
    }();
    return keys.c_str();
}

int blin_fit_series(const blin_series* s, const blin_config* c, blin_fit** out) {
    return guard([&] {
        need(s, "series");
        need(out, "out");
        *out = nullptr;
        const Conf conf = conf_of(c);
        const TensorSeries& series = s->series;
        const EstimatorConfig cfg = estimator_config(conf);
        const LagSpec lags = lag_spec(conf, series.modes());
        auto fit = std::make_unique<blin_fit>();
        if (series.modes() == 2) {
            cfg.validate(series.dims()[0], series.dims()[1]);
            const LaggedFrame frame = make_frame(series, lags);
            InfluenceFit f = cfg.method == Method::sparse
                                 ? fit_sparse_cv(frame, cfg, conf.small("inner_folds", 10), cfg.seed)
                                 : blin::fit(frame, cfg);
            fill_two_mode(*fit, f, lags, frame, cfg, series);
            if (cfg.method == Method::sparse && !cfg.lambda)
                fit->summary["lambda_selection"] = json{{"rule", "cv"}, {"folds", conf.small("inner_folds", 10)}};
        } else if (series.modes() == 3) {
            if (cfg.method != Method::bcd && cfg.method != Method::exact && cfg.method != Method::sparse)
                fail(ErrorCode::invalid_argument, std::string("three-mode series do not support method ") +
                                                      method_name(cfg.method));
            const MultiFrame frame = make_multi_frame(series, lags);
            json selection;
            MultiFit f = cfg.method == Method::sparse && !cfg.lambda ? multi_sparse_by_aic(frame, cfg, selection)
                                                                     : fit_multiblin(frame, cfg);
            fill_multi(*fit, f, frame, cfg, series, selection);
        } else {
            fail(ErrorCode::shape, "fits need a two- or three-mode series");
        }
        *out = fit.release();
    });
}

void blin_fit_free(blin_fit* f) { delete f; }

int blin_fit_modes(const blin_fit* f, size_t* modes) {
    return guard([&] {
        need(f, "fit");
        need(modes, "modes");
        *modes = f->networks.size();
    });
}

int blin_fit_network(const blin_fit* f, size_t k, double* out, size_t cap, size_t* dim) {
    return guard([&] {
        need(f, "fit");
        if (k >= f->networks.size()) fail(ErrorCode::index, "network index out of range");
        const auto& m = f->networks[k];
        if (dim) *dim = static_cast<size_t>(m.rows());
        copy_out(m.data(), static_cast<std::size_t>(m.size()), out, cap, nullptr);
    });
}

int blin_fit_diag_effect(const blin_fit* f, double* out, size_t cap, size_t* len) {
    return guard([&] {
        need(f, "fit");
        copy_out(f->diag.data(), static_cast<std::size_t>(f->diag.size()), out, cap, len);
    });
}

int blin_fit_converged(const blin_fit* f, int* converged) {
    return guard([&] {
        need(f, "fit");
        need(converged, "converged");
        *converged = f->converged ? 1 : 0;
    });
}

int blin_fit_summary_json(const blin_fit* f, char** out) {
    return guard([&] {
        need(f, "fit");
        need(out, "out");
        *out = dup_string(f->summary.dump(2));
    });
}

int blin_simulate(const blin_config* c, blin_series** out, blin_fit** truth, char** summary_json) {
    return guard([&] {
        need(out, "out");
        *out = nullptr;
        if (truth) *truth = nullptr;
        const Conf conf = conf_of(c);
        const SimulationSpec spec = simulation_spec(conf);
        const std::uint64_t replication = conf.count("replication", 0);
        const InfluencePair pair0 = make_influence_pair(spec.s, spec.l, spec.q_sparsity, spec.seed);
        const Calibration cal = calibrate_snr(spec, pair0);
        auto series = std::make_unique<blin_series>(blin_series{generate(spec, cal.pair, replication)});

        json j{{"spec", spec_json(spec)},
               {"replication", replication},
               {"scale", cal.scale},
               {"r2", cal.r2},
               {"scale_limit", cal.scale_limit},
               {"spectral_radius", var_spectral_radius(cal.pair, spec.generator)}};
        std::unique_ptr<blin_fit> t;
        if (truth) {
            t = std::make_unique<blin_fit>();
            t->method = spec.generator == Generator::bilinear ? Method::bilinear : Method::exact;
            t->networks = {cal.pair.a(), cal.pair.b()};
            t->converged = true;
            Eigen::MatrixXd d(spec.s, spec.l);
            for (Index jj = 0; jj < spec.l; ++jj)
                for (Index i = 0; i < spec.s; ++i)
                    d(i, jj) = spec.generator == Generator::bilinear ? cal.pair.a()(i, i) * cal.pair.b()(jj, jj)
                                                                     : cal.pair.a()(i, i) + cal.pair.b()(jj, jj);
            t->diag = Eigen::Map<const Eigen::VectorXd>(d.data(), d.size());
            t->summary = json{{"truth", true}, {"generator", generator_name(spec.generator)}, {"calibration", j}};
        }
        put(summary_json, j.dump(2));
        *out = series.release();
        if (truth) *truth = t.release();
    });
}

int blin_cv(const blin_series* s, const blin_config* c, char** report_json) {
    return guard([&] {
        need(report_json, "report_json");
        const TensorSeries& series = two_mode(s);
        const Conf conf = conf_of(c);
        const EstimatorConfig base = estimator_config(conf);
        const LagSpec lags = lag_spec(conf, 2);
        std::vector<EstimatorConfig> configs;
        for (const auto& m : conf.list("methods", {"exact", "sparse"})) {
            EstimatorConfig e = base;
            e.method = parse_method(m);
            e.validate(series.dims()[0], series.dims()[1]);
            configs.push_back(e);
        }
        CvOptions opts;
        opts.folds = conf.small("folds", 10);
        opts.seed = conf.count("seed", 0);
        opts.inner_folds = conf.small("inner_folds", 10);
        opts.in_sample = conf.boolean("in_sample", true);
        opts.jobs = jobs_of(conf);
        const CvReport rep = kfold_cv(series, lags, configs, opts);
        json methods = json::array();
        for (const auto& m : rep.methods) {
            methods.push_back(json{{"method", method_name(m.config.method)},
                                   {"r2_out", m.r2_out},
                                   {"r2_in", opts.in_sample ? json(m.r2_in) : json(nullptr)},
                                   {"fold_lambdas", m.fold_lambdas},
                                   {"nonconverged_folds", m.nonconverged_folds}});
        }
        json j{{"folds", rep.folds},
               {"seed", opts.seed},
               {"inner_folds", opts.inner_folds},
               {"lags", lags.per_mode()},
               {"times", rep.times},
               {"assignment", rep.assignment},
               {"methods", methods},
               {"config", estimator_json(base)}};
        *report_json = dup_string(j.dump(2));
    });
}

int blin_lagselect(const blin_series* s, const blin_config* c, const int* max_lags, size_t modes,
                   char** table_json) {
    return guard([&] {
        need(s, "series");
        need(max_lags, "max_lags");
        need(table_json, "table_json");
        if (static_cast<Index>(modes) != s->series.modes())
            fail(ErrorCode::shape, "max_lags needs one entry per mode of the series");
        std::vector<std::vector<int>> grid{{}};
        for (size_t k = 0; k < modes; ++k) {
            if (max_lags[k] < 1) fail(ErrorCode::invalid_argument, "maximum lags must be >= 1");
            std::vector<std::vector<int>> next;
            for (const auto& cell : grid)
                for (int p = 1; p <= max_lags[k]; ++p) {
                    auto e = cell;
                    e.push_back(p);
                    next.push_back(std::move(e));
                }
            grid = std::move(next);
        }
        const Conf conf = conf_of(c);
        EstimatorConfig cfg = estimator_config(conf, Method::sparse);
        cfg.method = Method::sparse;
        cfg.lambda.reset();
        const auto cells = aic_select(s->series, grid, cfg, jobs_of(conf));
        json rows = json::array();
        for (const auto& cell : cells)
            rows.push_back(json{{"lags", cell.lags},
                                {"aic_hat", cell.flagged ? json(nullptr) : json(cell.aic)},
                                {"r2", cell.r2},
                                {"nonzeros", cell.nonzeros},
                                {"lambda", cell.lambda},
                                {"rss", cell.rss},
                                {"flagged", cell.flagged}});
        json j{{"max_lags", std::vector<int>(max_lags, max_lags + modes)},
               {"first_time", *std::max_element(max_lags, max_lags + modes)},
               {"cells", rows},
               {"config", estimator_json(cfg)}};
        *table_json = dup_string(j.dump(2));
    });
}

int blin_convergence_study(const blin_config* c, char** records_csv, char** summary_json) {
    return guard([&] {
        const Conf conf = conf_of(c);
        StudyConfig cfg;
        cfg.s = static_cast<Index>(conf.count("s", 10));
        cfg.l = static_cast<Index>(conf.count("l", 9));
        cfg.horizons.clear();
        for (int h : conf.ints("horizons", {100, 316, 1000, 3162})) {
            if (h < 1) fail(ErrorCode::invalid_argument, "horizons must be positive");
            cfg.horizons.push_back(h);
        }
        cfg.reps = conf.small("reps", 50);
        cfg.generators.clear();
        for (const auto& g : conf.list("generators", {"blin", "bilinear"})) cfg.generators.push_back(parse_generator(g));
        cfg.methods.clear();
        for (const auto& m : conf.list("study_methods", {"exact", "bilinear"})) cfg.methods.push_back(parse_method(m));
        cfg.seed = conf.count("seed", 0);
        cfg.estimator = estimator_config(conf);
        cfg.jobs = jobs_of(conf);
        const StudyResult res = convergence_study(cfg);

        std::string csv = "generator,method,T,rep,converged,mse_a,mse_b,mse_diag\n";
        for (const auto& r : res.records) {
            csv += std::string(generator_name(r.generator)) + "," + method_name(r.method) + "," +
                   std::to_string(r.horizon) + "," + std::to_string(r.rep) + "," + (r.converged ? "1" : "0") + "," +
                   format_double(r.mse_a) + "," + format_double(r.mse_b) + "," + format_double(r.mse_diag) + "\n";
        }
        auto slope = [](const SlopeFit& f) {
            return json{{"slope", f.slope}, {"se", f.se}, {"intercept", f.intercept}, {"points", f.points}};
        };
        json cells = json::array();
        for (const auto& cell : res.cells)
            cells.push_back(json{{"generator", generator_name(cell.generator)},
                                 {"method", method_name(cell.method)},
                                 {"offdiag_a", slope(cell.a)},
                                 {"offdiag_b", slope(cell.b)},
                                 {"diagonal", slope(cell.diag)},
                                 {"excluded", cell.excluded}});
        std::vector<std::string> gens, methods;
        for (auto g : cfg.generators) gens.push_back(generator_name(g));
        for (auto m : cfg.methods) methods.push_back(method_name(m));
        json j{{"s", cfg.s},
               {"l", cfg.l},
               {"horizons", cfg.horizons},
               {"reps", cfg.reps},
               {"generators", gens},
               {"methods", methods},
               {"seed", cfg.seed},
               {"cells", cells},
               {"config", estimator_json(cfg.estimator)}};
        put(records_csv, csv);
        put(summary_json, j.dump(2));
    });
}

int blin_line_scan(const blin_config* c, char** csv) {
    return guard([&] {
        need(csv, "csv");
        const Conf conf = conf_of(c);
        SimulationSpec spec = simulation_spec(conf);
        const InfluencePair pair = calibrate_snr(spec, make_influence_pair(spec.s, spec.l, spec.q_sparsity, spec.seed)).pair;
        const LaggedFrame train = make_frame(generate(spec, pair, 0), LagSpec(1, 1));
        SimulationSpec test_spec = spec;
        test_spec.horizon = static_cast<Index>(conf.count("test_horizon", 1000));
        test_spec.validate();
        const LaggedFrame test = make_frame(generate(test_spec, pair, 1), LagSpec(1, 1));
        EstimatorConfig cfg = estimator_config(conf);
        cfg.method = spec.generator == Generator::bilinear ? Method::bilinear : Method::exact;
        const InfluenceFit f = blin::fit(train, cfg);
        const int points = conf.small("scan_points", 21);
        if (points < 2) fail(ErrorCode::invalid_argument, "scan_points must be >= 2");
        std::vector<double> xi;
        for (int i = 0; i < points; ++i) xi.push_back(static_cast<double>(i) / (points - 1));
        const auto scan =
            likelihood_line_scan(train, test, pair, f.pair, xi, spec.generator, conf.boolean("align_gauge", true));
        std::string out = "xi,r2_in,r2_out\n";
        for (const auto& p : scan) out += format_double(p.xi) + "," + format_double(p.r2_in) + "," + format_double(p.r2_out) + "\n";
        *csv = dup_string(out);
    });
}

int blin_rank_check(const blin_series* s, const blin_config* c, char** report_json) {
    return guard([&] {
        need(report_json, "report_json");
        const TensorSeries& series = two_mode(s);
        const Conf conf = conf_of(c);
        const LagSpec lags = lag_spec(conf, 2);
        const RankReport r = design_rank_check(series, lags, conf.real("element_budget", kDefaultElementBudget));
        json j{{"checked", r.checked},
               {"rank", r.rank},
               {"parameters", r.parameters},
               {"identified", r.parameters - 1},
               {"rows", r.rows},
               {"unique", r.unique},
               {"gap", std::isfinite(r.gap) ? json(r.gap) : json("inf")},
               {"note", r.note},
               {"dims", series.dims()},
               {"horizon", series.horizon()},
               {"lags", lags.per_mode()}};
        *report_json = dup_string(j.dump(2));
    });
}

}  // extern "C"
