// blin: command-line front end over the C API.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "blin/blin.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kRuntime = 1, kUsage = 2 };

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ApiError : std::runtime_error {
    int status;
    ApiError(int s, const std::string& what) : std::runtime_error(what), status(s) {}
};

void check(int status, const char* call) {
    if (status != BLIN_OK) throw ApiError(status, std::string(call) + ": " + blin_last_error());
}

std::string take(char* s) {
    std::string out = s ? s : "";
    blin_string_free(s);
    return out;
}

struct SeriesDel {
    void operator()(blin_series* s) const { blin_series_free(s); }
};
struct FitDel {
    void operator()(blin_fit* f) const { blin_fit_free(f); }
};
struct ConfigDel {
    void operator()(blin_config* c) const { blin_config_free(c); }
};
using Series = std::unique_ptr<blin_series, SeriesDel>;
using Fit = std::unique_ptr<blin_fit, FitDel>;
using Config = std::unique_ptr<blin_config, ConfigDel>;

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Temporary file next to the target, then rename.
void write_atomic(const fs::path& path, const std::string& content) {
    std::random_device rd;
    const fs::path tmp = path.string() + ".tmp" + std::to_string(rd());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ApiError(BLIN_ERR_IO, "cannot open " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw ApiError(BLIN_ERR_IO, "write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw ApiError(BLIN_ERR_IO, "cannot rename onto " + path.string());
    }
}

std::string matrix_csv(const std::vector<double>& v, size_t rows, size_t cols) {
    std::string out;
    for (size_t i = 0; i < rows; ++i) {
        for (size_t j = 0; j < cols; ++j) {
            if (j) out += ',';
            out += fmt17(v[i + rows * j]);
        }
        out += '\n';
    }
    return out;
}

fs::path ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ApiError(BLIN_ERR_IO, "cannot create directory " + dir);
    return fs::path(dir);
}

// Options that map onto configuration keys. Config-file values are applied
// first and flags given on the command line override them.
struct Keyed {
    std::string key;
    std::string value;
    CLI::Option* opt = nullptr;
};

struct Command {
    explicit Command(CLI::App* a) : app(a) {}

    CLI::App* app;
    std::vector<std::unique_ptr<Keyed>> keys;

    void key(const std::string& flag, const std::string& key, const std::string& help) {
        auto k = std::make_unique<Keyed>();
        k->key = key;
        k->opt = app->add_option(flag, k->value, help);
        keys.push_back(std::move(k));
    }
};

struct Ingest {
    std::string input;
    bool difference = false, center = false, standardize = false;
    std::string label_map;

    void add(CLI::App* app, bool required) {
        auto* o = app->add_option("--input,-i", input, "long-format CSV t,i,j[,k],value");
        if (required) o->required();
        app->add_flag("--difference", difference, "model first differences");
        app->add_flag("--center", center, "subtract per-cell time means");
        app->add_flag("--standardize", standardize, "center and scale per cell to unit SD");
        app->add_option("--label-map", label_map, "mode,label lines fixing label order");
    }
};

struct Globals {
    std::string config_file;
    bool strict = false;
    bool allow_nonconverged = false;
    bool error_json = false;
};

void apply_config_file(const std::string& path, const std::string& section, blin_config* cfg) {
    if (path.empty()) return;
    if (!fs::exists(path)) throw UsageError("config file not found: " + path);
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigINI().from_file(path);
    } catch (const CLI::Error& e) {
        throw UsageError(std::string("config file: ") + e.what());
    }
    for (const auto& item : items) {
        if (!item.parents.empty() && !(item.parents.size() == 1 && item.parents[0] == section)) continue;
        if (item.name == "++" || item.name == "--") continue;
        std::string value;
        for (std::size_t i = 0; i < item.inputs.size(); ++i) value += (i ? "," : "") + item.inputs[i];
        if (blin_config_set(cfg, item.name.c_str(), value.c_str()) != BLIN_OK)
            throw UsageError(std::string("config file: ") + blin_last_error());
    }
}

Config resolve(const Command& cmd, const Globals& g) {
    blin_config* raw = nullptr;
    check(blin_config_new(&raw), "blin_config_new");
    Config cfg(raw);
    apply_config_file(g.config_file, cmd.app->get_name(), cfg.get());
    for (const auto& k : cmd.keys) {
        if (k->opt->count() == 0) continue;
        if (blin_config_set(cfg.get(), k->key.c_str(), k->value.c_str()) != BLIN_OK)
            throw UsageError(k->opt->get_name() + ": " + blin_last_error());
    }
    return cfg;
}

json settings_json(const blin_config* cfg) {
    char* s = nullptr;
    check(blin_config_json(cfg, &s), "blin_config_json");
    return json::parse(take(s));
}

Series read_series(const Ingest& in, const Globals& g, json& report) {
    blin_series* s = nullptr;
    char* rep = nullptr;
    check(blin_series_read_csv(in.input.c_str(), in.difference, in.center, in.standardize, g.strict,
                               in.label_map.empty() ? nullptr : in.label_map.c_str(), &s, &rep),
          "read");
    report = json::parse(take(rep));
    return Series(s);
}

// Writes A.csv, B.csv, C.csv and diag_effect.csv (mode-1 unfolding for three
// modes) into dir.
void write_networks(const blin_fit* fit, const fs::path& dir, const std::string& suffix) {
    size_t modes = 0;
    check(blin_fit_modes(fit, &modes), "modes");
    const char* names[] = {"A", "B", "C"};
    std::vector<size_t> dims;
    for (size_t k = 0; k < modes && k < 3; ++k) {
        size_t n = 0;
        check(blin_fit_network(fit, k, nullptr, 0, &n), "network");
        std::vector<double> v(n * n);
        check(blin_fit_network(fit, k, v.data(), v.size(), &n), "network");
        write_atomic(dir / (std::string(names[k]) + suffix + ".csv"), matrix_csv(v, n, n));
        dims.push_back(n);
    }
    size_t len = 0;
    check(blin_fit_diag_effect(fit, nullptr, 0, &len), "diag_effect");
    std::vector<double> d(len);
    check(blin_fit_diag_effect(fit, d.data(), d.size(), &len), "diag_effect");
    write_atomic(dir / ("diag_effect" + suffix + ".csv"), matrix_csv(d, dims[0], len / dims[0]));
}

int cmd_simulate(const Command& cmd, const Globals& g, const std::string& out) {
    Config cfg = resolve(cmd, g);
    blin_series* s = nullptr;
    blin_fit* truth = nullptr;
    char* summary = nullptr;
    check(blin_simulate(cfg.get(), &s, &truth, &summary), "simulate");
    Series series(s);
    Fit fit(truth);
    json j = json::parse(take(summary));
    const fs::path dir = ensure_dir(out);
    check(blin_series_write_csv(series.get(), (dir / "series.csv").c_str()), "write series");
    write_networks(fit.get(), dir, "_true");
    std::string ini;
    for (const auto& [k, v] : j["spec"].items()) ini += k + " = " + (v.is_string() ? v.get<std::string>() : v.dump()) + "\n";
    ini += "replication = " + j["replication"].dump() + "\n";
    write_atomic(dir / "spec.ini", ini);
    j["settings"] = settings_json(cfg.get());
    write_atomic(dir / "calibration.json", j.dump(2) + "\n");
    return kOk;
}

int cmd_fit(const Command& cmd, const Globals& g, const Ingest& in, const std::string& out) {
    Config cfg = resolve(cmd, g);
    json report;
    Series series = read_series(in, g, report);
    blin_fit* raw = nullptr;
    check(blin_fit_series(series.get(), cfg.get(), &raw), "fit");
    Fit fit(raw);
    char* summary = nullptr;
    check(blin_fit_summary_json(fit.get(), &summary), "summary");
    json manifest = json::parse(take(summary));
    int converged = 0;
    check(blin_fit_converged(fit.get(), &converged), "converged");
    const fs::path dir = ensure_dir(out);
    write_networks(fit.get(), dir, "");
    manifest["input"] = report;
    manifest["settings"] = settings_json(cfg.get());
    manifest["allow_nonconverged"] = g.allow_nonconverged;
    write_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
    if (!converged && !g.allow_nonconverged) {
        std::cerr << "blin: fit did not converge (outputs written; pass --allow-nonconverged to accept)\n";
        return kRuntime;
    }
    return kOk;
}

int cmd_cv(const Command& cmd, const Globals& g, const Ingest& in, const std::string& out) {
    Config cfg = resolve(cmd, g);
    json report;
    Series series = read_series(in, g, report);
    char* rep = nullptr;
    check(blin_cv(series.get(), cfg.get(), &rep), "cv");
    json j = json::parse(take(rep));
    const fs::path dir = ensure_dir(out);
    std::string folds = "t,fold\n";
    for (std::size_t r = 0; r < j["times"].size(); ++r)
        folds += j["times"][r].dump() + "," + j["assignment"][r].dump() + "\n";
    write_atomic(dir / "folds.csv", folds);
    std::string table = "method,r2_out,r2_in,nonconverged_folds\n";
    int nonconverged = 0;
    for (const auto& m : j["methods"]) {
        table += m["method"].get<std::string>() + "," + fmt17(m["r2_out"].get<double>()) + "," +
                 (m["r2_in"].is_null() ? std::string("") : fmt17(m["r2_in"].get<double>())) + "," +
                 m["nonconverged_folds"].dump() + "\n";
        nonconverged += m["nonconverged_folds"].get<int>();
    }
    write_atomic(dir / "cv.csv", table);
    j["input"] = report;
    j["settings"] = settings_json(cfg.get());
    write_atomic(dir / "cv.json", j.dump(2) + "\n");
    if (nonconverged > 0 && !g.allow_nonconverged) {
        std::cerr << "blin: " << nonconverged << " fold fits did not converge\n";
        return kRuntime;
    }
    return kOk;
}

std::vector<int> parse_int_list(const std::string& s, const char* what) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t pos = 0;
            out.push_back(std::stoi(item, &pos));
            if (pos != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw UsageError(std::string(what) + ": '" + s + "' is not a comma-separated integer list");
        }
    }
    if (out.empty()) throw UsageError(std::string(what) + " is empty");
    return out;
}

int cmd_lagselect(const Command& cmd, const Globals& g, const Ingest& in, const std::string& out,
                  const std::string& max_lags) {
    Config cfg = resolve(cmd, g);
    json report;
    Series series = read_series(in, g, report);
    const auto maxima = parse_int_list(max_lags, "--max-lags");
    char* tab = nullptr;
    check(blin_lagselect(series.get(), cfg.get(), maxima.data(), maxima.size(), &tab), "lagselect");
    json j = json::parse(take(tab));
    const fs::path dir = ensure_dir(out);
    std::string csv = "rank,lags,aic_hat,r2,nonzeros,lambda,flagged\n";
    int rank = 1;
    for (const auto& c : j["cells"]) {
        std::string lags;
        for (const auto& p : c["lags"]) lags += (lags.empty() ? "" : " ") + p.dump();
        csv += std::to_string(rank++) + "," + lags + "," +
               (c["aic_hat"].is_null() ? std::string("") : fmt17(c["aic_hat"].get<double>())) + "," +
               fmt17(c["r2"].get<double>()) + "," + c["nonzeros"].dump() + "," + fmt17(c["lambda"].get<double>()) +
               "," + (c["flagged"].get<bool>() ? "1" : "0") + "\n";
    }
    write_atomic(dir / "lagselect.csv", csv);
    j["input"] = report;
    j["settings"] = settings_json(cfg.get());
    write_atomic(dir / "lagselect.json", j.dump(2) + "\n");
    return kOk;
}

int cmd_study(const Command& cmd, const Globals& g, const std::string& out) {
    Config cfg = resolve(cmd, g);
    char* records = nullptr;
    char* summary = nullptr;
    check(blin_convergence_study(cfg.get(), &records, &summary), "study-convergence");
    const std::string csv = take(records);
    json j = json::parse(take(summary));
    const fs::path dir = ensure_dir(out);
    write_atomic(dir / "records.csv", csv);
    std::string slopes = "generator,method,target,slope,se,points,excluded\n";
    for (const auto& c : j["cells"])
        for (const char* target : {"offdiag_a", "offdiag_b", "diagonal"})
            slopes += c["generator"].get<std::string>() + "," + c["method"].get<std::string>() + "," + target + "," +
                      fmt17(c[target]["slope"].get<double>()) + "," + fmt17(c[target]["se"].get<double>()) + "," +
                      c[target]["points"].dump() + "," + c["excluded"].dump() + "\n";
    write_atomic(dir / "slopes.csv", slopes);
    j["settings"] = settings_json(cfg.get());
    write_atomic(dir / "summary.json", j.dump(2) + "\n");
    int excluded = 0;
    for (const auto& c : j["cells"]) excluded += c["excluded"].get<int>();
    if (excluded > 0 && !g.allow_nonconverged) {
        std::cerr << "blin: " << excluded << " study fits did not converge\n";
        return kRuntime;
    }
    return kOk;
}

int cmd_scan(const Command& cmd, const Globals& g, const std::string& out) {
    Config cfg = resolve(cmd, g);
    char* csv = nullptr;
    check(blin_line_scan(cfg.get(), &csv), "scan");
    const fs::path dir = ensure_dir(out);
    write_atomic(dir / "scan.csv", take(csv));
    write_atomic(dir / "scan.json", json{{"settings", settings_json(cfg.get())}}.dump(2) + "\n");
    return kOk;
}

int cmd_rankcheck(const Command& cmd, const Globals& g, const Ingest& in, const std::string& dims_text,
                  const std::string& out) {
    Config cfg = resolve(cmd, g);
    Series series;
    json report;
    if (!in.input.empty()) {
        series = read_series(in, g, report);
    } else {
        if (dims_text.empty()) throw UsageError("rankcheck needs --input or --dims S,L,T");
        const auto d = parse_int_list(dims_text, "--dims");
        if (d.size() != 3 || d[0] < 1 || d[1] < 1 || d[2] < 1) throw UsageError("--dims takes S,L,T");
        const size_t dims[2] = {static_cast<size_t>(d[0]), static_cast<size_t>(d[1])};
        std::uint64_t seed = 0;
        char* js = nullptr;
        check(blin_config_json(cfg.get(), &js), "config");
        const json settings = json::parse(take(js));
        if (settings.contains("seed")) seed = std::stoull(settings["seed"].get<std::string>());
        blin_series* raw = nullptr;
        check(blin_series_gaussian(dims, 2, static_cast<size_t>(d[2]), seed, 0, &raw), "gaussian");
        series.reset(raw);
    }
    char* rep = nullptr;
    check(blin_rank_check(series.get(), cfg.get(), &rep), "rankcheck");
    json j = json::parse(take(rep));
    if (!report.is_null()) j["input"] = report;
    if (out.empty()) {
        std::cout << j.dump(2) << "\n";
    } else {
        const fs::path dir = ensure_dir(out);
        write_atomic(dir / "rankcheck.json", j.dump(2) + "\n");
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bipartite longitudinal influence network estimation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(blin_version()));
    Globals g;
    app.add_option("--config", g.config_file, "key = value file; flags override it");
    app.add_flag("--strict", g.strict, "fail on missing cells instead of zero-filling");
    app.add_flag("--allow-nonconverged", g.allow_nonconverged, "exit 0 even when a fit did not converge");
    app.add_flag("--error-json", g.error_json, "report failures as JSON on stderr");

    auto common = [](Command& c) {
        c.key("--seed", "seed", "random seed");
        c.key("--jobs", "jobs", "worker threads (default BLIN_JOBS or 1)");
    };
    auto estimator = [](Command& c) {
        c.key("--method", "method", "bcd, exact, sparse, reduced_rank or bilinear");
        c.key("--lags", "lags", "lag per mode, e.g. 1,1 or 2,1,1");
        c.key("--lambda", "lambda", "sparse penalty; chosen automatically when absent");
        c.key("--eta", "eta", "convergence tolerance");
        c.key("--max-iter", "max_iter", "iteration cap");
        c.key("--rank-a", "rank_a", "reduced-rank A rank");
        c.key("--rank-b", "rank_b", "reduced-rank B rank");
        c.key("--restarts", "restarts", "bilinear restarts");
        c.key("--inner-folds", "inner_folds", "folds of the lambda CV");
    };
    auto simulation = [](Command& c) {
        c.key("--generator", "generator", "blin or bilinear");
        c.key("--s", "s", "rows S");
        c.key("--l", "l", "columns L");
        c.key("--q", "q_sparsity", "fraction of zeroed off-diagonals");
        c.key("--target-r2", "target_r2", "calibrated large-sample R^2");
        c.key("--horizon", "horizon", "kept time points T");
        c.key("--burn-in", "burn_in", "discarded time points");
    };

    std::string out;
    std::string max_lags;
    std::string dims_text;

    Command sim{app.add_subcommand("simulate", "simulate a calibrated series")};
    common(sim);
    simulation(sim);
    sim.key("--replication", "replication", "replication stream");
    sim.app->add_option("--out,-o", out, "output directory")->required();

    Command fit{app.add_subcommand("fit", "fit influence networks")};
    Ingest fit_in;
    fit_in.add(fit.app, true);
    common(fit);
    estimator(fit);
    fit.key("--lasso-tol", "lasso_tol", "lasso KKT tolerance");
    fit.app->add_option("--out,-o", out, "output directory")->required();

    Command cv{app.add_subcommand("cv", "k-fold cross-validation")};
    Ingest cv_in;
    cv_in.add(cv.app, true);
    common(cv);
    estimator(cv);
    cv.key("--methods", "methods", "comma-separated methods");
    cv.key("--folds", "folds", "number of folds");
    cv.app->add_option("--out,-o", out, "output directory")->required();

    Command lag{app.add_subcommand("lagselect", "AIC-hat lag selection")};
    Ingest lag_in;
    lag_in.add(lag.app, true);
    common(lag);
    lag.key("--lambda-count", "lambda_count", "path length");
    lag.app->add_option("--max-lags", max_lags, "largest lag per mode, e.g. 3,3,2")->required();
    lag.app->add_option("--out,-o", out, "output directory")->required();

    Command study{app.add_subcommand("study-convergence", "estimator error against T")};
    common(study);
    study.key("--s", "s", "rows S");
    study.key("--l", "l", "columns L");
    study.key("--horizons", "horizons", "comma-separated T values");
    study.key("--reps", "reps", "replications per T");
    study.key("--generators", "generators", "blin,bilinear");
    study.key("--methods", "study_methods", "exact,bilinear");
    study.app->add_option("--out,-o", out, "output directory")->required();

    Command scan{app.add_subcommand("scan", "R^2 along the line from truth to the fit")};
    common(scan);
    simulation(scan);
    scan.key("--test-horizon", "test_horizon", "length of the held-out series");
    scan.key("--points", "scan_points", "grid points in [0, 1]");
    scan.key("--restarts", "restarts", "bilinear restarts");
    scan.app->add_option("--out,-o", out, "output directory")->required();

    Command rank{app.add_subcommand("rankcheck", "numerical rank of the design")};
    Ingest rank_in;
    rank_in.add(rank.app, false);
    common(rank);
    rank.key("--lags", "lags", "lag per mode");
    rank.app->add_option("--dims", dims_text, "S,L,T of a Gaussian series when no input is given");
    rank.app->add_option("--out,-o", out, "output directory (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    auto report = [&](int code, int status, const std::string& msg) {
        if (g.error_json) {
            std::cerr << json{{"error", {{"status", status ? blin_status_name(status) : "usage"},
                                         {"code", status},
                                         {"exit", code},
                                         {"message", msg}}}}
                             .dump()
                      << "\n";
        } else {
            std::cerr << "blin: " << msg << "\n";
        }
        return code;
    };

    try {
        if (sim.app->parsed()) return cmd_simulate(sim, g, out);
        if (fit.app->parsed()) return cmd_fit(fit, g, fit_in, out);
        if (cv.app->parsed()) return cmd_cv(cv, g, cv_in, out);
        if (lag.app->parsed()) return cmd_lagselect(lag, g, lag_in, out, max_lags);
        if (study.app->parsed()) return cmd_study(study, g, out);
        if (scan.app->parsed()) return cmd_scan(scan, g, out);
        if (rank.app->parsed()) return cmd_rankcheck(rank, g, rank_in, dims_text, out);
    } catch (const UsageError& e) {
        return report(kUsage, 0, e.what());
    } catch (const ApiError& e) {
        return report(kRuntime, e.status, e.what());
    } catch (const std::exception& e) {
        return report(kRuntime, BLIN_ERR_INTERNAL, e.what());
    }
    return kUsage;
}
