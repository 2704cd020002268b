#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include "blin/blin.h"
#include "oracles.hpp"

namespace {

std::string take(char* s) {
    std::string out = s ? s : "";
    blin_string_free(s);
    return out;
}

blin_series* gaussian_series(size_t s, size_t l, size_t t, uint64_t seed) {
    const size_t dims[2] = {s, l};
    blin_series* out = nullptr;
    EXPECT_EQ(blin_series_gaussian(dims, 2, t, seed, 0, &out), BLIN_OK);
    return out;
}

std::vector<double> diag_of(const blin_fit* f) {
    size_t len = 0;
    EXPECT_EQ(blin_fit_diag_effect(f, nullptr, 0, &len), BLIN_OK);
    std::vector<double> d(len);
    EXPECT_EQ(blin_fit_diag_effect(f, d.data(), d.size(), &len), BLIN_OK);
    return d;
}

blin_fit* fit_with(const blin_series* s, const char* method) {
    blin_config* c = nullptr;
    EXPECT_EQ(blin_config_new(&c), BLIN_OK);
    EXPECT_EQ(blin_config_set(c, "method", method), BLIN_OK);
    EXPECT_EQ(blin_config_set(c, "eta", "1e-13"), BLIN_OK);
    EXPECT_EQ(blin_config_set(c, "max_iter", "5000"), BLIN_OK);
    blin_fit* f = nullptr;
    EXPECT_EQ(blin_fit_series(s, c, &f), BLIN_OK) << blin_last_error();
    blin_config_free(c);
    return f;
}

}  // namespace

TEST(CApi, StatusNamesAndVersion) {
    EXPECT_STREQ(blin_status_name(BLIN_OK), "ok");
    EXPECT_STREQ(blin_status_name(BLIN_ERR_PARSE), "parse");
    EXPECT_STREQ(blin_status_name(12345), "unknown");
    EXPECT_GT(std::strlen(blin_version()), 0u);
}

TEST(CApi, SeriesRoundTripsThroughHandles) {
    const size_t dims[2] = {2, 3};
    std::vector<double> data(2 * 6);
    for (size_t i = 0; i < data.size(); ++i) data[i] = 0.5 * static_cast<double>(i) - 1.0;
    blin_series* s = nullptr;
    ASSERT_EQ(blin_series_new(dims, 2, 2, data.data(), &s), BLIN_OK);
    size_t modes = 0, horizon = 0, got[3] = {};
    ASSERT_EQ(blin_series_shape(s, &modes, got, 3, &horizon), BLIN_OK);
    EXPECT_EQ(modes, 2u);
    EXPECT_EQ(horizon, 2u);
    EXPECT_EQ(got[1], 3u);
    size_t len = 0;
    std::vector<double> back(12);
    ASSERT_EQ(blin_series_data(s, back.data(), back.size(), &len), BLIN_OK);
    EXPECT_EQ(back, data);
    EXPECT_EQ(blin_series_data(s, back.data(), 3, &len), BLIN_ERR_SHAPE);

    const auto path = std::filesystem::temp_directory_path() / "blin_capi_series.csv";
    ASSERT_EQ(blin_series_write_csv(s, path.c_str()), BLIN_OK);
    blin_series* r = nullptr;
    char* report = nullptr;
    ASSERT_EQ(blin_series_read_csv(path.c_str(), 0, 0, 0, 1, nullptr, &r, &report), BLIN_OK);
    const std::string rep = take(report);
    EXPECT_NE(rep.find("\"filled\": 0"), std::string::npos) << rep;
    ASSERT_EQ(blin_series_data(r, back.data(), back.size(), &len), BLIN_OK);
    EXPECT_EQ(back, data);
    blin_series_free(r);
    blin_series_free(s);
}

TEST(CApi, ErrorsCarryCodesAndMessages) {
    blin_series* s = nullptr;
    EXPECT_EQ(blin_series_new(nullptr, 2, 1, nullptr, &s), BLIN_ERR_INVALID_ARGUMENT);
    EXPECT_NE(std::string(blin_last_error()).find("NULL"), std::string::npos);
    blin_config* c = nullptr;
    ASSERT_EQ(blin_config_new(&c), BLIN_OK);
    EXPECT_STREQ(blin_last_error(), "");
    EXPECT_EQ(blin_config_set(c, "no_such_key", "1"), BLIN_ERR_INVALID_ARGUMENT);
    EXPECT_EQ(blin_config_set(c, "eta", "fast"), BLIN_ERR_PARSE);
    EXPECT_EQ(blin_config_set(c, "max_iter", "-3"), BLIN_ERR_PARSE);
    EXPECT_EQ(blin_config_set(c, "method", "magic"), BLIN_ERR_INVALID_ARGUMENT);
    EXPECT_EQ(blin_config_set(c, "lags", "1,x"), BLIN_ERR_PARSE);
    ASSERT_EQ(blin_config_set(c, "lags", "1,1,1"), BLIN_OK);
    blin_series* g = gaussian_series(3, 3, 6, 1);
    blin_fit* f = nullptr;
    EXPECT_EQ(blin_fit_series(g, c, &f), BLIN_ERR_INVALID_ARGUMENT);
    EXPECT_EQ(f, nullptr);
    char* out = nullptr;
    EXPECT_EQ(blin_series_read_csv("/definitely/missing.csv", 0, 0, 0, 0, nullptr, &s, &out), BLIN_ERR_IO);
    blin_series_free(g);
    blin_config_free(c);
}

TEST(CApi, LastErrorIsPerThread) {
    blin_config* c = nullptr;
    ASSERT_EQ(blin_config_new(&c), BLIN_OK);
    EXPECT_NE(blin_config_set(c, "bad", "1"), BLIN_OK);
    std::string other;
    std::thread([&] { other = blin_last_error(); }).join();
    EXPECT_EQ(other, "");
    EXPECT_NE(std::string(blin_last_error()), "");
    blin_config_free(c);
}

TEST(CApi, BcdAndExactAgreeOnDiagEffect) {
    blin_series* s = gaussian_series(4, 3, 12, 9);
    blin_fit* a = fit_with(s, "bcd");
    blin_fit* b = fit_with(s, "exact");
    const auto da = diag_of(a), db = diag_of(b);
    ASSERT_EQ(da.size(), 12u);
    for (size_t i = 0; i < da.size(); ++i) EXPECT_NEAR(da[i], db[i], 1e-6);
    int conv = 0;
    ASSERT_EQ(blin_fit_converged(a, &conv), BLIN_OK);
    EXPECT_EQ(conv, 1);
    char* js = nullptr;
    ASSERT_EQ(blin_fit_summary_json(b, &js), BLIN_OK);
    const std::string summary = take(js);
    for (const char* field : {"\"criterion_trace\"", "\"design_rank\"", "\"stationarity\"", "\"config\""})
        EXPECT_NE(summary.find(field), std::string::npos) << field;
    blin_fit_free(a);
    blin_fit_free(b);
    blin_series_free(s);
}

TEST(CApi, ThreeModeSeriesUseTheMultiwayFit) {
    const size_t dims[3] = {3, 2, 2};
    blin_series* s = nullptr;
    ASSERT_EQ(blin_series_gaussian(dims, 3, 10, 4, 0, &s), BLIN_OK);
    blin_fit* f = fit_with(s, "exact");
    size_t modes = 0, n = 0;
    ASSERT_EQ(blin_fit_modes(f, &modes), BLIN_OK);
    EXPECT_EQ(modes, 3u);
    ASSERT_EQ(blin_fit_network(f, 2, nullptr, 0, &n), BLIN_OK);
    EXPECT_EQ(n, 2u);
    EXPECT_EQ(blin_fit_network(f, 3, nullptr, 0, &n), BLIN_ERR_INDEX);
    EXPECT_EQ(diag_of(f).size(), 12u);
    blin_fit_free(f);
    blin_series_free(s);
}

TEST(CApi, SimulationIsDeterministic) {
    blin_config* c = nullptr;
    ASSERT_EQ(blin_config_new(&c), BLIN_OK);
    for (auto [k, v] : {std::pair{"s", "4"}, {"l", "3"}, {"horizon", "20"}, {"seed", "3"}})
        ASSERT_EQ(blin_config_set(c, k, v), BLIN_OK);
    std::vector<double> first;
    for (int run = 0; run < 2; ++run) {
        blin_series* s = nullptr;
        blin_fit* truth = nullptr;
        char* summary = nullptr;
        ASSERT_EQ(blin_simulate(c, &s, &truth, &summary), BLIN_OK) << blin_last_error();
        const std::string js = take(summary);
        EXPECT_NE(js.find("\"r2\""), std::string::npos);
        size_t len = 0;
        ASSERT_EQ(blin_series_data(s, nullptr, 0, &len), BLIN_OK);
        std::vector<double> v(len);
        ASSERT_EQ(blin_series_data(s, v.data(), len, &len), BLIN_OK);
        if (run == 0) first = v;
        else EXPECT_EQ(v, first);
        size_t n = 0;
        ASSERT_EQ(blin_fit_network(truth, 0, nullptr, 0, &n), BLIN_OK);
        EXPECT_EQ(n, 4u);
        blin_fit_free(truth);
        blin_series_free(s);
    }
    blin_config_free(c);
}

TEST(CApi, RankCheckReportsDeficiency) {
    blin_series* s = gaussian_series(3, 3, 12, 2);
    char* js = nullptr;
    ASSERT_EQ(blin_rank_check(s, nullptr, &js), BLIN_OK);
    const std::string rep = take(js);
    EXPECT_NE(rep.find("\"rank\": 17"), std::string::npos) << rep;
    blin_series_free(s);
}
