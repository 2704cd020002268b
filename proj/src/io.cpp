#include "blin/io.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "blin/error.hpp"
#include "blin/multiway.hpp"
#include "blin/rng.hpp"

namespace blin {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        out.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

std::string where(Index line) { return "line " + std::to_string(line) + ": "; }

double parse_double(const std::string& s, Index line) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
        fail(ErrorCode::parse, where(line) + "'" + s + "' is not a number");
    if (!std::isfinite(v)) fail(ErrorCode::parse, where(line) + "value is not finite");
    return v;
}

long long parse_int(const std::string& s, Index line) {
    long long v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
        fail(ErrorCode::parse, where(line) + "time index '" + s + "' is not an integer");
    return v;
}

struct LabelIndex {
    std::vector<std::string> names;
    std::unordered_map<std::string, Index> index;
    bool fixed = false;

    Index get(const std::string& label, Index line, std::size_t mode) {
        const auto it = index.find(label);
        if (it != index.end()) return it->second;
        if (fixed)
            fail(ErrorCode::parse, where(line) + "label '" + label + "' is missing from the label map of mode " +
                                       std::to_string(mode));
        index.emplace(label, static_cast<Index>(names.size()));
        names.push_back(label);
        return static_cast<Index>(names.size()) - 1;
    }
};

struct Record {
    long long t;
    std::vector<Index> idx;
    double value;
    Index line;
};

}  // namespace

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io, "cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Ingested ingest_csv_text(const std::string& text, const IngestOptions& opts) {
    std::istringstream in(text);
    std::string line;
    Index line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) {
            header = split(line);
            break;
        }
    }
    const bool two = header == std::vector<std::string>{"t", "i", "j", "value"};
    const bool three = header == std::vector<std::string>{"t", "i", "j", "k", "value"};
    if (!two && !three) fail(ErrorCode::parse, "header must be t,i,j,value or t,i,j,k,value");
    const std::size_t modes = two ? 2 : 3;

    std::vector<LabelIndex> labels(modes);
    if (!opts.label_maps.empty()) {
        if (opts.label_maps.size() != modes) fail(ErrorCode::parse, "label map has the wrong number of modes");
        for (std::size_t m = 0; m < modes; ++m) {
            for (const auto& name : opts.label_maps[m]) {
                if (labels[m].index.count(name)) fail(ErrorCode::parse, "duplicate label '" + name + "' in label map");
                labels[m].get(name, 0, m);
            }
            labels[m].fixed = true;
        }
    }

    std::vector<Record> records;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cols = split(line);
        if (cols.size() != modes + 2)
            fail(ErrorCode::parse, where(line_no) + "expected " + std::to_string(modes + 2) + " fields, found " +
                                       std::to_string(cols.size()));
        Record r;
        r.line = line_no;
        r.t = parse_int(cols[0], line_no);
        for (std::size_t m = 0; m < modes; ++m) {
            if (cols[m + 1].empty()) fail(ErrorCode::parse, where(line_no) + "empty label");
            r.idx.push_back(labels[m].get(cols[m + 1], line_no, m));
        }
        r.value = parse_double(cols[modes + 1], line_no);
        records.push_back(std::move(r));
    }
    if (records.empty()) fail(ErrorCode::insufficient_data, "no data records");

    long long t0 = records.front().t, t1 = records.front().t;
    for (const auto& r : records) {
        t0 = std::min(t0, r.t);
        t1 = std::max(t1, r.t);
    }
    if (t1 - t0 >= 10'000'000) fail(ErrorCode::parse, "time range is implausibly large");
    std::vector<Index> dims;
    for (const auto& l : labels) dims.push_back(static_cast<Index>(l.names.size()));
    Index slice = 1;
    for (Index d : dims) slice *= d;
    const auto horizon = static_cast<Index>(t1 - t0 + 1);
    std::vector<Eigen::VectorXd> slices(static_cast<std::size_t>(horizon), Eigen::VectorXd::Zero(slice));
    std::vector<std::vector<char>> seen(static_cast<std::size_t>(horizon), std::vector<char>(static_cast<std::size_t>(slice), 0));
    for (const auto& r : records) {
        Index lin = 0, stride = 1;
        for (std::size_t m = 0; m < modes; ++m) {
            lin += r.idx[m] * stride;
            stride *= dims[m];
        }
        const auto t = static_cast<std::size_t>(r.t - t0);
        char& flag = seen[t][static_cast<std::size_t>(lin)];
        if (flag) fail(ErrorCode::parse, where(r.line) + "duplicate key for time " + std::to_string(r.t));
        flag = 1;
        slices[t](lin) = r.value;
    }

    IngestReport rep;
    rep.records = static_cast<Index>(records.size());
    rep.filled = horizon * slice - rep.records;
    rep.first_time = t0;
    rep.last_time = t1;
    if (opts.strict && rep.filled > 0)
        fail(ErrorCode::parse, std::to_string(rep.filled) + " cells are missing and strict mode is on");
    for (const auto& l : labels) rep.labels.push_back(l.names);

    TensorSeries series(dims, std::move(slices), rep.labels);
    if (opts.difference) {
        series = difference(series);
        rep.transforms.push_back("difference");
    }
    if (opts.standardize) {
        series = standardize(series);
        rep.transforms.push_back("standardize");
    } else if (opts.center) {
        series = center(series);
        rep.transforms.push_back("center");
    }
    return {std::move(series), std::move(rep)};
}

Ingested ingest_csv(const std::string& path, const IngestOptions& opts) {
    return ingest_csv_text(read_file(path), opts);
}

std::vector<std::vector<std::string>> read_label_map(const std::string& path) {
    std::istringstream in(read_file(path));
    std::string line;
    std::vector<std::vector<std::string>> out;
    Index line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cols = split(line);
        if (cols.size() != 2) fail(ErrorCode::parse, where(line_no) + "label map lines are mode,label");
        if (line_no == 1 && cols[0] == "mode") continue;
        const auto mode = parse_int(cols[0], line_no);
        if (mode < 0 || mode > 16) fail(ErrorCode::parse, where(line_no) + "mode out of range");
        if (out.size() <= static_cast<std::size_t>(mode)) out.resize(static_cast<std::size_t>(mode) + 1);
        out[static_cast<std::size_t>(mode)].push_back(cols[1]);
    }
    return out;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string series_to_csv(const TensorSeries& series) {
    const auto& dims = series.dims();
    if (dims.size() != 2 && dims.size() != 3) fail(ErrorCode::shape, "long-format CSV holds 2- or 3-mode series");
    std::vector<std::vector<std::string>> names = series.labels();
    if (names.empty())
        for (Index d : dims) {
            std::vector<std::string> n;
            for (Index i = 0; i < d; ++i) n.push_back(std::to_string(i));
            names.push_back(std::move(n));
        }
    std::string out = dims.size() == 2 ? "t,i,j,value\n" : "t,i,j,k,value\n";
    for (Index t = 0; t < series.horizon(); ++t) {
        const Eigen::VectorXd& s = series.slice(t);
        for (Index lin = 0; lin < s.size(); ++lin) {
            Index rest = lin;
            out += std::to_string(t);
            for (std::size_t m = 0; m < dims.size(); ++m) {
                out += ',';
                out += names[m][static_cast<std::size_t>(rest % dims[m])];
                rest /= dims[m];
            }
            out += ',';
            out += format_double(s(lin));
            out += '\n';
        }
    }
    return out;
}

void write_series_csv(const TensorSeries& series, const std::string& path) {
    atomic_write(path, series_to_csv(series));
}

std::string matrix_to_csv(const Eigen::MatrixXd& m) {
    std::string out;
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j) out += ',';
            out += format_double(m(i, j));
        }
        out += '\n';
    }
    return out;
}

void write_matrix_csv(const Eigen::MatrixXd& m, const std::string& path) {
    atomic_write(path, matrix_to_csv(m));
}

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
    std::istringstream in(read_file(path));
    std::string line;
    std::vector<std::vector<double>> rows;
    Index line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        std::vector<double> row;
        for (const auto& c : split(line)) row.push_back(parse_double(c, line_no));
        if (!rows.empty() && row.size() != rows.front().size())
            fail(ErrorCode::parse, where(line_no) + "ragged matrix row");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) fail(ErrorCode::parse, "'" + path + "' holds no matrix");
    Eigen::MatrixXd m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return m;
}

void atomic_write(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    Rng rng(static_cast<std::uint64_t>(reinterpret_cast<std::uintptr_t>(&content)) ^
                static_cast<std::uint64_t>(std::hash<std::string>{}(path)),
            static_cast<std::uint64_t>(fs::file_time_type::clock::now().time_since_epoch().count()));
    const fs::path tmp = target.string() + ".tmp" + std::to_string(rng.next_u32());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorCode::io, "cannot open '" + tmp.string() + "' for writing");
        out << content;
        out.flush();
        if (!out) fail(ErrorCode::io, "write to '" + tmp.string() + "' failed");
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        fail(ErrorCode::io, "cannot move temporary file onto '" + path + "'");
    }
}

}  // namespace blin
