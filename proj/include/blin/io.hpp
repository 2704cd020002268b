#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "blin/series.hpp"

namespace blin {

struct IngestOptions {
    bool difference = false;
    bool center = false;
    bool standardize = false;
    /// Error on missing cells instead of zero-filling them.
    bool strict = false;
    /// Optional label order per mode; labels not listed are an error.
    std::vector<std::vector<std::string>> label_maps;
};

struct IngestReport {
    Index records = 0;
    Index filled = 0;
    Index first_time = 0;
    Index last_time = 0;
    std::vector<std::vector<std::string>> labels;
    std::vector<std::string> transforms;
};

struct Ingested {
    TensorSeries series;
    IngestReport report;
};

/// Long-format CSV with header t,i,j[,k],value. Labels map to indices in order
/// of first appearance, times cover every integer from the smallest to the
/// largest t, and absent cells are zero. Transforms run in the order
/// difference, center, standardize.
Ingested ingest_csv(const std::string& path, const IngestOptions& opts = {});
Ingested ingest_csv_text(const std::string& text, const IngestOptions& opts = {});

/// Reads "mode,label" lines (mode is 0-based) into per-mode label lists.
std::vector<std::vector<std::string>> read_label_map(const std::string& path);

/// Long-format CSV of a 2- or 3-mode series with times 0..T-1 and 17
/// significant digits.
std::string series_to_csv(const TensorSeries& series);
void write_series_csv(const TensorSeries& series, const std::string& path);

/// Plain numeric CSV, one matrix row per line, 17 significant digits.
std::string matrix_to_csv(const Eigen::MatrixXd& m);
void write_matrix_csv(const Eigen::MatrixXd& m, const std::string& path);
Eigen::MatrixXd read_matrix_csv(const std::string& path);

/// printf %.17g: 17 significant digits, enough to round-trip any double.
std::string format_double(double v);

/// Writes through a temporary file in the same directory and renames it.
void atomic_write(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

}  // namespace blin
