#include "blin/series.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "blin/error.hpp"

namespace blin {

TensorSeries::TensorSeries(std::vector<Index> dims, std::vector<Eigen::VectorXd> slices,
                           std::vector<std::vector<std::string>> labels)
    : dims_(std::move(dims)), slices_(std::move(slices)), labels_(std::move(labels)) {
    if (dims_.size() < 2) fail(ErrorCode::shape, "a series needs at least two modes");
    for (Index d : dims_)
        if (d < 1) fail(ErrorCode::shape, "mode sizes must be positive");
    slice_size_ = std::accumulate(dims_.begin(), dims_.end(), Index{1}, std::multiplies<>());
    if (slices_.empty()) fail(ErrorCode::insufficient_data, "a series needs at least one time slice");
    for (std::size_t t = 0; t < slices_.size(); ++t) {
        if (slices_[t].size() != slice_size_)
            fail(ErrorCode::shape, "time slice " + std::to_string(t) + " has " +
                                       std::to_string(slices_[t].size()) + " entries, expected " +
                                       std::to_string(slice_size_));
        if (!slices_[t].allFinite())
            fail(ErrorCode::invalid_argument, "time slice " + std::to_string(t) + " has non-finite entries");
    }
    if (!labels_.empty()) {
        if (labels_.size() != dims_.size()) fail(ErrorCode::shape, "one label list per mode is required");
        for (std::size_t k = 0; k < dims_.size(); ++k)
            if (static_cast<Index>(labels_[k].size()) != dims_[k])
                fail(ErrorCode::shape, "label list for mode " + std::to_string(k) + " has wrong length");
    }
}

TensorSeries TensorSeries::from_matrices(const std::vector<Eigen::MatrixXd>& slices) {
    if (slices.empty()) fail(ErrorCode::insufficient_data, "a series needs at least one time slice");
    const Index rows = slices.front().rows();
    const Index cols = slices.front().cols();
    std::vector<Eigen::VectorXd> flat;
    flat.reserve(slices.size());
    for (const auto& m : slices) {
        if (m.rows() != rows || m.cols() != cols)
            fail(ErrorCode::shape, "all time slices must have identical dimensions");
        flat.emplace_back(Eigen::Map<const Eigen::VectorXd>(m.data(), m.size()));
    }
    return TensorSeries({rows, cols}, std::move(flat));
}

const Eigen::VectorXd& TensorSeries::slice(Index t) const {
    if (t < 0 || t >= horizon())
        fail(ErrorCode::index, "time index " + std::to_string(t) + " outside [0, " +
                                   std::to_string(horizon()) + ")");
    return slices_[static_cast<std::size_t>(t)];
}

Eigen::Map<const Eigen::MatrixXd> TensorSeries::matrix(Index t) const {
    const auto& s = slice(t);
    return {s.data(), dims_[0], slice_size_ / dims_[0]};
}

TensorSeries TensorSeries::slice_range(Index begin, Index end) const {
    if (begin < 0 || end > horizon() || begin >= end)
        fail(ErrorCode::index, "invalid slice range [" + std::to_string(begin) + ", " +
                                   std::to_string(end) + ")");
    std::vector<Eigen::VectorXd> out(slices_.begin() + begin, slices_.begin() + end);
    return TensorSeries(dims_, std::move(out), labels_);
}

LagSpec::LagSpec(int p_a, int p_b) : LagSpec(std::vector<int>{p_a, p_b}) {}

LagSpec::LagSpec(int p_a, int p_b, int p_c) : LagSpec(std::vector<int>{p_a, p_b, p_c}) {}

LagSpec::LagSpec(std::vector<int> per_mode) : lags_(std::move(per_mode)) {
    if (lags_.size() < 2) fail(ErrorCode::invalid_argument, "a lag spec needs at least two modes");
    for (int p : lags_)
        if (p < 1) fail(ErrorCode::invalid_argument, "lags must be >= 1");
}

std::optional<int> LagSpec::p_c() const noexcept {
    if (lags_.size() < 3) return std::nullopt;
    return lags_[2];
}

int LagSpec::mode(Index k) const {
    if (k < 0 || k >= modes()) fail(ErrorCode::index, "lag mode index out of range");
    return lags_[static_cast<std::size_t>(k)];
}

int LagSpec::p() const noexcept { return *std::max_element(lags_.begin(), lags_.end()); }

std::string LagSpec::to_string() const {
    std::ostringstream os;
    for (std::size_t k = 0; k < lags_.size(); ++k) os << (k ? "," : "") << lags_[k];
    return os.str();
}

namespace {

Eigen::VectorXd time_mean(const TensorSeries& s) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(s.slice_size());
    for (Index t = 0; t < s.horizon(); ++t) mean += s.slice(t);
    return mean / static_cast<double>(s.horizon());
}

}  // namespace

TensorSeries center(const TensorSeries& series) {
    const Eigen::VectorXd mean = time_mean(series);
    std::vector<Eigen::VectorXd> out;
    out.reserve(static_cast<std::size_t>(series.horizon()));
    for (Index t = 0; t < series.horizon(); ++t) out.push_back(series.slice(t) - mean);
    return TensorSeries(series.dims(), std::move(out), series.labels());
}

TensorSeries standardize(const TensorSeries& series) {
    if (series.horizon() < 2) fail(ErrorCode::insufficient_data, "standardizing needs at least two time slices");
    const Eigen::VectorXd mean = time_mean(series);
    Eigen::VectorXd ss = Eigen::VectorXd::Zero(series.slice_size());
    for (Index t = 0; t < series.horizon(); ++t) ss += (series.slice(t) - mean).array().square().matrix();
    Eigen::VectorXd inv_sd(series.slice_size());
    for (Index i = 0; i < ss.size(); ++i) {
        const double sd = std::sqrt(ss(i) / static_cast<double>(series.horizon() - 1));
        inv_sd(i) = sd > 0.0 ? 1.0 / sd : 0.0;
    }
    std::vector<Eigen::VectorXd> out;
    out.reserve(static_cast<std::size_t>(series.horizon()));
    for (Index t = 0; t < series.horizon(); ++t)
        out.push_back(((series.slice(t) - mean).array() * inv_sd.array()).matrix());
    return TensorSeries(series.dims(), std::move(out), series.labels());
}

}  // namespace blin
