#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace blin {

using Index = Eigen::Index;

/// An ordered sequence of equally shaped real arrays Y_0, ..., Y_{T-1}.
///
/// Each slice is stored flat in column-major order over `dims()`, so for the
/// bipartite case (two modes) the slice is the S x L matrix Y_t, index (i, j).
/// Higher-order data (e.g. source x target x type) use more modes. Instances
/// are immutable once constructed and all entries are finite.
class TensorSeries {
public:
    TensorSeries(std::vector<Index> dims, std::vector<Eigen::VectorXd> slices,
                 std::vector<std::vector<std::string>> labels = {});

    static TensorSeries from_matrices(const std::vector<Eigen::MatrixXd>& slices);

    const std::vector<Index>& dims() const noexcept { return dims_; }
    Index modes() const noexcept { return static_cast<Index>(dims_.size()); }
    Index horizon() const noexcept { return static_cast<Index>(slices_.size()); }
    Index slice_size() const noexcept { return slice_size_; }

    const Eigen::VectorXd& slice(Index t) const;

    /// Slice t viewed as its mode-1 unfolding (S x L for two modes).
    Eigen::Map<const Eigen::MatrixXd> matrix(Index t) const;

    /// Optional per-mode entity names; empty when the series was built from
    /// bare numbers.
    const std::vector<std::vector<std::string>>& labels() const noexcept { return labels_; }

    /// Slices [begin, end) as a new series (labels preserved).
    TensorSeries slice_range(Index begin, Index end) const;
    /// The last `count` slices.
    TensorSeries tail(Index count) const { return slice_range(horizon() - count, horizon()); }

private:
    std::vector<Index> dims_;
    Index slice_size_ = 0;
    std::vector<Eigen::VectorXd> slices_;
    std::vector<std::vector<std::string>> labels_;
};

/// Per-mode lag depths. Mode 0 is the A (row) network, mode 1 the B (column)
/// network and mode 2, when present, the C (type) network.
class LagSpec {
public:
    LagSpec(int p_a, int p_b);
    LagSpec(int p_a, int p_b, int p_c);
    explicit LagSpec(std::vector<int> per_mode);

    int p_a() const noexcept { return lags_[0]; }
    int p_b() const noexcept { return lags_[1]; }
    std::optional<int> p_c() const noexcept;

    int mode(Index k) const;
    Index modes() const noexcept { return static_cast<Index>(lags_.size()); }
    const std::vector<int>& per_mode() const noexcept { return lags_; }

    /// p = max over modes.
    int p() const noexcept;
    /// q = min(p_a, p_b), the number of leading companion blocks holding Theta_1.
    int q_lag() const noexcept { return std::min(lags_[0], lags_[1]); }

    std::string to_string() const;

    friend bool operator==(const LagSpec&, const LagSpec&) = default;

private:
    std::vector<int> lags_;
};

/// Per-cell series centering (subtract the time mean of every entry).
TensorSeries center(const TensorSeries& series);

/// Per-cell centering and scaling to unit sample standard deviation
/// (n - 1 denominator). Constant cells are centered and left at zero.
TensorSeries standardize(const TensorSeries& series);

}  // namespace blin
