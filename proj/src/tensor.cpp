#include "blin/tensor.hpp"

#include <numeric>

#include "blin/error.hpp"

namespace blin {

namespace {

struct ModeLayout {
    Index inner;  // product of sizes before the mode
    Index size;   // size of the mode
    Index outer;  // product of sizes after the mode
};

ModeLayout layout(const std::vector<Index>& dims, Index mode) {
    if (mode < 0 || mode >= static_cast<Index>(dims.size()))
        fail(ErrorCode::index, "mode " + std::to_string(mode) + " out of range for a " +
                                   std::to_string(dims.size()) + "-mode array");
    ModeLayout l{1, dims[static_cast<std::size_t>(mode)], 1};
    for (Index j = 0; j < mode; ++j) l.inner *= dims[static_cast<std::size_t>(j)];
    for (Index j = mode + 1; j < static_cast<Index>(dims.size()); ++j) l.outer *= dims[static_cast<std::size_t>(j)];
    return l;
}

}  // namespace

Index element_count(const std::vector<Index>& dims) {
    return std::accumulate(dims.begin(), dims.end(), Index{1}, std::multiplies<>());
}

Eigen::MatrixXd mode_matricize(const Eigen::VectorXd& array, const std::vector<Index>& dims, Index mode) {
    const ModeLayout l = layout(dims, mode);
    if (array.size() != element_count(dims)) fail(ErrorCode::shape, "array size does not match its dimensions");
    Eigen::MatrixXd out(l.size, l.inner * l.outer);
    for (Index h = 0; h < l.outer; ++h) {
        Eigen::Map<const Eigen::MatrixXd> block(array.data() + h * l.inner * l.size, l.inner, l.size);
        out.middleCols(h * l.inner, l.inner) = block.transpose();
    }
    return out;
}

Eigen::VectorXd fold(const Eigen::MatrixXd& unfolding, const std::vector<Index>& dims, Index mode) {
    const ModeLayout l = layout(dims, mode);
    if (unfolding.rows() != l.size || unfolding.cols() != l.inner * l.outer)
        fail(ErrorCode::shape, "unfolding shape does not match the target dimensions");
    Eigen::VectorXd out(element_count(dims));
    for (Index h = 0; h < l.outer; ++h) {
        Eigen::Map<Eigen::MatrixXd> block(out.data() + h * l.inner * l.size, l.inner, l.size);
        block = unfolding.middleCols(h * l.inner, l.inner).transpose();
    }
    return out;
}

Eigen::VectorXd mode_product(const Eigen::VectorXd& array, const std::vector<Index>& dims, Index mode,
                             const Eigen::MatrixXd& m) {
    const ModeLayout l = layout(dims, mode);
    if (array.size() != element_count(dims)) fail(ErrorCode::shape, "array size does not match its dimensions");
    if (m.cols() != l.size) fail(ErrorCode::shape, "mode product factor has the wrong number of columns");
    const Index r = m.rows();
    Eigen::VectorXd out(l.inner * r * l.outer);
    for (Index h = 0; h < l.outer; ++h) {
        Eigen::Map<const Eigen::MatrixXd> in(array.data() + h * l.inner * l.size, l.inner, l.size);
        Eigen::Map<Eigen::MatrixXd> res(out.data() + h * l.inner * r, l.inner, r);
        res.noalias() = in * m.transpose();
    }
    return out;
}

Eigen::VectorXd tucker_product(const Eigen::VectorXd& array, const std::vector<Index>& dims,
                               const std::vector<Eigen::MatrixXd>& factors) {
    if (factors.size() != dims.size()) fail(ErrorCode::shape, "one factor per mode is required");
    Eigen::VectorXd cur = array;
    std::vector<Index> cur_dims = dims;
    for (std::size_t k = 0; k < factors.size(); ++k) {
        cur = mode_product(cur, cur_dims, static_cast<Index>(k), factors[k]);
        cur_dims[k] = factors[k].rows();
    }
    return cur;
}

}  // namespace blin
