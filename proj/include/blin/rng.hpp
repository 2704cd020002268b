#pragma once

#include <array>
#include <cstdint>

#include <Eigen/Dense>

namespace blin {

/// Philox4x32-10 counter-based generator.
///
/// A stream is identified by (seed, stream). The 64-bit seed is the Philox
/// key and the stream index occupies the upper half of the 128-bit counter,
/// so independent replications use `Rng(seed, replication)` without any
/// shared state. Output is bit-identical across platforms: uniform doubles
/// take the top 53 bits of a 64-bit draw and normals use Box-Muller.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

    std::uint32_t next_u32() noexcept;
    std::uint64_t next_u64() noexcept;

    /// Uniform on the open interval (0, 1).
    double uniform() noexcept;
    double normal() noexcept;
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) noexcept;

    Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols);
    Eigen::VectorXd normal_vector(Eigen::Index n);

    static std::array<std::uint32_t, 4> philox(std::array<std::uint32_t, 4> counter,
                                               std::array<std::uint32_t, 2> key) noexcept;

private:
    void refill() noexcept;

    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 4> counter_;
    std::array<std::uint32_t, 4> block_{};
    int used_ = 4;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace blin
