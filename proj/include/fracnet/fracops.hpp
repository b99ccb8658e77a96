#ifndef FRACNET_FRACOPS_HPP
#define FRACNET_FRACOPS_HPP

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "fracnet/error.hpp"

namespace fracnet {

using Index = Eigen::Index;

/// Grünwald–Letnikov weight psi(alpha, j) = Gamma(j - alpha) / (Gamma(-alpha) Gamma(j + 1)).
///
/// Evaluated with the multiplicative recurrence psi(alpha, j) = psi(alpha, j - 1) (j - 1 - alpha) / j,
/// which stays finite where the gamma ratio has poles (integer alpha).
template <typename Scalar>
Scalar gl_coeff(Scalar alpha, Index j) {
    Scalar c(1);
    for (Index i = 1; i <= j; ++i)
        c *= (Scalar(i - 1) - alpha) / Scalar(i);
    return c;
}

/// Per-channel table of GL weights psi(alpha_i, j), 0 <= j <= horizon.
template <typename Scalar>
class GLKernel {
public:
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Table = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    GLKernel() = default;

    GLKernel(const Vector& alphas, Index horizon) : alphas_(alphas), coeffs_(alphas.size(), horizon + 1) {
        if (horizon < 0)
            throw DimensionError("GLKernel: horizon must be >= 0");
        if (!alphas.allFinite())
            throw DimensionError("GLKernel: non-finite fractional order");
        coeffs_.col(0).setOnes();
        for (Index j = 1; j <= horizon; ++j)
            coeffs_.col(j) = coeffs_.col(j - 1).cwiseProduct(
                ((Scalar(j - 1) - alphas_.array()) / Scalar(j)).matrix());
    }

    Index channels() const { return alphas_.size(); }
    Index horizon() const { return coeffs_.cols() - 1; }
    const Vector& alphas() const { return alphas_; }
    const Table& coeffs() const { return coeffs_; }

    /// Diagonal of Psi_j as a vector, 0 <= j <= horizon().
    auto psi(Index j) const { return coeffs_.col(j); }
    Scalar operator()(Index channel, Index j) const { return coeffs_(channel, j); }

private:
    Vector alphas_;
    Table coeffs_;
};

template <typename Derived>
GLKernel<typename Derived::Scalar> build_kernel(const Eigen::MatrixBase<Derived>& alphas, Index horizon) {
    return GLKernel<typename Derived::Scalar>(alphas, horizon);
}

enum class Memory {
    full,      // kernel must cover the whole record
    truncated, // lags beyond the kernel horizon are dropped
};

/// Kernel horizon for a record of `length` samples: the full history unless a memory cap is given.
inline Index memory_horizon_for(Index length, std::optional<Index> cap) {
    const Index full = std::max<Index>(length - 1, 0);
    return cap ? std::clamp<Index>(*cap, 0, full) : full;
}

namespace detail {
template <typename Scalar>
void check_kernel(const GLKernel<Scalar>& kernel, Index channels, Index length, Memory memory,
                  const char* where) {
    if (kernel.channels() != channels)
        throw DimensionError(std::string(where) + ": kernel has " + std::to_string(kernel.channels())
                             + " channels, series has " + std::to_string(channels));
    if (memory == Memory::full && length > 0 && kernel.horizon() < length - 1)
        throw DimensionError(std::string(where) + ": kernel horizon " + std::to_string(kernel.horizon())
                             + " shorter than record length " + std::to_string(length)
                             + " (enable truncated memory to allow this)");
}
} // namespace detail

/// Single column k of the fractional difference: sum_{j=0}^{min(k,J)} Psi_j series[k - j].
/// History before column 0 is taken as zero.
template <typename Derived, typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> frac_diff_at(const Eigen::MatrixBase<Derived>& series,
                                                      const GLKernel<Scalar>& kernel, Index k) {
    const Index lags = std::min(k, kernel.horizon());
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out = series.col(k);
    for (Index j = 1; j <= lags; ++j)
        out.noalias() += kernel.psi(j).cwiseProduct(series.col(k - j));
    return out;
}

/// Channelwise GL fractional difference of a channels x time matrix.
template <typename Derived, typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> frac_diff(const Eigen::MatrixBase<Derived>& series,
                                                                const GLKernel<Scalar>& kernel,
                                                                Memory memory = Memory::full) {
    detail::check_kernel(kernel, series.rows(), series.cols(), memory, "frac_diff");
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(series.rows(), series.cols());
    for (Index k = 0; k < series.cols(); ++k)
        out.col(k) = frac_diff_at(series, kernel, k);
    return out;
}

} // namespace fracnet

#endif // FRACNET_FRACOPS_HPP
