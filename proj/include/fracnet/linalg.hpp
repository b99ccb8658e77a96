#ifndef FRACNET_LINALG_HPP
#define FRACNET_LINALG_HPP

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "fracnet/error.hpp"

namespace fracnet {

using Index = Eigen::Index;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Smallest admissible LDLT pivot when inverting covariance-like matrices.
inline constexpr double kPivotThreshold = 1e-12;

template <typename Derived>
MatrixX<typename Derived::Scalar> symmetrized(const Eigen::MatrixBase<Derived>& m) {
    return (m + m.transpose()) / typename Derived::Scalar(2);
}

template <typename Derived>
bool is_symmetric(const Eigen::MatrixBase<Derived>& m, double tol = 1e-12) {
    if (m.rows() != m.cols())
        return false;
    if (m.size() == 0)
        return true;
    const double scale = std::max(1.0, double(m.cwiseAbs().maxCoeff()));
    return double((m - m.transpose()).cwiseAbs().maxCoeff()) <= tol * scale;
}

template <typename Derived>
typename Derived::Scalar min_eigenvalue(const Eigen::MatrixBase<Derived>& m) {
    if (m.size() == 0)
        return typename Derived::Scalar(0);
    Eigen::SelfAdjointEigenSolver<MatrixX<typename Derived::Scalar>> eig(symmetrized(m), Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff();
}

/// Throws NotPsdError unless m is symmetric (1e-12) with eigenvalues >= -tol.
template <typename Derived>
void require_psd(const Eigen::MatrixBase<Derived>& m, const std::string& what, double tol = 1e-10) {
    if (!m.allFinite())
        throw NotPsdError(what + ": non-finite entries");
    if (!is_symmetric(m))
        throw NotPsdError(what + ": not symmetric");
    if (m.size() > 0 && double(min_eigenvalue(m)) < -tol)
        throw NotPsdError(what + ": not positive semi-definite");
}

/// Symmetrize and clamp eigenvalues from below.
template <typename Derived>
MatrixX<typename Derived::Scalar> floor_eigenvalues(const Eigen::MatrixBase<Derived>& m,
                                                    typename Derived::Scalar floor) {
    using Scalar = typename Derived::Scalar;
    if (m.size() == 0)
        return MatrixX<Scalar>(m.rows(), m.cols());
    Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(symmetrized(m));
    VectorX<Scalar> ev = eig.eigenvalues().cwiseMax(floor);
    MatrixX<Scalar> out = eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
    return symmetrized(out);
}

/// Inverse of a symmetric positive-definite matrix through LDLT.
/// Throws SingularSystemError when a pivot falls below kPivotThreshold (relative to the largest).
template <typename Derived>
MatrixX<typename Derived::Scalar> spd_inverse(const Eigen::MatrixBase<Derived>& m, const std::string& what) {
    using Scalar = typename Derived::Scalar;
    using std::abs;
    const Index n = m.rows();
    if (n == 0)
        return MatrixX<Scalar>(0, 0);
    Eigen::LDLT<MatrixX<Scalar>> ldlt(symmetrized(m));
    const auto d = ldlt.vectorD();
    const Scalar dmax = d.cwiseAbs().maxCoeff();
    if (ldlt.info() != Eigen::Success || !d.allFinite() || d.minCoeff() <= Scalar(kPivotThreshold) * std::max(Scalar(1), dmax))
        throw SingularSystemError(what + ": matrix is singular or not positive definite");
    return symmetrized(ldlt.solve(MatrixX<Scalar>::Identity(n, n)));
}

template <typename Derived>
typename Derived::Scalar log_det_spd(const Eigen::MatrixBase<Derived>& m, const std::string& what) {
    using Scalar = typename Derived::Scalar;
    if (m.size() == 0)
        return Scalar(0);
    Eigen::LLT<MatrixX<Scalar>> llt(symmetrized(m));
    if (llt.info() != Eigen::Success)
        throw NotPsdError(what + ": not positive definite");
    using std::log;
    return Scalar(2) * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

/// Symmetric square root factor S with S S^T = m, valid for PSD m (eigen route).
template <typename Derived>
MatrixX<typename Derived::Scalar> psd_sqrt(const Eigen::MatrixBase<Derived>& m) {
    using Scalar = typename Derived::Scalar;
    if (m.size() == 0)
        return MatrixX<Scalar>(m.rows(), m.cols());
    Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(symmetrized(m));
    VectorX<Scalar> s = eig.eigenvalues().cwiseMax(Scalar(0)).cwiseSqrt();
    return eig.eigenvectors() * s.asDiagonal() * eig.eigenvectors().transpose();
}

} // namespace fracnet

#endif // FRACNET_LINALG_HPP
