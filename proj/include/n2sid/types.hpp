#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace n2sid {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Multichannel time series, one sample per row (N x channels).
using Series = Eigen::MatrixXd;

// ----------------------------------------------------------------------------
// Errors
// ----------------------------------------------------------------------------

/// Inconsistent sizes between arguments.
class DimensionError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical failure (non-convergence, ill-conditioning, degenerate spectra).
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class DegenerateSpectrumError : public NumericalError {
  public:
    using NumericalError::NumericalError;
};

class IllConditionedError : public NumericalError {
  public:
    IllConditionedError(const std::string& what, double condition)
        : NumericalError(what), condition_(condition) {}
    [[nodiscard]] double condition() const noexcept { return condition_; }

  private:
    double condition_;
};

/// Bad user-supplied configuration or data.
class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

namespace detail {
inline void require(bool cond, const std::string& msg) {
    if (!cond)
        throw DimensionError(msg);
}
} // namespace detail

// ----------------------------------------------------------------------------
// Data and models
// ----------------------------------------------------------------------------

/// Paired input/output record of length N. `u` may have zero columns
/// (output-only data) but always has N rows.
struct IoBatch {
    Series u;
    Series y;

    IoBatch() = default;
    IoBatch(Series u_, Series y_) : u(std::move(u_)), y(std::move(y_)) {
        detail::require(u.rows() == y.rows(), "IoBatch: u and y must have the same number of samples");
    }

    [[nodiscard]] Index samples() const noexcept { return y.rows(); }
    [[nodiscard]] Index inputs() const noexcept { return u.cols(); }
    [[nodiscard]] Index outputs() const noexcept { return y.cols(); }
};

/// Innovation-form model
///   x(k+1) = A x(k) + B u(k) + K e(k)
///   y(k)   = C x(k) + D u(k) + e(k)
struct StateSpaceModel {
    Matrix A, B, C, D, K;

    StateSpaceModel() = default;
    StateSpaceModel(Matrix A_, Matrix B_, Matrix C_, Matrix D_, Matrix K_)
        : A(std::move(A_)), B(std::move(B_)), C(std::move(C_)), D(std::move(D_)), K(std::move(K_)) {
        validate();
    }

    [[nodiscard]] Index order() const noexcept { return A.rows(); }
    [[nodiscard]] Index inputs() const noexcept { return D.cols(); }
    [[nodiscard]] Index outputs() const noexcept { return D.rows(); }

    void validate() const {
        const Index n = A.rows(), m = D.cols(), p = D.rows();
        detail::require(A.cols() == n, "StateSpaceModel: A must be square");
        detail::require(B.rows() == n && B.cols() == m, "StateSpaceModel: B must be n x m");
        detail::require(C.rows() == p && C.cols() == n, "StateSpaceModel: C must be p x n");
        detail::require(K.rows() == n && K.cols() == p, "StateSpaceModel: K must be n x p");
    }

    /// Observer-form system matrix A - K C.
    [[nodiscard]] Matrix observer_A() const { return A - K * C; }
    /// Observer-form input matrix B - K D.
    [[nodiscard]] Matrix observer_B() const { return B - K * D; }

    [[nodiscard]] Eigen::VectorXcd eigenvalues() const {
        if (order() == 0)
            return {};
        return Eigen::EigenSolver<Matrix>(A, false).eigenvalues();
    }
};

[[nodiscard]] inline double spectral_radius(const Matrix& A) {
    if (A.rows() == 0)
        return 0.0;
    return Eigen::EigenSolver<Matrix>(A, false).eigenvalues().cwiseAbs().maxCoeff();
}

} // namespace n2sid
