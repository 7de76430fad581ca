#pragma once

// From the low-rank residual of the convex program to an innovation-form
// model: order selection, (A, C) from the column space of the observability
// matrix, and linear least squares for the remaining matrices.

#include "types.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <string>

namespace n2sid {

struct OrderSelection {
    Vector singular_values;
    Index chosen_order = 0;
    Index cap = 10;
};

/// Picks the (1-based) index of the singular value closest to the
/// logarithmic mean of the largest and the smallest one, clipped to `cap`.
/// Values below `floor` are treated as equal to `floor` (numerical zeros of
/// an iterative solver); with floor = 0 only strictly positive values count.
[[nodiscard]] inline OrderSelection select_order(const Vector& singular_values, Index cap = 10, double floor = 0.0) {
    if (cap < 1)
        throw ConfigError("select_order: cap must be >= 1");
    Vector sv = singular_values;
    if (floor > 0)
        sv = sv.cwiseMax(floor);
    Index positive = 0;
    for (Index i = 0; i < sv.size(); ++i)
        if (sv(i) > 0 && std::isfinite(sv(i)))
            ++positive;
    if (positive < 2 || (floor > 0 && !(singular_values.maxCoeff() > floor)))
        throw DegenerateSpectrumError("select_order: fewer than two singular values above the numerical floor");

    double lmax = -std::numeric_limits<double>::infinity(), lmin = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < sv.size(); ++i)
        if (sv(i) > 0) {
            lmax = std::max(lmax, std::log(sv(i)));
            lmin = std::min(lmin, std::log(sv(i)));
        }
    const double target = 0.5 * (lmax + lmin);
    // distances equal up to rounding count as ties, which go to the lower index
    const double tie = 1e-12 * (1.0 + lmax - lmin);
    Index best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < sv.size(); ++i) {
        if (!(sv(i) > 0))
            continue;
        const double d = std::abs(std::log(sv(i)) - target);
        if (d < best_dist - tie) {
            best_dist = d;
            best = i;
        }
    }
    return {singular_values, std::min(best + 1, cap), cap};
}

struct ExtractedAC {
    Matrix A_obs;
    Matrix C;
    double condition = 1.0; ///< of the shifted observability block used in the solve
};

/// Shift-invariance estimate of (A, C) from the first `n` left singular
/// directions of M (whose column space is that of the observability matrix).
[[nodiscard]] inline ExtractedAC extract_AC(const Eigen::Ref<const Matrix>& M, Index n, Index s, Index p) {
    detail::require(M.rows() == s * p, "extract_AC: M must have s*p rows");
    detail::require(n >= 0 && n < s, "extract_AC: need 0 <= n < s");
    detail::require(n <= std::min(M.rows(), M.cols()), "extract_AC: order exceeds matrix rank bound");
    ExtractedAC out;
    if (n == 0) {
        out.A_obs.resize(0, 0);
        out.C.resize(p, 0);
        return out;
    }
    Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeThinU);
    const Matrix O = svd.matrixU().leftCols(n) * svd.singularValues().head(n).cwiseSqrt().asDiagonal();
    const Index rs = (s - 1) * p;
    const Matrix top = O.topRows(rs);
    const Matrix bottom = O.bottomRows(rs);

    const Vector tsv = Eigen::JacobiSVD<Matrix>(top).singularValues();
    const double cond = tsv(tsv.size() - 1) > 0 ? tsv(0) / tsv(tsv.size() - 1) : std::numeric_limits<double>::infinity();
    out.condition = cond;
    if (!(cond < 1e12))
        throw IllConditionedError("extract_AC: shifted observability block is rank deficient (condition " +
                                      std::to_string(cond) + ")",
                                  cond);
    out.A_obs = top.colPivHouseholderQr().solve(bottom);
    out.C = O.topRows(p);
    return out;
}

// ----------------------------------------------------------------------------

namespace detail {

/// y(k) ~ C A^k x0 + sum_{j<k} C A^{k-1-j} F d(j) + D f(k), linear in
/// (F, D, x0). Returns sample-major regressors.
struct LinearStateFit {
    Matrix F;  ///< n x r
    Matrix D;  ///< p x m
    Vector x0; ///< n
    bool regularized = false;
};

inline LinearStateFit fit_state_inputs(const Matrix& A, const Matrix& C, const Series& drive, const Series& feedthrough,
                                       const Series& y, bool with_D = true, bool with_x0 = true) {
    const Index n = A.rows(), p = C.rows(), N = y.rows();
    const Index r = drive.cols(), m = with_D ? feedthrough.cols() : 0;
    const Index nf = n * r, nd = p * m, nx = with_x0 ? n : 0;
    const Index cols = nf + nd + nx;

    LinearStateFit out;
    out.F = Matrix::Zero(n, r);
    out.D = Matrix::Zero(p, feedthrough.cols());
    out.x0 = Vector::Zero(n);
    if (cols == 0 || N == 0)
        return out;

    Matrix Phi = Matrix::Zero(N * p, cols);
    // F(a, b): response of C to d_b(j) injected into state a
    for (Index b = 0; b < r; ++b)
        for (Index a = 0; a < n; ++a) {
            Vector xi = Vector::Zero(n);
            const Index col = b * n + a; // column-major vec(F)
            for (Index k = 0; k < N; ++k) {
                Phi.block(k * p, col, p, 1) = C * xi;
                xi = A * xi;
                xi(a) += drive(k, b);
            }
        }
    // D(i, b)
    for (Index b = 0; b < m; ++b)
        for (Index i = 0; i < p; ++i)
            for (Index k = 0; k < N; ++k)
                Phi(k * p + i, nf + b * p + i) = feedthrough(k, b);
    // x0
    if (with_x0) {
        Matrix CAk = C;
        for (Index k = 0; k < N; ++k) {
            Phi.block(k * p, nf + nd, p, n) = CAk;
            CAk = CAk * A;
        }
    }
    Vector target(N * p);
    for (Index k = 0; k < N; ++k)
        for (Index i = 0; i < p; ++i)
            target(k * p + i) = y(k, i);

    // column equilibration, then rank-revealing QR
    if (!Phi.allFinite())
        throw NumericalError("fit_state_inputs: regressors overflow (observer matrix is unstable over this horizon)");
    Vector scale = Phi.colwise().norm().transpose();
    for (Index j = 0; j < cols; ++j)
        if (!(scale(j) > 0))
            scale(j) = 1.0;
    const Matrix Phis = Phi * scale.cwiseInverse().asDiagonal();
    Eigen::ColPivHouseholderQR<Matrix> qr(Phis);
    qr.setThreshold(1e-10);
    Vector sol;
    if (qr.rank() == cols) {
        sol = qr.solve(target);
    } else {
        Matrix normal = Phis.transpose() * Phis;
        const double top = Eigen::SelfAdjointEigenSolver<Matrix>(normal, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
        normal.diagonal().array() += 1e-8 * std::max(top, 1e-300);
        sol = normal.ldlt().solve(Phis.transpose() * target);
        out.regularized = true;
    }
    sol = sol.cwiseQuotient(scale);

    out.F = Eigen::Map<const Matrix>(sol.data(), n, r);
    if (m > 0)
        out.D = Eigen::Map<const Matrix>(sol.data() + nf, p, m);
    if (with_x0)
        out.x0 = sol.segment(nf + nd, n);
    return out;
}

} // namespace detail

struct BdkEstimate {
    StateSpaceModel model; ///< innovation form
    Matrix B_obs;          ///< B - K D
    Vector x0;
    bool regularized = false; ///< normal equations were rank deficient
};

/// Least squares for (B - KD, D, K, x0) in the observer recursion
///   x(k+1) = A_obs x(k) + (B - KD) u(k) + K y(k),  yhat(k) = C x(k) + D u(k),
/// returned in innovation form A = A_obs + K C, B = (B - KD) + K D.
[[nodiscard]] inline BdkEstimate estimate_BDK(const Matrix& A_obs, const Matrix& C, const IoBatch& io) {
    detail::require(A_obs.rows() == A_obs.cols() && C.cols() == A_obs.rows(), "estimate_BDK: A/C mismatch");
    detail::require(C.rows() == io.outputs(), "estimate_BDK: C rows must equal output count");
    detail::require(io.samples() > 0, "estimate_BDK: empty data");
    const Index m = io.inputs(), p = io.outputs();

    Series drive(io.samples(), m + p);
    drive << io.u, io.y;
    const auto fitres = detail::fit_state_inputs(A_obs, C, drive, io.u, io.y);

    BdkEstimate est;
    est.B_obs = fitres.F.leftCols(m);
    const Matrix K = fitres.F.rightCols(p);
    const Matrix& D = fitres.D;
    est.model = StateSpaceModel(A_obs + K * C, est.B_obs + K * D, C, D, K);
    est.x0 = fitres.x0;
    est.regularized = fitres.regularized;
    return est;
}

/// One-step-ahead predictor of the innovation model driven by measured
/// (u, y):  x(k+1) = A x + B u + K (y - C x - D u),  yhat = C x + D u.
[[nodiscard]] inline Series predict(const StateSpaceModel& model, const IoBatch& io, const Vector& x0) {
    model.validate();
    detail::require(io.inputs() == model.inputs() && io.outputs() == model.outputs(), "predict: channel mismatch");
    detail::require(x0.size() == model.order(), "predict: x0 has wrong size");
    Series yhat(io.samples(), model.outputs());
    Vector x = x0;
    for (Index k = 0; k < io.samples(); ++k) {
        const Vector uk = io.u.row(k).transpose();
        const Vector yk = io.y.row(k).transpose();
        const Vector yh = model.C * x + model.D * uk;
        yhat.row(k) = yh.transpose();
        x = model.A * x + model.B * uk + model.K * (yk - yh);
    }
    return yhat;
}

/// Least-squares initial state of the predictor with the model held fixed.
[[nodiscard]] inline Vector estimate_initial_state(const StateSpaceModel& model, const IoBatch& io) {
    const Index n = model.order();
    if (n == 0)
        return {};
    const Series free = predict(model, io, Vector::Zero(n));
    const Matrix A_obs = model.observer_A();
    const Index p = model.outputs(), N = io.samples();
    Matrix Phi(N * p, n);
    Matrix CAk = model.C;
    Vector r(N * p);
    for (Index k = 0; k < N; ++k) {
        Phi.middleRows(k * p, p) = CAk;
        CAk = CAk * A_obs;
        r.segment(k * p, p) = (io.y.row(k) - free.row(k)).transpose();
    }
    return Phi.completeOrthogonalDecomposition().solve(r);
}

/// Percent fit 100 (1 - ||y - yhat|| / ||y - mean(y)||), averaged over channels.
[[nodiscard]] inline double fit(const Series& y, const Series& yhat) {
    detail::require(y.rows() == yhat.rows() && y.cols() == yhat.cols(), "fit: shape mismatch");
    detail::require(y.cols() > 0 && y.rows() > 0, "fit: empty series");
    double total = 0.0;
    for (Index c = 0; c < y.cols(); ++c) {
        const double denom = (y.col(c).array() - y.col(c).mean()).matrix().norm();
        if (!(denom > 0))
            throw NumericalError("fit: undefined for a constant output channel");
        total += 100.0 * (1.0 - (y.col(c) - yhat.col(c)).norm() / denom);
    }
    return total / static_cast<double>(y.cols());
}

/// Markov parameters C A^(k-1) B (k >= 1, with D at k = 0) of the
/// deterministic part, s blocks.
[[nodiscard]] inline std::vector<Matrix> impulse_response(const StateSpaceModel& model, Index s) {
    std::vector<Matrix> h;
    h.reserve(static_cast<std::size_t>(s));
    h.push_back(model.D);
    Matrix CA = model.C;
    for (Index k = 1; k < s; ++k) {
        h.push_back(CA * model.B);
        CA = CA * model.A;
    }
    return h;
}

} // namespace n2sid
