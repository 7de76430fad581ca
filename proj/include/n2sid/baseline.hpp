#pragma once

// Classical projection-based subspace identification used as the comparison
// method. Future outputs are projected obliquely onto past data along future
// inputs, the result is weighted by the orthogonal complement of the future
// inputs (MOESP-type) and truncated by SVD; (A, C) follow from shift
// invariance and (B, D, K, x0) from linear least squares.

#include "extraction.hpp"
#include "structured_ops.hpp"
#include "types.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <optional>

namespace n2sid {

struct BaselineConfig {
    Index s = 15; ///< future horizon (block rows)
    /// fixed model order; auto selection over 0..max_order when empty
    std::optional<Index> order;
    Index max_order = 10;
    bool estimate_direct_term = true;
    /// past horizon; defaults to the largest value <= s that keeps the
    /// projection regression overdetermined
    std::optional<Index> past_horizon;
};

struct BaselineResult {
    StateSpaceModel model;
    Vector x0;
    Index order = 0;
    Vector singular_values;
    double fit_identification = 0.0;
    Index past_horizon = 0;
};

namespace detail {

inline Index default_past_horizon(Index N, Index f, Index m, Index p) {
    // columns j = N - f - ph + 1 must exceed regressor rows f*m + ph*(m+p)
    Index ph = f;
    while (ph > 1 && N - f - ph + 1 <= f * m + ph * (m + p))
        --ph;
    return ph;
}

/// Fixed (A, C): output-error fit of (B, D, x0), then (B, K, D, x0) again
/// with the output-error residuals standing in for the innovations.
inline std::pair<StateSpaceModel, Vector> complete_innovation_model(const Matrix& A, const Matrix& C,
                                                                    const IoBatch& io, bool with_D) {
    const Index m = io.inputs(), p = io.outputs();
    const LinearStateFit oe = fit_state_inputs(A, C, io.u, io.u, io.y, with_D);
    const StateSpaceModel oe_model(A, oe.F, C, oe.D, Matrix::Zero(A.rows(), p));
    const Series e = io.y - predict(oe_model, io, oe.x0);

    Series drive(io.samples(), m + p);
    drive << io.u, e;
    const LinearStateFit inn = fit_state_inputs(A, C, drive, io.u, io.y - e, with_D);
    StateSpaceModel model(A, inn.F.leftCols(m), C, with_D ? inn.D : Matrix::Zero(p, m), inn.F.rightCols(p));
    return {std::move(model), inn.x0};
}

} // namespace detail

[[nodiscard]] inline BaselineResult n4sid_baseline(const IoBatch& io, const BaselineConfig& cfg = {}) {
    const Index N = io.samples(), m = io.inputs(), p = io.outputs(), f = cfg.s;
    if (f < 2 || N < 2 * f)
        throw DimensionError("n4sid_baseline: need N >= 2 s and s >= 2");
    if (cfg.order && (*cfg.order < 0 || *cfg.order >= f))
        throw ConfigError("n4sid_baseline: order must satisfy 0 <= order < s");
    const Index ph = cfg.past_horizon ? *cfg.past_horizon : detail::default_past_horizon(N, f, m, p);
    if (ph < 1 || ph > N - f)
        throw ConfigError("n4sid_baseline: invalid past horizon");

    const Index rows = ph + f;
    const Matrix Hu = build_hankel(io.u, rows).values;
    const Matrix Hy = build_hankel(io.y, rows).values;
    const Index j = Hy.cols();
    const Matrix Up = Hu.topRows(ph * m), Uf = Hu.bottomRows(f * m);
    const Matrix Yp = Hy.topRows(ph * p), Yf = Hy.bottomRows(f * p);

    Matrix Wp(ph * (m + p), j);
    Wp << Up, Yp;
    Matrix Z(Wp.rows() + Uf.rows(), j);
    Z << Wp, Uf;

    // Yf = Lw Wp + Lu Uf (minimum-norm least squares), oblique projection Lw Wp
    const Matrix L = Z.transpose().completeOrthogonalDecomposition().solve(Yf.transpose()).transpose();
    const Matrix Ob = L.leftCols(Wp.rows()) * Wp;

    Matrix weighted = Ob;
    if (Uf.rows() > 0) {
        const Matrix proj = Uf.transpose() * (Uf * Uf.transpose()).completeOrthogonalDecomposition().solve(Uf);
        weighted = Ob - Ob * proj;
    }
    Eigen::JacobiSVD<Matrix> svd(weighted, Eigen::ComputeThinU);
    BaselineResult res;
    res.singular_values = svd.singularValues();
    res.past_horizon = ph;

    const Index rank_bound = std::min<Index>(svd.singularValues().size(), f - 1);
    auto build = [&](Index n) -> std::pair<StateSpaceModel, Vector> {
        Matrix A(n, n), C(p, n);
        if (n > 0) {
            const Matrix G = svd.matrixU().leftCols(n) * svd.singularValues().head(n).cwiseSqrt().asDiagonal();
            A = G.topRows((f - 1) * p).colPivHouseholderQr().solve(G.bottomRows((f - 1) * p));
            C = G.topRows(p);
        }
        return detail::complete_innovation_model(A, C, io, cfg.estimate_direct_term);
    };
    auto score = [&](const StateSpaceModel& model, const Vector& x0) {
        const double v = fit(io.y, predict(model, io, x0));
        return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
    };

    if (cfg.order) {
        const Index n = std::min(*cfg.order, rank_bound);
        auto [model, x0] = build(n);
        res.fit_identification = score(model, x0);
        res.model = std::move(model);
        res.x0 = std::move(x0);
        res.order = n;
        return res;
    }

    double best = -std::numeric_limits<double>::infinity();
    bool found = false;
    for (Index n = 0; n <= std::min(cfg.max_order, rank_bound); ++n) {
        auto [model, x0] = build(n);
        const double fv = score(model, x0);
        if (!found || fv > best) {
            best = fv;
            res.model = std::move(model);
            res.x0 = std::move(x0);
            res.order = n;
            found = true;
        }
    }
    res.fit_identification = best;
    return res;
}

} // namespace n2sid
