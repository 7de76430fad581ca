#pragma once

// Structured matrices of the subspace data equation
//
//     Y_s = O_s X + T_u U_s + T_y Y_s + E_s
//
// Block-Hankel data matrices, lower-triangular block-Toeplitz operators built
// from Markov parameters, and extended observability matrices. Documentation
// uses 1-based sample indices u(1)..u(N); storage is 0-based.

#include "types.hpp"

#include <utility>
#include <vector>

namespace n2sid {

struct HankelSpec {
    Index s = 1;         ///< block rows
    Index N = 1;         ///< samples
    Index block_dim = 1; ///< channels per sample

    [[nodiscard]] Index cols() const noexcept { return N - s + 1; }
    [[nodiscard]] Index rows() const noexcept { return s * block_dim; }

    void validate() const {
        detail::require(s >= 1, "HankelSpec: s must be >= 1");
        detail::require(N >= s, "HankelSpec: need N >= s");
        detail::require(block_dim >= 0, "HankelSpec: negative block dimension");
    }
};

/// (s*d) x (N-s+1) matrix whose block (i,j) is sample i+j (0-based).
struct BlockHankel {
    HankelSpec spec;
    Matrix values;

    /// d x (N-s+1) block row i, i.e. samples i .. i+N-s.
    [[nodiscard]] auto block_row(Index i) const {
        return values.middleRows(i * spec.block_dim, spec.block_dim);
    }
};

/// Lower-triangular block-Toeplitz operator
///
///     [ M0              ]
///     [ M1  M0          ]
///     [ ..        ..    ]
///     [ Ms-1 ...  M1  M0]
///
/// With `strictly_causal` the diagonal block M0 is structurally zero and
/// markov[0] is ignored (kept as a zero block for indexing convenience).
struct ToeplitzBlocks {
    std::vector<Matrix> markov;
    bool strictly_causal = false;

    [[nodiscard]] Index s() const noexcept { return static_cast<Index>(markov.size()); }
    [[nodiscard]] Index block_rows() const { return markov.empty() ? 0 : markov.front().rows(); }
    [[nodiscard]] Index block_cols() const { return markov.empty() ? 0 : markov.front().cols(); }

    static ToeplitzBlocks zeros(Index s, Index rows, Index cols, bool strictly_causal) {
        ToeplitzBlocks t;
        t.markov.assign(static_cast<std::size_t>(s), Matrix::Zero(rows, cols));
        t.strictly_causal = strictly_causal;
        return t;
    }
};

struct ObservabilityMatrix {
    Matrix values; ///< (s*p) x n
};

struct StateSequence {
    Matrix values; ///< n x (N-s+1)
};

// ----------------------------------------------------------------------------

/// Block-Hankel matrix with s block rows from an N x d signal.
[[nodiscard]] inline BlockHankel build_hankel(const Eigen::Ref<const Matrix>& signal, Index s) {
    if (s < 1 || signal.rows() < s)
        throw DimensionError("build_hankel: need N >= s >= 1 (N=" + std::to_string(signal.rows()) +
                             ", s=" + std::to_string(s) + ")");
    const HankelSpec spec{s, signal.rows(), signal.cols()};
    const Index d = spec.block_dim, c = spec.cols();
    Matrix H(spec.rows(), c);
    for (Index i = 0; i < s; ++i)
        H.middleRows(i * d, d) = signal.middleRows(i, c).transpose();
    return {spec, std::move(H)};
}

/// Adjoint of the Hankel-structuring map: sample k collects every entry of M
/// sitting at a Hankel position that maps to k.
[[nodiscard]] inline Series hankel_adjoint(const Eigen::Ref<const Matrix>& M, const HankelSpec& spec) {
    spec.validate();
    if (M.rows() != spec.rows() || M.cols() != spec.cols())
        throw DimensionError("hankel_adjoint: matrix is " + std::to_string(M.rows()) + "x" +
                             std::to_string(M.cols()) + ", expected " + std::to_string(spec.rows()) + "x" +
                             std::to_string(spec.cols()));
    const Index d = spec.block_dim, c = spec.cols();
    Series out = Series::Zero(spec.N, d);
    for (Index i = 0; i < spec.s; ++i)
        out.middleRows(i, c) += M.middleRows(i * d, d).transpose();
    return out;
}

/// T * H for a block-Toeplitz T, block row by block row, without forming T.
[[nodiscard]] inline Matrix toeplitz_apply(const ToeplitzBlocks& T, const BlockHankel& H) {
    const Index s = T.s();
    if (s != H.spec.s)
        throw DimensionError("toeplitz_apply: Toeplitz has " + std::to_string(s) + " blocks, Hankel has " +
                             std::to_string(H.spec.s) + " block rows");
    const Index p = T.block_rows();
    if (T.block_cols() != H.spec.block_dim)
        throw DimensionError("toeplitz_apply: block column dimension does not match Hankel block size");
    for (const auto& blk : T.markov)
        detail::require(blk.rows() == p && blk.cols() == H.spec.block_dim,
                        "toeplitz_apply: Markov blocks must share one shape");

    Matrix out = Matrix::Zero(s * p, H.spec.cols());
    const Index first = T.strictly_causal ? 1 : 0;
    for (Index i = 0; i < s; ++i)
        for (Index lag = first; lag <= i; ++lag)
            out.middleRows(i * p, p).noalias() += T.markov[static_cast<std::size_t>(lag)] * H.block_row(i - lag);
    return out;
}

/// Stack [C; C A; ...; C A^{s-1}].
[[nodiscard]] inline ObservabilityMatrix build_observability(const Matrix& A_obs, const Matrix& C, Index s) {
    detail::require(A_obs.rows() == A_obs.cols(), "build_observability: A must be square");
    detail::require(C.cols() == A_obs.rows(), "build_observability: C must have n columns");
    detail::require(s >= 1, "build_observability: s must be >= 1");
    const Index p = C.rows();
    Matrix O(s * p, A_obs.rows());
    Matrix blk = C;
    for (Index k = 0; k < s; ++k) {
        O.middleRows(k * p, p) = blk;
        blk = blk * A_obs;
    }
    return {std::move(O)};
}

/// Markov blocks of the observer form: T_u from {A-KC, B-KD, C, D} and the
/// strictly causal T_y from {A-KC, K, C, 0}.
[[nodiscard]] inline std::pair<ToeplitzBlocks, ToeplitzBlocks> markov_blocks_from_model(const StateSpaceModel& model,
                                                                                       Index s) {
    model.validate();
    detail::require(s >= 1, "markov_blocks_from_model: s must be >= 1");
    const Matrix A_obs = model.observer_A();
    const Matrix B_obs = model.observer_B();
    const Index p = model.outputs(), m = model.inputs();

    ToeplitzBlocks Tu = ToeplitzBlocks::zeros(s, p, m, false);
    ToeplitzBlocks Ty = ToeplitzBlocks::zeros(s, p, p, true);
    Tu.markov[0] = model.D;
    Matrix CA = model.C; // C * A_obs^(k-1)
    for (Index k = 1; k < s; ++k) {
        Tu.markov[static_cast<std::size_t>(k)] = CA * B_obs;
        Ty.markov[static_cast<std::size_t>(k)] = CA * model.K;
        CA = CA * A_obs;
    }
    return {std::move(Tu), std::move(Ty)};
}

/// Y_s - O_s X - T_u U_s - T_y Y_s for a model and a state trajectory
/// (states: N x n, one state per row as produced by the simulator).
[[nodiscard]] inline Matrix data_equation_residual(const StateSpaceModel& model, const IoBatch& io,
                                                   const Eigen::Ref<const Matrix>& states, Index s) {
    const BlockHankel Us = build_hankel(io.u, s);
    const BlockHankel Ys = build_hankel(io.y, s);
    const auto [Tu, Ty] = markov_blocks_from_model(model, s);
    const ObservabilityMatrix O = build_observability(model.observer_A(), model.C, s);
    const StateSequence X{states.topRows(Ys.spec.cols()).transpose()};
    Matrix R = Ys.values - O.values * X.values - toeplitz_apply(Ty, Ys);
    if (model.inputs() > 0)
        R -= toeplitz_apply(Tu, Us);
    return R;
}

} // namespace n2sid
