#pragma once

// Convex nuclear-norm subspace identification program
//
//   minimize  || (Yhat_s - T_u U_s - T_y Y_s) G ||_*  +  (lambda/N) sum_k ||y(k) - yhat(k)||^2
//
// over block-Hankel Yhat_s (parametrized by the samples yhat(k)), lower block-
// Toeplitz T_u and strictly causal block-Toeplitz T_y. G is an optional
// Gaussian right sketch (identity when absent).
//
// The program is solved by ADMM on the split Z = L(theta), where theta
// collects the free parameters and L is the (sketched) structured residual
// map. The theta-update is a fixed small linear system; the Z-update is
// singular value soft-thresholding. The iteration is run in its equivalent
// Douglas-Rachford fixed-point form so that it can be Anderson-accelerated.

#include "random.hpp"
#include "structured_ops.hpp"
#include "types.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

namespace n2sid {

struct SketchConfig {
    Index width = 22;
    std::uint64_t seed = 0;
};

/// c x q standard-normal sketch, deterministic in `seed`.
[[nodiscard]] inline Matrix gaussian_sketch(Index cols, Index width, std::uint64_t seed) {
    if (width < 1)
        throw ConfigError("sketch width must be >= 1");
    return gaussian_matrix(cols, width, seed);
}

[[nodiscard]] inline Matrix apply_sketch(const Eigen::Ref<const Matrix>& M, Index width, std::uint64_t seed) {
    return M * gaussian_sketch(M.cols(), width, seed);
}

class N2sidProblem {
  public:
    BlockHankel U_s;
    BlockHankel Y_s;
    Series y;
    double lambda = 0.0; ///< scalarization weight; the quadratic term is weighted by lambda / N
    std::optional<SketchConfig> sketch;
    bool output_only = false;

    /// Builds the Hankel data matrices from `io`. With `output_only`, inputs
    /// are ignored and T_u is absent from the program.
    static N2sidProblem from_batch(const IoBatch& io, Index s, double lambda,
                                   std::optional<SketchConfig> sketch = std::nullopt, bool output_only = false) {
        if (lambda < 0 || !std::isfinite(lambda))
            throw ConfigError("lambda must be finite and nonnegative");
        if (s < 1 || io.samples() < s)
            throw DimensionError("N2sidProblem: need N >= s >= 1");
        N2sidProblem pb;
        pb.output_only = output_only || io.inputs() == 0;
        pb.U_s = build_hankel(pb.output_only ? Series(io.samples(), 0) : io.u, s);
        pb.Y_s = build_hankel(io.y, s);
        pb.y = io.y;
        pb.lambda = lambda;
        pb.sketch = sketch;
        if (sketch)
            pb.sketch_matrix_ = gaussian_sketch(pb.Y_s.spec.cols(), sketch->width, sketch->seed);
        return pb;
    }

    /// Replace the sketch by an explicit matrix (c x q). An empty matrix
    /// disables sketching.
    void set_sketch_matrix(Matrix G) {
        detail::require(G.size() == 0 || G.rows() == Y_s.spec.cols(), "sketch matrix must have N-s+1 rows");
        sketch_matrix_ = std::move(G);
    }

    [[nodiscard]] bool sketched() const noexcept { return sketch_matrix_.size() > 0; }
    [[nodiscard]] const Matrix& sketch_matrix() const noexcept { return sketch_matrix_; }

    [[nodiscard]] Index s() const noexcept { return Y_s.spec.s; }
    [[nodiscard]] Index samples() const noexcept { return Y_s.spec.N; }
    [[nodiscard]] Index outputs() const noexcept { return Y_s.spec.block_dim; }
    [[nodiscard]] Index inputs() const noexcept { return output_only ? 0 : U_s.spec.block_dim; }
    [[nodiscard]] double weight() const noexcept { return lambda / static_cast<double>(samples()); }

    /// Right-multiplies by the sketch when one is set.
    [[nodiscard]] Matrix sketch_right(const Matrix& M) const { return sketched() ? Matrix(M * sketch_matrix_) : M; }

  private:
    Matrix sketch_matrix_;
};

struct SolverOptions {
    int max_iters = 5000;
    double primal_tol = 1e-6;
    double dual_tol = 1e-6;
    double penalty = 1.0;
    bool adaptive_penalty = true;
    /// Anderson acceleration memory for the fixed-point iteration; 0 gives
    /// plain ADMM.
    int anderson_memory = 8;
    bool record_history = false;
};

struct IterationRecord {
    double objective;
    double penalty;
    /// ||T(v) - v|| of the Douglas-Rachford map, equal to the ADMM primal
    /// residual ||L(theta) - Z||
    double fixed_point_residual;
    bool accelerated;
};

struct SolverDiagnostics {
    int iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double primal_threshold = 0.0;
    double dual_threshold = 0.0;
    double penalty = 0.0;
    int penalty_updates = 0;
    bool converged = false;
    std::vector<IterationRecord> history;
};

class ConvergenceError : public NumericalError {
  public:
    explicit ConvergenceError(SolverDiagnostics diag)
        : NumericalError("N2SID solver did not converge in " + std::to_string(diag.iterations) +
                         " iterations (primal " + std::to_string(diag.primal_residual) + ", dual " +
                         std::to_string(diag.dual_residual) + ")"),
          diagnostics_(std::move(diag)) {}
    [[nodiscard]] const SolverDiagnostics& diagnostics() const noexcept { return diagnostics_; }

  private:
    SolverDiagnostics diagnostics_;
};

struct N2sidSolution {
    Series yhat;
    ToeplitzBlocks Tu_blocks;
    ToeplitzBlocks Ty_blocks;
    Matrix M_star;                 ///< Yhat_s - T_u U_s - T_y Y_s
    Matrix M_sketched;             ///< M_star G (equals M_star without sketch)
    Vector singular_values;        ///< of M_sketched, nonincreasing
    double nuclear_term = 0.0;     ///< ||M_sketched||_*
    double prediction_term = 0.0;  ///< (1/N) sum ||y - yhat||^2
    double objective = 0.0;        ///< nuclear_term + lambda * prediction_term
    double numerical_floor = 0.0;  ///< singular values below this are zero at solver accuracy
    Matrix dual;                   ///< subgradient certificate for the nuclear norm at M_sketched
    SolverDiagnostics diagnostics;
};

// ----------------------------------------------------------------------------

/// Singular value soft-thresholding: argmin_X tau ||X||_* + 1/2 ||X - M||_F^2.
[[nodiscard]] inline Matrix prox_nuclear(const Eigen::Ref<const Matrix>& M, double tau) {
    if (!(tau > 0))
        throw ConfigError("prox_nuclear: tau must be positive");
    if (M.size() == 0)
        return M;
    Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector shrunk = (svd.singularValues().array() - tau).cwiseMax(0.0).matrix();
    Index rank = 0;
    while (rank < shrunk.size() && shrunk(rank) > 0)
        ++rank;
    return svd.matrixU().leftCols(rank) * shrunk.head(rank).asDiagonal() * svd.matrixV().leftCols(rank).transpose();
}

[[nodiscard]] inline Vector singular_values(const Eigen::Ref<const Matrix>& M) {
    if (M.size() == 0)
        return {};
    return Eigen::JacobiSVD<Matrix>(M).singularValues();
}

[[nodiscard]] inline double nuclear_norm(const Eigen::Ref<const Matrix>& M) { return singular_values(M).sum(); }

/// `count` log-spaced values from lo to hi inclusive.
[[nodiscard]] inline std::vector<double> lambda_grid(int count = 20, double lo = std::pow(10.0, -0.5),
                                                     double hi = 1e4) {
    if (count < 2)
        throw ConfigError("lambda_grid: count must be >= 2");
    if (!(lo > 0) || !(hi > lo))
        throw ConfigError("lambda_grid: need 0 < lo < hi");
    std::vector<double> grid(static_cast<std::size_t>(count));
    const double a = std::log10(lo), b = std::log10(hi);
    for (int i = 0; i < count; ++i)
        grid[static_cast<std::size_t>(i)] = std::pow(10.0, a + (b - a) * i / (count - 1));
    grid.front() = lo;
    grid.back() = hi;
    return grid;
}

// ----------------------------------------------------------------------------

/// Free parameters of the program and the linear map from them to the
/// structured residual. Layout of theta:
///   [ yhat (N*p, sample-major) | T_u blocks 0..s-1 (p*m each, col-major) |
///     T_y blocks 1..s-1 (p*p each, col-major) ]
class ResidualMap {
  public:
    explicit ResidualMap(const N2sidProblem& pb)
        : pb_(&pb), N_(pb.samples()), p_(pb.outputs()), m_(pb.inputs()), s_(pb.s()) {
        n_yhat_ = N_ * p_;
        n_tu_ = s_ * p_ * m_;
        n_ty_ = (s_ - 1) * p_ * p_;
    }

    [[nodiscard]] Index size() const noexcept { return n_yhat_ + n_tu_ + n_ty_; }
    [[nodiscard]] Index yhat_size() const noexcept { return n_yhat_; }

    [[nodiscard]] Series unpack_yhat(const Vector& theta) const {
        Series yhat(N_, p_);
        for (Index k = 0; k < N_; ++k)
            for (Index i = 0; i < p_; ++i)
                yhat(k, i) = theta(k * p_ + i);
        return yhat;
    }

    [[nodiscard]] ToeplitzBlocks unpack_tu(const Vector& theta) const {
        ToeplitzBlocks T = ToeplitzBlocks::zeros(s_, p_, m_, false);
        Index off = n_yhat_;
        for (auto& blk : T.markov) {
            blk = Eigen::Map<const Matrix>(theta.data() + off, p_, m_);
            off += p_ * m_;
        }
        return T;
    }

    [[nodiscard]] ToeplitzBlocks unpack_ty(const Vector& theta) const {
        ToeplitzBlocks T = ToeplitzBlocks::zeros(s_, p_, p_, true);
        Index off = n_yhat_ + n_tu_;
        for (Index j = 1; j < s_; ++j) {
            T.markov[static_cast<std::size_t>(j)] = Eigen::Map<const Matrix>(theta.data() + off, p_, p_);
            off += p_ * p_;
        }
        return T;
    }

    [[nodiscard]] Vector pack(const Series& yhat, const ToeplitzBlocks& Tu, const ToeplitzBlocks& Ty) const {
        Vector theta = Vector::Zero(size());
        for (Index k = 0; k < N_; ++k)
            for (Index i = 0; i < p_; ++i)
                theta(k * p_ + i) = yhat(k, i);
        Index off = n_yhat_;
        if (m_ > 0)
            for (const auto& blk : Tu.markov) {
                Eigen::Map<Matrix>(theta.data() + off, p_, m_) = blk;
                off += p_ * m_;
            }
        off = n_yhat_ + n_tu_;
        for (Index j = 1; j < s_; ++j) {
            Eigen::Map<Matrix>(theta.data() + off, p_, p_) = Ty.markov[static_cast<std::size_t>(j)];
            off += p_ * p_;
        }
        return theta;
    }

    /// Unsketched residual Yhat_s - T_u U_s - T_y Y_s.
    [[nodiscard]] Matrix residual(const Series& yhat, const ToeplitzBlocks& Tu, const ToeplitzBlocks& Ty) const {
        Matrix M = build_hankel(yhat, s_).values - toeplitz_apply(Ty, pb_->Y_s);
        if (m_ > 0)
            M -= toeplitz_apply(Tu, pb_->U_s);
        return M;
    }

    [[nodiscard]] Matrix residual(const Vector& theta) const {
        return residual(unpack_yhat(theta), unpack_tu(theta), unpack_ty(theta));
    }

    /// Dense matrix of theta -> vec(residual(theta) G), column-major vec.
    [[nodiscard]] Matrix dense_operator() const {
        const Index rows = s_ * p_;
        const Index q = pb_->sketched() ? pb_->sketch_matrix().cols() : pb_->Y_s.spec.cols();
        Matrix A(rows * q, size());
        Vector e = Vector::Zero(size());
        for (Index j = 0; j < size(); ++j) {
            e(j) = 1.0;
            const Matrix Mj = pb_->sketch_right(residual(e));
            A.col(j) = Eigen::Map<const Vector>(Mj.data(), Mj.size());
            e(j) = 0.0;
        }
        return A;
    }

  private:
    const N2sidProblem* pb_;
    Index N_, p_, m_, s_;
    Index n_yhat_ = 0, n_tu_ = 0, n_ty_ = 0;
};

namespace detail {

struct ObjectiveParts {
    double nuclear;
    double prediction;
};

inline ObjectiveParts objective_parts(const N2sidProblem& pb, const Matrix& M_sketched, const Series& yhat) {
    return {nuclear_norm(M_sketched), (pb.y - yhat).squaredNorm() / static_cast<double>(pb.samples())};
}

} // namespace detail

/// Objective value of the program at an arbitrary (yhat, T_u, T_y).
[[nodiscard]] inline double n2sid_objective(const N2sidProblem& pb, const Series& yhat, const ToeplitzBlocks& Tu,
                                            const ToeplitzBlocks& Ty) {
    const ResidualMap map(pb);
    const auto parts = detail::objective_parts(pb, pb.sketch_right(map.residual(yhat, Tu, Ty)), yhat);
    return parts.nuclear + pb.lambda * parts.prediction;
}

namespace detail {

/// Douglas-Rachford form of scaled ADMM on  min f(theta) + ||Z||_*  s.t.
/// L theta = Z. The state is v = L theta_k + W_{k-1}; one application of
/// the map computes
///   Z = prox(v),  zeta = 2Z - v,  theta = argmin f + rho/2 ||L theta - zeta||^2,
///   T(v) = v - Z + L theta,
/// so T(v) - v = L theta - Z is the ADMM primal residual.
class AdmmMap {
  public:
    AdmmMap(const Matrix& A, Index rows, Index cols, Index n_yhat, const Vector& rhs_fixed, double mu)
        : A_(A), rows_(rows), cols_(cols), n_yhat_(n_yhat), rhs_fixed_(rhs_fixed), mu_(mu),
          AtA_(A.transpose() * A) {
        trace_scale_ = std::max(AtA_.diagonal().maxCoeff(), 1.0);
    }

    void set_penalty(double rho) {
        rho_ = rho;
        Matrix H = rho * AtA_;
        H.diagonal().head(n_yhat_).array() += 2.0 * mu_;
        // keeps the system definite when the structured map has a kernel
        H.diagonal().array() += 1e-13 * rho * trace_scale_;
        factor_.compute(H);
        if (factor_.info() != Eigen::Success)
            throw NumericalError("N2SID solver: failed to factorize the parameter update system");
    }
    [[nodiscard]] double penalty() const noexcept { return rho_; }

    struct Eval {
        Vector z, theta, Atheta, next;
    };

    [[nodiscard]] Eval apply(const Vector& v) const {
        Eval ev;
        const Matrix Zm = prox_nuclear(Eigen::Map<const Matrix>(v.data(), rows_, cols_), 1.0 / rho_);
        ev.z = Eigen::Map<const Vector>(Zm.data(), Zm.size());
        const Vector zeta = 2.0 * ev.z - v;
        ev.theta = factor_.solve(rhs_fixed_ + rho_ * (A_.transpose() * zeta));
        ev.Atheta.noalias() = A_ * ev.theta;
        ev.next = v - ev.z + ev.Atheta;
        return ev;
    }

  private:
    const Matrix& A_;
    Index rows_, cols_, n_yhat_;
    const Vector& rhs_fixed_;
    double mu_;
    Matrix AtA_;
    double trace_scale_ = 1.0;
    double rho_ = 1.0;
    Eigen::LDLT<Matrix> factor_;
};

/// Type-II Anderson acceleration over a sliding window of iterates.
class Anderson {
  public:
    explicit Anderson(int memory) : memory_(memory) {}

    void reset() {
        dv_.clear();
        dg_.clear();
        has_prev_ = false;
    }

    /// Record (v, g = T(v) - v); returns the extrapolated point, or nothing
    /// when the window is empty.
    std::optional<Vector> push(const Vector& v, const Vector& g) {
        if (memory_ <= 0)
            return std::nullopt;
        if (has_prev_) {
            dv_.push_back(v - v_prev_);
            dg_.push_back(g - g_prev_);
            if (static_cast<int>(dv_.size()) > memory_) {
                dv_.erase(dv_.begin());
                dg_.erase(dg_.begin());
            }
        }
        v_prev_ = v;
        g_prev_ = g;
        has_prev_ = true;
        if (dg_.empty())
            return std::nullopt;

        const Index k = static_cast<Index>(dg_.size());
        Matrix G(g.size(), k), V(v.size(), k);
        for (Index j = 0; j < k; ++j) {
            G.col(j) = dg_[static_cast<std::size_t>(j)];
            V.col(j) = dv_[static_cast<std::size_t>(j)];
        }
        Matrix normal = G.transpose() * G;
        normal.diagonal().array() += 1e-10 * std::max(normal.diagonal().maxCoeff(), 1e-300);
        const Vector gamma = normal.ldlt().solve(G.transpose() * g);
        if (!gamma.allFinite())
            return std::nullopt;
        return Vector(v + g - (V + G) * gamma);
    }

  private:
    int memory_;
    std::vector<Vector> dv_, dg_;
    Vector v_prev_, g_prev_;
    bool has_prev_ = false;
};

} // namespace detail

[[nodiscard]] inline N2sidSolution solve_n2sid(const N2sidProblem& pb, const SolverOptions& opts = {}) {
    if (!(opts.primal_tol > 0) || !(opts.dual_tol > 0) || !(opts.penalty > 0) || opts.max_iters < 1)
        throw ConfigError("SolverOptions: tolerances, penalty and max_iters must be positive");
    if (pb.lambda < 0)
        throw ConfigError("N2sidProblem: lambda must be nonnegative");

    const ResidualMap map(pb);
    const Index nth = map.size();
    const Index rows = pb.s() * pb.outputs();
    const Matrix A = map.dense_operator();
    const Index cols = A.rows() / rows;
    const double mu = pb.weight();

    // 2 mu P'y, with P selecting yhat from theta
    Vector rhs_fixed = Vector::Zero(nth);
    for (Index k = 0; k < pb.samples(); ++k)
        for (Index i = 0; i < pb.outputs(); ++i)
            rhs_fixed(k * pb.outputs() + i) = 2.0 * mu * pb.y(k, i);

    const double data_scale = std::max(pb.sketch_right(pb.Y_s.values).norm(), 1e-300);
    const double abs_tol = 1e-3 * std::min(opts.primal_tol, opts.dual_tol) * data_scale;

    detail::AdmmMap T(A, rows, cols, map.yhat_size(), rhs_fixed, mu);
    T.set_penalty(opts.penalty);
    detail::Anderson aa(opts.anderson_memory);

    auto objective_at = [&](const detail::AdmmMap::Eval& ev) {
        return nuclear_norm(Eigen::Map<const Matrix>(ev.Atheta.data(), rows, cols)) +
               mu * (rhs_fixed / (2.0 * mu) - ev.theta).head(map.yhat_size()).squaredNorm();
    };

    SolverDiagnostics diag;
    Vector v = Vector::Zero(A.rows());
    detail::AdmmMap::Eval ev = T.apply(v);
    bool accelerated = false;
    int stretch = 0; // iterations since the last penalty change

    for (int it = 1; it <= opts.max_iters; ++it) {
        const Vector g = ev.next - v;
        const double r_norm = g.norm();
        const double rho = T.penalty();
        const double s_norm = rho * (A.transpose() * g).norm();
        const Vector dual_vec = rho * (v - ev.z);
        const double eps_pri = abs_tol + opts.primal_tol * std::max(ev.Atheta.norm(), ev.z.norm());
        const double eps_dual = abs_tol + opts.dual_tol * (A.transpose() * dual_vec).norm();

        diag.iterations = it;
        diag.primal_residual = r_norm;
        diag.dual_residual = s_norm;
        diag.primal_threshold = eps_pri;
        diag.dual_threshold = eps_dual;
        if (opts.record_history)
            diag.history.push_back({mu > 0 ? objective_at(ev) : nuclear_norm(Eigen::Map<const Matrix>(
                                                                    ev.Atheta.data(), rows, cols)),
                                    rho, r_norm, accelerated});

        if (r_norm <= eps_pri && s_norm <= eps_dual) {
            diag.converged = true;
            break;
        }

        ++stretch;
        if (opts.adaptive_penalty && stretch >= 25) {
            const double pr = r_norm / eps_pri, dr = s_norm / eps_dual;
            double factor = 1.0;
            if (pr > 10.0 * dr)
                factor = 2.0;
            else if (dr > 10.0 * pr)
                factor = 0.5;
            if (factor != 1.0) {
                // keep Z and the unscaled dual rho*W fixed
                const Vector w = (v - ev.z) / factor;
                T.set_penalty(rho * factor);
                v = ev.z + w;
                ev = T.apply(v);
                aa.reset();
                accelerated = false;
                stretch = 0;
                ++diag.penalty_updates;
                continue;
            }
        }

        const std::optional<Vector> extrapolated = aa.push(v, g);
        if (extrapolated) {
            detail::AdmmMap::Eval trial = T.apply(*extrapolated);
            if ((trial.next - *extrapolated).norm() < r_norm) {
                v = *extrapolated;
                ev = std::move(trial);
                accelerated = true;
                continue;
            }
        }
        v = ev.next;
        ev = T.apply(v);
        accelerated = false;
    }
    diag.penalty = T.penalty();
    if (!diag.converged)
        throw ConvergenceError(std::move(diag));

    N2sidSolution sol;
    sol.yhat = map.unpack_yhat(ev.theta);
    sol.Tu_blocks = map.unpack_tu(ev.theta);
    sol.Ty_blocks = map.unpack_ty(ev.theta);
    sol.M_star = map.residual(sol.yhat, sol.Tu_blocks, sol.Ty_blocks);
    sol.M_sketched = pb.sketch_right(sol.M_star);
    sol.singular_values = singular_values(sol.M_sketched);
    const auto parts = detail::objective_parts(pb, sol.M_sketched, sol.yhat);
    sol.nuclear_term = parts.nuclear;
    sol.prediction_term = parts.prediction;
    sol.objective = parts.nuclear + pb.lambda * parts.prediction;
    const Vector gap_vec = ev.Atheta - ev.z;
    sol.numerical_floor = 10.0 * singular_values(Eigen::Map<const Matrix>(gap_vec.data(), rows, cols))(0);
    const Vector dual_vec = T.penalty() * (v - ev.z);
    sol.dual = Eigen::Map<const Matrix>(dual_vec.data(), rows, cols);
    sol.diagnostics = std::move(diag);
    return sol;
}

// ----------------------------------------------------------------------------

/// First-order optimality residuals of a candidate solution with respect to
/// a candidate nuclear-norm subgradient G.
struct OptimalityReport {
    double spectral_excess = 0.0;   ///< max(0, ||G||_2 - 1)
    double alignment_error = 0.0;   ///< | <G, M> - ||M||_* | / max(1, ||M||_*)
    double stationarity = 0.0;      ///< ||L^*(G) + grad f|| / scale
};

/// Checks the subgradient conditions of the program at `sol` with
/// certificate `G` (defaults to the solver's dual). <G, M> = ||M||_* together
/// with ||G||_2 <= 1 is equivalent to G being a subgradient at M.
[[nodiscard]] inline OptimalityReport check_optimality(const N2sidProblem& pb, const N2sidSolution& sol,
                                                       std::optional<Matrix> certificate = std::nullopt) {
    const Matrix G = certificate ? *certificate : sol.dual;
    detail::require(G.rows() == sol.M_sketched.rows() && G.cols() == sol.M_sketched.cols(),
                    "check_optimality: certificate shape mismatch");
    const ResidualMap map(pb);
    OptimalityReport rep;
    const double gnorm = G.size() ? singular_values(G)(0) : 0.0;
    rep.spectral_excess = std::max(0.0, gnorm - 1.0);
    rep.alignment_error =
        std::abs((G.array() * sol.M_sketched.array()).sum() - sol.nuclear_term) / std::max(1.0, sol.nuclear_term);

    // adjoint of theta -> M G applied to G, plus gradient of the quadratic term
    const Matrix A = map.dense_operator();
    Vector g = A.transpose() * Eigen::Map<const Vector>(G.data(), G.size());
    const double mu = pb.weight();
    for (Index k = 0; k < pb.samples(); ++k)
        for (Index i = 0; i < pb.outputs(); ++i)
            g(k * pb.outputs() + i) += 2.0 * mu * (sol.yhat(k, i) - pb.y(k, i));
    const double scale = std::max(1.0, (A.transpose() * Eigen::Map<const Vector>(G.data(), G.size())).norm());
    rep.stationarity = g.norm() / scale;
    return rep;
}

} // namespace n2sid
