#pragma once

// Experimental data: random stable systems, +-1 excitation, innovation-noise
// simulation and the observer-based closed-loop configuration.

#include "random.hpp"
#include "types.hpp"

#include <cmath>
#include <cstdint>

namespace n2sid {

struct OpenLoopConfig {
    Index n = 2;
    Index m = 1;
    Index p = 1;
    Index N = 50;
    Index N_validation = 50;
    double noise_std = 0.2;
    double x0_std = 5.0;
    /// initial-state spread of the validation record
    double validation_x0_std = 5.0;
    double stability_cap = 0.99;
    std::uint64_t seed = 0;

    void validate() const {
        if (n < 1 || m < 0 || p < 1 || N < 1 || N_validation < 1)
            throw ConfigError("OpenLoopConfig: dimensions and lengths must be positive");
        if (noise_std < 0 || x0_std < 0 || validation_x0_std < 0)
            throw ConfigError("OpenLoopConfig: standard deviations must be nonnegative");
        if (!(stability_cap > 0) || !(stability_cap < 1))
            throw ConfigError("OpenLoopConfig: stability cap must lie in (0, 1)");
    }
};

/// The closed-loop benchmark plant and controller.
[[nodiscard]] inline StateSpaceModel closed_loop_plant() {
    Matrix A(2, 2), B(2, 1), C(1, 2), D(1, 1), K(2, 1);
    A << 0, 1, 0, 0.7;
    B << 0, 1;
    K << -0.3, 0.04;
    C << 1, 0;
    D << 0;
    return {A, B, C, D, K};
}

struct ClosedLoopConfig {
    StateSpaceModel plant = closed_loop_plant();
    Matrix L = (Matrix(1, 2) << 0.25, -0.3).finished();
    Index N = 50;
    Index N_validation = 50;
    double noise_std = 0.1;
    double x0_std = 5.0;
    std::uint64_t seed = 0;

    void validate() const {
        plant.validate();
        if (L.rows() != plant.inputs() || L.cols() != plant.order())
            throw ConfigError("ClosedLoopConfig: L must be m x n");
        if (N < 1 || N_validation < 1)
            throw ConfigError("ClosedLoopConfig: lengths must be positive");
        if (noise_std < 0 || x0_std < 0)
            throw ConfigError("ClosedLoopConfig: standard deviations must be nonnegative");
    }
};

// ----------------------------------------------------------------------------

/// Random stable model: A with standard-normal entries rescaled to a spectral
/// radius drawn uniformly from [0.1, cap], standard-normal B, C, D and K.
/// Draws with spectral radius above the cap are rejected.
[[nodiscard]] inline StateSpaceModel random_stable_system(const OpenLoopConfig& cfg, Rng& rng) {
    cfg.validate();
    std::uniform_real_distribution<double> radius(0.1, cfg.stability_cap);
    constexpr int budget = 1000;
    for (int attempt = 0; attempt < budget; ++attempt) {
        Matrix A = gaussian_matrix(cfg.n, cfg.n, rng);
        const double rho = spectral_radius(A);
        const double target = radius(rng);
        if (!(rho > 1e-8))
            continue;
        A *= target / rho;
        if (spectral_radius(A) > cfg.stability_cap)
            continue;
        Matrix B = gaussian_matrix(cfg.n, cfg.m, rng);
        Matrix C = gaussian_matrix(cfg.p, cfg.n, rng);
        Matrix D = gaussian_matrix(cfg.p, cfg.m, rng);
        Matrix K = gaussian_matrix(cfg.n, cfg.p, rng);
        return {std::move(A), std::move(B), std::move(C), std::move(D), std::move(K)};
    }
    throw NumericalError("random_stable_system: rejection budget exhausted");
}

[[nodiscard]] inline StateSpaceModel random_stable_system(const OpenLoopConfig& cfg) {
    Rng rng(cfg.seed);
    return random_stable_system(cfg, rng);
}

/// N x m sequence of +-1 (sign of standard normals).
[[nodiscard]] inline Series sign_input(Index N, Index m, Rng& rng) {
    Series u = gaussian_matrix(N, m, rng);
    return u.unaryExpr([](double v) { return v >= 0 ? 1.0 : -1.0; });
}

[[nodiscard]] inline Series sign_input(Index N, std::uint64_t seed, Index m = 1) {
    Rng rng(seed);
    return sign_input(N, m, rng);
}

struct Trajectory {
    IoBatch io;
    Matrix states; ///< N x n, x(k) in row k
};

[[nodiscard]] inline Trajectory simulate_innovation_states(const StateSpaceModel& model, const Series& u,
                                                           const Series& e, const Vector& x0) {
    model.validate();
    const Index N = e.rows();
    detail::require(u.rows() == N, "simulate_innovation: u and e lengths differ");
    detail::require(u.cols() == model.inputs(), "simulate_innovation: u has wrong channel count");
    detail::require(e.cols() == model.outputs(), "simulate_innovation: e has wrong channel count");
    detail::require(x0.size() == model.order(), "simulate_innovation: x0 has wrong size");

    Trajectory tr;
    tr.states.resize(N, model.order());
    Series y(N, model.outputs());
    Vector x = x0;
    for (Index k = 0; k < N; ++k) {
        tr.states.row(k) = x.transpose();
        const Vector uk = u.row(k).transpose();
        const Vector ek = e.row(k).transpose();
        y.row(k) = (model.C * x + model.D * uk + ek).transpose();
        x = model.A * x + model.B * uk + model.K * ek;
    }
    tr.io = IoBatch(u, std::move(y));
    return tr;
}

/// Exact recursion of the innovation model from x(1) = x0.
[[nodiscard]] inline IoBatch simulate_innovation(const StateSpaceModel& model, const Series& u, const Series& e,
                                                 const Vector& x0) {
    return simulate_innovation_states(model, u, e, x0).io;
}

/// Feed-forward gain making the DC gain from r to y equal to one under
/// u = -L xhat + g r.
[[nodiscard]] inline double closed_loop_feedforward_gain(const ClosedLoopConfig& cfg) {
    const auto& P = cfg.plant;
    const Index n = P.order();
    const Matrix Acl = P.A - P.B * cfg.L;
    // steady state has xhat = x, so y = ((C - D L)(I - A + B L)^{-1} B + D) g r
    const Matrix dc = (P.C - P.D * cfg.L) * (Matrix::Identity(n, n) - Acl).fullPivLu().solve(P.B) + P.D;
    if (dc.size() != 1 || std::abs(dc(0, 0)) < 1e-12)
        throw ConfigError("closed loop: DC gain is singular or not scalar");
    return 1.0 / dc(0, 0);
}

/// State matrix of plant + observer under u = -L xhat (states [x; xhat]).
[[nodiscard]] inline Matrix closed_loop_state_matrix(const ClosedLoopConfig& cfg) {
    const auto& P = cfg.plant;
    const Index n = P.order();
    Matrix M(2 * n, 2 * n);
    M.topLeftCorner(n, n) = P.A;
    M.topRightCorner(n, n) = -P.B * cfg.L;
    M.bottomLeftCorner(n, n) = P.K * P.C;
    M.bottomRightCorner(n, n) = P.A - P.B * cfg.L - P.K * P.C;
    return M;
}

/// Plant in innovation form driven by e, observer
///   xhat(k+1) = A xhat + B u + K (y - C xhat - D u)
/// and control u(k) = -L xhat(k) + g r(k). Returns (u, y).
[[nodiscard]] inline Trajectory simulate_closed_loop_states(const ClosedLoopConfig& cfg, const Series& r,
                                                            const Series& e, const Vector& x0) {
    cfg.validate();
    const auto& P = cfg.plant;
    const Index N = r.rows();
    detail::require(e.rows() == N, "simulate_closed_loop: r and e lengths differ");
    detail::require(r.cols() == P.inputs() && e.cols() == P.outputs(), "simulate_closed_loop: channel mismatch");
    detail::require(x0.size() == P.order(), "simulate_closed_loop: x0 has wrong size");
    const double g = closed_loop_feedforward_gain(cfg);

    Trajectory tr;
    tr.states.resize(N, P.order());
    Series u(N, P.inputs()), y(N, P.outputs());
    Vector x = x0;
    Vector xhat = Vector::Zero(P.order());
    for (Index k = 0; k < N; ++k) {
        tr.states.row(k) = x.transpose();
        const Vector uk = -cfg.L * xhat + g * r.row(k).transpose();
        const Vector ek = e.row(k).transpose();
        const Vector yk = P.C * x + P.D * uk + ek;
        u.row(k) = uk.transpose();
        y.row(k) = yk.transpose();
        x = P.A * x + P.B * uk + P.K * ek;
        xhat = P.A * xhat + P.B * uk + P.K * (yk - P.C * xhat - P.D * uk);
    }
    tr.io = IoBatch(std::move(u), std::move(y));
    return tr;
}

/// Closed-loop experiment record driven by reference r; noise and the plant
/// initial state are drawn from the config seed.
[[nodiscard]] inline IoBatch simulate_closed_loop(const ClosedLoopConfig& cfg, const Series& r) {
    Rng rng(cfg.seed);
    const Series e = gaussian_matrix(r.rows(), cfg.plant.outputs(), rng, cfg.noise_std);
    const Vector x0 = gaussian_matrix(cfg.plant.order(), 1, rng, cfg.x0_std);
    return simulate_closed_loop_states(cfg, r, e, x0).io;
}

} // namespace n2sid
