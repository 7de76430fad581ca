#include "oracles/tiny_instances.hpp"
#include "test_support.hpp"

#include <n2sid/solver.hpp>

#include <gtest/gtest.h>

using namespace n2sid;
using namespace n2sid_test;

namespace {

/// Soft-thresholding computed through the eigen-decomposition of M^T M,
/// independent of the SVD routine used by the library.
Matrix soft_threshold_via_gram(const Matrix& M, double tau) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(M.transpose() * M);
    Matrix out = Matrix::Zero(M.rows(), M.cols());
    for (Index i = 0; i < es.eigenvalues().size(); ++i) {
        const double sigma = std::sqrt(std::max(es.eigenvalues()(i), 0.0));
        if (sigma <= tau)
            continue;
        const Vector v = es.eigenvectors().col(i);
        const Vector u = M * v / sigma;
        out += (sigma - tau) * u * v.transpose();
    }
    return out;
}

double prox_objective(const Matrix& X, const Matrix& M, double tau) {
    return tau * nuclear_norm(X) + 0.5 * (X - M).squaredNorm();
}

IoBatch tiny_batch(const TinyInstance& t) {
    Series u(6, 1), y(6, 1);
    for (Index k = 0; k < 6; ++k) {
        u(k, 0) = t.u[static_cast<std::size_t>(k)];
        y(k, 0) = t.y[static_cast<std::size_t>(k)];
    }
    return {u, y};
}

IoBatch noisy_record(std::uint64_t seed, Index N = 50, double noise = 0.2) {
    Rng rng(seed);
    const StateSpaceModel model = random_model(2, 1, 1, rng, 0.99);
    return simulate_innovation(model, sign_input(N, 1, rng), gaussian_matrix(N, 1, rng, noise),
                               gaussian_matrix(2, 1, rng, 5.0));
}

} // namespace

// --- prox_nuclear -------------------------------------------------------------

TEST(ProxNuclear, ShrinksSingularValues) {
    Rng rng(1);
    const Matrix U = Eigen::HouseholderQR<Matrix>(gaussian_matrix(5, 3, rng)).householderQ() * Matrix::Identity(5, 3);
    const Matrix V = Eigen::HouseholderQR<Matrix>(gaussian_matrix(4, 3, rng)).householderQ() * Matrix::Identity(4, 3);
    const Matrix M = U * Vector{{5.0, 2.0, 0.5}}.asDiagonal() * V.transpose();
    const Vector sv = singular_values(prox_nuclear(M, 1.0));
    EXPECT_NEAR(sv(0), 4.0, 1e-12);
    EXPECT_NEAR(sv(1), 1.0, 1e-12);
    EXPECT_NEAR(sv(2), 0.0, 1e-12);
}

TEST(ProxNuclear, LargeThresholdGivesZero) {
    Rng rng(2);
    const Matrix M = gaussian_matrix(6, 4, rng);
    EXPECT_TRUE(prox_nuclear(M, singular_values(M)(0)).isZero(0));
    EXPECT_TRUE(prox_nuclear(M, 1e3).isZero(0));
}

TEST(ProxNuclear, MatchesGramRouteOnRandomMatrices) {
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        const Index r = 1 + i % 9, c = 1 + (i / 3) % 7;
        const Matrix M = gaussian_matrix(r, c, rng);
        const double tau = 0.05 + 0.02 * (i % 40);
        const Matrix expected = soft_threshold_via_gram(M, tau);
        EXPECT_LE((prox_nuclear(M, tau) - expected).norm(), 1e-10 * std::max(1.0, M.norm())) << "case " << i;
    }
}

TEST(ProxNuclear, LocalOptimalityUnderPerturbations) {
    Rng rng(4);
    for (int inst = 0; inst < 5; ++inst) {
        const Matrix M = gaussian_matrix(8, 5, rng);
        const double tau = 0.5 + 0.3 * inst;
        const Matrix X = prox_nuclear(M, tau);
        const double f0 = prox_objective(X, M, tau);
        for (int k = 0; k < 200; ++k) {
            const double h = k % 2 ? 1e-3 : 1e-5;
            const Matrix D = gaussian_matrix(8, 5, rng, h);
            EXPECT_GE(prox_objective(X + D, M, tau), f0 - 1e-12);
        }
    }
}

TEST(ProxNuclear, RejectsNonpositiveThreshold) {
    EXPECT_THROW((void)prox_nuclear(Matrix::Ones(2, 2), 0.0), ConfigError);
    EXPECT_THROW((void)prox_nuclear(Matrix::Ones(2, 2), -1.0), ConfigError);
}

// --- sketch -------------------------------------------------------------------

TEST(Sketch, SameSeedSameMatrix) {
    EXPECT_EQ(gaussian_sketch(36, 22, 99), gaussian_sketch(36, 22, 99));
    EXPECT_NE(gaussian_sketch(36, 22, 99), gaussian_sketch(36, 22, 100));
}

TEST(Sketch, IdentitySketchLeavesObjectiveUnchanged) {
    const IoBatch io = noisy_record(5);
    N2sidProblem plain = N2sidProblem::from_batch(io, 15, 50.0);
    N2sidProblem hooked = plain;
    hooked.set_sketch_matrix(Matrix::Identity(36, 36));
    ASSERT_TRUE(hooked.sketched());
    Rng rng(6);
    const ResidualMap map(plain);
    const Vector theta = gaussian_matrix(map.size(), 1, rng);
    const auto yhat = map.unpack_yhat(theta);
    const auto Tu = map.unpack_tu(theta);
    const auto Ty = map.unpack_ty(theta);
    EXPECT_NEAR(n2sid_objective(plain, yhat, Tu, Ty), n2sid_objective(hooked, yhat, Tu, Ty), 1e-9);
}

TEST(Sketch, PreservesRankTwo) {
    Rng rng(7);
    const Matrix M = gaussian_matrix(15, 2, rng) * gaussian_matrix(2, 36, rng);
    const Vector sv = singular_values(apply_sketch(M, 22, 8));
    ASSERT_EQ(sv.size(), 15);
    EXPECT_LT(sv(2) / sv(0), 1e-10);
    EXPECT_GT(sv(1) / sv(0), 1e-3);
}

TEST(Sketch, RejectsZeroWidth) { EXPECT_THROW((void)gaussian_sketch(10, 0, 1), ConfigError); }

// --- lambda_grid ----------------------------------------------------------------

TEST(LambdaGrid, DefaultEndpoints) {
    const auto g = lambda_grid();
    ASSERT_EQ(g.size(), 20u);
    EXPECT_NEAR(g.front(), 0.31622776601683794, 1e-15);
    EXPECT_EQ(g.back(), 1e4);
}

TEST(LambdaGrid, TwoPoints) {
    const auto g = lambda_grid(2, 0.5, 8.0);
    ASSERT_EQ(g.size(), 2u);
    EXPECT_EQ(g[0], 0.5);
    EXPECT_EQ(g[1], 8.0);
}

TEST(LambdaGrid, ConstantRatio) {
    const auto g = lambda_grid();
    const double r = g[1] / g[0];
    for (std::size_t i = 1; i < g.size(); ++i)
        EXPECT_NEAR(g[i] / g[i - 1], r, 1e-12);
}

TEST(LambdaGrid, RejectsBadArguments) {
    EXPECT_THROW((void)lambda_grid(1), ConfigError);
    EXPECT_THROW((void)lambda_grid(5, 0.0, 1.0), ConfigError);
    EXPECT_THROW((void)lambda_grid(5, 2.0, 1.0), ConfigError);
}

// --- residual map ---------------------------------------------------------------

TEST(ResidualMap, DenseOperatorMatchesStructuredResidual) {
    Rng rng(9);
    const IoBatch io = noisy_record(10, 20);
    const N2sidProblem pb = N2sidProblem::from_batch(io, 4, 1.0, SketchConfig{5, 3});
    const ResidualMap map(pb);
    const Matrix A = map.dense_operator();
    const Vector theta = gaussian_matrix(map.size(), 1, rng);
    const Matrix direct = pb.sketch_right(map.residual(theta));
    const Vector via_A = A * theta;
    EXPECT_LE((Eigen::Map<const Vector>(direct.data(), direct.size()) - via_A).norm(), 1e-12 * direct.norm());
}

TEST(ResidualMap, PackUnpackRoundTrip) {
    Rng rng(10);
    const IoBatch io = noisy_record(11, 20);
    const N2sidProblem pb = N2sidProblem::from_batch(io, 5, 1.0);
    const ResidualMap map(pb);
    const Vector theta = gaussian_matrix(map.size(), 1, rng);
    EXPECT_EQ(map.pack(map.unpack_yhat(theta), map.unpack_tu(theta), map.unpack_ty(theta)), theta);
    EXPECT_EQ(map.size(), 20 + 5 + 4);
}

// --- solve_n2sid ----------------------------------------------------------------

TEST(Solve, ZeroLambdaDrivesObjectiveToZero) {
    const IoBatch io = noisy_record(12);
    const N2sidProblem pb = N2sidProblem::from_batch(io, 15, 0.0);
    const N2sidSolution sol = solve_n2sid(pb);
    EXPECT_LE(sol.objective, 1e-5 * pb.Y_s.values.norm());
    EXPECT_LE(sol.M_star.norm(), 1e-5 * pb.Y_s.values.norm());
}

TEST(Solve, NoiseFreeLargeLambdaRevealsRankTwo) {
    for (std::uint64_t seed : {21u, 22u, 23u}) {
        const NoiseFreeCase c = noise_free_case(seed);
        const IoBatch& io = c.identification;
        const N2sidProblem pb = N2sidProblem::from_batch(io, 15, 1e4 * 50);
        const N2sidSolution sol = solve_n2sid(pb);
        const Vector sv = singular_values(sol.M_star);
        EXPECT_LT(sv(2) / sv(0), 1e-4) << "seed " << seed;
        EXPECT_LT((io.y - sol.yhat).squaredNorm(), 1e-6 * io.y.squaredNorm()) << "seed " << seed;
    }
}

TEST(Solve, MatchesIndependentConicOracleOnTinyInstances) {
    for (const auto& t : tiny_instances) {
        const N2sidProblem pb = N2sidProblem::from_batch(tiny_batch(t), 2, t.lambda);
        const N2sidSolution sol = solve_n2sid(pb);
        EXPECT_NEAR(sol.objective, t.objective, 1e-4 * std::abs(t.objective)) << "lambda " << t.lambda;
    }
}

TEST(Solve, SolutionIsStructurallyFeasibleAndConsistent) {
    const IoBatch io = noisy_record(13);
    const N2sidProblem pb = N2sidProblem::from_batch(io, 15, 5.0 * 50, SketchConfig{22, 4});
    const N2sidSolution sol = solve_n2sid(pb);

    ASSERT_EQ(sol.Tu_blocks.s(), 15);
    ASSERT_EQ(sol.Ty_blocks.s(), 15);
    EXPECT_FALSE(sol.Tu_blocks.strictly_causal);
    EXPECT_TRUE(sol.Ty_blocks.strictly_causal);
    EXPECT_TRUE(sol.Ty_blocks.markov[0].isZero(0));

    // M_star rebuilt from (yhat, T_u, T_y) with a dense Toeplitz oracle
    const Matrix rebuilt = build_hankel(sol.yhat, 15).values - dense_toeplitz(sol.Tu_blocks) * pb.U_s.values -
                           dense_toeplitz(sol.Ty_blocks) * pb.Y_s.values;
    EXPECT_LE(rel_err(sol.M_star, rebuilt), 1e-8);
    EXPECT_LE(rel_err(sol.M_sketched, sol.M_star * pb.sketch_matrix()), 1e-12);

    for (Index i = 0; i < sol.singular_values.size(); ++i) {
        EXPECT_GE(sol.singular_values(i), 0.0);
        if (i > 0) {
            EXPECT_LE(sol.singular_values(i), sol.singular_values(i - 1));
        }
    }
    EXPECT_NEAR(sol.objective, n2sid_objective(pb, sol.yhat, sol.Tu_blocks, sol.Ty_blocks), 1e-9 * sol.objective);
    EXPECT_TRUE(sol.diagnostics.converged);
}

TEST(Solve, DualCertificateSatisfiesSubgradientConditions) {
    for (std::uint64_t seed : {31u, 32u}) {
        const IoBatch io = noisy_record(seed);
        const N2sidProblem pb = N2sidProblem::from_batch(io, 15, 10.0 * 50, SketchConfig{22, seed});
        SolverOptions opts;
        const N2sidSolution sol = solve_n2sid(pb, opts);
        const OptimalityReport rep = check_optimality(pb, sol);
        EXPECT_LE(rep.spectral_excess, 1e-4);
        EXPECT_LE(rep.alignment_error, 1e-4);
        EXPECT_LE(rep.stationarity, 1e-4);
    }
}

TEST(Solve, ObjectiveNotBelowAnyPerturbedFeasiblePoint) {
    const IoBatch io = noisy_record(14, 30);
    const N2sidProblem pb = N2sidProblem::from_batch(io, 6, 3.0 * 30);
    SolverOptions opts;
    opts.primal_tol = opts.dual_tol = 1e-9;
    const N2sidSolution sol = solve_n2sid(pb, opts);
    const ResidualMap map(pb);
    const Vector theta = map.pack(sol.yhat, sol.Tu_blocks, sol.Ty_blocks);
    Rng rng(15);
    for (int k = 0; k < 200; ++k) {
        const Vector d = gaussian_matrix(map.size(), 1, rng, k % 2 ? 1e-3 : 1e-2);
        const Vector t = theta + d;
        EXPECT_GE(n2sid_objective(pb, map.unpack_yhat(t), map.unpack_tu(t), map.unpack_ty(t)),
                  sol.objective - 1e-7 * sol.objective);
    }
}

TEST(Solve, OutputOnlyProgramHasNoInputTerm) {
    const IoBatch io = noisy_record(16);
    const N2sidProblem pb = N2sidProblem::from_batch(IoBatch(Series(50, 0), io.y), 10, 20.0 * 50);
    EXPECT_TRUE(pb.output_only);
    EXPECT_EQ(pb.inputs(), 0);
    const N2sidSolution sol = solve_n2sid(pb);
    EXPECT_EQ(sol.Tu_blocks.block_cols(), 0);
    const Matrix rebuilt = build_hankel(sol.yhat, 10).values - dense_toeplitz(sol.Ty_blocks) * pb.Y_s.values;
    EXPECT_LE(rel_err(sol.M_star, rebuilt), 1e-8);

    // the flag drops inputs even when they are present in the batch
    const N2sidProblem flagged = N2sidProblem::from_batch(io, 10, 20.0 * 50, std::nullopt, true);
    EXPECT_EQ(flagged.inputs(), 0);
    EXPECT_EQ(ResidualMap(flagged).size(), 50 + 9);
}

TEST(Solve, ParetoOrderAlongLambdaGrid) {
    const IoBatch io = noisy_record(17);
    SolverOptions opts;
    opts.primal_tol = opts.dual_tol = 1e-9;
    opts.max_iters = 20000;
    double prev_pred = std::numeric_limits<double>::infinity(), prev_nuc = 0.0;
    for (const double l : lambda_grid()) {
        const N2sidProblem pb = N2sidProblem::from_batch(io, 15, l * 50, SketchConfig{22, 5});
        const N2sidSolution sol = solve_n2sid(pb, opts);
        EXPECT_LE(sol.prediction_term, prev_pred * (1 + 1e-6) + 1e-12) << "lambda/N " << l;
        EXPECT_GE(sol.nuclear_term, prev_nuc * (1 - 1e-6)) << "lambda/N " << l;
        prev_pred = sol.prediction_term;
        prev_nuc = sol.nuclear_term;
    }
}

TEST(Solve, FixedPointResidualNonincreasingWithoutAcceleration) {
    const IoBatch io = noisy_record(18);
    const N2sidProblem pb = N2sidProblem::from_batch(io, 15, 2.0 * 50, SketchConfig{22, 6});
    SolverOptions opts;
    opts.anderson_memory = 0;
    opts.record_history = true;
    opts.max_iters = 3000;
    SolverDiagnostics diag;
    try {
        diag = solve_n2sid(pb, opts).diagnostics;
    } catch (const ConvergenceError& ex) {
        diag = ex.diagnostics();
    }
    ASSERT_GT(diag.history.size(), 10u);
    for (std::size_t i = 1; i < diag.history.size(); ++i) {
        const auto& a = diag.history[i - 1];
        const auto& b = diag.history[i];
        if (a.penalty != b.penalty)
            continue;
        EXPECT_LE(b.fixed_point_residual, a.fixed_point_residual * (1 + 1e-10) + 1e-14) << "iteration " << i;
    }
}

TEST(Solve, AccelerationOnlyAcceptsImprovingSteps) {
    const IoBatch io = noisy_record(19);
    const N2sidProblem pb = N2sidProblem::from_batch(io, 15, 2.0 * 50, SketchConfig{22, 7});
    SolverOptions opts;
    opts.record_history = true;
    const N2sidSolution sol = solve_n2sid(pb, opts);
    const auto& h = sol.diagnostics.history;
    for (std::size_t i = 1; i < h.size(); ++i)
        if (h[i].accelerated && h[i].penalty == h[i - 1].penalty) {
            EXPECT_LT(h[i].fixed_point_residual, h[i - 1].fixed_point_residual);
        }
}

TEST(Solve, NonConvergenceCarriesDiagnostics) {
    const IoBatch io = noisy_record(20);
    const N2sidProblem pb = N2sidProblem::from_batch(io, 15, 100.0);
    SolverOptions opts;
    opts.max_iters = 3;
    try {
        (void)solve_n2sid(pb, opts);
        FAIL() << "expected ConvergenceError";
    } catch (const ConvergenceError& ex) {
        EXPECT_EQ(ex.diagnostics().iterations, 3);
        EXPECT_GT(ex.diagnostics().primal_residual, 0.0);
        EXPECT_FALSE(ex.diagnostics().converged);
    }
}

TEST(Solve, RejectsInvalidOptionsAndData) {
    const IoBatch io = noisy_record(21, 20);
    const N2sidProblem pb = N2sidProblem::from_batch(io, 4, 1.0);
    SolverOptions bad;
    bad.primal_tol = 0.0;
    EXPECT_THROW((void)solve_n2sid(pb, bad), ConfigError);
    EXPECT_THROW((void)N2sidProblem::from_batch(io, 4, -1.0), ConfigError);
    EXPECT_THROW((void)N2sidProblem::from_batch(io, 25, 1.0), DimensionError);
}
