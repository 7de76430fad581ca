#include "test_support.hpp"

#include <n2sid/bench.hpp>
#include <n2sid/report.hpp>

#include <gtest/gtest.h>

#include <cstdlib>
#include <set>
#include <sstream>

using namespace n2sid;
using namespace n2sid_test;

namespace {

StudyConfig quick_study(int trials, std::uint64_t seed = 7) {
    StudyConfig sc;
    sc.trials = trials;
    sc.master_seed = seed;
    sc.grid = lambda_grid(5, 1e-1, 1e3);
    sc.threads = 1;
    return sc;
}

TrialResult synthetic(std::optional<double> a, std::optional<double> b) {
    TrialResult t;
    t.n2sid_fit = a;
    t.n4sid_fit = b;
    return t;
}

SweepPoint point(double lambda, std::optional<double> fit_value) {
    SweepPoint p;
    p.lambda_over_N = lambda;
    if (fit_value) {
        p.result = IdentifiedModel{};
        p.selection_fit = *fit_value;
    }
    return p;
}

std::size_t count_lines(const std::string& text) {
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

} // namespace

// --- lambda selection -----------------------------------------------------------

TEST(SelectLambda, BestFitWins) {
    const std::vector<SweepPoint> pts{point(0.1, 80.0), point(1.0, 90.0), point(10.0, 85.0)};
    EXPECT_EQ(select_lambda(pts), std::optional<std::size_t>(1));
}

TEST(SelectLambda, TiesGoToLargerLambda) {
    const std::vector<SweepPoint> pts{point(0.1, 90.0), point(1.0, 90.0), point(10.0, 90.0), point(100.0, 70.0)};
    EXPECT_EQ(select_lambda(pts), std::optional<std::size_t>(2));
    // order of the grid does not matter
    const std::vector<SweepPoint> rev{point(100.0, 70.0), point(10.0, 90.0), point(1.0, 90.0), point(0.1, 90.0)};
    EXPECT_EQ(select_lambda(rev), std::optional<std::size_t>(1));
}

TEST(SelectLambda, SinglePointAndMonotoneDegradation) {
    EXPECT_EQ(select_lambda({point(3.0, 12.0)}), std::optional<std::size_t>(0));
    EXPECT_EQ(select_lambda({point(0.1, 95.0), point(1.0, 90.0), point(10.0, 80.0)}), std::optional<std::size_t>(0));
}

TEST(SelectLambda, FailedPointsAreSkipped) {
    EXPECT_FALSE(select_lambda({point(0.1, std::nullopt), point(1.0, std::nullopt)}).has_value());
    EXPECT_FALSE(select_lambda({}).has_value());
    EXPECT_EQ(select_lambda({point(0.1, std::nullopt), point(1.0, -5.0)}), std::optional<std::size_t>(1));
}

// --- helpers ------------------------------------------------------------------------

TEST(Fnv1a, KnownDigests) {
    // reference values of 64-bit FNV-1a
    EXPECT_EQ(fnv1a(""), 0xCBF29CE484222325ULL);
    EXPECT_EQ(fnv1a("a"), 0xAF63DC4C8601EC8CULL);
    EXPECT_EQ(fnv1a("foobar"), 0x85944171F73967E8ULL);
}

TEST(HashBatch, SensitiveToValuesAndShape) {
    Rng rng(1);
    const IoBatch a(gaussian_matrix(10, 1, rng), gaussian_matrix(10, 1, rng));
    IoBatch b = a;
    EXPECT_EQ(hash_batch(a), hash_batch(b));
    b.y(3, 0) = std::nextafter(b.y(3, 0), 1e9);
    EXPECT_NE(hash_batch(a), hash_batch(b));
    // an input-free batch differs from one with an all-zero input channel
    EXPECT_NE(hash_batch(IoBatch(Series(10, 0), a.y)), hash_batch(IoBatch(Series::Zero(10, 1), a.y)));
}

TEST(MatchedEigenDistance, HandExamples) {
    using C = std::complex<double>;
    EXPECT_NEAR(*matched_eigen_distance({C(0.7), C(0.0)}, {C(0.0), C(0.7)}), 0.0, 1e-15);
    EXPECT_NEAR(*matched_eigen_distance({C(0.1), C(0.6)}, {C(0.0), C(0.7)}), 0.1, 1e-15);
    // crossing assignment would cost 0.5 + 0.7
    EXPECT_NEAR(*matched_eigen_distance({C(0.0, 0.3), C(0.7, 0.4)}, {C(0.0), C(0.7)}), 0.35, 1e-15);
    EXPECT_FALSE(matched_eigen_distance({C(0.1)}, {C(0.0), C(0.7)}).has_value());
    EXPECT_FALSE(matched_eigen_distance({}, {}).has_value());
}

TEST(Bootstrap, DeterministicAndCentred) {
    Rng rng(2);
    const Matrix draws = gaussian_matrix(400, 1, rng);
    const std::vector<double> x(draws.data(), draws.data() + draws.size());
    const auto a = bootstrap_mean_interval(x, 0.9, 2000, 11), b = bootstrap_mean_interval(x, 0.9, 2000, 11);
    EXPECT_EQ(a, b);
    const double m = draws.mean();
    const double sd = std::sqrt((draws.array() - m).square().sum() / 399.0);
    // normal approximation: mean +- 1.645 sd / sqrt(n)
    const double half = 1.645 * sd / 20.0;
    EXPECT_LT(a.first, m);
    EXPECT_GT(a.second, m);
    EXPECT_NEAR(a.second - a.first, 2 * half, 0.15 * 2 * half);
    EXPECT_NEAR(0.5 * (a.first + a.second), m, 0.2 * half);
}

TEST(Bootstrap, ConstantSampleAndEmpty) {
    const auto ci = bootstrap_mean_interval(std::vector<double>(30, 2.5), 0.9, 500, 3);
    EXPECT_DOUBLE_EQ(ci.first, 2.5);
    EXPECT_DOUBLE_EQ(ci.second, 2.5);
    EXPECT_TRUE(std::isnan(bootstrap_mean_interval({}, 0.9, 100, 1).first));
}

TEST(Summarize, RatesPartitionTheTrials) {
    const std::vector<TrialResult> t{synthetic(90, 80), synthetic(70, 75), synthetic(60, 60),
                                     synthetic(50, std::nullopt), synthetic(std::nullopt, 40),
                                     synthetic(std::nullopt, std::nullopt)};
    const StudySummary s = summarize(t, 1);
    EXPECT_EQ(s.trials, 6);
    EXPECT_EQ(s.compared, 3);
    EXPECT_NEAR(s.win_rate, 2.0 / 6, 1e-15);
    EXPECT_NEAR(s.loss_rate, 2.0 / 6, 1e-15);
    EXPECT_NEAR(s.tie_rate, 2.0 / 6, 1e-15);
    EXPECT_NEAR(s.win_rate + s.loss_rate + s.tie_rate, 1.0, 1e-15);
    EXPECT_NEAR(s.mean_fit_gap, (10.0 - 5.0 + 0.0) / 3, 1e-12);
    EXPECT_NEAR(s.n2sid_mean_fit, 220.0 / 3, 1e-12);
    EXPECT_NEAR(s.n4sid_median_fit, 75.0, 1e-12);
    EXPECT_EQ(s.n2sid_failures, 2);
    EXPECT_EQ(s.n4sid_failures, 2);
}

TEST(Summarize, RandomTrialsAlwaysPartition) {
    Rng rng(4);
    std::uniform_real_distribution<double> u(-20, 100);
    std::bernoulli_distribution fail(0.1);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<TrialResult> t;
        for (int i = 0; i < 37; ++i)
            t.push_back(synthetic(fail(rng) ? std::nullopt : std::optional<double>(u(rng)),
                                  fail(rng) ? std::nullopt : std::optional<double>(u(rng))));
        const StudySummary s = summarize(t, 9);
        EXPECT_NEAR(s.win_rate + s.loss_rate + s.tie_rate, 1.0, 1e-12);
        if (s.compared > 1) {
            EXPECT_LE(s.gap_ci_low, s.mean_fit_gap);
            EXPECT_GE(s.gap_ci_high, s.mean_fit_gap);
        }
    }
}

TEST(Summarize, EigenDistancesUseMatchedPairs) {
    using C = std::complex<double>;
    TrialResult t = synthetic(90, 80);
    t.true_eigs = {C(0.0), C(0.7)};
    t.n2sid_eigs = {C(0.05), C(0.7)};
    t.n4sid_eigs = {C(0.0), C(0.5)};
    const StudySummary s = summarize({t}, 1);
    EXPECT_NEAR(*s.n2sid_eig_distance, 0.025, 1e-15);
    EXPECT_NEAR(*s.n4sid_eig_distance, 0.1, 1e-15);
}

TEST(Workers, ExplicitEnvironmentAndClamp) {
    EXPECT_EQ(worker_count(3, 10), 3);
    EXPECT_EQ(worker_count(8, 2), 2);
    ::setenv("N2SID_THREADS", "2", 1);
    EXPECT_EQ(worker_count(0, 10), 2);
    ::setenv("N2SID_THREADS", "junk", 1);
    EXPECT_GE(worker_count(0, 10), 1);
    ::unsetenv("N2SID_THREADS");
    EXPECT_GE(worker_count(0, 1), 1);
}

TEST(Workers, ParallelForVisitsEveryIndexOnce) {
    std::vector<std::atomic<int>> hits(101);
    parallel_for(101, 4, [&](int i) { hits[static_cast<std::size_t>(i)]++; });
    for (const auto& h : hits)
        EXPECT_EQ(h.load(), 1);
}

TEST(StudyConfig, Validation) {
    StudyConfig sc;
    EXPECT_NO_THROW(sc.validate());
    sc.trials = 0;
    EXPECT_THROW(sc.validate(), ConfigError);
    sc = {};
    sc.grid.clear();
    EXPECT_THROW(sc.validate(), ConfigError);
    sc = {};
    sc.sketch_width = 0;
    EXPECT_THROW(sc.validate(), ConfigError);
    sc = {};
    sc.s = 1;
    EXPECT_THROW(sc.validate(), ConfigError);
}

// --- studies ---------------------------------------------------------------------

TEST(OpenLoopStudy, NoiseFreeTrialsFitAlmostPerfectly) {
    OpenLoopConfig oc;
    oc.noise_std = 0.0;
    const BenchReport rep = run_open_loop_study(quick_study(2), oc);
    ASSERT_EQ(rep.trials.size(), 2u);
    for (const auto& t : rep.trials) {
        ASSERT_TRUE(t.n2sid_fit.has_value()) << t.n2sid_error;
        ASSERT_TRUE(t.n4sid_fit.has_value()) << t.n4sid_error;
        EXPECT_GE(*t.n2sid_fit, 99.0);
        EXPECT_GE(*t.n4sid_fit, 99.0);
        EXPECT_EQ(t.true_eigs.size(), 2u);
        EXPECT_TRUE(t.lambda_selected.has_value());
    }
}

TEST(OpenLoopStudy, BothMethodsSeeIdenticalData) {
    const StudyConfig sc = quick_study(2);
    const OpenLoopConfig oc;
    const BenchReport rep = run_open_loop_study(sc, oc);
    for (const auto& t : rep.trials) {
        EXPECT_TRUE(t.same_inputs);
        // regenerate the trial's identification record independently
        Rng rng(derive_seed(sc.master_seed, static_cast<std::uint64_t>(t.index)));
        const StateSpaceModel model = random_stable_system(oc, rng);
        const Series u = sign_input(oc.N, oc.m, rng);
        const Series e = gaussian_matrix(oc.N, oc.p, rng, oc.noise_std);
        const Vector x0 = gaussian_matrix(oc.n, 1, rng, oc.x0_std);
        EXPECT_EQ(t.identification_hash, hash_batch(simulate_innovation(model, u, e, x0)));
        EXPECT_NE(t.identification_hash, t.validation_hash);
    }
}

TEST(OpenLoopStudy, DeterministicAcrossRunsAndThreadCounts) {
    StudyConfig sc = quick_study(3);
    const BenchReport a = run_open_loop_study(sc);
    const BenchReport b = run_open_loop_study(sc);
    sc.threads = 3;
    const BenchReport c = run_open_loop_study(sc);
    EXPECT_EQ(report_text(a), report_text(b));
    EXPECT_EQ(report_hash(a), report_hash(c));
    sc.master_seed = 8;
    EXPECT_NE(report_hash(run_open_loop_study(sc)), report_hash(a));
}

TEST(OpenLoopStudy, TrialsAreIndependentOfStudySize) {
    const BenchReport small = run_open_loop_study(quick_study(1));
    const BenchReport large = run_open_loop_study(quick_study(2));
    EXPECT_EQ(small.trials[0].identification_hash, large.trials[0].identification_hash);
    EXPECT_EQ(small.trials[0].n2sid_fit, large.trials[0].n2sid_fit);
}

TEST(ClosedLoopStudy, TrueEigenvaluesAndFixedOrder) {
    const BenchReport rep = run_closed_loop_study(quick_study(2));
    EXPECT_EQ(rep.study, "closed_loop");
    for (const auto& t : rep.trials) {
        ASSERT_EQ(t.true_eigs.size(), 2u);
        EXPECT_NEAR(std::abs(t.true_eigs[0]), 0.0, 1e-15);
        EXPECT_NEAR(std::abs(t.true_eigs[1] - 0.7), 0.0, 1e-15);
        if (t.n2sid_fit) {
            EXPECT_EQ(t.n2sid_order, 2);
            EXPECT_EQ(t.n2sid_eigs.size(), 2u);
        }
        if (t.n4sid_fit) {
            EXPECT_EQ(t.n4sid_order, 2);
        }
    }
    EXPECT_TRUE(rep.summary.n2sid_eig_distance.has_value() || rep.summary.n2sid_failures == 2);
}

// --- report artifacts -------------------------------------------------------------

TEST(Report, DocumentShapeAndTimingsKeptApart) {
    const BenchReport rep = run_open_loop_study(quick_study(2));
    const nlohmann::json j = report_to_json(rep);
    EXPECT_EQ(j["study"], "open_loop");
    EXPECT_EQ(j["trials"].size(), 2u);
    EXPECT_TRUE(j["summary"].contains("win_rate"));
    EXPECT_EQ(report_text(rep).find("seconds"), std::string::npos);
    EXPECT_EQ(report_text(rep).find("timings"), std::string::npos);
    const nlohmann::json tj = timings_to_json(rep);
    EXPECT_FALSE(tj.empty());

    const std::string scatter = scatter_csv(rep);
    EXPECT_EQ(count_lines(scatter), 3u);
    EXPECT_EQ(scatter.rfind("trial", 0), 0u);
    EXPECT_GE(count_lines(eigenvalue_csv(rep)), 2u);
    EXPECT_EQ(scatter_svg(rep).rfind("<svg", 0), 0u);
    EXPECT_NE(eigenvalue_svg(rep).find("</svg>"), std::string::npos);
}

TEST(Report, NonFiniteValuesBecomeNull) {
    BenchReport rep;
    rep.study = "open_loop";
    rep.trials.push_back(synthetic(std::nullopt, 50.0));
    rep.summary = summarize(rep.trials, 1);
    const nlohmann::json j = report_to_json(rep);
    EXPECT_TRUE(j["summary"]["n2sid_mean_fit"].is_null());
    EXPECT_TRUE(j["trials"][0]["n2sid_fit"].is_null());
    EXPECT_TRUE(nlohmann::json::accept(report_text(rep)));
}
