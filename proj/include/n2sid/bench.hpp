#pragma once

// Monte-Carlo comparison of the nuclear-norm method against the projection
// baseline on random open-loop systems and on a fixed closed-loop plant.
// Every trial draws its data from a seed derived from (master seed, trial
// index), so trials are independent of scheduling and the aggregated report
// is a deterministic fold in trial order.

#include "baseline.hpp"
#include "datagen.hpp"
#include "identify.hpp"
#include "random.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <complex>
#include <cstdlib>
#include <cstring>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace n2sid {

struct StudyConfig {
    int trials = 100;
    std::uint64_t master_seed = 1;
    Index s = 15;
    /// sketch width; no sketch when empty
    std::optional<Index> sketch_width = 22;
    std::vector<double> grid = lambda_grid();
    Index order_cap = 10;
    SolverOptions solver;
    /// choose lambda by validation fit instead of identification fit
    bool select_on_validation = false;
    /// worker count; 0 uses N2SID_THREADS or the hardware concurrency
    int threads = 0;

    void validate() const {
        if (trials < 1)
            throw ConfigError("study: trials must be >= 1");
        if (s < 2)
            throw ConfigError("study: s must be >= 2");
        if (sketch_width && *sketch_width < 1)
            throw ConfigError("study: sketch width must be >= 1");
        if (grid.empty())
            throw ConfigError("study: empty lambda grid");
        if (order_cap < 1)
            throw ConfigError("study: order cap must be >= 1");
    }
};

struct StageTimings {
    double generate = 0.0;
    double solve = 0.0;
    double extract = 0.0;
    double baseline = 0.0;
};

struct TrialResult {
    int index = 0;
    std::uint64_t trial_seed = 0;
    std::optional<double> n2sid_fit; ///< validation fit; empty when the method failed
    std::optional<double> n4sid_fit;
    Index n2sid_order = 0;
    Index n4sid_order = 0;
    std::vector<std::complex<double>> n2sid_eigs;
    std::vector<std::complex<double>> n4sid_eigs;
    std::vector<std::complex<double>> true_eigs;
    std::optional<double> lambda_selected; ///< lambda / N
    int lambda_failures = 0;               ///< grid points where the program or extraction failed
    std::string n2sid_error;
    std::string n4sid_error;
    std::uint64_t identification_hash = 0;
    std::uint64_t validation_hash = 0;
    bool same_inputs = true; ///< both methods saw byte-identical batches
    bool negative_fit = false;
    StageTimings timings;
};

struct StudySummary {
    int trials = 0;
    int compared = 0; ///< trials where both methods produced a fit
    double n2sid_mean_fit = 0.0;
    double n4sid_mean_fit = 0.0;
    double n2sid_median_fit = 0.0;
    double n4sid_median_fit = 0.0;
    double win_rate = 0.0;
    double loss_rate = 0.0;
    double tie_rate = 0.0;
    double mean_fit_gap = 0.0; ///< mean of n2sid - n4sid over compared trials
    double gap_ci_low = 0.0;   ///< bootstrap 90% interval of the mean gap
    double gap_ci_high = 0.0;
    double n2sid_mean_order = 0.0;
    double n4sid_mean_order = 0.0;
    int negative_fit_trials = 0;
    int n2sid_failures = 0;
    int n4sid_failures = 0;
    std::optional<double> n2sid_eig_distance; ///< mean matched distance to the true eigenvalues
    std::optional<double> n4sid_eig_distance;
};

struct BenchReport {
    std::string study; ///< "open_loop" or "closed_loop"
    std::uint64_t master_seed = 0;
    StudyConfig config;
    std::optional<OpenLoopConfig> open_loop;
    std::optional<ClosedLoopConfig> closed_loop;
    std::vector<TrialResult> trials;
    StudySummary summary;
};

// ----------------------------------------------------------------------------

/// 64-bit FNV-1a over raw bytes.
class Fnv1a {
  public:
    void update(const void* data, std::size_t len) noexcept {
        const auto* b = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            h_ ^= b[i];
            h_ *= 0x100000001B3ULL;
        }
    }
    template <class T>
    void update_value(const T& v) noexcept {
        update(&v, sizeof(T));
    }
    [[nodiscard]] std::uint64_t digest() const noexcept { return h_; }

  private:
    std::uint64_t h_ = 0xCBF29CE484222325ULL;
};

[[nodiscard]] inline std::uint64_t fnv1a(const std::string& text) noexcept {
    Fnv1a h;
    h.update(text.data(), text.size());
    return h.digest();
}

/// Hash of the shapes and the exact bytes of both series.
[[nodiscard]] inline std::uint64_t hash_batch(const IoBatch& io) noexcept {
    Fnv1a h;
    for (const Series* m : {&io.u, &io.y}) {
        h.update_value(m->rows());
        h.update_value(m->cols());
        h.update(m->data(), static_cast<std::size_t>(m->size()) * sizeof(double));
    }
    return h.digest();
}

[[nodiscard]] inline std::vector<std::complex<double>> sorted_eigenvalues(const Matrix& A) {
    std::vector<std::complex<double>> out;
    if (A.rows() == 0)
        return out;
    const Eigen::VectorXcd ev = Eigen::EigenSolver<Matrix>(A, false).eigenvalues();
    out.assign(ev.data(), ev.data() + ev.size());
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
    return out;
}

/// Mean |est - truth| under the best one-to-one matching. Empty when the
/// sets differ in size or are too large for exhaustive matching.
[[nodiscard]] inline std::optional<double> matched_eigen_distance(const std::vector<std::complex<double>>& est,
                                                                  const std::vector<std::complex<double>>& truth) {
    if (est.size() != truth.size() || est.empty() || est.size() > 8)
        return std::nullopt;
    std::vector<std::size_t> perm(truth.size());
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double d = 0.0;
        for (std::size_t i = 0; i < est.size(); ++i)
            d += std::abs(est[i] - truth[perm[i]]);
        best = std::min(best, d);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best / static_cast<double>(est.size());
}

/// Worker count: explicit request, else N2SID_THREADS, else the hardware.
[[nodiscard]] inline int worker_count(int requested, int jobs) {
    int n = requested;
    if (n <= 0) {
        if (const char* env = std::getenv("N2SID_THREADS"); env && *env) {
            char* end = nullptr;
            const long v = std::strtol(env, &end, 10);
            if (end && *end == '\0' && v > 0)
                n = static_cast<int>(v);
        }
    }
    if (n <= 0)
        n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    return std::max(1, std::min(n, jobs));
}

/// Runs job(i) for i in [0, count) on a small pool; job must not throw.
template <class Job>
void parallel_for(int count, int threads, Job&& job) {
    const int workers = worker_count(threads, count);
    if (workers == 1) {
        for (int i = 0; i < count; ++i)
            job(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int i = next++; i < count; i = next++)
                job(i);
        });
    for (auto& t : pool)
        t.join();
}

// ----------------------------------------------------------------------------

namespace detail {

using bench_clock = std::chrono::steady_clock;

inline double seconds_since(bench_clock::time_point t0) {
    return std::chrono::duration<double>(bench_clock::now() - t0).count();
}

inline std::optional<double> validation_fit(const StateSpaceModel& model, const IoBatch& val, std::string& error) {
    try {
        const Vector x0 = estimate_initial_state(model, val);
        const double v = fit(val.y, predict(model, val, x0));
        if (std::isfinite(v))
            return v;
        error = "non-finite validation fit";
    } catch (const std::exception& ex) {
        error = ex.what();
    }
    return std::nullopt;
}

/// Runs both methods on the same batches and fills the method-dependent
/// fields of `tr`.
inline void compare_methods(const StudyConfig& sc, const IoBatch& id, const IoBatch& val,
                            std::optional<Index> fixed_order, TrialResult& tr) {
    tr.identification_hash = hash_batch(id);
    tr.validation_hash = hash_batch(val);

    N2sidSettings settings;
    settings.s = sc.s;
    settings.order = fixed_order;
    settings.order_cap = sc.order_cap;
    settings.solver = sc.solver;
    if (sc.sketch_width)
        settings.sketch = SketchConfig{*sc.sketch_width, derive_seed(sc.master_seed, static_cast<std::uint64_t>(tr.index), 1)};
    else
        settings.sketch.reset();

    try {
        const auto points = sweep_lambda(id, sc.grid, settings, sc.select_on_validation ? &val : nullptr);
        for (const auto& pt : points) {
            if (pt.result) {
                tr.timings.solve += pt.result->solve_seconds;
                tr.timings.extract += pt.result->extract_seconds;
            } else {
                ++tr.lambda_failures;
            }
        }
        if (const auto best = select_lambda(points)) {
            const IdentifiedModel& m = *points[*best].result;
            tr.lambda_selected = m.lambda_over_N;
            tr.n2sid_order = m.order;
            tr.n2sid_eigs = sorted_eigenvalues(m.model.A);
            tr.n2sid_fit = validation_fit(m.model, val, tr.n2sid_error);
        } else {
            tr.n2sid_error = points.empty() ? "empty grid" : "all grid points failed: " + points.front().error;
        }
    } catch (const std::exception& ex) {
        tr.n2sid_error = ex.what();
    }

    const auto t0 = bench_clock::now();
    try {
        tr.same_inputs = hash_batch(id) == tr.identification_hash && hash_batch(val) == tr.validation_hash;
        BaselineConfig bc;
        bc.s = sc.s;
        bc.order = fixed_order;
        bc.max_order = sc.order_cap;
        bc.estimate_direct_term = true;
        const BaselineResult b = n4sid_baseline(id, bc);
        tr.n4sid_order = b.order;
        tr.n4sid_eigs = sorted_eigenvalues(b.model.A);
        tr.n4sid_fit = validation_fit(b.model, val, tr.n4sid_error);
    } catch (const std::exception& ex) {
        tr.n4sid_error = ex.what();
    }
    tr.timings.baseline = seconds_since(t0);
    tr.negative_fit = (tr.n2sid_fit && *tr.n2sid_fit < 0) || (tr.n4sid_fit && *tr.n4sid_fit < 0);
}

inline double median(std::vector<double> v) {
    if (v.empty())
        return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

inline double mean(const std::vector<double>& v) {
    if (v.empty())
        return std::numeric_limits<double>::quiet_NaN();
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

} // namespace detail

/// Percentile bootstrap interval of the mean, deterministic in `seed`.
[[nodiscard]] inline std::pair<double, double> bootstrap_mean_interval(const std::vector<double>& x, double level,
                                                                       int resamples, std::uint64_t seed) {
    if (x.empty())
        return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
    std::vector<double> means(static_cast<std::size_t>(resamples));
    for (auto& m : means) {
        double acc = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
            acc += x[pick(rng)];
        m = acc / static_cast<double>(x.size());
    }
    std::sort(means.begin(), means.end());
    const double a = 0.5 * (1.0 - level);
    auto at = [&](double q) {
        const auto k = static_cast<std::size_t>(std::clamp(q * (resamples - 1), 0.0, resamples - 1.0) + 0.5);
        return means[std::min(k, means.size() - 1)];
    };
    return {at(a), at(1.0 - a)};
}

/// Aggregates trials. A method that fails on a trial loses it; both
/// failing counts as a tie. Fit means and the gap use the trials where both
/// produced a fit.
[[nodiscard]] inline StudySummary summarize(const std::vector<TrialResult>& trials, std::uint64_t master_seed) {
    StudySummary s;
    s.trials = static_cast<int>(trials.size());
    std::vector<double> f2, f4, gaps, d2, d4;
    int wins = 0, losses = 0, ties = 0;
    double o2 = 0.0, o4 = 0.0;
    int n_o2 = 0, n_o4 = 0;
    for (const auto& t : trials) {
        if (t.n2sid_fit && t.n4sid_fit) {
            f2.push_back(*t.n2sid_fit);
            f4.push_back(*t.n4sid_fit);
            gaps.push_back(*t.n2sid_fit - *t.n4sid_fit);
            if (*t.n2sid_fit > *t.n4sid_fit)
                ++wins;
            else if (*t.n2sid_fit < *t.n4sid_fit)
                ++losses;
            else
                ++ties;
        } else if (t.n2sid_fit) {
            ++wins;
        } else if (t.n4sid_fit) {
            ++losses;
        } else {
            ++ties;
        }
        if (t.n2sid_fit) {
            o2 += static_cast<double>(t.n2sid_order);
            ++n_o2;
            if (const auto d = matched_eigen_distance(t.n2sid_eigs, t.true_eigs))
                d2.push_back(*d);
        } else {
            ++s.n2sid_failures;
        }
        if (t.n4sid_fit) {
            o4 += static_cast<double>(t.n4sid_order);
            ++n_o4;
            if (const auto d = matched_eigen_distance(t.n4sid_eigs, t.true_eigs))
                d4.push_back(*d);
        } else {
            ++s.n4sid_failures;
        }
        if (t.negative_fit)
            ++s.negative_fit_trials;
    }
    s.compared = static_cast<int>(gaps.size());
    const double total = std::max(1, s.trials);
    s.win_rate = wins / total;
    s.loss_rate = losses / total;
    s.tie_rate = ties / total;
    s.n2sid_mean_fit = detail::mean(f2);
    s.n4sid_mean_fit = detail::mean(f4);
    s.n2sid_median_fit = detail::median(f2);
    s.n4sid_median_fit = detail::median(f4);
    s.mean_fit_gap = detail::mean(gaps);
    std::tie(s.gap_ci_low, s.gap_ci_high) = bootstrap_mean_interval(gaps, 0.90, 2000, derive_seed(master_seed, 0, 0xB0075));
    s.n2sid_mean_order = n_o2 ? o2 / n_o2 : 0.0;
    s.n4sid_mean_order = n_o4 ? o4 / n_o4 : 0.0;
    if (!d2.empty())
        s.n2sid_eig_distance = detail::mean(d2);
    if (!d4.empty())
        s.n4sid_eig_distance = detail::mean(d4);
    return s;
}

// ----------------------------------------------------------------------------

/// One open-loop trial: random stable system, +-1 input, identification and
/// validation records with independent noise and initial states.
[[nodiscard]] inline TrialResult run_open_loop_trial(const StudyConfig& sc, const OpenLoopConfig& oc, int index) {
    TrialResult tr;
    tr.index = index;
    tr.trial_seed = derive_seed(sc.master_seed, static_cast<std::uint64_t>(index));
    const auto t0 = detail::bench_clock::now();
    IoBatch id, val;
    try {
        Rng rng(tr.trial_seed);
        const StateSpaceModel model = random_stable_system(oc, rng);
        const Series u = sign_input(oc.N, oc.m, rng);
        const Series e = gaussian_matrix(oc.N, oc.p, rng, oc.noise_std);
        const Vector x0 = gaussian_matrix(oc.n, 1, rng, oc.x0_std);
        const Series uv = sign_input(oc.N_validation, oc.m, rng);
        const Series ev = gaussian_matrix(oc.N_validation, oc.p, rng, oc.noise_std);
        const Vector xv = gaussian_matrix(oc.n, 1, rng, oc.validation_x0_std);
        id = simulate_innovation(model, u, e, x0);
        val = simulate_innovation(model, uv, ev, xv);
        tr.true_eigs = sorted_eigenvalues(model.A);
    } catch (const std::exception& ex) {
        tr.n2sid_error = tr.n4sid_error = std::string("data generation failed: ") + ex.what();
        return tr;
    }
    tr.timings.generate = detail::seconds_since(t0);
    detail::compare_methods(sc, id, val, std::nullopt, tr);
    return tr;
}

/// One closed-loop trial: fresh reference, noise and plant initial state for
/// the identification and the validation record; both methods fit order 2.
[[nodiscard]] inline TrialResult run_closed_loop_trial(const StudyConfig& sc, const ClosedLoopConfig& cc, int index,
                                                       Index order = 2) {
    TrialResult tr;
    tr.index = index;
    tr.trial_seed = derive_seed(sc.master_seed, static_cast<std::uint64_t>(index));
    const auto t0 = detail::bench_clock::now();
    IoBatch id, val;
    try {
        Rng rng(tr.trial_seed);
        const Index n = cc.plant.order(), m = cc.plant.inputs(), p = cc.plant.outputs();
        const Series r = sign_input(cc.N, m, rng);
        const Series e = gaussian_matrix(cc.N, p, rng, cc.noise_std);
        const Vector x0 = gaussian_matrix(n, 1, rng, cc.x0_std);
        const Series rv = sign_input(cc.N_validation, m, rng);
        const Series ev = gaussian_matrix(cc.N_validation, p, rng, cc.noise_std);
        const Vector xv = gaussian_matrix(n, 1, rng, cc.x0_std);
        id = simulate_closed_loop_states(cc, r, e, x0).io;
        val = simulate_closed_loop_states(cc, rv, ev, xv).io;
        tr.true_eigs = sorted_eigenvalues(cc.plant.A);
    } catch (const std::exception& ex) {
        tr.n2sid_error = tr.n4sid_error = std::string("data generation failed: ") + ex.what();
        return tr;
    }
    tr.timings.generate = detail::seconds_since(t0);
    detail::compare_methods(sc, id, val, order, tr);
    return tr;
}

template <class Trial>
[[nodiscard]] std::vector<TrialResult> run_trials(const StudyConfig& sc, Trial&& trial) {
    std::vector<TrialResult> out(static_cast<std::size_t>(sc.trials));
    parallel_for(sc.trials, sc.threads, [&](int i) {
        try {
            out[static_cast<std::size_t>(i)] = trial(i);
        } catch (const std::exception& ex) {
            TrialResult tr;
            tr.index = i;
            tr.trial_seed = derive_seed(sc.master_seed, static_cast<std::uint64_t>(i));
            tr.n2sid_error = tr.n4sid_error = ex.what();
            out[static_cast<std::size_t>(i)] = std::move(tr);
        }
    });
    return out;
}

[[nodiscard]] inline BenchReport run_open_loop_study(const StudyConfig& sc, const OpenLoopConfig& oc = {}) {
    sc.validate();
    oc.validate();
    BenchReport rep;
    rep.study = "open_loop";
    rep.master_seed = sc.master_seed;
    rep.config = sc;
    rep.open_loop = oc;
    rep.trials = run_trials(sc, [&](int i) { return run_open_loop_trial(sc, oc, i); });
    rep.summary = summarize(rep.trials, sc.master_seed);
    return rep;
}

[[nodiscard]] inline BenchReport run_closed_loop_study(const StudyConfig& sc, const ClosedLoopConfig& cc = {}) {
    sc.validate();
    cc.validate();
    BenchReport rep;
    rep.study = "closed_loop";
    rep.master_seed = sc.master_seed;
    rep.config = sc;
    rep.closed_loop = cc;
    rep.trials = run_trials(sc, [&](int i) { return run_closed_loop_trial(sc, cc, i); });
    rep.summary = summarize(rep.trials, sc.master_seed);
    return rep;
}

} // namespace n2sid
