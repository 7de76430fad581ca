#pragma once

// End-to-end identification: convex program -> order -> (A, C) -> (B, D, K).

#include "extraction.hpp"
#include "solver.hpp"

#include <chrono>
#include <optional>
#include <string>
#include <vector>

namespace n2sid {

struct N2sidSettings {
    Index s = 15;
    /// fixed model order; log-mean selection on the residual spectrum when empty
    std::optional<Index> order;
    Index order_cap = 10;
    std::optional<SketchConfig> sketch = SketchConfig{22, 0};
    bool output_only = false;
    SolverOptions solver;
};

struct IdentifiedModel {
    StateSpaceModel model;
    Vector x0;
    Index order = 0;
    double lambda_over_N = 0.0;
    Vector singular_values;
    double numerical_floor = 0.0;
    double objective = 0.0;
    double fit_identification = 0.0;
    int solver_iterations = 0;
    bool regularized = false;
    double solve_seconds = 0.0;
    double extract_seconds = 0.0;
};

/// Identification data restricted to what the program sees (inputs dropped
/// for output-only identification).
[[nodiscard]] inline IoBatch program_view(const IoBatch& io, bool output_only) {
    if (!output_only)
        return io;
    return IoBatch(Series(io.samples(), 0), io.y);
}

[[nodiscard]] inline IdentifiedModel identify_n2sid(const IoBatch& io_full, double lambda_over_N,
                                                    const N2sidSettings& settings) {
    const IoBatch io = program_view(io_full, settings.output_only);
    const Index p = io.outputs();
    const N2sidProblem pb = N2sidProblem::from_batch(io, settings.s, lambda_over_N * static_cast<double>(io.samples()),
                                                     settings.sketch, settings.output_only);
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    const N2sidSolution sol = solve_n2sid(pb, settings.solver);
    const auto t1 = clock::now();

    IdentifiedModel out;
    out.lambda_over_N = lambda_over_N;
    out.singular_values = sol.singular_values;
    out.numerical_floor = sol.numerical_floor;
    out.objective = sol.objective;
    out.solver_iterations = sol.diagnostics.iterations;

    const Index max_order = std::min<Index>({settings.s - 1, sol.M_sketched.rows(), sol.M_sketched.cols()});
    if (settings.order) {
        if (*settings.order < 0 || *settings.order > max_order)
            throw ConfigError("identify: order must lie in [0, s-1]");
        out.order = *settings.order;
    } else {
        out.order = std::min(select_order(sol.singular_values, settings.order_cap, sol.numerical_floor).chosen_order,
                             max_order);
    }

    const ExtractedAC ac = extract_AC(sol.M_sketched, out.order, settings.s, p);
    BdkEstimate est = estimate_BDK(ac.A_obs, ac.C, io);
    out.model = std::move(est.model);
    out.x0 = std::move(est.x0);
    out.regularized = est.regularized;
    out.fit_identification = fit(io.y, predict(out.model, io, out.x0));
    out.solve_seconds = std::chrono::duration<double>(t1 - t0).count();
    out.extract_seconds = std::chrono::duration<double>(clock::now() - t1).count();
    return out;
}

struct SweepPoint {
    double lambda_over_N = 0.0;
    std::optional<IdentifiedModel> result;
    double selection_fit = -std::numeric_limits<double>::infinity();
    std::string error;
};

/// Identifies a model at every grid value. Failures are recorded per point.
/// `selection` is the record the fit criterion is evaluated on (the
/// identification data when empty).
[[nodiscard]] inline std::vector<SweepPoint> sweep_lambda(const IoBatch& io, const std::vector<double>& grid,
                                                          const N2sidSettings& settings,
                                                          const IoBatch* selection = nullptr) {
    std::vector<SweepPoint> points;
    points.reserve(grid.size());
    for (const double l : grid) {
        SweepPoint pt;
        pt.lambda_over_N = l;
        try {
            pt.result = identify_n2sid(io, l, settings);
            if (selection) {
                const IoBatch sel = program_view(*selection, settings.output_only);
                const Vector x0 = estimate_initial_state(pt.result->model, sel);
                pt.selection_fit = fit(sel.y, predict(pt.result->model, sel, x0));
            } else {
                pt.selection_fit = pt.result->fit_identification;
            }
            if (!std::isfinite(pt.selection_fit))
                pt.selection_fit = -std::numeric_limits<double>::infinity();
        } catch (const std::exception& ex) {
            pt.result.reset();
            pt.error = ex.what();
        }
        points.push_back(std::move(pt));
    }
    return points;
}

/// Index of the grid point with the best selection fit; ties go to the
/// larger lambda. Returns nothing when every point failed.
[[nodiscard]] inline std::optional<std::size_t> select_lambda(const std::vector<SweepPoint>& points) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (!points[i].result)
            continue;
        if (!best || points[i].selection_fit > points[*best].selection_fit ||
            (points[i].selection_fit == points[*best].selection_fit &&
             points[i].lambda_over_N > points[*best].lambda_over_N))
            best = i;
    }
    return best;
}

} // namespace n2sid
