// n2sid command-line front end: identify models from CSV data, generate
// experiment data, run the Monte-Carlo studies.
//
// Exit codes: 0 success, 2 usage or data error, 3 numerical failure.

#include <n2sid/bench.hpp>
#include <n2sid/identify.hpp>
#include <n2sid/io.hpp>
#include <n2sid/report.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

namespace fs = std::filesystem;
using namespace n2sid;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_usage = 2;
constexpr int exit_numerical = 3;

/// Usage/data problem detected after parsing.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CommonOptions {
    Index s = 15;
    std::string sketch = "22";
    std::uint64_t seed = 1;
    double tol = 1e-6;
    int max_iters = 5000;
    std::string lambda_grid = "";
    std::string out = ".";
};

std::optional<Index> parse_sketch(const std::string& text) {
    if (text == "off")
        return std::nullopt;
    try {
        std::size_t pos = 0;
        const long q = std::stol(text, &pos);
        if (pos == text.size() && q >= 1)
            return static_cast<Index>(q);
    } catch (const std::exception&) {
    }
    throw UsageError("--sketch expects a positive width or 'off', got '" + text + "'");
}

std::optional<Index> parse_order(const std::string& text) {
    if (text == "auto")
        return std::nullopt;
    try {
        std::size_t pos = 0;
        const long n = std::stol(text, &pos);
        if (pos == text.size() && n >= 0)
            return static_cast<Index>(n);
    } catch (const std::exception&) {
    }
    throw UsageError("--order expects 'auto' or a nonnegative integer, got '" + text + "'");
}

/// "lo:hi:count" in lambda/N units; empty text gives the default grid.
std::vector<double> parse_grid(const std::string& text) {
    if (text.empty())
        return lambda_grid();
    const auto a = text.find(':');
    const auto b = text.find(':', a == std::string::npos ? a : a + 1);
    if (a == std::string::npos || b == std::string::npos)
        throw UsageError("--lambda-grid expects lo:hi:count, got '" + text + "'");
    try {
        std::size_t p1 = 0, p2 = 0, p3 = 0;
        const std::string s_lo = text.substr(0, a), s_hi = text.substr(a + 1, b - a - 1), s_n = text.substr(b + 1);
        const double lo = std::stod(s_lo, &p1), hi = std::stod(s_hi, &p2);
        const int count = std::stoi(s_n, &p3);
        if (p1 != s_lo.size() || p2 != s_hi.size() || p3 != s_n.size())
            throw UsageError("");
        if (count == 1 && lo == hi && lo > 0)
            return {lo};
        return lambda_grid(count, lo, hi);
    } catch (const ConfigError& ex) {
        throw UsageError(std::string("--lambda-grid: ") + ex.what());
    } catch (const std::exception&) {
        throw UsageError("--lambda-grid expects lo:hi:count, got '" + text + "'");
    }
}

SolverOptions solver_options(const CommonOptions& c) {
    if (!(c.tol > 0))
        throw UsageError("--tol must be positive");
    if (c.max_iters < 1)
        throw UsageError("--max-iters must be positive");
    SolverOptions o;
    o.primal_tol = o.dual_tol = c.tol;
    o.max_iters = c.max_iters;
    return o;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw UsageError("cannot write '" + path.string() + "'");
    os << text;
}

nlohmann::json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

// ----------------------------------------------------------------------------

struct IdentifyArgs {
    std::string data;
    std::optional<double> lambda;
    std::string order = "auto";
    bool output_only = false;
};

int cmd_identify(const IdentifyArgs& a, const CommonOptions& c) {
    const IoBatch io = load_csv(a.data);
    N2sidSettings settings;
    settings.s = c.s;
    settings.order = parse_order(a.order);
    settings.output_only = a.output_only;
    settings.solver = solver_options(c);
    if (const auto q = parse_sketch(c.sketch))
        settings.sketch = SketchConfig{*q, c.seed};
    else
        settings.sketch.reset();
    if (c.s < 2 || io.samples() < 2 * c.s)
        throw UsageError("identify: need s >= 2 and at least 2 s samples (N=" + std::to_string(io.samples()) +
                         ", s=" + std::to_string(c.s) + ")");
    if (a.lambda && !(*a.lambda > 0))
        throw UsageError("--lambda must be positive");

    const std::vector<double> grid = a.lambda ? std::vector<double>{*a.lambda} : parse_grid(c.lambda_grid);
    const auto points = sweep_lambda(io, grid, settings);
    const auto best = select_lambda(points);

    nlohmann::json sweep = nlohmann::json::array();
    for (const auto& pt : points) {
        nlohmann::json j{{"lambda_over_N", pt.lambda_over_N}};
        if (pt.result) {
            j["order"] = pt.result->order;
            j["fit"] = detail::number_or_null(pt.selection_fit);
            j["iterations"] = pt.result->solver_iterations;
        } else {
            j["error"] = pt.error;
        }
        sweep.push_back(std::move(j));
    }
    if (!best) {
        std::cerr << "identify: no grid point produced a model\n";
        for (const auto& pt : points)
            std::cerr << "  lambda/N=" << pt.lambda_over_N << ": " << pt.error << "\n";
        return exit_numerical;
    }

    const IdentifiedModel& m = *points[*best].result;
    const fs::path out(c.out);
    write_text(out / "model.json", model_to_json(m.model, &m.x0).dump(2) + "\n");

    nlohmann::json rep;
    rep["data"] = a.data;
    rep["samples"] = io.samples();
    rep["inputs"] = io.inputs();
    rep["outputs"] = io.outputs();
    rep["output_only"] = a.output_only;
    rep["s"] = c.s;
    rep["sketch"] = c.sketch;
    rep["seed"] = c.seed;
    rep["lambda_over_N"] = m.lambda_over_N;
    rep["order"] = m.order;
    rep["singular_values"] = vector_json(m.singular_values);
    rep["numerical_floor"] = m.numerical_floor;
    rep["objective"] = m.objective;
    rep["fit_identification"] = m.fit_identification;
    rep["fit_kind"] = "one-step predictor";
    rep["solver_iterations"] = m.solver_iterations;
    rep["regularized_least_squares"] = m.regularized;
    rep["sweep"] = std::move(sweep);
    write_text(out / "report.json", rep.dump(2) + "\n");

    std::cout << "order " << m.order << ", lambda/N " << m.lambda_over_N << ", fit " << m.fit_identification
              << "\nwrote " << (out / "model.json").string() << " and " << (out / "report.json").string() << "\n";
    return exit_ok;
}

// ----------------------------------------------------------------------------

struct GenerateArgs {
    std::string study = "open_loop";
    Index N = 50;
    std::optional<double> noise;
    double x0_std = 5.0;
    std::string out = "data.csv";
    std::string model_out;
};

int cmd_generate(const GenerateArgs& a, const CommonOptions& c) {
    if (a.N < 1)
        throw UsageError("--N must be positive");
    if (a.noise && *a.noise < 0)
        throw UsageError("--noise must be nonnegative");
    if (a.x0_std < 0)
        throw UsageError("--x0-std must be nonnegative");

    IoBatch io;
    StateSpaceModel model;
    Rng rng(c.seed);
    if (a.study == "open_loop") {
        OpenLoopConfig cfg;
        cfg.N = a.N;
        cfg.noise_std = a.noise.value_or(cfg.noise_std);
        cfg.x0_std = a.x0_std;
        model = random_stable_system(cfg, rng);
        const Series u = sign_input(cfg.N, cfg.m, rng);
        const Series e = gaussian_matrix(cfg.N, cfg.p, rng, cfg.noise_std);
        const Vector x0 = gaussian_matrix(cfg.n, 1, rng, cfg.x0_std);
        io = simulate_innovation(model, u, e, x0);
    } else if (a.study == "closed_loop") {
        ClosedLoopConfig cfg;
        cfg.N = a.N;
        cfg.noise_std = a.noise.value_or(cfg.noise_std);
        cfg.x0_std = a.x0_std;
        model = cfg.plant;
        const Series r = sign_input(cfg.N, 1, rng);
        const Series e = gaussian_matrix(cfg.N, 1, rng, cfg.noise_std);
        const Vector x0 = gaussian_matrix(model.order(), 1, rng, cfg.x0_std);
        io = simulate_closed_loop_states(cfg, r, e, x0).io;
    } else {
        throw UsageError("generate: unknown study '" + a.study + "' (open_loop, closed_loop)");
    }
    std::ostringstream os;
    write_csv(os, io);
    write_text(a.out, os.str());
    if (!a.model_out.empty())
        write_text(a.model_out, model_to_json(model).dump(2) + "\n");
    std::cout << "wrote " << io.samples() << " samples to " << a.out << "\n";
    return exit_ok;
}

// ----------------------------------------------------------------------------

struct BenchArgs {
    std::string study;
    int trials = 100;
    int threads = 0;
    std::string select_on = "identification";
    bool svg = true;
};

int cmd_bench(const BenchArgs& a, const CommonOptions& c) {
    if (a.study != "open_loop" && a.study != "closed_loop")
        throw UsageError("bench: unknown study '" + a.study + "' (open_loop, closed_loop)");
    if (a.select_on != "identification" && a.select_on != "validation")
        throw UsageError("--select-on expects identification or validation");
    StudyConfig sc;
    sc.trials = a.trials;
    sc.master_seed = c.seed;
    sc.s = c.s;
    sc.sketch_width = parse_sketch(c.sketch);
    sc.grid = parse_grid(c.lambda_grid);
    sc.solver = solver_options(c);
    sc.select_on_validation = a.select_on == "validation";
    sc.threads = a.threads;
    try {
        sc.validate();
    } catch (const ConfigError& ex) {
        throw UsageError(ex.what());
    }

    const BenchReport rep = a.study == "open_loop" ? run_open_loop_study(sc) : run_closed_loop_study(sc);
    const fs::path out(c.out);
    const std::string text = report_text(rep);
    write_text(out / "report.json", text);
    write_text(out / "timings.json", timings_to_json(rep).dump(2) + "\n");
    write_text(out / "scatter.csv", scatter_csv(rep));
    write_text(out / "eigenvalues.csv", eigenvalue_csv(rep));
    if (a.svg) {
        write_text(out / "scatter.svg", scatter_svg(rep));
        write_text(out / "eigenvalues.svg", eigenvalue_svg(rep));
    }

    const auto& s = rep.summary;
    std::cout << rep.study << ": " << s.trials << " trials\n"
              << "  mean fit        N2SID " << s.n2sid_mean_fit << "   baseline " << s.n4sid_mean_fit << "\n"
              << "  win/loss/tie    " << s.win_rate << " / " << s.loss_rate << " / " << s.tie_rate << "\n"
              << "  mean fit gap    " << s.mean_fit_gap << "  (90% bootstrap " << s.gap_ci_low << " .. "
              << s.gap_ci_high << ")\n"
              << "  mean order      N2SID " << s.n2sid_mean_order << "   baseline " << s.n4sid_mean_order << "\n";
    if (s.n2sid_eig_distance && s.n4sid_eig_distance)
        std::cout << "  eig distance    N2SID " << *s.n2sid_eig_distance << "   baseline " << *s.n4sid_eig_distance
                  << "\n";
    std::cout << "  report hash     " << detail::hex64(fnv1a(text)) << "\n"
              << "wrote results to " << out.string() << "\n";
    return exit_ok;
}

void add_common(CLI::App* cmd, CommonOptions& c, bool with_solver) {
    cmd->add_option("--s", c.s, "block rows of the data Hankel matrices")->capture_default_str();
    cmd->add_option("--seed", c.seed, "master seed")->capture_default_str();
    cmd->add_option("--out", c.out, "output directory")->capture_default_str();
    if (!with_solver)
        return;
    cmd->add_option("--sketch", c.sketch, "sketch width q, or 'off'")->capture_default_str();
    cmd->add_option("--lambda-grid", c.lambda_grid, "lambda/N grid lo:hi:count (default 10^-0.5:10^4:20)");
    cmd->add_option("--tol", c.tol, "primal and dual relative tolerance")->capture_default_str();
    cmd->add_option("--max-iters", c.max_iters, "solver iteration limit")->capture_default_str();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Nuclear-norm subspace identification (N2SID) toolkit"};
    app.set_config("--config", "", "read options from a TOML/INI file");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.require_subcommand(1);

    CommonOptions common;

    IdentifyArgs ida;
    auto* identify = app.add_subcommand("identify", "identify a model from a CSV record");
    identify->add_option("data", ida.data, "CSV file with header u1..um,y1..yp")->required();
    identify->add_option("--lambda", ida.lambda, "single lambda/N value instead of a grid sweep");
    identify->add_option("--order", ida.order, "'auto' or a fixed model order")->capture_default_str();
    identify->add_flag("--output-only", ida.output_only, "ignore inputs (output-only identification)");
    add_common(identify, common, true);

    GenerateArgs gen;
    auto* generate = app.add_subcommand("generate", "simulate an identification record");
    generate->add_option("--study", gen.study, "open_loop or closed_loop")->capture_default_str();
    generate->add_option("--N", gen.N, "samples")->capture_default_str();
    generate->add_option("--noise", gen.noise, "innovation standard deviation (study default when omitted)");
    generate->add_option("--x0-std", gen.x0_std, "initial-state standard deviation")->capture_default_str();
    generate->add_option("--model-out", gen.model_out, "also write the true model as JSON");
    generate->add_option("--seed", common.seed, "seed")->capture_default_str();
    generate->add_option("--out", gen.out, "output CSV file")->capture_default_str();

    BenchArgs ba;
    auto* bench = app.add_subcommand("bench", "run a Monte-Carlo study");
    bench->add_option("study", ba.study, "open_loop or closed_loop")->required();
    bench->add_option("--trials", ba.trials, "number of trials")->capture_default_str();
    bench->add_option("--threads", ba.threads, "worker threads (0: N2SID_THREADS or all cores)")->capture_default_str();
    bench->add_option("--select-on", ba.select_on, "lambda selection data: identification or validation")
        ->capture_default_str();
    bench->add_flag("!--no-svg", ba.svg, "skip SVG figures");
    add_common(bench, common, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_usage;
    }

    try {
        if (*identify)
            return cmd_identify(ida, common);
        if (*generate)
            return cmd_generate(gen, common);
        if (*bench)
            return cmd_bench(ba, common);
    } catch (const UsageError& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return exit_usage;
    } catch (const ParseError& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return exit_usage;
    } catch (const ConvergenceError& ex) {
        const auto& d = ex.diagnostics();
        std::cerr << "error: " << ex.what() << "\n  primal threshold " << d.primal_threshold << ", dual threshold "
                  << d.dual_threshold << ", penalty " << d.penalty << "\n";
        return exit_numerical;
    } catch (const NumericalError& ex) {
        std::cerr << "numerical failure: " << ex.what() << "\n";
        return exit_numerical;
    } catch (const std::invalid_argument& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return exit_usage;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return exit_usage;
    }
    return exit_usage;
}
