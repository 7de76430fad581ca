#pragma once

// Serialization of study reports: JSON document, scatter and eigenvalue CSV
// tables, and static SVG figures. Wall-clock timings are kept out of the
// report document so that identical runs produce identical bytes; they are
// written separately by timings_to_json.

#include "bench.hpp"
#include "io.hpp"

#include <cmath>
#include <sstream>
#include <string>

namespace n2sid {

namespace detail {

/// JSON has no NaN/Inf; those become null.
inline nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

inline nlohmann::json optional_json(const std::optional<double>& v) {
    return v ? number_or_null(*v) : nlohmann::json();
}

inline nlohmann::json eigs_json(const std::vector<std::complex<double>>& ev) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& z : ev)
        out.push_back({z.real(), z.imag()});
    return out;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

} // namespace detail

[[nodiscard]] inline nlohmann::json study_config_json(const StudyConfig& sc) {
    nlohmann::json j;
    j["trials"] = sc.trials;
    j["s"] = sc.s;
    j["sketch_width"] = sc.sketch_width ? nlohmann::json(*sc.sketch_width) : nlohmann::json();
    j["lambda_over_N_grid"] = sc.grid;
    j["order_cap"] = sc.order_cap;
    j["lambda_selection"] = sc.select_on_validation ? "validation" : "identification";
    j["fit"] = "one-step predictor, x0 re-estimated on validation data";
    j["solver"] = {{"max_iters", sc.solver.max_iters},
                   {"primal_tol", sc.solver.primal_tol},
                   {"dual_tol", sc.solver.dual_tol},
                   {"penalty", sc.solver.penalty},
                   {"adaptive_penalty", sc.solver.adaptive_penalty},
                   {"anderson_memory", sc.solver.anderson_memory}};
    return j;
}

[[nodiscard]] inline nlohmann::json report_to_json(const BenchReport& rep) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["study"] = rep.study;
    j["master_seed"] = rep.master_seed;
    j["config"] = study_config_json(rep.config);
    if (rep.open_loop) {
        const auto& o = *rep.open_loop;
        j["data"] = {{"n", o.n},
                     {"m", o.m},
                     {"p", o.p},
                     {"N", o.N},
                     {"N_validation", o.N_validation},
                     {"noise_std", o.noise_std},
                     {"x0_std", o.x0_std},
                     {"validation_x0_std", o.validation_x0_std},
                     {"stability_cap", o.stability_cap}};
    }
    if (rep.closed_loop) {
        const auto& c = *rep.closed_loop;
        j["data"] = {{"plant", model_to_json(c.plant)},
                     {"L", matrix_to_json(c.L)},
                     {"N", c.N},
                     {"N_validation", c.N_validation},
                     {"noise_std", c.noise_std},
                     {"x0_std", c.x0_std}};
    }

    const auto& s = rep.summary;
    j["summary"] = {{"trials", s.trials},
                    {"compared", s.compared},
                    {"n2sid_mean_fit", detail::number_or_null(s.n2sid_mean_fit)},
                    {"n4sid_mean_fit", detail::number_or_null(s.n4sid_mean_fit)},
                    {"n2sid_median_fit", detail::number_or_null(s.n2sid_median_fit)},
                    {"n4sid_median_fit", detail::number_or_null(s.n4sid_median_fit)},
                    {"win_rate", s.win_rate},
                    {"loss_rate", s.loss_rate},
                    {"tie_rate", s.tie_rate},
                    {"mean_fit_gap", detail::number_or_null(s.mean_fit_gap)},
                    {"mean_fit_gap_ci90", {detail::number_or_null(s.gap_ci_low), detail::number_or_null(s.gap_ci_high)}},
                    {"n2sid_mean_order", s.n2sid_mean_order},
                    {"n4sid_mean_order", s.n4sid_mean_order},
                    {"negative_fit_trials", s.negative_fit_trials},
                    {"n2sid_failures", s.n2sid_failures},
                    {"n4sid_failures", s.n4sid_failures},
                    {"n2sid_eig_distance", detail::optional_json(s.n2sid_eig_distance)},
                    {"n4sid_eig_distance", detail::optional_json(s.n4sid_eig_distance)}};

    nlohmann::json trials = nlohmann::json::array();
    for (const auto& t : rep.trials) {
        nlohmann::json tj;
        tj["index"] = t.index;
        tj["trial_seed"] = t.trial_seed;
        tj["n2sid_fit"] = detail::optional_json(t.n2sid_fit);
        tj["n4sid_fit"] = detail::optional_json(t.n4sid_fit);
        tj["n2sid_order"] = t.n2sid_order;
        tj["n4sid_order"] = t.n4sid_order;
        tj["lambda_over_N"] = detail::optional_json(t.lambda_selected);
        tj["lambda_failures"] = t.lambda_failures;
        tj["n2sid_eigs"] = detail::eigs_json(t.n2sid_eigs);
        tj["n4sid_eigs"] = detail::eigs_json(t.n4sid_eigs);
        tj["true_eigs"] = detail::eigs_json(t.true_eigs);
        tj["identification_hash"] = detail::hex64(t.identification_hash);
        tj["validation_hash"] = detail::hex64(t.validation_hash);
        tj["same_inputs"] = t.same_inputs;
        tj["negative_fit"] = t.negative_fit;
        if (!t.n2sid_error.empty())
            tj["n2sid_error"] = t.n2sid_error;
        if (!t.n4sid_error.empty())
            tj["n4sid_error"] = t.n4sid_error;
        trials.push_back(std::move(tj));
    }
    j["trials"] = std::move(trials);
    return j;
}

/// Canonical text of the report (the bytes written to report.json).
[[nodiscard]] inline std::string report_text(const BenchReport& rep) { return report_to_json(rep).dump(2) + "\n"; }

[[nodiscard]] inline std::uint64_t report_hash(const BenchReport& rep) { return fnv1a(report_text(rep)); }

[[nodiscard]] inline nlohmann::json timings_to_json(const BenchReport& rep) {
    nlohmann::json arr = nlohmann::json::array();
    StageTimings total;
    for (const auto& t : rep.trials) {
        arr.push_back({{"index", t.index},
                       {"generate", t.timings.generate},
                       {"solve", t.timings.solve},
                       {"extract", t.timings.extract},
                       {"baseline", t.timings.baseline}});
        total.generate += t.timings.generate;
        total.solve += t.timings.solve;
        total.extract += t.timings.extract;
        total.baseline += t.timings.baseline;
    }
    return {{"study", rep.study},
            {"total_seconds",
             {{"generate", total.generate}, {"solve", total.solve}, {"extract", total.extract}, {"baseline", total.baseline}}},
            {"trials", std::move(arr)}};
}

// ----------------------------------------------------------------------------

/// trial,n2sid_fit,n4sid_fit,n2sid_order,n4sid_order,lambda_over_N,negative_fit
[[nodiscard]] inline std::string scatter_csv(const BenchReport& rep) {
    std::ostringstream os;
    os << "trial,n2sid_fit,n4sid_fit,n2sid_order,n4sid_order,lambda_over_N,negative_fit\n";
    auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    for (const auto& t : rep.trials)
        os << t.index << ',' << opt(t.n2sid_fit) << ',' << opt(t.n4sid_fit) << ',' << t.n2sid_order << ','
           << t.n4sid_order << ',' << opt(t.lambda_selected) << ',' << (t.negative_fit ? 1 : 0) << '\n';
    return os.str();
}

/// trial,method,real,imag with method in {n2sid, n4sid, true}
[[nodiscard]] inline std::string eigenvalue_csv(const BenchReport& rep) {
    std::ostringstream os;
    os << "trial,method,real,imag\n";
    for (const auto& t : rep.trials) {
        auto rows = [&](const char* name, const std::vector<std::complex<double>>& ev) {
            for (const auto& z : ev)
                os << t.index << ',' << name << ',' << format_double(z.real()) << ',' << format_double(z.imag()) << '\n';
        };
        rows("n2sid", t.n2sid_eigs);
        rows("n4sid", t.n4sid_eigs);
        rows("true", t.true_eigs);
    }
    return os.str();
}

namespace detail {

class Svg {
  public:
    Svg(double lo, double hi, int size = 480) : lo_(lo), hi_(hi), size_(size) {}

    [[nodiscard]] double px(double v) const { return margin + (v - lo_) / (hi_ - lo_) * (size_ - 2 * margin); }
    [[nodiscard]] double py(double v) const { return size_ - margin - (v - lo_) / (hi_ - lo_) * (size_ - 2 * margin); }

    void line(double x0, double y0, double x1, double y1, const char* style) {
        body_ << "<line x1=\"" << px(x0) << "\" y1=\"" << py(y0) << "\" x2=\"" << px(x1) << "\" y2=\"" << py(y1)
              << "\" style=\"" << style << "\"/>\n";
    }
    void dot(double x, double y, const char* fill, const char* shape = "circle") {
        if (std::string(shape) == "cross") {
            const double cx = px(x), cy = py(y);
            body_ << "<path d=\"M" << cx - 3 << ' ' << cy - 3 << "L" << cx + 3 << ' ' << cy + 3 << "M" << cx - 3 << ' '
                  << cy + 3 << "L" << cx + 3 << ' ' << cy - 3 << "\" stroke=\"" << fill << "\" stroke-width=\"1.5\"/>\n";
        } else {
            body_ << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3\" fill=\"" << fill
                  << "\" fill-opacity=\"0.7\"/>\n";
        }
    }
    void circle(double x, double y, double r, const char* style) {
        body_ << "<ellipse cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" rx=\"" << r / (hi_ - lo_) * (size_ - 2 * margin)
              << "\" ry=\"" << r / (hi_ - lo_) * (size_ - 2 * margin) << "\" style=\"" << style << "\"/>\n";
    }
    void text(double x, double y, const std::string& s, const char* anchor = "middle") {
        body_ << "<text x=\"" << x << "\" y=\"" << y << "\" font-size=\"12\" font-family=\"sans-serif\" text-anchor=\""
              << anchor << "\">" << s << "</text>\n";
    }
    void frame(const std::string& xlabel, const std::string& ylabel, const std::string& title) {
        body_ << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << size_ - 2 * margin << "\" height=\""
              << size_ - 2 * margin << "\" fill=\"none\" stroke=\"black\"/>\n";
        text(size_ / 2.0, size_ - 10.0, xlabel);
        body_ << "<text x=\"14\" y=\"" << size_ / 2.0 << "\" font-size=\"12\" font-family=\"sans-serif\" "
              << "text-anchor=\"middle\" transform=\"rotate(-90 14 " << size_ / 2.0 << ")\">" << ylabel << "</text>\n";
        text(size_ / 2.0, 22.0, title);
        for (int k = 0; k <= 4; ++k) {
            const double v = lo_ + (hi_ - lo_) * k / 4.0;
            std::ostringstream lbl;
            lbl << std::round(v * 100.0) / 100.0;
            text(px(v), size_ - margin + 16.0, lbl.str());
            text(margin - 6.0, py(v) + 4.0, lbl.str(), "end");
        }
    }
    [[nodiscard]] std::string str() const {
        std::ostringstream os;
        os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size_ << "\" height=\"" << size_ << "\">\n"
           << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
           << body_.str() << "</svg>\n";
        return os.str();
    }

    static constexpr double margin = 50.0;

  private:
    double lo_, hi_;
    int size_;
    std::ostringstream body_;
};

} // namespace detail

/// Fit of the nuclear-norm method against the baseline with the diagonal.
/// Trials with a negative fit stay in the report but are left out here.
[[nodiscard]] inline std::string scatter_svg(const BenchReport& rep) {
    double lo = 100.0;
    for (const auto& t : rep.trials)
        if (t.n2sid_fit && t.n4sid_fit && !t.negative_fit)
            lo = std::min({lo, *t.n2sid_fit, *t.n4sid_fit});
    lo = std::max(0.0, std::floor(lo / 10.0) * 10.0);
    if (lo >= 100.0)
        lo = 90.0;
    detail::Svg svg(lo, 100.0);
    svg.frame("fit N4SID baseline", "fit N2SID", rep.study + ": validation fit");
    svg.line(lo, lo, 100.0, 100.0, "stroke:gray;stroke-dasharray:4 3");
    for (const auto& t : rep.trials)
        if (t.n2sid_fit && t.n4sid_fit && !t.negative_fit)
            svg.dot(*t.n4sid_fit, *t.n2sid_fit, "steelblue");
    return svg.str();
}

/// Eigenvalues of the identified A matrices in the complex plane, with the
/// unit circle and (fixed plant only) the true eigenvalues.
[[nodiscard]] inline std::string eigenvalue_svg(const BenchReport& rep) {
    detail::Svg svg(-1.2, 1.2);
    svg.frame("real", "imag", rep.study + ": eigenvalues of A (blue N2SID, red N4SID)");
    svg.circle(0.0, 0.0, 1.0, "fill:none;stroke:gray;stroke-dasharray:4 3");
    auto clip = [](double v) { return std::clamp(v, -1.2, 1.2); };
    for (const auto& t : rep.trials) {
        for (const auto& z : t.n4sid_eigs)
            svg.dot(clip(z.real()), clip(z.imag()), "firebrick");
        for (const auto& z : t.n2sid_eigs)
            svg.dot(clip(z.real()), clip(z.imag()), "steelblue");
    }
    if (rep.closed_loop && !rep.trials.empty())
        for (const auto& z : rep.trials.front().true_eigs)
            svg.dot(z.real(), z.imag(), "black", "cross");
    return svg.str();
}

} // namespace n2sid
