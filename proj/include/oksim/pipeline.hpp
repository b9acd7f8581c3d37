#pragma once
// simulate -> analyze -> report, and the artifact bundle written to disk.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "oksim/analysis.hpp"
#include "oksim/biphoton.hpp"
#include "oksim/config.hpp"
#include "oksim/heatmap.hpp"
#include "oksim/kerr_gate.hpp"
#include "oksim/matrix_io.hpp"
#include "oksim/moments.hpp"
#include "oksim/report.hpp"
#include "oksim/scan.hpp"

namespace oksim {

struct StageError {
    std::string stage;
    std::string message;
};

/// Everything measured from one scan plus the JSI.
struct AnalysisOutcome {
    std::optional<WidthResult> time_width;     // difference slice of the subtracted scan
    std::optional<WidthResult> spectral_width; // sum slice of the JSI
    std::optional<SensitivityTable> sensitivity;
    std::optional<Measured> delta_t;     // fit sigma, statistical and systematic in quadrature
    std::optional<Measured> delta_omega; // fit sigma
    std::optional<WitnessReport> witness;
    RealMatrix subtracted;
    std::vector<StageError> errors;
};

struct Bundle {
    ExperimentConfig config;
    Map2D jti; // ungated joint temporal intensity
    Map2D jsi; // joint spectral intensity on the fine readout grid
    GateProfile gate_s;
    GateProfile gate_i;
    ScanModel model;
    ScanResult scan;
    double oracle_std_difference = 0.0;    // fs, second moments of the noiseless gated map
    double intrinsic_std_difference = 0.0; // fs, ungated state
    AnalysisOutcome analysis;

    bool ok() const { return analysis.errors.empty(); }
};

/// Measures the JSI sum width and, from the saved scan, the time-difference width; then the witness.
inline AnalysisOutcome analyze(const ScanResult& scan, const Map2D& jsi, const AnalysisOptions& opt, Parallelism par = {})
{
    AnalysisOutcome out;
    WidthOptions wo;
    wo.band_count = opt.band_count;
    wo.weights = opt.weights;
    wo.peak_threshold_sigmas = opt.peak_threshold_sigmas;

    out.subtracted = subtract_background(scan.raw, scan.background_estimate);
    try {
        out.time_width = measure_width(Map2D{scan.delay_s, scan.delay_i, out.subtracted}, SliceDirection::difference, wo);
    } catch (const std::exception& e) {
        out.errors.push_back({"time_width", e.what()});
    }
    try {
        out.spectral_width = measure_width(jsi, SliceDirection::sum, wo);
        out.delta_omega = Measured{out.spectral_width->fit.sigma(), out.spectral_width->fit.sigma_error()};
    } catch (const std::exception& e) {
        out.errors.push_back({"spectral_width", e.what()});
    }
    if (out.time_width) {
        out.sensitivity = background_sensitivity(scan.raw, scan.background_estimate, scan.delay_s, scan.delay_i,
                                                 scale_grid(opt.sweep_lo, opt.sweep_hi, opt.sweep_steps), wo,
                                                 opt.systematic_lo, opt.systematic_hi, par);
        const auto& f = out.time_width->fit;
        out.delta_t = Measured{f.sigma(), std::hypot(f.sigma_error(), out.sensitivity->systematic)};
    }
    if (out.delta_t && out.delta_omega) {
        try {
            out.witness = witness(*out.delta_t, *out.delta_omega);
        } catch (const std::exception& e) {
            out.errors.push_back({"witness", e.what()});
        }
    } else {
        out.errors.push_back({"witness", "skipped: a width measurement failed"});
    }
    return out;
}

/// Spectral readout grid and JSI, blurred by the monochromator resolution when configured.
inline Map2D measured_jsi(const ExperimentConfig& c)
{
    const auto g = plan_jsi_grid(c.source, c.analysis.jsi_steps_per_sigma, c.analysis.jsi_span_sigmas);
    auto jsi = intensity_map(build_jsa(c.source, g.spectral_s, g.spectral_i));
    if (c.analysis.spectral_resolution)
        jsi = gaussian_blur(jsi, *c.analysis.spectral_resolution, *c.analysis.spectral_resolution);
    return jsi;
}

/// Joint grid wide enough for the scan window plus the gate support.
inline JointGrid pipeline_grid(const ExperimentConfig& c)
{
    auto opt = c.grid;
    const double reach = std::max({std::abs(c.scan.delay_s.front()), std::abs(c.scan.delay_s.back()),
                                   std::abs(c.scan.delay_i.front()), std::abs(c.scan.delay_i.back())});
    opt.min_time_half_span_fs =
        std::max(opt.min_time_half_span_fs,
                 reach + std::max(required_gate_half_span(c.gate_s), required_gate_half_span(c.gate_i)));
    return plan_joint_grid(c.source, opt);
}

inline Bundle run_pipeline(ExperimentConfig config, Parallelism par = {})
{
    config.scan.seed = config.seed;
    validate(config);
    Bundle b;
    b.config = config;
    const auto grid = pipeline_grid(config);
    const auto state = to_temporal(chirped_jsa(config.source, grid));
    b.jti = intensity_map(state);
    b.intrinsic_std_difference = rotated_stats(state).std_difference();
    b.jsi = measured_jsi(config);

    const double step = b.jti.axis_s.step;
    b.gate_s = gate_profile(config.gate_s, symmetric_axis(required_gate_half_span(config.gate_s), step));
    b.gate_i = gate_profile(config.gate_i, symmetric_axis(required_gate_half_span(config.gate_i), step));

    const auto& sc = config.scan;
    b.model.truth_fine = expected_coincidence_map(b.jti, b.gate_s, b.gate_i,
                                                  sc.pair_rate * sc.transmission_s * sc.transmission_i,
                                                  config.analysis.correlation);
    b.model.truth = resample(b.model.truth_fine, sc.delay_s, sc.delay_i).values;
    b.model.singles = singles_maps(b.jti, b.gate_s, b.gate_i, sc.singles_rate_s * sc.transmission_s,
                                   sc.singles_rate_i * sc.transmission_i, sc.noise_floor_s, sc.noise_floor_i,
                                   sc.delay_s, sc.delay_i);
    b.model.accidentals = accidental_map(b.model.singles.s, b.model.singles.i, sc.rep_rate_hz, sc.pump_leak_floor);
    b.model.dwell_s = sc.dwell_s.value_or(dwell_for_peak(b.model.truth, sc.target_peak_counts).value_or(1.0));
    b.oracle_std_difference =
        b.model.truth_fine.values.maxCoeff() > 0.0
            ? moments(b.model.truth_fine.values, b.model.truth_fine.axis_s, b.model.truth_fine.axis_i).std_difference()
            : 0.0;
    b.scan = simulate_scan(b.model, sc, par);
    b.analysis = analyze(b.scan, b.jsi, config.analysis, par);
    return b;
}

// ---------------------------------------------------------------------------
// Prediction from the quadrature width model, both conventions.

struct Prediction {
    double intrinsic_sigma = 0.0; // fs, ungated std(t_s - t_i)
    double gate_fwhm_s = 0.0;
    double gate_fwhm_i = 0.0;
    double walkoff_s = 0.0; // |walk-off|, fs
    double walkoff_i = 0.0;
    JtiWidthTerms sigma;
    JtiWidthTerms fwhm;
};

inline Prediction predict(const ExperimentConfig& c)
{
    validate(c);
    Prediction p;
    const auto state = to_temporal(chirped_jsa(c.source, plan_joint_grid(c.source, c.grid)));
    p.intrinsic_sigma = rotated_stats(state).std_difference();
    p.gate_fwhm_s = gate_fwhm(gate_profile(c.gate_s, 1.0));
    p.gate_fwhm_i = gate_fwhm(gate_profile(c.gate_i, 1.0));
    p.walkoff_s = gate_window(c.gate_s);
    p.walkoff_i = gate_window(c.gate_i);
    p.sigma = jti_width_terms(c.gate_s, c.gate_i, p.intrinsic_sigma, WidthConvention::sigma);
    p.fwhm = jti_width_terms(c.gate_s, c.gate_i, p.intrinsic_sigma, WidthConvention::fwhm);
    return p;
}

// ---------------------------------------------------------------------------
// Reports

inline const char* reported_width_target = "(430 ± 30) fs";

inline std::string render_prediction(const Prediction& p)
{
    Report r;
    r.line("JTI width prediction, sqrt(dtau_s^2 + dtau_i^2 + 2 tau_p^2 + intrinsic^2)");
    r.line("  gate FWHM            signal " + fixed(p.gate_fwhm_s, 1) + " fs, idler " + fixed(p.gate_fwhm_i, 1) + " fs");
    r.line("  walk-off             signal " + fixed(p.walkoff_s, 1) + " fs, idler " + fixed(p.walkoff_i, 1) + " fs");
    r.line("  intrinsic            sigma " + fixed(p.intrinsic_sigma, 1) + " fs");
    for (const auto* t : {&p.sigma, &p.fwhm}) {
        const std::string c = to_string(t->convention);
        r.line("  " + c + " convention" + std::string(c == "sigma" ? 4 : 5, ' ') + "dtau_s " + fixed(t->walkoff_s, 1) +
               " fs, dtau_i " + fixed(t->walkoff_i, 1) + " fs, tau_p " + fixed(t->pump, 1) + " fs, intrinsic " +
               fixed(t->intrinsic, 1) + " fs -> " + fixed(t->predicted, 1) + " fs");
        r.value("predicted_" + c, t->predicted, "fs");
        r.value(c + ".walkoff_s", t->walkoff_s, "fs");
        r.value(c + ".walkoff_i", t->walkoff_i, "fs");
        r.value(c + ".pump", t->pump, "fs");
        r.value(c + ".intrinsic", t->intrinsic, "fs");
    }
    r.line(std::string("  reported target      ") + reported_width_target +
           " (comparison only; the convention behind it is not stated)");
    r.value("gate_fwhm_s", p.gate_fwhm_s, "fs");
    r.value("gate_fwhm_i", p.gate_fwhm_i, "fs");
    r.value("walkoff_s", p.walkoff_s, "fs");
    r.value("walkoff_i", p.walkoff_i, "fs");
    r.value("intrinsic_sigma", p.intrinsic_sigma, "fs");
    r.value("target", 430.0, "fs");
    r.value("target_error", 30.0, "fs");
    return r.render();
}

inline std::string render_analysis(const ScanResult& scan, const AnalysisOutcome& a, Report& r)
{
    r.line("  scan                 " + std::to_string(scan.delay_s.count) + " x " + std::to_string(scan.delay_i.count) +
           " pixels, step " + fixed(scan.delay_s.step, 2) + " fs, dwell " + fixed(scan.dwell_s, 1) + " s/pixel, seed " +
           std::to_string(scan.seed));
    r.value("seed", static_cast<double>(scan.seed), "1");
    r.value("dwell", scan.dwell_s, "s");
    r.value("scan_rows", static_cast<double>(scan.delay_s.count), "1");
    r.value("scan_cols", static_cast<double>(scan.delay_i.count), "1");
    r.value("scan_step_s", scan.delay_s.step, "fs");
    r.value("scan_step_i", scan.delay_i.step, "fs");
    r.value("raw_total", static_cast<double>(scan.raw.sum()), "counts");
    r.value("background_total", static_cast<double>(scan.background_estimate.sum()), "counts");
    if (a.time_width) {
        const auto& f = a.time_width->fit;
        const double sys = a.sensitivity ? a.sensitivity->systematic : 0.0;
        r.line("  D(t_s - t_i)         " + fixed(f.sigma(), 1) + " +/- " + fixed(f.sigma_error(), 1) + " (stat) +/- " +
               fixed(sys, 1) + " (sys) fs, FWHM " + fixed(f.fwhm(), 1) + " fs");
        r.value("delta_t", f.sigma(), "fs");
        r.value("delta_t_stat", f.sigma_error(), "fs");
        r.value("delta_t_systematic", sys, "fs");
        r.value("delta_t_error", a.delta_t->error, "fs");
        r.value("delta_t_fwhm", f.fwhm(), "fs");
        r.value("delta_t_center", f.center(), "fs");
    }
    if (a.spectral_width) {
        const auto& f = a.spectral_width->fit;
        r.line("  D(w_s + w_i)         " + sci(f.sigma(), 4) + " +/- " + sci(f.sigma_error(), 1) + " rad/fs");
        r.value("delta_omega", f.sigma(), "rad/fs");
        r.value("delta_omega_error", f.sigma_error(), "rad/fs");
    }
    if (a.sensitivity) {
        r.line("  background scale     sigma (fs)");
        for (std::size_t k = 0; k < a.sensitivity->rows.size(); ++k) {
            const auto& row = a.sensitivity->rows[k];
            r.line("    " + fixed(row.scale, 3) + "              " +
                   (row.fit ? fixed(row.fit->sigma(), 1) + " +/- " + fixed(row.fit->sigma_error(), 1) + " fs"
                            : "failed: " + row.error));
            r.value("sensitivity." + std::to_string(k) + ".scale", row.scale, "1");
            if (row.fit)
                r.value("sensitivity." + std::to_string(k) + ".delta_t", row.fit->sigma(), "fs");
        }
        r.value("systematic_range_lo", a.sensitivity->lo, "1");
        r.value("systematic_range_hi", a.sensitivity->hi, "1");
    }
    if (a.witness) {
        const auto& w = *a.witness;
        r.line("  witness product      " + fixed(w.product, 4) + " +/- " + fixed(w.uncertainty, 4) +
               " (separable states need >= 1), violation " + fixed(w.sigmas_of_violation, 1) + " sigma");
        r.value("witness_product", w.product, "1");
        r.value("witness_uncertainty", w.uncertainty, "1");
        r.value("sigmas_of_violation", w.sigmas_of_violation, "sigma");
    }
    for (const auto& e : a.errors)
        r.line("  error [" + e.stage + "]  " + e.message);
    r.value("stage_errors", static_cast<double>(a.errors.size()), "1");
    return r.render();
}

inline std::string render_report(const Bundle& b)
{
    Report r;
    r.line("oksim report");
    r.line("  peak true rate       " + sci(b.model.truth.maxCoeff(), 3) + " counts/s, accidentals " +
           sci(b.model.accidentals.minCoeff(), 3) + " .. " + sci(b.model.accidentals.maxCoeff(), 3) + " counts/s");
    r.line("  oracle D(t_s - t_i)  " + fixed(b.oracle_std_difference, 2) + " fs (noiseless gated map), intrinsic " +
           fixed(b.intrinsic_std_difference, 2) + " fs");
    r.value("peak_true_rate", b.model.truth.maxCoeff(), "counts/s");
    r.value("accidental_rate_min", b.model.accidentals.minCoeff(), "counts/s");
    r.value("accidental_rate_max", b.model.accidentals.maxCoeff(), "counts/s");
    r.value("oracle_delta_t", b.oracle_std_difference, "fs");
    r.value("intrinsic_delta_t", b.intrinsic_std_difference, "fs");
    if (b.analysis.time_width && b.oracle_std_difference > 0.0)
        r.value("delta_t_over_oracle", b.analysis.time_width->fit.sigma() / b.oracle_std_difference, "1");
    return render_analysis(b.scan, b.analysis, r);
}

// ---------------------------------------------------------------------------
// Bundle on disk

namespace detail {

inline Map2D crop(const Map2D& m, double lo_s, double hi_s, double lo_i, double hi_i)
{
    auto range = [](const AxisGrid& a, double lo, double hi) {
        const auto first = static_cast<std::size_t>(std::clamp(std::ceil(a.index_of(lo) - 1e-9), 0.0,
                                                                static_cast<double>(a.count - 1)));
        const auto last = static_cast<std::size_t>(std::clamp(std::floor(a.index_of(hi) + 1e-9), 0.0,
                                                               static_cast<double>(a.count - 1)));
        return std::pair{first, std::max(first, last)};
    };
    const auto [r0, r1] = range(m.axis_s, lo_s, hi_s);
    const auto [c0, c1] = range(m.axis_i, lo_i, hi_i);
    const auto nr = r1 - r0 + 1;
    const auto nc = c1 - c0 + 1;
    // Re-centre each axis so that x_k keeps its value under the count/2 convention.
    auto sub = [](const AxisGrid& a, std::size_t first, std::size_t n) {
        return AxisGrid{a[first] + static_cast<double>(n / 2) * a.step, a.step, n};
    };
    return {sub(m.axis_s, r0, nr), sub(m.axis_i, c0, nc),
            m.values.block(static_cast<Eigen::Index>(r0), static_cast<Eigen::Index>(c0), static_cast<Eigen::Index>(nr),
                           static_cast<Eigen::Index>(nc))};
}

inline MatrixFile profile_file(const WidthResult& w, const std::string& name, const std::string& unit,
                               const std::string& value_unit)
{
    const auto x = w.profile.samples();
    std::vector<double> fit(x.size());
    for (std::size_t k = 0; k < x.size(); ++k)
        fit[k] = gaussian(w.fit.params, x[k]);
    auto f = columns_file({name, "mean", "fit"}, {unit, value_unit, value_unit}, {x, w.profile.values, fit});
    f.set("band_count", std::to_string(w.profile.band_count));
    f.set("band_center", format_number(w.profile.band_center));
    f.set("band_center_unit", unit);
    return f;
}

} // namespace detail

inline void write_bundle(const Bundle& b, const std::filesystem::path& dir)
{
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());

    write_text(dir / "config.json", dump_config(b.config));

    const auto& sc = b.config.scan;
    const double margin = 3.0 * sc.delay_s.step;
    const auto jti = detail::crop(b.jti, sc.delay_s.front() - margin, sc.delay_s.back() + margin,
                                  sc.delay_i.front() - margin, sc.delay_i.back() + margin);
    save_matrix(dir / "jti.txt", map_file(jti, "t_s", "t_i", "fs", "probability/fs^2"));
    export_heatmap(jti.values, dir / "jti.pgm", Colormap::grayscale);

    const auto bw = bandwidths(b.config.source);
    const double ws = b.jsi.axis_s.center, wi = b.jsi.axis_i.center;
    const auto jsi = detail::crop(b.jsi, ws - 3.0 * bw.signal, ws + 3.0 * bw.signal, wi - 3.0 * bw.idler,
                                  wi + 3.0 * bw.idler);
    save_matrix(dir / "jsi.txt", map_file(jsi, "omega_s", "omega_i", "rad/fs", "arb"));
    export_heatmap(jsi.values, dir / "jsi.pgm", Colormap::grayscale);

    for (const auto& [name, gate] : {std::pair{"gate_s.txt", &b.gate_s}, std::pair{"gate_i.txt", &b.gate_i}}) {
        auto f = columns_file({"t", "g"}, {"fs", "probability"}, {gate->axis.samples(), gate->values});
        f.set("fwhm", format_number(gate_fwhm(*gate)));
        f.set("fwhm_unit", "fs");
        save_matrix(dir / name, f);
    }

    save_scan(dir / "scan", b.scan);
    export_heatmap(b.scan.raw.cast<double>(), dir / "raw.pgm", Colormap::grayscale);
    export_heatmap(b.scan.background_estimate.cast<double>(), dir / "background.pgm", Colormap::grayscale);
    export_heatmap(b.scan.expected_truth, dir / "truth.pgm", Colormap::grayscale);

    const auto& a = b.analysis;
    save_matrix(dir / "subtracted.txt",
                map_file({sc.delay_s, sc.delay_i, a.subtracted}, "delay_s", "delay_i", "fs", "counts"));
    export_heatmap(a.subtracted, dir / "subtracted.ppm", Colormap::diverging);

    if (a.time_width)
        save_matrix(dir / "profile_difference.txt", detail::profile_file(*a.time_width, "d", "fs", "counts"));
    if (a.spectral_width)
        save_matrix(dir / "profile_sum.txt", detail::profile_file(*a.spectral_width, "u", "rad/fs", "arb"));
    if (a.sensitivity) {
        std::vector<double> scale, sigma, err, ok;
        for (const auto& r : a.sensitivity->rows) {
            scale.push_back(r.scale);
            sigma.push_back(r.fit ? r.fit->sigma() : std::nan(""));
            err.push_back(r.fit ? r.fit->sigma_error() : std::nan(""));
            ok.push_back(r.fit ? 1.0 : 0.0);
        }
        auto f = columns_file({"scale", "sigma", "sigma_error", "ok"}, {"1", "fs", "fs", "1"}, {scale, sigma, err, ok});
        f.set("systematic", format_number(a.sensitivity->systematic));
        f.set("systematic_unit", "fs");
        save_matrix(dir / "sensitivity.txt", f);
    }
    write_text(dir / "report.txt", render_report(b));
}

} // namespace oksim

