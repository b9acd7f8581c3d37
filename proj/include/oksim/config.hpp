#pragma once
// Experiment configuration: one JSON document holding every stage's settings.
//
// Unknown keys are rejected and every validation error names the offending key
// by its dotted path, e.g. "scan.pair_rate".

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "oksim/analysis.hpp"
#include "oksim/biphoton.hpp"
#include "oksim/kerr_gate.hpp"
#include "oksim/matrix_io.hpp"
#include "oksim/scan.hpp"

namespace oksim {

class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& message)
        : std::runtime_error(key.empty() ? message : "config key '" + key + "': " + message), key_(std::move(key))
    {
    }
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

struct AnalysisOptions {
    std::size_t band_count = 5;
    FitWeights weights = FitWeights::unit;
    double peak_threshold_sigmas = 5.0;
    double systematic_lo = 0.9; // background scales entering the systematic half-range
    double systematic_hi = 1.1;
    double sweep_lo = 0.8;
    double sweep_hi = 1.2;
    std::size_t sweep_steps = 9;
    std::optional<double> spectral_resolution; // rad/fs, Gaussian sigma of the monochromators
    double jsi_steps_per_sigma = 4.0;
    double jsi_span_sigmas = 5.5;
    CorrelationMethod correlation = CorrelationMethod::fft;
};

struct ExperimentConfig {
    SourceConfig source;
    GateConfig gate_s;
    GateConfig gate_i;
    ScanConfig scan;
    GridPlanOptions grid;
    AnalysisOptions analysis;
    std::string output_dir = "oksim_out";
    std::uint64_t seed = 1;
};

/// Reference apparatus: fiber chirps on both arms, compressor on the idler, 35 mm gate fibers.
inline ExperimentConfig default_config()
{
    ExperimentConfig c;
    c.source.chirp_s_fs2 = 10910.0;
    c.source.chirp_i_fs2 = 344064.0;
    c.source.compressor_fs2 = -(344064.0 + 10910.0);
    c.gate_s.photon_nm = c.source.signal_nm;
    c.gate_i.photon_nm = c.source.idler_nm;
    return c;
}

namespace detail {

inline void check(bool ok, const std::string& key, const std::string& constraint)
{
    if (!ok)
        throw ConfigError(key, constraint);
}

inline void positive(double v, const std::string& key) { check(v > 0.0 && std::isfinite(v), key, "must be > 0"); }
inline void nonnegative(double v, const std::string& key) { check(v >= 0.0 && std::isfinite(v), key, "must be >= 0"); }
inline void finite(double v, const std::string& key) { check(std::isfinite(v), key, "must be finite"); }
inline void unit_interval(double v, const std::string& key) { check(v >= 0.0 && v <= 1.0, key, "must lie in [0, 1]"); }

inline void validate_fiber(const FiberSegment& f, const std::string& key)
{
    nonnegative(f.length_mm, key + ".length_mm");
    for (std::size_t k = 0; k < f.overrides.size(); ++k) {
        const auto& o = f.overrides[k];
        const auto p = key + ".overrides[" + std::to_string(k) + "]";
        positive(o.wavelength_nm, p + ".wavelength_nm");
        if (o.gvd_fs2_per_mm)
            finite(*o.gvd_fs2_per_mm, p + ".gvd_fs2_per_mm");
        if (o.group_index)
            positive(*o.group_index, p + ".group_index");
    }
    if (const auto* c = std::get_if<ConstantIndexModel>(&f.material))
        positive(c->n0, key + ".material.constant_index");
}

inline void validate_gate(const GateConfig& g, const std::string& key)
{
    positive(g.pump_fwhm_fs, key + ".pump_fwhm_fs");
    positive(g.pump_nm, key + ".pump_nm");
    positive(g.photon_nm, key + ".photon_nm");
    unit_interval(g.peak_efficiency, key + ".peak_efficiency");
    nonnegative(g.pump_power_mw, key + ".pump_power_mw");
    validate_fiber(g.fiber, key + ".fiber");
}

inline void validate_axis(const AxisGrid& a, const std::string& key)
{
    finite(a.center, key + ".center_fs");
    positive(a.step, key + ".step_fs");
    check(a.count >= min_axis_count, key + ".count", "must be >= " + std::to_string(min_axis_count));
}

} // namespace detail

/// Whole-config validation; throws ConfigError naming the first offending key.
inline void validate(const ExperimentConfig& c)
{
    using namespace detail;
    const auto& s = c.source;
    positive(s.signal_nm, "source.signal_nm");
    positive(s.idler_nm, "source.idler_nm");
    positive(s.pump_nm, "source.pump_nm");
    positive(s.signal_filter_fwhm_nm, "source.signal_filter_fwhm_nm");
    positive(s.idler_filter_fwhm_nm, "source.idler_filter_fwhm_nm");
    positive(s.pump_filter_fwhm_nm, "source.pump_filter_fwhm_nm");
    finite(s.chirp_s_fs2, "source.chirp_s_fs2");
    finite(s.chirp_i_fs2, "source.chirp_i_fs2");
    if (s.compressor_fs2)
        finite(*s.compressor_fs2, "source.compressor_fs2");
    if (s.phase_matching) {
        finite(s.phase_matching->tau_s, "source.phase_matching.tau_s");
        finite(s.phase_matching->tau_i, "source.phase_matching.tau_i");
    }
    validate_gate(c.gate_s, "gate_s");
    validate_gate(c.gate_i, "gate_i");
    check(std::abs(c.gate_s.pump_fwhm_fs - c.gate_i.pump_fwhm_fs) < 1e-9, "gate_i.pump_fwhm_fs",
          "must equal gate_s.pump_fwhm_fs (one pump drives both shutters)");

    const auto& sc = c.scan;
    validate_axis(sc.delay_s, "scan.delay_s");
    validate_axis(sc.delay_i, "scan.delay_i");
    if (sc.dwell_s)
        positive(*sc.dwell_s, "scan.dwell_s");
    positive(sc.target_peak_counts, "scan.target_peak_counts");
    positive(sc.rep_rate_hz, "scan.rep_rate_hz");
    nonnegative(sc.pair_rate, "scan.pair_rate");
    nonnegative(sc.singles_rate_s, "scan.singles_rate_s");
    nonnegative(sc.singles_rate_i, "scan.singles_rate_i");
    unit_interval(sc.transmission_s, "scan.transmission_s");
    unit_interval(sc.transmission_i, "scan.transmission_i");
    nonnegative(sc.noise_floor_s, "scan.noise_floor_s");
    nonnegative(sc.noise_floor_i, "scan.noise_floor_i");
    nonnegative(sc.pump_leak_floor, "scan.pump_leak_floor");

    positive(c.grid.max_time_step_fs, "grid.max_time_step_fs");
    positive(c.grid.span_sigmas, "grid.span_sigmas");
    check(is_power_of_two(c.grid.min_count), "grid.min_count", "must be a power of two");
    check(c.grid.max_count >= c.grid.min_count, "grid.max_count", "must be >= grid.min_count");

    const auto& a = c.analysis;
    check(a.band_count >= 1, "analysis.band_count", "must be >= 1");
    positive(a.peak_threshold_sigmas, "analysis.peak_threshold_sigmas");
    nonnegative(a.systematic_lo, "analysis.systematic_range[0]");
    check(a.systematic_hi >= a.systematic_lo && std::isfinite(a.systematic_hi), "analysis.systematic_range[1]",
          "must be >= systematic_range[0]");
    nonnegative(a.sweep_lo, "analysis.scale_sweep.lo");
    check(a.sweep_hi >= a.sweep_lo && std::isfinite(a.sweep_hi), "analysis.scale_sweep.hi", "must be >= scale_sweep.lo");
    check(a.sweep_steps >= 1, "analysis.scale_sweep.steps", "must be >= 1");
    if (a.spectral_resolution)
        positive(*a.spectral_resolution, "analysis.spectral_resolution_rad_per_fs");
    positive(a.jsi_steps_per_sigma, "analysis.jsi_steps_per_sigma");
    check(a.jsi_span_sigmas >= 5.0, "analysis.jsi_span_sigmas", "must be >= 5");

    check(!c.output_dir.empty(), "output_dir", "must not be empty");
}

// ---------------------------------------------------------------------------
// JSON mapping

using Json = nlohmann::ordered_json;

namespace detail {

// Reads the keys of one JSON object and rejects whatever was not consumed.
class Section {
public:
    Section(const Json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object())
            throw ConfigError(path_, "must be an object");
    }

    std::string key(const std::string& name) const { return path_.empty() ? name : path_ + "." + name; }

    const Json* find(const std::string& name)
    {
        used_.insert(name);
        auto it = j_.find(name);
        return it == j_.end() ? nullptr : &*it;
    }

    void number(const std::string& name, double& out)
    {
        if (const auto* v = find(name)) {
            if (!v->is_number())
                throw ConfigError(key(name), "must be a number");
            out = v->get<double>();
        }
    }

    void number(const std::string& name, std::optional<double>& out)
    {
        if (const auto* v = find(name)) {
            if (v->is_null()) {
                out.reset();
                return;
            }
            if (!v->is_number())
                throw ConfigError(key(name), "must be a number or null");
            out = v->get<double>();
        }
    }

    template <class Int>
    void integer(const std::string& name, Int& out)
    {
        if (const auto* v = find(name)) {
            if (!v->is_number_unsigned())
                throw ConfigError(key(name), "must be a non-negative integer");
            out = v->get<Int>();
        }
    }

    void text(const std::string& name, std::string& out)
    {
        if (const auto* v = find(name)) {
            if (!v->is_string())
                throw ConfigError(key(name), "must be a string");
            out = v->get<std::string>();
        }
    }

    std::optional<Section> object(const std::string& name)
    {
        if (const auto* v = find(name))
            return Section(*v, key(name));
        return std::nullopt;
    }

    void finish() const
    {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!used_.count(it.key()))
                throw ConfigError(key(it.key()), "unknown key");
    }

    const Json& json() const { return j_; }
    const std::string& path() const { return path_; }

private:
    const Json& j_;
    std::string path_;
    std::set<std::string> used_;
};

inline void read_fiber(Section s, FiberSegment& f)
{
    s.number("length_mm", f.length_mm);
    if (const auto* m = s.find("material")) {
        if (m->is_string()) {
            if (m->get<std::string>() != "fused_silica")
                throw ConfigError(s.key("material"), "unknown material '" + m->get<std::string>() + "'");
            f.material = fused_silica();
        } else {
            Section ms(*m, s.key("material"));
            ConstantIndexModel c;
            if (!ms.find("constant_index"))
                throw ConfigError(ms.key("constant_index"), "required for a non-named material");
            ms.number("constant_index", c.n0);
            ms.finish();
            f.material = c;
        }
    }
    if (const auto* o = s.find("overrides")) {
        if (!o->is_array())
            throw ConfigError(s.key("overrides"), "must be an array");
        f.overrides.clear();
        for (std::size_t k = 0; k < o->size(); ++k) {
            Section os((*o)[k], s.key("overrides[" + std::to_string(k) + "]"));
            DispersionOverride d;
            os.number("wavelength_nm", d.wavelength_nm);
            os.number("gvd_fs2_per_mm", d.gvd_fs2_per_mm);
            os.number("group_index", d.group_index);
            os.finish();
            f.overrides.push_back(d);
        }
    }
    s.finish();
}

inline void read_gate(Section s, GateConfig& g)
{
    s.number("pump_fwhm_fs", g.pump_fwhm_fs);
    s.number("pump_nm", g.pump_nm);
    s.number("photon_nm", g.photon_nm);
    s.number("peak_efficiency", g.peak_efficiency);
    s.number("pump_power_mw", g.pump_power_mw);
    if (auto f = s.object("fiber"))
        read_fiber(*f, g.fiber);
    s.finish();
}

inline void read_axis(Section s, AxisGrid& a)
{
    s.number("center_fs", a.center);
    s.number("step_fs", a.step);
    s.integer("count", a.count);
    s.finish();
}

// A transport fiber given instead of a chirp: chirp = GDD of the segment at the photon wavelength.
inline void read_chirp(Section& s, const std::string& chirp_key, const std::string& fiber_key, double wavelength_nm,
                       double& chirp)
{
    const bool has_chirp = s.json().contains(chirp_key);
    if (auto f = s.object(fiber_key)) {
        if (has_chirp)
            throw ConfigError(s.key(fiber_key), "give either " + chirp_key + " or " + fiber_key + ", not both");
        FiberSegment seg;
        read_fiber(*f, seg);
        validate_fiber(seg, s.key(fiber_key));
        chirp = gdd(seg, wavelength_nm);
    }
    s.number(chirp_key, chirp);
}

inline void read_source(Section s, SourceConfig& c)
{
    s.number("signal_nm", c.signal_nm);
    s.number("idler_nm", c.idler_nm);
    s.number("pump_nm", c.pump_nm);
    s.number("signal_filter_fwhm_nm", c.signal_filter_fwhm_nm);
    s.number("idler_filter_fwhm_nm", c.idler_filter_fwhm_nm);
    s.number("pump_filter_fwhm_nm", c.pump_filter_fwhm_nm);
    read_chirp(s, "chirp_s_fs2", "transport_s", c.signal_nm, c.chirp_s_fs2);
    read_chirp(s, "chirp_i_fs2", "transport_i", c.idler_nm, c.chirp_i_fs2);
    s.number("compressor_fs2", c.compressor_fs2);
    if (const auto* pm = s.find("phase_matching"); pm && !pm->is_null()) {
        Section ps(*pm, s.key("phase_matching"));
        PhaseMatching p;
        ps.number("tau_s", p.tau_s);
        ps.number("tau_i", p.tau_i);
        ps.finish();
        c.phase_matching = p;
    } else if (pm) {
        c.phase_matching.reset();
    }
    s.finish();
}

inline void read_scan(Section s, ScanConfig& c)
{
    if (auto a = s.object("delay_s"))
        read_axis(*a, c.delay_s);
    if (auto a = s.object("delay_i"))
        read_axis(*a, c.delay_i);
    s.number("dwell_s", c.dwell_s);
    s.number("target_peak_counts", c.target_peak_counts);
    s.number("rep_rate_hz", c.rep_rate_hz);
    s.number("pair_rate", c.pair_rate);
    s.number("singles_rate_s", c.singles_rate_s);
    s.number("singles_rate_i", c.singles_rate_i);
    s.number("transmission_s", c.transmission_s);
    s.number("transmission_i", c.transmission_i);
    s.number("noise_floor_s", c.noise_floor_s);
    s.number("noise_floor_i", c.noise_floor_i);
    s.number("pump_leak_floor", c.pump_leak_floor);
    s.finish();
}

inline void read_grid(Section s, GridPlanOptions& g)
{
    s.number("max_time_step_fs", g.max_time_step_fs);
    s.number("span_sigmas", g.span_sigmas);
    s.integer("min_count", g.min_count);
    s.integer("max_count", g.max_count);
    s.finish();
}

inline void read_analysis(Section s, AnalysisOptions& a)
{
    s.integer("band_count", a.band_count);
    if (const auto* w = s.find("weights")) {
        const auto v = w->is_string() ? w->get<std::string>() : std::string();
        if (v == "unit")
            a.weights = FitWeights::unit;
        else if (v == "poisson")
            a.weights = FitWeights::poisson;
        else
            throw ConfigError(s.key("weights"), "must be \"unit\" or \"poisson\"");
    }
    s.number("peak_threshold_sigmas", a.peak_threshold_sigmas);
    if (const auto* r = s.find("systematic_range")) {
        if (!r->is_array() || r->size() != 2 || !(*r)[0].is_number() || !(*r)[1].is_number())
            throw ConfigError(s.key("systematic_range"), "must be [lo, hi]");
        a.systematic_lo = (*r)[0].get<double>();
        a.systematic_hi = (*r)[1].get<double>();
    }
    if (auto sw = s.object("scale_sweep")) {
        sw->number("lo", a.sweep_lo);
        sw->number("hi", a.sweep_hi);
        sw->integer("steps", a.sweep_steps);
        sw->finish();
    }
    s.number("spectral_resolution_rad_per_fs", a.spectral_resolution);
    s.number("jsi_steps_per_sigma", a.jsi_steps_per_sigma);
    s.number("jsi_span_sigmas", a.jsi_span_sigmas);
    if (const auto* m = s.find("correlation")) {
        const auto v = m->is_string() ? m->get<std::string>() : std::string();
        if (v == "fft")
            a.correlation = CorrelationMethod::fft;
        else if (v == "direct")
            a.correlation = CorrelationMethod::direct;
        else
            throw ConfigError(s.key("correlation"), "must be \"fft\" or \"direct\"");
    }
    s.finish();
}

inline Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

inline Json fiber_json(const FiberSegment& f)
{
    Json j;
    j["length_mm"] = f.length_mm;
    if (const auto* c = std::get_if<ConstantIndexModel>(&f.material))
        j["material"] = {{"constant_index", c->n0}};
    else
        j["material"] = model_name(f.material);
    j["overrides"] = Json::array();
    for (const auto& o : f.overrides) {
        Json oj;
        oj["wavelength_nm"] = o.wavelength_nm;
        oj["gvd_fs2_per_mm"] = optional_json(o.gvd_fs2_per_mm);
        oj["group_index"] = optional_json(o.group_index);
        j["overrides"].push_back(oj);
    }
    return j;
}

inline Json gate_json(const GateConfig& g)
{
    Json j;
    j["pump_fwhm_fs"] = g.pump_fwhm_fs;
    j["pump_nm"] = g.pump_nm;
    j["photon_nm"] = g.photon_nm;
    j["peak_efficiency"] = g.peak_efficiency;
    j["pump_power_mw"] = g.pump_power_mw;
    j["fiber"] = fiber_json(g.fiber);
    return j;
}

inline Json axis_json(const AxisGrid& a) { return {{"center_fs", a.center}, {"step_fs", a.step}, {"count", a.count}}; }

} // namespace detail

inline Json to_json(const ExperimentConfig& c)
{
    using namespace detail;
    Json j;
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir;

    auto& s = j["source"];
    s["signal_nm"] = c.source.signal_nm;
    s["idler_nm"] = c.source.idler_nm;
    s["pump_nm"] = c.source.pump_nm;
    s["signal_filter_fwhm_nm"] = c.source.signal_filter_fwhm_nm;
    s["idler_filter_fwhm_nm"] = c.source.idler_filter_fwhm_nm;
    s["pump_filter_fwhm_nm"] = c.source.pump_filter_fwhm_nm;
    s["chirp_s_fs2"] = c.source.chirp_s_fs2;
    s["chirp_i_fs2"] = c.source.chirp_i_fs2;
    s["compressor_fs2"] = optional_json(c.source.compressor_fs2);
    s["phase_matching"] = c.source.phase_matching
                              ? Json{{"tau_s", c.source.phase_matching->tau_s}, {"tau_i", c.source.phase_matching->tau_i}}
                              : Json(nullptr);

    j["gate_s"] = gate_json(c.gate_s);
    j["gate_i"] = gate_json(c.gate_i);

    auto& sc = j["scan"];
    sc["delay_s"] = axis_json(c.scan.delay_s);
    sc["delay_i"] = axis_json(c.scan.delay_i);
    sc["dwell_s"] = optional_json(c.scan.dwell_s);
    sc["target_peak_counts"] = c.scan.target_peak_counts;
    sc["rep_rate_hz"] = c.scan.rep_rate_hz;
    sc["pair_rate"] = c.scan.pair_rate;
    sc["singles_rate_s"] = c.scan.singles_rate_s;
    sc["singles_rate_i"] = c.scan.singles_rate_i;
    sc["transmission_s"] = c.scan.transmission_s;
    sc["transmission_i"] = c.scan.transmission_i;
    sc["noise_floor_s"] = c.scan.noise_floor_s;
    sc["noise_floor_i"] = c.scan.noise_floor_i;
    sc["pump_leak_floor"] = c.scan.pump_leak_floor;

    auto& g = j["grid"];
    g["max_time_step_fs"] = c.grid.max_time_step_fs;
    g["span_sigmas"] = c.grid.span_sigmas;
    g["min_count"] = c.grid.min_count;
    g["max_count"] = c.grid.max_count;

    auto& a = j["analysis"];
    a["band_count"] = c.analysis.band_count;
    a["weights"] = c.analysis.weights == FitWeights::unit ? "unit" : "poisson";
    a["peak_threshold_sigmas"] = c.analysis.peak_threshold_sigmas;
    a["systematic_range"] = {c.analysis.systematic_lo, c.analysis.systematic_hi};
    a["scale_sweep"] = {{"lo", c.analysis.sweep_lo}, {"hi", c.analysis.sweep_hi}, {"steps", c.analysis.sweep_steps}};
    a["spectral_resolution_rad_per_fs"] = optional_json(c.analysis.spectral_resolution);
    a["jsi_steps_per_sigma"] = c.analysis.jsi_steps_per_sigma;
    a["jsi_span_sigmas"] = c.analysis.jsi_span_sigmas;
    a["correlation"] = c.analysis.correlation == CorrelationMethod::fft ? "fft" : "direct";
    return j;
}

/// Missing keys keep the defaults.
inline ExperimentConfig from_json(const Json& j)
{
    using namespace detail;
    ExperimentConfig c = default_config();
    Section root(j, "");
    root.integer("seed", c.seed);
    root.text("output_dir", c.output_dir);
    if (auto s = root.object("source"))
        read_source(*s, c.source);
    if (auto s = root.object("gate_s"))
        read_gate(*s, c.gate_s);
    if (auto s = root.object("gate_i"))
        read_gate(*s, c.gate_i);
    if (auto s = root.object("scan"))
        read_scan(*s, c.scan);
    if (auto s = root.object("grid"))
        read_grid(*s, c.grid);
    if (auto s = root.object("analysis"))
        read_analysis(*s, c.analysis);
    root.finish();
    c.scan.seed = c.seed;
    validate(c);
    return c;
}

inline ExperimentConfig parse_config(const std::string& text)
{
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ConfigError("", std::string("invalid JSON: ") + e.what());
    }
    return from_json(j);
}

inline ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::string text;
    try {
        text = read_text(path);
    } catch (const IoError& e) {
        throw ConfigError("", e.what());
    }
    return parse_config(text);
}

inline std::string dump_config(const ExperimentConfig& c) { return to_json(c).dump(2) + "\n"; }

} // namespace oksim
