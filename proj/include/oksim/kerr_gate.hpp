#pragma once
// Optical Kerr shutter as a temporal gating-probability profile.
//
// The pump intensity envelope sweeps across the photon while walking off by
// |walkoff| over the gate fiber, so the gate is the pump Gaussian convolved with
// a unit rectangle of that width, peak-normalised to the achieved efficiency.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "oksim/dispersion.hpp"
#include "oksim/grid.hpp"
#include "oksim/moments.hpp"
#include "oksim/units.hpp"

namespace oksim {

struct GateConfig {
    double pump_fwhm_fs = 148.0;
    FiberSegment fiber{35.0, fused_silica(), {}};
    double pump_nm = 775.0;
    double photon_nm = 714.0;
    double peak_efficiency = 0.16;
    double pump_power_mw = 800.0; // recorded only; efficiency is configured directly
};

inline void validate(const GateConfig& g)
{
    if (!(g.pump_fwhm_fs > 0.0))
        throw DomainError("gate pump_fwhm must be > 0 fs");
    if (!(g.peak_efficiency >= 0.0 && g.peak_efficiency <= 1.0))
        throw DomainError("gate peak_efficiency must lie in [0, 1]");
    validate(g.fiber);
}

/// Rectangle width of the gate: |walk-off| between photon and pump over the gate fiber, fs.
inline double gate_window(const GateConfig& g) { return std::abs(walkoff(g.fiber, g.photon_nm, g.pump_nm)); }

/// Closed-form Gaussian-rectangle convolution, normalised to 1 at t = 0.
inline double gate_shape(double pump_fwhm_fs, double window_fs, double t)
{
    const double s = units::fwhm_to_sigma(pump_fwhm_fs);
    if (window_fs <= 0.0)
        return std::exp(-t * t / (2.0 * s * s));
    const double k = 1.0 / (s * std::numbers::sqrt2);
    const double h = 0.5 * window_fs;
    const double peak = 2.0 * std::erf(h * k);
    return (std::erf((t + h) * k) - std::erf((t - h) * k)) / peak;
}

struct GateProfile {
    AxisGrid axis;
    std::vector<double> values;
    double peak_efficiency = 0.0;

    double at(double t) const { return interpolate(axis, values, t); }
};

/// Half-width of the time range a gate grid must cover.
inline double required_gate_half_span(const GateConfig& g) { return 3.0 * (g.pump_fwhm_fs + gate_window(g)); }

inline GateProfile gate_profile(const GateConfig& config, const AxisGrid& grid)
{
    validate(config);
    validate(grid, "gate axis");
    const double window = gate_window(config);
    const double need = required_gate_half_span(config);
    if (grid.front() > -need || grid.back() < need)
        throw GridError("gate axis must span +-" + std::to_string(need) + " fs about zero");
    GateProfile p{grid, std::vector<double>(grid.count), config.peak_efficiency};
    for (std::size_t k = 0; k < grid.count; ++k)
        p.values[k] = config.peak_efficiency * gate_shape(config.pump_fwhm_fs, window, grid[k]);
    return p;
}

/// Gate sampled on a zero-centred axis with the given step, just wide enough for the profile.
inline GateProfile gate_profile(const GateConfig& config, double step_fs)
{
    auto axis = symmetric_axis(required_gate_half_span(config), step_fs);
    axis.count = std::max(axis.count, min_axis_count);
    return gate_profile(config, axis);
}

inline void require_nonzero(const GateProfile& p)
{
    if (std::none_of(p.values.begin(), p.values.end(), [](double v) { return v > 0.0; }))
        throw DomainError("gate profile is identically zero");
}

inline double gate_sigma(const GateProfile& p)
{
    require_nonzero(p);
    return moments(p.values, p.axis).std();
}

/// Full width at half maximum by linear interpolation of the outermost half-max crossings
/// around the peak.
inline double gate_fwhm(const GateProfile& p)
{
    require_nonzero(p);
    const auto& v = p.values;
    const auto peak_it = std::max_element(v.begin(), v.end());
    const auto ipk = static_cast<std::size_t>(peak_it - v.begin());
    const double half = 0.5 * *peak_it;

    std::size_t r = ipk;
    while (r + 1 < v.size() && v[r + 1] >= half)
        ++r;
    std::size_t l = ipk;
    while (l > 0 && v[l - 1] >= half)
        --l;
    if (r + 1 >= v.size() || l == 0)
        throw GridError("gate profile does not fall to half maximum inside its axis");

    const double tr = p.axis[r] + (v[r] - half) / (v[r] - v[r + 1]) * p.axis.step;
    const double tl = p.axis[l] - (v[l] - half) / (v[l] - v[l - 1]) * p.axis.step;
    return tr - tl;
}

/// sqrt(dtau_s^2 + dtau_i^2 + 2 tau_p^2 + intrinsic^2); every argument in one width convention.
inline double predict_jti_width(double walkoff_s, double walkoff_i, double pump_width, double intrinsic)
{
    for (double v : {walkoff_s, walkoff_i, pump_width, intrinsic})
        if (!(v >= 0.0))
            throw DomainError("predict_jti_width: inputs must be non-negative");
    return std::sqrt(walkoff_s * walkoff_s + walkoff_i * walkoff_i + 2.0 * pump_width * pump_width +
                     intrinsic * intrinsic);
}

enum class WidthConvention { sigma, fwhm };

inline const char* to_string(WidthConvention c) { return c == WidthConvention::sigma ? "sigma" : "fwhm"; }

/// The quadrature-model inputs expressed in one convention. Under `sigma` the walk-off
/// rectangle enters as its standard deviation W/sqrt(12); under `fwhm` as its full width.
struct JtiWidthTerms {
    WidthConvention convention = WidthConvention::sigma;
    double walkoff_s = 0.0;
    double walkoff_i = 0.0;
    double pump = 0.0;
    double intrinsic = 0.0;
    double predicted = 0.0;
};

inline JtiWidthTerms jti_width_terms(const GateConfig& gate_s, const GateConfig& gate_i, double intrinsic_sigma_fs,
                                     WidthConvention convention)
{
    validate(gate_s);
    validate(gate_i);
    if (std::abs(gate_s.pump_fwhm_fs - gate_i.pump_fwhm_fs) > 1e-9)
        throw DomainError("quadrature model assumes one pump width for both shutters");
    JtiWidthTerms t;
    t.convention = convention;
    const double ws = gate_window(gate_s);
    const double wi = gate_window(gate_i);
    if (convention == WidthConvention::sigma) {
        const double rect = std::sqrt(12.0);
        t.walkoff_s = ws / rect;
        t.walkoff_i = wi / rect;
        t.pump = units::fwhm_to_sigma(gate_s.pump_fwhm_fs);
        t.intrinsic = intrinsic_sigma_fs;
    } else {
        t.walkoff_s = ws;
        t.walkoff_i = wi;
        t.pump = gate_s.pump_fwhm_fs;
        t.intrinsic = units::sigma_to_fwhm(intrinsic_sigma_fs);
    }
    t.predicted = predict_jti_width(t.walkoff_s, t.walkoff_i, t.pump, t.intrinsic);
    return t;
}

} // namespace oksim
