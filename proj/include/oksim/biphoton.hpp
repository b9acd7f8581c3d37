#pragma once
// Two-photon joint amplitude in the spectral and temporal domains.
//
// Spectral axes carry absolute angular frequency (rad/fs) and are centred on
// the filter carrier of each arm; every operation that needs the envelope
// frequency works with omega - axis.center. Temporal axes are envelope times
// (fs) centred on zero.

#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include "oksim/fft.hpp"
#include "oksim/grid.hpp"
#include "oksim/moments.hpp"
#include "oksim/units.hpp"

namespace oksim {

enum class Domain { spectral, temporal };

inline const char* to_string(Domain d) { return d == Domain::spectral ? "spectral" : "temporal"; }

/// Optional phase-matching factor sinc((tau_s * dw_s + tau_i * dw_i) / 2), with the
/// tau's the crystal group-delay mismatches in fs. Off by default.
struct PhaseMatching {
    double tau_s = 0.0;
    double tau_i = 0.0;
};

struct SourceConfig {
    double signal_nm = 714.0;
    double idler_nm = 847.0;
    double pump_nm = 387.5; // upconverted pump driving the downconversion
    double signal_filter_fwhm_nm = 6.0;
    double idler_filter_fwhm_nm = 6.0;
    double pump_filter_fwhm_nm = 0.1;
    double chirp_s_fs2 = 0.0;
    double chirp_i_fs2 = 0.0;
    std::optional<double> compressor_fs2; // applied to the idler only
    std::optional<PhaseMatching> phase_matching;

    double total_idler_phase_fs2() const { return chirp_i_fs2 + compressor_fs2.value_or(0.0); }
};

/// Intensity standard deviations (rad/fs) of the three Gaussian factors.
struct SourceBandwidths {
    double signal = 0.0;
    double idler = 0.0;
    double sum = 0.0;
};

inline void validate(const SourceConfig& c)
{
    for (double v : {c.signal_nm, c.idler_nm, c.pump_nm})
        if (!(v > 0.0))
            throw DomainError("source wavelengths must be positive");
    for (double v : {c.signal_filter_fwhm_nm, c.idler_filter_fwhm_nm, c.pump_filter_fwhm_nm})
        if (!(v > 0.0))
            throw DomainError("source bandwidths must be positive");
}

inline SourceBandwidths bandwidths(const SourceConfig& c)
{
    validate(c);
    return {units::filter_sigma_omega(c.signal_filter_fwhm_nm, c.signal_nm),
            units::filter_sigma_omega(c.idler_filter_fwhm_nm, c.idler_nm),
            units::filter_sigma_omega(c.pump_filter_fwhm_nm, c.pump_nm)};
}

struct JointAmplitude {
    Domain domain = Domain::spectral;
    AxisGrid axis_s; // rows
    AxisGrid axis_i; // columns
    ComplexMatrix values;
    // Spectral axes the temporal representation was derived from (carrier bookkeeping).
    AxisGrid spectral_s;
    AxisGrid spectral_i;

    double cell() const { return axis_s.step * axis_i.step; }
    double norm() const { return values.abs2().sum() * cell(); }
};

inline void check_finite(const JointAmplitude& f)
{
    if (!f.values.isFinite().all())
        throw DomainError("joint amplitude contains non-finite entries");
}

inline void normalize(JointAmplitude& f)
{
    const double n = f.norm();
    if (!(n > 0.0) || !std::isfinite(n))
        throw DomainError("joint amplitude has zero or non-finite norm");
    f.values /= std::sqrt(n);
}

inline void check_coverage(const AxisGrid& axis, double center, double sigma, const char* what)
{
    constexpr double k = 5.0;
    if (axis.front() > center - k * sigma || axis.back() < center + k * sigma)
        throw GridError(std::string(what) + " grid does not cover +-5 sigma of its Gaussian factor");
}

/// Transform-limited Gaussian joint spectral amplitude on the given absolute-frequency axes.
inline JointAmplitude build_jsa(const SourceConfig& config, const AxisGrid& axis_s, const AxisGrid& axis_i)
{
    validate(axis_s, "signal axis");
    validate(axis_i, "idler axis");
    const auto bw = bandwidths(config);
    const double ws = units::wavelength_to_omega(config.signal_nm);
    const double wi = units::wavelength_to_omega(config.idler_nm);
    const double wp = units::wavelength_to_omega(config.pump_nm);

    check_coverage(axis_s, ws, bw.signal, "signal");
    check_coverage(axis_i, wi, bw.idler, "idler");
    if (axis_s.front() + axis_i.front() > wp - 5.0 * bw.sum || axis_s.back() + axis_i.back() < wp + 5.0 * bw.sum)
        throw GridError("sum-frequency grid does not cover +-5 sigma of its Gaussian factor");

    JointAmplitude f;
    f.domain = Domain::spectral;
    f.axis_s = axis_s;
    f.axis_i = axis_i;
    f.spectral_s = axis_s;
    f.spectral_i = axis_i;
    f.values.resize(static_cast<Eigen::Index>(axis_s.count), static_cast<Eigen::Index>(axis_i.count));

    const double a_sum = 1.0 / (4.0 * bw.sum * bw.sum);
    const double a_s = 1.0 / (4.0 * bw.signal * bw.signal);
    const double a_i = 1.0 / (4.0 * bw.idler * bw.idler);
    for (std::size_t r = 0; r < axis_s.count; ++r) {
        const double dws = axis_s[r] - ws;
        for (std::size_t c = 0; c < axis_i.count; ++c) {
            const double dwi = axis_i[c] - wi;
            const double dsum = axis_s[r] + axis_i[c] - wp;
            double v = std::exp(-a_sum * dsum * dsum - a_s * dws * dws - a_i * dwi * dwi);
            if (config.phase_matching) {
                const double x = 0.5 * (config.phase_matching->tau_s * (axis_s[r] - axis_s.center) +
                                        config.phase_matching->tau_i * (axis_i[c] - axis_i.center));
                v *= (x == 0.0) ? 1.0 : std::sin(x) / x;
            }
            f.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
        }
    }
    normalize(f);
    return f;
}

/// Multiplies by exp(i phi_s dw_s^2 / 2) exp(i phi_i dw_i^2 / 2), dw measured from each axis carrier.
inline JointAmplitude apply_quadratic_phase(const JointAmplitude& state, double phi2_s_fs2, double phi2_i_fs2)
{
    if (state.domain != Domain::spectral)
        throw DomainError("apply_quadratic_phase: state must be in the spectral domain");
    JointAmplitude out = state;
    std::vector<std::complex<double>> ps(state.axis_s.count), pi(state.axis_i.count);
    for (std::size_t r = 0; r < ps.size(); ++r) {
        const double d = state.axis_s[r] - state.axis_s.center;
        ps[r] = std::polar(1.0, 0.5 * phi2_s_fs2 * d * d);
    }
    for (std::size_t c = 0; c < pi.size(); ++c) {
        const double d = state.axis_i[c] - state.axis_i.center;
        pi[c] = std::polar(1.0, 0.5 * phi2_i_fs2 * d * d);
    }
    for (Eigen::Index r = 0; r < out.values.rows(); ++r)
        for (Eigen::Index c = 0; c < out.values.cols(); ++c)
            out.values(r, c) *= ps[r] * pi[c];
    return out;
}

namespace detail {

// (-1)^k modulation maps the centred sample ordering onto the DFT's 0..N-1 ordering
// when N is a multiple of four.
inline void checkerboard(ComplexMatrix& m)
{
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            if ((r + c) & 1)
                m(r, c) = -m(r, c);
}

inline void require_fft_axis(const AxisGrid& axis)
{
    validate(axis);
    if (!is_power_of_two(axis.count))
        throw GridError("FFT axes must have a power-of-two sample count, got " + std::to_string(axis.count));
}

} // namespace detail

/// f(t_s, t_i) = (2 pi)^-1 \iint f(w_s, w_i) exp(-i (dw_s t_s + dw_i t_i)) dw_s dw_i.
inline JointAmplitude to_temporal(const JointAmplitude& state)
{
    if (state.domain != Domain::spectral)
        throw DomainError("to_temporal: state must be in the spectral domain");
    detail::require_fft_axis(state.axis_s);
    detail::require_fft_axis(state.axis_i);

    JointAmplitude out;
    out.domain = Domain::temporal;
    out.axis_s = conjugate_axis(state.axis_s);
    out.axis_i = conjugate_axis(state.axis_i);
    out.spectral_s = state.axis_s;
    out.spectral_i = state.axis_i;
    out.values = state.values;
    detail::checkerboard(out.values);
    fft::transform_2d(out.values.data(), static_cast<int>(out.values.rows()), static_cast<int>(out.values.cols()),
                      fft::Direction::forward);
    detail::checkerboard(out.values);
    out.values *= state.cell() / units::two_pi;
    return out;
}

/// Inverse of to_temporal.
inline JointAmplitude to_spectral(const JointAmplitude& state)
{
    if (state.domain != Domain::temporal)
        throw DomainError("to_spectral: state must be in the temporal domain");
    detail::require_fft_axis(state.axis_s);
    detail::require_fft_axis(state.axis_i);

    JointAmplitude out;
    out.domain = Domain::spectral;
    out.axis_s = state.spectral_s;
    out.axis_i = state.spectral_i;
    out.spectral_s = state.spectral_s;
    out.spectral_i = state.spectral_i;
    out.values = state.values;
    detail::checkerboard(out.values);
    fft::transform_2d(out.values.data(), static_cast<int>(out.values.rows()), static_cast<int>(out.values.cols()),
                      fft::Direction::backward);
    detail::checkerboard(out.values);
    out.values *= state.cell() / units::two_pi;
    return out;
}

inline RealMatrix intensity(const JointAmplitude& state) { return state.values.abs2(); }

inline Map2D intensity_map(const JointAmplitude& state) { return {state.axis_s, state.axis_i, intensity(state)}; }

/// Marginal intensities: first integrates over the idler axis (function of x_s), second over the signal axis.
inline std::pair<std::vector<double>, std::vector<double>> marginals(const JointAmplitude& state)
{
    const RealMatrix p = intensity(state);
    std::vector<double> ms(state.axis_s.count), mi(state.axis_i.count);
    for (Eigen::Index r = 0; r < p.rows(); ++r)
        ms[r] = p.row(r).sum() * state.axis_i.step;
    for (Eigen::Index c = 0; c < p.cols(); ++c)
        mi[c] = p.col(c).sum() * state.axis_s.step;
    return {std::move(ms), std::move(mi)};
}

/// Second moments of |f|^2, including the rotated sum/difference coordinates.
inline Moments2D rotated_stats(const JointAmplitude& state)
{
    return moments(intensity(state), state.axis_s, state.axis_i);
}

// ---------------------------------------------------------------------------
// Single-arm amplitude, for one photon treated on its own.

struct PulseAmplitude {
    Domain domain = Domain::spectral;
    AxisGrid axis;
    AxisGrid spectral_axis;
    std::vector<std::complex<double>> values;

    std::vector<double> intensity() const
    {
        std::vector<double> out(values.size());
        for (std::size_t k = 0; k < values.size(); ++k)
            out[k] = std::norm(values[k]);
        return out;
    }
    double norm() const
    {
        double s = 0;
        for (const auto& v : values)
            s += std::norm(v);
        return s * axis.step;
    }
    double std_width() const { return moments(intensity(), axis).std(); }
};

/// Gaussian spectral amplitude whose intensity has standard deviation sigma_omega.
inline PulseAmplitude gaussian_pulse(const AxisGrid& axis, double sigma_omega)
{
    validate(axis);
    if (!(sigma_omega > 0.0))
        throw DomainError("pulse bandwidth must be positive");
    check_coverage(axis, axis.center, sigma_omega, "pulse");
    PulseAmplitude p{Domain::spectral, axis, axis, std::vector<std::complex<double>>(axis.count)};
    for (std::size_t k = 0; k < axis.count; ++k) {
        const double d = axis[k] - axis.center;
        p.values[k] = std::exp(-d * d / (4.0 * sigma_omega * sigma_omega));
    }
    const double n = std::sqrt(p.norm());
    for (auto& v : p.values)
        v /= n;
    return p;
}

inline PulseAmplitude apply_quadratic_phase(const PulseAmplitude& pulse, double phi2_fs2)
{
    if (pulse.domain != Domain::spectral)
        throw DomainError("apply_quadratic_phase: pulse must be in the spectral domain");
    PulseAmplitude out = pulse;
    for (std::size_t k = 0; k < out.values.size(); ++k) {
        const double d = pulse.axis[k] - pulse.axis.center;
        out.values[k] *= std::polar(1.0, 0.5 * phi2_fs2 * d * d);
    }
    return out;
}

inline PulseAmplitude to_temporal(const PulseAmplitude& pulse)
{
    if (pulse.domain != Domain::spectral)
        throw DomainError("to_temporal: pulse must be in the spectral domain");
    detail::require_fft_axis(pulse.axis);
    PulseAmplitude out{Domain::temporal, conjugate_axis(pulse.axis), pulse.axis, pulse.values};
    for (std::size_t k = 1; k < out.values.size(); k += 2)
        out.values[k] = -out.values[k];
    fft::transform_1d(out.values.data(), static_cast<int>(out.values.size()), fft::Direction::forward);
    const double scale = pulse.axis.step / std::sqrt(units::two_pi);
    for (std::size_t k = 0; k < out.values.size(); ++k)
        out.values[k] *= (k & 1) ? -scale : scale;
    return out;
}

/// Closed-form intensity std of a chirped Gaussian pulse.
inline double chirped_gaussian_width(double sigma_omega, double phi2_fs2)
{
    const double t0 = 1.0 / (2.0 * sigma_omega);
    const double g = phi2_fs2 * sigma_omega;
    return std::sqrt(t0 * t0 + g * g);
}

// ---------------------------------------------------------------------------
// Grid planning

struct GridPlanOptions {
    double max_time_step_fs = 20.0;
    double span_sigmas = 6.0;
    double min_time_half_span_fs = 0.0;
    std::size_t min_count = 256;
    std::size_t max_count = 4096;
};

struct JointGrid {
    AxisGrid spectral_s;
    AxisGrid spectral_i;
    AxisGrid temporal_s() const { return conjugate_axis(spectral_s); }
    AxisGrid temporal_i() const { return conjugate_axis(spectral_i); }
};

/// Chooses spectral axes whose conjugate temporal axes hold the chirped two-photon
/// state: time span from the closed-form chirped widths, resolution from the step target.
inline JointGrid plan_joint_grid(const SourceConfig& config, const GridPlanOptions& opt = {})
{
    const auto bw = bandwidths(config);
    const double coherence = 1.0 / (2.0 * bw.sum);
    auto arm_width = [&](double sigma, double phi) {
        const double tl = 1.0 / (2.0 * sigma);
        const double g = phi * sigma;
        return std::sqrt(coherence * coherence + tl * tl + g * g);
    };
    const double widest = std::max(arm_width(bw.signal, config.chirp_s_fs2),
                                   arm_width(bw.idler, config.total_idler_phase_fs2()));
    const double half_span = std::max(opt.span_sigmas * widest, opt.min_time_half_span_fs);
    const double dw = std::numbers::pi / half_span;
    const double need_spec = 2.0 * opt.span_sigmas * std::max(bw.signal, bw.idler) / dw;
    const double need_res = units::two_pi / (opt.max_time_step_fs * dw);
    const auto n = next_power_of_two(std::max<std::size_t>(
        opt.min_count, static_cast<std::size_t>(std::ceil(std::max(need_spec, need_res)))));
    if (n > opt.max_count)
        throw GridError("required joint grid of " + std::to_string(n) + " samples exceeds max_count " +
                        std::to_string(opt.max_count));
    return {AxisGrid{units::wavelength_to_omega(config.signal_nm), dw, n},
            AxisGrid{units::wavelength_to_omega(config.idler_nm), dw, n}};
}

/// Fine spectral axes for reading the JSI directly (no transform): the step resolves the narrow
/// sum-frequency factor with `steps_per_sigma` samples and the span covers each arm filter.
inline JointGrid plan_jsi_grid(const SourceConfig& config, double steps_per_sigma = 4.0, double span_sigmas = 5.5)
{
    if (!(steps_per_sigma > 0.0) || !(span_sigmas >= 5.0))
        throw DomainError("plan_jsi_grid: need steps_per_sigma > 0 and span_sigmas >= 5");
    const auto bw = bandwidths(config);
    const double step = bw.sum / steps_per_sigma;
    auto axis = [&](double center, double sigma) {
        auto n = static_cast<std::size_t>(std::ceil(2.0 * span_sigmas * sigma / step)) + 2;
        n += n % 2;
        return AxisGrid{center, step, std::max(n, min_axis_count)};
    };
    return {axis(units::wavelength_to_omega(config.signal_nm), bw.signal),
            axis(units::wavelength_to_omega(config.idler_nm), bw.idler)};
}

/// Spectral state with the configured chirps (and compressor) applied.
inline JointAmplitude chirped_jsa(const SourceConfig& config, const JointGrid& grid)
{
    return apply_quadratic_phase(build_jsa(config, grid.spectral_s, grid.spectral_i), config.chirp_s_fs2,
                                 config.total_idler_phase_fs2());
}

} // namespace oksim
