#pragma once
// Raster-scanned two-shutter coincidence measurement.
//
// Rates are counts/s, delays fs. The noiseless coincidence map is the joint
// temporal intensity cross-correlated with the two gate profiles; accidentals
// follow the pulsed-source product of the gated singles rates.

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "oksim/biphoton.hpp"
#include "oksim/fft.hpp"
#include "oksim/grid.hpp"
#include "oksim/kerr_gate.hpp"
#include "oksim/parallel.hpp"
#include "oksim/random.hpp"

namespace oksim {

struct ScanConfig {
    AxisGrid delay_s{0.0, 1500.0 / 64.0, 128};
    AxisGrid delay_i{0.0, 1500.0 / 64.0, 128};
    std::optional<double> dwell_s;      // per pixel; derived from target_peak_counts when unset
    double target_peak_counts = 5.0e4; // expected true coincidences in the brightest pixel
    double rep_rate_hz = 80e6;
    double pair_rate = 4e5;        // source coincidences/s before the shutters
    double singles_rate_s = 3.6e6; // source singles/s before the shutters
    double singles_rate_i = 2.6e6;
    double transmission_s = 0.0625; // coupling/transport losses, gating excluded
    double transmission_i = 0.0625;
    double noise_floor_s = 2.0e5; // gate-independent singles (pump leakage, Raman)
    double noise_floor_i = 4.8e5;
    double pump_leak_floor = 0.0; // constant coincidence floor, counts/s
    std::uint64_t seed = 1;
};

inline void validate(const ScanConfig& c)
{
    validate(c.delay_s, "delay_s");
    validate(c.delay_i, "delay_i");
    if (c.dwell_s && !(*c.dwell_s > 0.0))
        throw DomainError("dwell must be > 0 s");
    if (!(c.target_peak_counts > 0.0))
        throw DomainError("target_peak_counts must be > 0");
    if (!(c.rep_rate_hz > 0.0))
        throw DomainError("rep_rate must be > 0 Hz");
    for (double v : {c.pair_rate, c.singles_rate_s, c.singles_rate_i, c.noise_floor_s, c.noise_floor_i,
                     c.pump_leak_floor})
        if (!(v >= 0.0) || !std::isfinite(v))
            throw DomainError("scan rates must be finite and >= 0");
    for (double v : {c.transmission_s, c.transmission_i})
        if (!(v >= 0.0 && v <= 1.0))
            throw DomainError("transmission must lie in [0, 1]");
}

struct ScanResult {
    AxisGrid delay_s;
    AxisGrid delay_i;
    double dwell_s = 0.0;
    double rep_rate_hz = 0.0;
    std::uint64_t seed = 0;
    CountMatrix raw;
    CountMatrix background_estimate;
    CountMatrix singles_s;
    CountMatrix singles_i;
    RealMatrix expected_truth; // noiseless true coincidences, counts/s
};

enum class CorrelationMethod { fft, direct };

namespace detail {

// Gate samples as integer lag offsets on a lattice of the given step.
struct Kernel {
    long first = 0; // lag of values[0], in samples
    std::vector<double> values;
};

inline Kernel gate_kernel(const GateProfile& gate, double step)
{
    const double rel = std::abs(gate.axis.step - step) / step;
    if (rel < 1e-9) {
        const double f0 = gate.axis.front() / step;
        if (std::abs(f0 - std::round(f0)) > 1e-6)
            throw GridError("gate axis is not aligned with the intensity lattice");
        return {static_cast<long>(std::lround(f0)), gate.values};
    }
    if (gate.axis.step > 4.0 * step)
        throw GridError("gate profile too coarse to resample onto the intensity grid");
    const long lo = static_cast<long>(std::floor(gate.axis.front() / step));
    const long hi = static_cast<long>(std::ceil(gate.axis.back() / step));
    Kernel k{lo, std::vector<double>(static_cast<std::size_t>(hi - lo + 1))};
    for (long m = lo; m <= hi; ++m)
        k.values[static_cast<std::size_t>(m - lo)] = gate.at(static_cast<double>(m) * step);
    return k;
}

// out[k] = sum_j f[k + first + j] h[j]; samples outside f are zero.
inline std::vector<double> correlate_fft(const std::vector<double>& f, const Kernel& h)
{
    const std::size_t len = h.values.size();
    std::vector<double> reversed(h.values.rbegin(), h.values.rend());
    const auto y = fft::convolve(f, reversed);
    std::vector<double> out(f.size(), 0.0);
    for (std::size_t k = 0; k < f.size(); ++k) {
        const long n = static_cast<long>(k) + h.first + static_cast<long>(len) - 1;
        if (n >= 0 && n < static_cast<long>(y.size()))
            out[k] = y[static_cast<std::size_t>(n)];
    }
    return out;
}

} // namespace detail

/// C(t_s, t_i) = pair_rate * \iint I(u, v) g_s(u - t_s) g_i(v - t_i) du dv, on the grid of `jti`.
/// Gates on a different step are resampled by linear interpolation.
inline Map2D expected_coincidence_map(const Map2D& jti, const GateProfile& gate_s, const GateProfile& gate_i,
                                      double pair_rate, CorrelationMethod method = CorrelationMethod::fft)
{
    check_shape(jti);
    if (!(pair_rate >= 0.0))
        throw DomainError("pair_rate must be >= 0");
    const auto ks = detail::gate_kernel(gate_s, jti.axis_s.step);
    const auto ki = detail::gate_kernel(gate_i, jti.axis_i.step);
    const auto rows = jti.values.rows();
    const auto cols = jti.values.cols();
    Map2D out{jti.axis_s, jti.axis_i, RealMatrix::Zero(rows, cols)};
    const double scale = pair_rate * jti.cell();

    if (method == CorrelationMethod::direct) {
        for (Eigen::Index a = 0; a < rows; ++a)
            for (Eigen::Index b = 0; b < cols; ++b) {
                double acc = 0.0;
                for (std::size_t m = 0; m < ks.values.size(); ++m) {
                    const long r = a + ks.first + static_cast<long>(m);
                    if (r < 0 || r >= rows)
                        continue;
                    for (std::size_t n = 0; n < ki.values.size(); ++n) {
                        const long c = b + ki.first + static_cast<long>(n);
                        if (c < 0 || c >= cols)
                            continue;
                        acc += jti.values(r, c) * ks.values[m] * ki.values[n];
                    }
                }
                out.values(a, b) = scale * acc;
            }
        return out;
    }

    RealMatrix along_i(rows, cols);
    std::vector<double> line(static_cast<std::size_t>(cols));
    for (Eigen::Index a = 0; a < rows; ++a) {
        for (Eigen::Index b = 0; b < cols; ++b)
            line[b] = jti.values(a, b);
        const auto corr = detail::correlate_fft(line, ki);
        for (Eigen::Index b = 0; b < cols; ++b)
            along_i(a, b) = corr[b];
    }
    line.resize(static_cast<std::size_t>(rows));
    for (Eigen::Index b = 0; b < cols; ++b) {
        for (Eigen::Index a = 0; a < rows; ++a)
            line[a] = along_i(a, b);
        const auto corr = detail::correlate_fft(line, ks);
        for (Eigen::Index a = 0; a < rows; ++a)
            out.values(a, b) = scale * corr[a];
    }
    return out;
}

/// One arm's singles rate versus its own delay: arm_rate * (marginal * g)(t) + noise_floor,
/// evaluated on `delays`. `marginal` is a probability density on `axis`.
inline std::vector<double> singles_rate(const std::vector<double>& marginal, const AxisGrid& axis, const GateProfile& gate,
                                        double arm_rate, double noise_floor, const AxisGrid& delays)
{
    if (marginal.size() != axis.count)
        throw GridError("singles_rate: marginal does not match its axis");
    const auto k = detail::gate_kernel(gate, axis.step);
    auto corr = detail::correlate_fft(marginal, k);
    for (auto& v : corr)
        v *= arm_rate * axis.step;
    std::vector<double> out(delays.count);
    for (std::size_t d = 0; d < delays.count; ++d)
        out[d] = interpolate(axis, corr, delays[d]) + noise_floor;
    return out;
}

struct SinglesRates {
    std::vector<double> s; // over delay_s
    std::vector<double> i; // over delay_i
};

inline SinglesRates singles_maps(const Map2D& jti, const GateProfile& gate_s, const GateProfile& gate_i,
                                 double arm_rate_s, double arm_rate_i, double noise_floor_s, double noise_floor_i,
                                 const AxisGrid& delay_s, const AxisGrid& delay_i)
{
    check_shape(jti);
    std::vector<double> ms(jti.axis_s.count), mi(jti.axis_i.count);
    for (Eigen::Index r = 0; r < jti.values.rows(); ++r)
        ms[r] = jti.values.row(r).sum() * jti.axis_i.step;
    for (Eigen::Index c = 0; c < jti.values.cols(); ++c)
        mi[c] = jti.values.col(c).sum() * jti.axis_s.step;
    return {singles_rate(ms, jti.axis_s, gate_s, arm_rate_s, noise_floor_s, delay_s),
            singles_rate(mi, jti.axis_i, gate_i, arm_rate_i, noise_floor_i, delay_i)};
}

/// A(t_s, t_i) = S_s(t_s) S_i(t_i) / f_rep + pump_leak_floor.
inline RealMatrix accidental_map(const std::vector<double>& singles_s, const std::vector<double>& singles_i,
                                 double rep_rate_hz, double pump_leak_floor = 0.0)
{
    if (!(rep_rate_hz > 0.0))
        throw DomainError("rep_rate must be > 0 Hz");
    RealMatrix a(static_cast<Eigen::Index>(singles_s.size()), static_cast<Eigen::Index>(singles_i.size()));
    for (std::size_t r = 0; r < singles_s.size(); ++r)
        for (std::size_t c = 0; c < singles_i.size(); ++c)
            a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                singles_s[r] * singles_i[c] / rep_rate_hz + pump_leak_floor;
    return a;
}

/// Dwell giving `target_counts` expected true coincidences at the brightest pixel.
inline std::optional<double> dwell_for_peak(const RealMatrix& truth, double target_counts)
{
    const double peak = truth.size() ? truth.maxCoeff() : 0.0;
    if (!(peak > 0.0))
        return std::nullopt;
    return target_counts / peak;
}

namespace stream_id {
inline constexpr std::uint64_t raw = 1;
inline constexpr std::uint64_t background = 2;
inline constexpr std::uint64_t singles_s = 3;
inline constexpr std::uint64_t singles_i = 4;
} // namespace stream_id

/// Poisson-samples the raw scan, an independent delayed-window background estimate and the
/// singles at every pixel. Each pixel draws from its own counter-derived engine.
inline ScanResult sample_scan(const RealMatrix& truth, const RealMatrix& accidentals, const std::vector<double>& singles_s,
                              const std::vector<double>& singles_i, const AxisGrid& delay_s, const AxisGrid& delay_i,
                              double dwell_s, double rep_rate_hz, std::uint64_t seed, Parallelism par = {})
{
    if (!(dwell_s > 0.0))
        throw DomainError("dwell must be > 0 s");
    const auto rows = truth.rows();
    const auto cols = truth.cols();
    if (accidentals.rows() != rows || accidentals.cols() != cols ||
        static_cast<std::size_t>(rows) != delay_s.count || static_cast<std::size_t>(cols) != delay_i.count ||
        singles_s.size() != delay_s.count || singles_i.size() != delay_i.count)
        throw GridError("sample_scan: input shapes do not match the delay axes");

    ScanResult out;
    out.delay_s = delay_s;
    out.delay_i = delay_i;
    out.dwell_s = dwell_s;
    out.rep_rate_hz = rep_rate_hz;
    out.seed = seed;
    out.expected_truth = truth;
    out.raw.resize(rows, cols);
    out.background_estimate.resize(rows, cols);
    out.singles_s.resize(rows, cols);
    out.singles_i.resize(rows, cols);

    parallel_for(static_cast<std::size_t>(rows * cols), par, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            const auto r = static_cast<Eigen::Index>(p) / cols;
            const auto c = static_cast<Eigen::Index>(p) % cols;
            auto e_raw = rng::engine(seed, stream_id::raw, p);
            auto e_bg = rng::engine(seed, stream_id::background, p);
            auto e_s = rng::engine(seed, stream_id::singles_s, p);
            auto e_i = rng::engine(seed, stream_id::singles_i, p);
            out.raw(r, c) = rng::poisson((truth(r, c) + accidentals(r, c)) * dwell_s, e_raw);
            out.background_estimate(r, c) = rng::poisson(accidentals(r, c) * dwell_s, e_bg);
            out.singles_s(r, c) = rng::poisson(singles_s[r] * dwell_s, e_s);
            out.singles_i(r, c) = rng::poisson(singles_i[c] * dwell_s, e_i);
        }
    });
    return out;
}

/// Noiseless rates of one scan configuration.
struct ScanModel {
    Map2D truth_fine;        // coincidences/s on the intensity grid
    RealMatrix truth;        // coincidences/s on the delay axes
    SinglesRates singles;    // counts/s at the detectors
    RealMatrix accidentals;  // coincidences/s on the delay axes
    double dwell_s = 0.0;
};

inline ScanModel model_scan(const Map2D& jti, const GateProfile& gate_s, const GateProfile& gate_i, const ScanConfig& c)
{
    validate(c);
    ScanModel m;
    m.truth_fine = expected_coincidence_map(jti, gate_s, gate_i, c.pair_rate * c.transmission_s * c.transmission_i);
    m.truth = resample(m.truth_fine, c.delay_s, c.delay_i).values;
    m.singles = singles_maps(jti, gate_s, gate_i, c.singles_rate_s * c.transmission_s, c.singles_rate_i * c.transmission_i,
                             c.noise_floor_s, c.noise_floor_i, c.delay_s, c.delay_i);
    m.accidentals = accidental_map(m.singles.s, m.singles.i, c.rep_rate_hz, c.pump_leak_floor);
    // With no signal anywhere the peak rule is undefined; fall back to one second per pixel.
    m.dwell_s = c.dwell_s.value_or(dwell_for_peak(m.truth, c.target_peak_counts).value_or(1.0));
    return m;
}

inline ScanResult simulate_scan(const ScanModel& m, const ScanConfig& c, Parallelism par = {})
{
    return sample_scan(m.truth, m.accidentals, m.singles.s, m.singles.i, c.delay_s, c.delay_i, m.dwell_s, c.rep_rate_hz,
                       c.seed, par);
}

} // namespace oksim
