#pragma once
// Background subtraction, rotated slices, Gaussian widths and the time-bandwidth witness.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "oksim/fit.hpp"
#include "oksim/grid.hpp"
#include "oksim/parallel.hpp"
#include "oksim/units.hpp"

namespace oksim {

/// Raised when a profile shows no peak above its noise.
class NoSignalError : public FitError {
public:
    using FitError::FitError;
};

inline RealMatrix subtract_background(const CountMatrix& raw, const CountMatrix& bg, double scale = 1.0)
{
    if (raw.rows() != bg.rows() || raw.cols() != bg.cols())
        throw GridError("subtract_background: raw and background shapes differ");
    if (!(scale >= 0.0) || !std::isfinite(scale))
        throw DomainError("subtract_background: scale must be finite and >= 0");
    return raw.cast<double>() - scale * bg.cast<double>();
}

namespace detail {
inline std::string short_number(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}
} // namespace detail

enum class SliceDirection { sum, difference };

inline const char* to_string(SliceDirection d) { return d == SliceDirection::sum ? "sum" : "difference"; }

struct SliceProfile {
    SliceDirection direction = SliceDirection::difference;
    AxisGrid axis;             // u = x_s + x_i or d = x_s - x_i
    std::vector<double> values;
    double band_center = 0.0;  // centroid of the other coordinate
    std::size_t band_count = 0;

    std::vector<double> samples() const { return axis.samples(); }
};

/// Samples the map on the rotated lattice (u, d) = (x_s + x_i, x_s - x_i) with spacing equal to
/// the finer axis step, averages `band_count` adjacent bands of the other coordinate about its
/// centroid (weights above the median) and keeps the contiguous run where every band is inside the map.
inline SliceProfile rotated_slice_profile(const Map2D& map, SliceDirection direction, std::size_t band_count = 5)
{
    check_shape(map);
    if (band_count < 1)
        throw DomainError("rotated_slice_profile: band_count must be >= 1");
    if (map.axis_s.count < 2 || map.axis_i.count < 2 || !(map.axis_s.step > 0.0) || !(map.axis_i.step > 0.0))
        throw GridError("rotated_slice_profile: degenerate grid");

    // Weights above the map median, so a uniform offset (over-subtraction) does not move the bands.
    std::vector<double> sorted(map.values.data(), map.values.data() + map.values.size());
    auto mid = sorted.begin() + static_cast<long>(sorted.size() / 2);
    std::nth_element(sorted.begin(), mid, sorted.end());
    const double floor = *mid;
    double w = 0.0, m_other = 0.0;
    for (std::size_t r = 0; r < map.axis_s.count; ++r)
        for (std::size_t c = 0; c < map.axis_i.count; ++c) {
            const double v = map.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) - floor;
            if (!(v > 0.0))
                continue;
            const double other = direction == SliceDirection::difference ? map.axis_s[r] + map.axis_i[c]
                                                                         : map.axis_s[r] - map.axis_i[c];
            w += v;
            m_other += v * other;
        }
    if (!(w > 0.0))
        throw NoSignalError("rotated_slice_profile: map has no weight above its median");
    const double band_center = m_other / w;

    const double h = std::min(map.axis_s.step, map.axis_i.step);
    const double origin = direction == SliceDirection::difference ? map.axis_s.center - map.axis_i.center
                                                                  : map.axis_s.center + map.axis_i.center;
    const double reach = map.axis_s.span() + map.axis_i.span();
    const long kmax = static_cast<long>(std::ceil(reach / h));

    std::vector<double> values;
    long first = 0;
    bool started = false;
    for (long k = -kmax; k <= kmax; ++k) {
        const double along = origin + static_cast<double>(k) * h;
        double acc = 0.0;
        bool inside = true;
        for (std::size_t j = 0; j < band_count && inside; ++j) {
            const double other = band_center + (static_cast<double>(j) - 0.5 * static_cast<double>(band_count - 1)) * h;
            const double u = direction == SliceDirection::difference ? other : along;
            const double d = direction == SliceDirection::difference ? along : other;
            const double v = bilinear(map.axis_s, map.axis_i, map.values, 0.5 * (u + d), 0.5 * (u - d));
            if (std::isnan(v))
                inside = false;
            else
                acc += v;
        }
        if (inside) {
            if (!started) {
                first = k;
                started = true;
            }
            values.push_back(acc / static_cast<double>(band_count));
        } else if (started) {
            break;
        }
    }
    if (values.size() < 2)
        throw GridError("rotated_slice_profile: bands fall outside the map");

    SliceProfile p;
    p.direction = direction;
    p.band_center = band_center;
    p.band_count = band_count;
    p.axis.step = h;
    p.axis.count = values.size();
    p.axis.center = origin + (static_cast<double>(first) + static_cast<double>(values.size() / 2)) * h;
    p.values = std::move(values);
    return p;
}

/// Median absolute deviation of first differences, scaled to a Gaussian standard deviation
/// of the per-sample noise.
inline double profile_noise(const std::vector<double>& y)
{
    if (y.size() < 3)
        return 0.0;
    std::vector<double> d(y.size() - 1);
    for (std::size_t k = 0; k + 1 < y.size(); ++k)
        d[k] = y[k + 1] - y[k];
    auto mid = d.begin() + static_cast<long>(d.size() / 2);
    std::nth_element(d.begin(), mid, d.end());
    const double med = *mid;
    for (auto& v : d)
        v = std::abs(v - med);
    std::nth_element(d.begin(), mid, d.end());
    return 1.4826 * *mid / std::sqrt(2.0);
}

struct PeakCheck {
    double peak_excess = 0.0; // max minus median
    double noise = 0.0;
    double threshold_sigmas = 5.0;
    bool detected() const { return peak_excess > threshold_sigmas * noise && peak_excess > 0.0; }
};

inline PeakCheck check_peak(const std::vector<double>& y, double threshold_sigmas = 5.0)
{
    PeakCheck c;
    c.threshold_sigmas = threshold_sigmas;
    if (y.empty())
        return c;
    std::vector<double> s = y;
    auto mid = s.begin() + static_cast<long>(s.size() / 2);
    std::nth_element(s.begin(), mid, s.end());
    c.peak_excess = *std::max_element(y.begin(), y.end()) - *mid;
    c.noise = profile_noise(y);
    return c;
}

struct WidthOptions {
    std::size_t band_count = 5;
    FitWeights weights = FitWeights::unit;
    double peak_threshold_sigmas = 5.0;
};

struct WidthResult {
    SliceProfile profile;
    FitResult fit;
};

/// Slice and fit; a profile without a detectable peak or a fit that fails to converge is an error.
inline WidthResult measure_width(const Map2D& map, SliceDirection direction, const WidthOptions& opt = {})
{
    WidthResult out{rotated_slice_profile(map, direction, opt.band_count), {}};
    const auto peak = check_peak(out.profile.values, opt.peak_threshold_sigmas);
    if (!peak.detected())
        throw NoSignalError("no peak above " + detail::short_number(opt.peak_threshold_sigmas) +
                            " sigma of profile noise (" +
                            to_string(direction) + " slice)");
    FitOptions fo;
    fo.weights = opt.weights;
    out.fit = fit_gaussian(out.profile.samples(), out.profile.values, fo);
    if (!out.fit.converged)
        throw FitError(std::string("Gaussian fit did not converge (") + to_string(direction) + " slice)");
    return out;
}

struct Measured {
    double value = 0.0;
    double error = 0.0;
};

struct WitnessReport {
    Measured delta_t;     // fs
    Measured delta_omega; // rad/fs
    double product = 0.0;
    double uncertainty = 0.0;
    double sigmas_of_violation = 0.0;
};

inline WitnessReport witness(Measured dt, Measured dw)
{
    if (!(dt.value > 0.0) || !(dw.value > 0.0))
        throw DomainError("witness: widths must be > 0");
    if (!(dt.error >= 0.0) || !(dw.error >= 0.0))
        throw DomainError("witness: uncertainties must be >= 0");
    WitnessReport r;
    r.delta_t = dt;
    r.delta_omega = dw;
    r.product = dt.value * dw.value;
    r.uncertainty = r.product * std::hypot(dt.error / dt.value, dw.error / dw.value);
    r.sigmas_of_violation = r.uncertainty > 0.0 ? (1.0 - r.product) / r.uncertainty
                            : r.product < 1.0   ? std::numeric_limits<double>::infinity()
                            : r.product > 1.0   ? -std::numeric_limits<double>::infinity()
                                                : 0.0;
    return r;
}

struct SensitivityRow {
    double scale = 0.0;
    std::optional<FitResult> fit;
    std::string error; // set when the row failed
};

struct SensitivityTable {
    std::vector<SensitivityRow> rows;
    double systematic = 0.0; // half-range of sigma over scales inside the systematic range
    double lo = 0.9;
    double hi = 1.1;
};

/// Repeats subtract -> slice -> fit for every scale of the background.
inline SensitivityTable background_sensitivity(const CountMatrix& raw, const CountMatrix& bg, const AxisGrid& axis_s,
                                               const AxisGrid& axis_i, const std::vector<double>& scales,
                                               const WidthOptions& opt = {}, double lo = 0.9, double hi = 1.1,
                                               Parallelism par = {})
{
    if (scales.empty())
        throw DomainError("background_sensitivity: empty scale grid");
    for (double s : scales)
        if (!(s >= 0.0) || !std::isfinite(s))
            throw DomainError("background_sensitivity: scales must be finite and >= 0");
    SensitivityTable t;
    t.lo = lo;
    t.hi = hi;
    t.rows.resize(scales.size());
    parallel_for(scales.size(), par, [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            t.rows[k].scale = scales[k];
            try {
                const Map2D m{axis_s, axis_i, subtract_background(raw, bg, scales[k])};
                t.rows[k].fit = measure_width(m, SliceDirection::difference, opt).fit;
            } catch (const std::exception& e) {
                t.rows[k].error = e.what();
            }
        }
    });
    double mn = std::numeric_limits<double>::infinity(), mx = -mn;
    for (const auto& r : t.rows)
        if (r.fit && r.scale >= lo - 1e-12 && r.scale <= hi + 1e-12) {
            mn = std::min(mn, r.fit->sigma());
            mx = std::max(mx, r.fit->sigma());
        }
    t.systematic = mx >= mn ? 0.5 * (mx - mn) : 0.0;
    return t;
}

/// Evenly spaced scale grid including both ends.
inline std::vector<double> scale_grid(double lo, double hi, std::size_t steps)
{
    if (steps < 1 || !(hi >= lo) || !(lo >= 0.0))
        throw DomainError("scale grid needs 0 <= lo <= hi and steps >= 1");
    if (steps == 1)
        return {lo};
    std::vector<double> s(steps);
    for (std::size_t k = 0; k < steps; ++k)
        s[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(steps - 1);
    return s;
}

} // namespace oksim
