#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "oksim/units.hpp"

namespace oksim {

class GridError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

using RealMatrix = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ComplexMatrix = Eigen::Array<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CountMatrix = Eigen::Array<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_power_of_two(std::size_t n)
{
    std::size_t p = 1;
    while (p < n)
        p <<= 1;
    return p;
}

/// Uniform sample axis: x_k = center + (k - count/2) * step.
struct AxisGrid {
    double center = 0.0;
    double step = 1.0;
    std::size_t count = 0;

    double operator[](std::size_t k) const
    {
        return center + (static_cast<double>(k) - static_cast<double>(count / 2)) * step;
    }
    double front() const { return (*this)[0]; }
    double back() const { return (*this)[count - 1]; }
    double span() const { return step * static_cast<double>(count); }

    /// Fractional sample index of coordinate x.
    double index_of(double x) const { return (x - center) / step + static_cast<double>(count / 2); }

    std::vector<double> samples() const
    {
        std::vector<double> out(count);
        for (std::size_t k = 0; k < count; ++k)
            out[k] = (*this)[k];
        return out;
    }

    bool operator==(const AxisGrid&) const = default;
};

inline constexpr std::size_t min_axis_count = 16;

inline void validate(const AxisGrid& axis, const char* what = "axis")
{
    if (!(axis.step > 0.0) || !std::isfinite(axis.step))
        throw GridError(std::string(what) + ": step must be positive");
    if (axis.count < min_axis_count)
        throw GridError(std::string(what) + ": count must be >= " + std::to_string(min_axis_count));
    if (!std::isfinite(axis.center))
        throw GridError(std::string(what) + ": center must be finite");
}

/// Axis conjugate to `axis` under the discrete Fourier transform, centred on zero.
inline AxisGrid conjugate_axis(const AxisGrid& axis)
{
    return {0.0, units::two_pi / (axis.step * static_cast<double>(axis.count)), axis.count};
}

/// Axis centred on zero with `count` samples covering at least +-half_span.
inline AxisGrid symmetric_axis(double half_span, double step)
{
    const auto half = static_cast<std::size_t>(std::ceil(half_span / step));
    return {0.0, step, 2 * half + 2};
}

/// Linear interpolation of samples on `axis`; zero outside.
inline double interpolate(const AxisGrid& axis, const std::vector<double>& values, double x)
{
    const double f = axis.index_of(x);
    if (f < 0.0 || f > static_cast<double>(axis.count - 1))
        return 0.0;
    const auto i = static_cast<std::size_t>(std::floor(f));
    if (i + 1 >= axis.count)
        return values[axis.count - 1];
    const double w = f - static_cast<double>(i);
    return (1.0 - w) * values[i] + w * values[i + 1];
}

/// Bilinear interpolation on a (rows x cols) grid; returns NaN outside.
inline double bilinear(const AxisGrid& rows, const AxisGrid& cols, const RealMatrix& m, double r, double c)
{
    const double fr = rows.index_of(r);
    const double fc = cols.index_of(c);
    const double maxr = static_cast<double>(rows.count - 1);
    const double maxc = static_cast<double>(cols.count - 1);
    constexpr double slack = 1e-9;
    if (fr < -slack || fc < -slack || fr > maxr + slack || fc > maxc + slack)
        return std::numeric_limits<double>::quiet_NaN();
    const auto i = std::min(static_cast<Eigen::Index>(std::max(0.0, std::floor(fr))), static_cast<Eigen::Index>(rows.count) - 2);
    const auto j = std::min(static_cast<Eigen::Index>(std::max(0.0, std::floor(fc))), static_cast<Eigen::Index>(cols.count) - 2);
    const double wr = std::clamp(fr - static_cast<double>(i), 0.0, 1.0);
    const double wc = std::clamp(fc - static_cast<double>(j), 0.0, 1.0);
    return (1 - wr) * (1 - wc) * m(i, j) + (1 - wr) * wc * m(i, j + 1) + wr * (1 - wc) * m(i + 1, j) +
           wr * wc * m(i + 1, j + 1);
}

/// Real-valued map over (rows = signal axis, cols = idler axis).
struct Map2D {
    AxisGrid axis_s;
    AxisGrid axis_i;
    RealMatrix values;

    double cell() const { return axis_s.step * axis_i.step; }
    double integral() const { return values.sum() * cell(); }
};

inline void check_shape(const Map2D& m)
{
    if (static_cast<std::size_t>(m.values.rows()) != m.axis_s.count ||
        static_cast<std::size_t>(m.values.cols()) != m.axis_i.count)
        throw GridError("map shape does not match its axes");
}

/// Bilinear resampling onto new axes; points outside the source grid become zero.
inline Map2D resample(const Map2D& m, const AxisGrid& axis_s, const AxisGrid& axis_i)
{
    Map2D out{axis_s, axis_i, RealMatrix(static_cast<Eigen::Index>(axis_s.count), static_cast<Eigen::Index>(axis_i.count))};
    for (std::size_t r = 0; r < axis_s.count; ++r)
        for (std::size_t c = 0; c < axis_i.count; ++c) {
            const double v = bilinear(m.axis_s, m.axis_i, m.values, axis_s[r], axis_i[c]);
            out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = std::isnan(v) ? 0.0 : v;
        }
    return out;
}

/// Separable Gaussian blur with standard deviations in axis units; zero leaves an axis untouched.
/// The kernel is truncated at 5 sigma and renormalised; samples beyond the map count as zero.
inline Map2D gaussian_blur(const Map2D& m, double sigma_s, double sigma_i)
{
    check_shape(m);
    if (!(sigma_s >= 0.0) || !(sigma_i >= 0.0))
        throw GridError("gaussian_blur: widths must be >= 0");
    auto kernel = [](double sigma, double step) {
        if (sigma == 0.0)
            return std::vector<double>{1.0};
        const auto half = static_cast<long>(std::ceil(5.0 * sigma / step));
        std::vector<double> k(static_cast<std::size_t>(2 * half + 1));
        double sum = 0.0;
        for (long j = -half; j <= half; ++j) {
            const double x = static_cast<double>(j) * step / sigma;
            sum += k[static_cast<std::size_t>(j + half)] = std::exp(-0.5 * x * x);
        }
        for (auto& v : k)
            v /= sum;
        return k;
    };
    const auto ks = kernel(sigma_s, m.axis_s.step);
    const auto ki = kernel(sigma_i, m.axis_i.step);
    const long hs = static_cast<long>(ks.size() / 2), hi = static_cast<long>(ki.size() / 2);
    const long rows = m.values.rows(), cols = m.values.cols();
    RealMatrix tmp = RealMatrix::Zero(rows, cols);
    for (long r = 0; r < rows; ++r)
        for (long c = 0; c < cols; ++c)
            for (long j = -hi; j <= hi; ++j)
                if (c + j >= 0 && c + j < cols)
                    tmp(r, c) += ki[static_cast<std::size_t>(j + hi)] * m.values(r, c + j);
    Map2D out{m.axis_s, m.axis_i, RealMatrix::Zero(rows, cols)};
    for (long r = 0; r < rows; ++r)
        for (long j = -hs; j <= hs; ++j)
            if (r + j >= 0 && r + j < rows)
                out.values.row(r) += ks[static_cast<std::size_t>(j + hs)] * tmp.row(r + j);
    return out;
}

} // namespace oksim
