#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "oksim/grid.hpp"

namespace oksim {

/// First and second moments of a non-negative weight map over (rows = s, cols = i).
struct Moments2D {
    double total = 0.0; // sum w dx_s dx_i
    double mean_s = 0.0;
    double mean_i = 0.0;
    double var_s = 0.0;
    double var_i = 0.0;
    double cov = 0.0;

    double std_s() const { return std::sqrt(var_s); }
    double std_i() const { return std::sqrt(var_i); }
    double std_sum() const { return std::sqrt(var_s + var_i + 2.0 * cov); }
    double std_difference() const { return std::sqrt(var_s + var_i - 2.0 * cov); }
    double mean_sum() const { return mean_s + mean_i; }
    double mean_difference() const { return mean_s - mean_i; }
};

inline Moments2D moments(const RealMatrix& w, const AxisGrid& axis_s, const AxisGrid& axis_i)
{
    if (static_cast<std::size_t>(w.rows()) != axis_s.count || static_cast<std::size_t>(w.cols()) != axis_i.count)
        throw GridError("moments: matrix shape does not match axes");
    const auto xs = axis_s.samples();
    const auto xi = axis_i.samples();
    double m0 = 0, ms = 0, mi = 0;
    for (Eigen::Index r = 0; r < w.rows(); ++r)
        for (Eigen::Index c = 0; c < w.cols(); ++c) {
            const double v = w(r, c);
            m0 += v;
            ms += v * xs[r];
            mi += v * xi[c];
        }
    if (!(m0 > 0.0))
        throw std::domain_error("moments: map has no positive weight");
    Moments2D out;
    out.mean_s = ms / m0;
    out.mean_i = mi / m0;
    double vs = 0, vi = 0, cv = 0;
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
        const double ds = xs[r] - out.mean_s;
        for (Eigen::Index c = 0; c < w.cols(); ++c) {
            const double v = w(r, c);
            const double di = xi[c] - out.mean_i;
            vs += v * ds * ds;
            vi += v * di * di;
            cv += v * ds * di;
        }
    }
    out.total = m0 * axis_s.step * axis_i.step;
    out.var_s = vs / m0;
    out.var_i = vi / m0;
    out.cov = cv / m0;
    return out;
}

struct Moments1D {
    double total = 0.0;
    double mean = 0.0;
    double variance = 0.0;
    double std() const { return std::sqrt(variance); }
};

inline Moments1D moments(const std::vector<double>& w, const AxisGrid& axis)
{
    if (w.size() != axis.count)
        throw GridError("moments: profile length does not match axis");
    double m0 = 0, m1 = 0;
    for (std::size_t k = 0; k < w.size(); ++k) {
        m0 += w[k];
        m1 += w[k] * axis[k];
    }
    if (!(m0 > 0.0))
        throw std::domain_error("moments: profile has no positive weight");
    Moments1D out;
    out.mean = m1 / m0;
    double m2 = 0;
    for (std::size_t k = 0; k < w.size(); ++k) {
        const double d = axis[k] - out.mean;
        m2 += w[k] * d * d;
    }
    out.total = m0 * axis.step;
    out.variance = m2 / m0;
    return out;
}

} // namespace oksim
