#pragma once
// Gaussian-plus-offset least squares: a exp(-(x - c)^2 / (2 s^2)) + b.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "oksim/units.hpp"

namespace oksim {

class FitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct GaussianParams {
    double amplitude = 0.0;
    double center = 0.0;
    double sigma = 1.0;
    double offset = 0.0;
};

struct FitResult {
    GaussianParams params;
    Eigen::Matrix4d covariance = Eigen::Matrix4d::Zero(); // order: amplitude, center, sigma, offset
    double residual_rms = 0.0;
    int iterations = 0;
    bool converged = false;

    double amplitude() const { return params.amplitude; }
    double center() const { return params.center; }
    double sigma() const { return params.sigma; }
    double offset() const { return params.offset; }
    double error(int k) const { return std::sqrt(std::max(0.0, covariance(k, k))); }
    double sigma_error() const { return error(2); }
    double fwhm() const { return units::sigma_to_fwhm(params.sigma); }
};

enum class FitWeights { unit, poisson };

struct FitOptions {
    std::optional<GaussianParams> initial;
    FitWeights weights = FitWeights::unit;
    int max_iterations = 200;
    double tolerance = 1e-8; // relative parameter change
};

inline double gaussian(const GaussianParams& p, double x)
{
    const double z = (x - p.center) / p.sigma;
    return p.amplitude * std::exp(-0.5 * z * z) + p.offset;
}

/// Moment-based starting point: offset from the lower edge level, centre and width from
/// the positive excess above it.
inline GaussianParams initial_guess(const std::vector<double>& x, const std::vector<double>& y)
{
    const std::size_t n = y.size();
    const std::size_t edge = std::max<std::size_t>(1, n / 10);
    std::vector<double> ends(y.begin(), y.begin() + static_cast<long>(edge));
    ends.insert(ends.end(), y.end() - static_cast<long>(edge), y.end());
    const double base = std::accumulate(ends.begin(), ends.end(), 0.0) / static_cast<double>(ends.size());

    double w = 0, m1 = 0, m2 = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double e = std::max(0.0, y[k] - base);
        w += e;
        m1 += e * x[k];
        m2 += e * x[k] * x[k];
    }
    const auto ipk = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
    GaussianParams p;
    p.offset = base;
    p.amplitude = y[ipk] - base;
    p.center = w > 0 ? m1 / w : x[ipk];
    const double var = w > 0 ? m2 / w - p.center * p.center : 0.0;
    const double dx = std::abs(x.back() - x.front()) / static_cast<double>(n - 1);
    p.sigma = std::max(var > 0 ? std::sqrt(var) : 0.0, dx);
    return p;
}

/// Levenberg-Marquardt (damped Gauss-Newton). Covariance is (J^T W J)^-1 for inverse-variance
/// weights and the residual sandwich (J^T J)^-1 J^T diag(r^2) J (J^T J)^-1 n/(n-4) for unit weights.
inline FitResult fit_gaussian(const std::vector<double>& x, const std::vector<double>& y, const FitOptions& opt = {})
{
    const std::size_t n = y.size();
    if (x.size() != n)
        throw FitError("fit_gaussian: x and y lengths differ");
    if (n < 8)
        throw FitError("fit_gaussian: need at least 8 samples");
    for (std::size_t k = 0; k < n; ++k)
        if (!std::isfinite(x[k]) || !std::isfinite(y[k]))
            throw FitError("fit_gaussian: non-finite sample");
    const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
    if (*lo == *hi)
        throw FitError("fit_gaussian: degenerate profile (all samples equal)");

    Eigen::VectorXd w = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
    if (opt.weights == FitWeights::poisson)
        for (std::size_t k = 0; k < n; ++k)
            w[static_cast<Eigen::Index>(k)] = 1.0 / std::max(1.0, std::abs(y[k]));

    Eigen::Vector4d p;
    {
        const auto g = opt.initial.value_or(initial_guess(x, y));
        p << g.amplitude, g.center, g.sigma, g.offset;
    }
    if (!(p[2] != 0.0))
        throw FitError("fit_gaussian: initial sigma must be nonzero");

    const auto eval = [&](const Eigen::Vector4d& q, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
        for (std::size_t k = 0; k < n; ++k) {
            const auto i = static_cast<Eigen::Index>(k);
            const double z = (x[k] - q[1]) / q[2];
            const double e = std::exp(-0.5 * z * z);
            r[i] = y[k] - (q[0] * e + q[3]);
            if (jac) {
                (*jac)(i, 0) = e;
                (*jac)(i, 1) = q[0] * e * z / q[2];
                (*jac)(i, 2) = q[0] * e * z * z / q[2];
                (*jac)(i, 3) = 1.0;
            }
        }
    };
    // Steps may not carry the peak off the sampled range or widen it beyond that range.
    const auto [xmin, xmax] = std::minmax_element(x.begin(), x.end());
    const double range = *xmax - *xmin;
    const auto in_bounds = [&](const Eigen::Vector4d& q) {
        return q[2] != 0.0 && std::abs(q[2]) <= range && q[1] >= *xmin && q[1] <= *xmax;
    };
    const auto cost = [&](const Eigen::VectorXd& r) { return (r.array().square() * w.array()).sum(); };

    Eigen::VectorXd r(static_cast<Eigen::Index>(n));
    Eigen::MatrixXd jac(static_cast<Eigen::Index>(n), 4);
    eval(p, r, &jac);
    double chi2 = cost(r);
    double lambda = 1e-3;
    FitResult out;

    for (int it = 1; it <= opt.max_iterations; ++it) {
        out.iterations = it;
        const Eigen::MatrixXd jw = jac.array().colwise() * w.array();
        const Eigen::Matrix4d jtj = jac.transpose() * jw;
        const Eigen::Vector4d g = jw.transpose() * r;

        bool accepted = false;
        Eigen::Vector4d step = Eigen::Vector4d::Zero();
        for (int tries = 0; tries < 40 && !accepted; ++tries) {
            Eigen::Matrix4d a = jtj;
            a.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-300);
            step = a.ldlt().solve(g);
            const Eigen::Vector4d trial = p + step;
            Eigen::VectorXd rt(static_cast<Eigen::Index>(n));
            eval(trial, rt, nullptr);
            const double c2 = cost(rt);
            if (std::isfinite(c2) && c2 <= chi2 && in_bounds(trial)) {
                p = trial;
                chi2 = c2;
                lambda = std::max(lambda * 0.3, 1e-12);
                accepted = true;
            } else {
                lambda *= 10.0;
            }
        }
        eval(p, r, &jac);
        // Centre and offset are judged against the width and amplitude so that zero values converge.
        const Eigen::Vector4d scale(std::abs(p[0]), std::max(std::abs(p[1]), std::abs(p[2])), std::abs(p[2]),
                                    std::max(std::abs(p[3]), std::abs(p[0])));
        const double rel = (step.array().abs() / scale.array().max(1e-300)).maxCoeff();
        // No acceptable step under any damping: the cost is at a minimum to working precision.
        if (!accepted || rel < opt.tolerance) {
            out.converged = true;
            break;
        }
    }

    p[2] = std::abs(p[2]);
    out.params = {p[0], p[1], p[2], p[3]};
    const Eigen::MatrixXd jw = jac.array().colwise() * w.array();
    const Eigen::Matrix4d jtj = jac.transpose() * jw;
    const Eigen::Matrix4d inv = jtj.completeOrthogonalDecomposition().pseudoInverse();
    Eigen::Matrix4d cov = inv;
    if (opt.weights == FitWeights::unit) {
        // Sandwich estimate with small-sample correction: counting noise grows with the signal,
        // so a single residual variance would understate errors on the peak parameters.
        const Eigen::MatrixXd jr = jac.array().colwise() * r.array();
        const Eigen::Matrix4d meat = jr.transpose() * jr;
        cov = inv * meat * inv * (static_cast<double>(n) / static_cast<double>(n - 4));
    }
    out.covariance = 0.5 * (cov + cov.transpose());
    out.residual_rms = std::sqrt(r.squaredNorm() / static_cast<double>(n));
    return out;
}

} // namespace oksim
