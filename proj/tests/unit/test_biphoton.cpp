#include <cmath>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "oksim/biphoton.hpp"

using namespace oksim;

namespace {

SourceConfig reference_source()
{
    return SourceConfig{};
}

JointGrid small_grid(const SourceConfig& c)
{
    GridPlanOptions opt;
    opt.max_time_step_fs = 30.0;
    opt.min_count = 256;
    return plan_joint_grid(c, opt);
}

// Closed-form Gaussian oracle. |f(w)|^2 = exp(-1/2 w^T M w); the transform-limited
// temporal intensity covariance is M/4 and quadratic phases add Phi M^-1 Phi.
struct GaussianOracle {
    Eigen::Matrix2d spectral_cov;
    Eigen::Matrix2d temporal_cov;

    GaussianOracle(const SourceConfig& c)
    {
        const auto bw = bandwidths(c);
        const double p = 1.0 / (bw.sum * bw.sum);
        Eigen::Matrix2d m;
        m << p + 1.0 / (bw.signal * bw.signal), p, p, p + 1.0 / (bw.idler * bw.idler);
        spectral_cov = m.inverse();
        Eigen::Matrix2d phi = Eigen::Vector2d(c.chirp_s_fs2, c.total_idler_phase_fs2()).asDiagonal();
        temporal_cov = m / 4.0 + phi * spectral_cov * phi;
    }
    static double std_difference(const Eigen::Matrix2d& s) { return std::sqrt(s(0, 0) + s(1, 1) - 2 * s(0, 1)); }
    static double std_sum(const Eigen::Matrix2d& s) { return std::sqrt(s(0, 0) + s(1, 1) + 2 * s(0, 1)); }
};

} // namespace

TEST(Biphoton, BandwidthsFromFilters)
{
    const auto bw = bandwidths(reference_source());
    EXPECT_NEAR(bw.signal, 0.009414, 1e-6);
    EXPECT_NEAR(bw.sum, 5.327e-4, 5e-8);
    EXPECT_NEAR(bw.idler, 0.00669001785702, 1e-12);
}

TEST(Biphoton, NonPositiveBandwidthRejected)
{
    auto c = reference_source();
    c.pump_filter_fwhm_nm = 0.0;
    EXPECT_THROW(bandwidths(c), DomainError);
}

TEST(Biphoton, GridCoverageError)
{
    const auto c = reference_source();
    const AxisGrid narrow{units::wavelength_to_omega(714.0), 1e-5, 256};
    const AxisGrid ok{units::wavelength_to_omega(847.0), 4e-4, 256};
    EXPECT_THROW(build_jsa(c, narrow, ok), GridError);
}

TEST(Biphoton, JsaNormalisedAndAnticorrelated)
{
    const auto c = reference_source();
    const auto g = small_grid(c);
    const auto f = build_jsa(c, g.spectral_s, g.spectral_i);
    EXPECT_NEAR(f.norm(), 1.0, 1e-9);
    const auto m = rotated_stats(f);
    EXPECT_LT(m.cov, 0.0);
    // Sum-frequency spread is pinned by the narrow pump factor.
    EXPECT_NEAR(m.std_sum() / bandwidths(c).sum, 1.0, 5e-3);
    const GaussianOracle oracle(c);
    EXPECT_NEAR(m.std_sum(), GaussianOracle::std_sum(oracle.spectral_cov), 1e-3 * m.std_sum());
}

TEST(Biphoton, QuadraticPhaseIsPhaseOnly)
{
    const auto c = reference_source();
    const auto g = small_grid(c);
    const auto f = build_jsa(c, g.spectral_s, g.spectral_i);
    const auto same = apply_quadratic_phase(f, 0.0, 0.0);
    EXPECT_EQ((same.values - f.values).abs().maxCoeff(), 0.0);

    const auto chirped = apply_quadratic_phase(f, 10910.0, 344064.0);
    const RealMatrix before = intensity(f);
    EXPECT_LT((intensity(chirped) - before).abs().maxCoeff() / before.maxCoeff(), 1e-12);
    EXPECT_NEAR(chirped.norm(), 1.0, 1e-9);
}

TEST(Biphoton, PhaseOnTemporalStateIsDomainError)
{
    const auto c = reference_source();
    const auto g = small_grid(c);
    const auto t = to_temporal(build_jsa(c, g.spectral_s, g.spectral_i));
    EXPECT_THROW(apply_quadratic_phase(t, 1.0, 1.0), DomainError);
    EXPECT_THROW(to_temporal(t), DomainError);
}

TEST(Biphoton, NonPowerOfTwoGridRejectedByTransform)
{
    const auto c = reference_source();
    const AxisGrid s{units::wavelength_to_omega(714.0), 4e-4, 300};
    const AxisGrid i{units::wavelength_to_omega(847.0), 4e-4, 300};
    const auto f = build_jsa(c, s, i);
    EXPECT_THROW(to_temporal(f), GridError);
}

TEST(Biphoton, ParsevalAndRoundTrip)
{
    const auto c = reference_source();
    const auto g = small_grid(c);
    const auto f = apply_quadratic_phase(build_jsa(c, g.spectral_s, g.spectral_i), 10910.0, -10910.0);
    const auto t = to_temporal(f);
    EXPECT_EQ(t.domain, Domain::temporal);
    EXPECT_NEAR(t.norm(), 1.0, 1e-9);
    const auto back = to_spectral(t);
    const double rms = std::sqrt((back.values - f.values).abs2().mean());
    EXPECT_LT(rms, 1e-9);
}

TEST(Biphoton, IntrinsicDifferenceWidthMatchesClosedForm)
{
    const auto c = reference_source();
    const auto g = small_grid(c);
    const auto t = to_temporal(build_jsa(c, g.spectral_s, g.spectral_i));
    const auto m = rotated_stats(t);
    const GaussianOracle oracle(c);
    const double expected = GaussianOracle::std_difference(oracle.temporal_cov);
    EXPECT_NEAR(expected, 91.69, 0.05);
    EXPECT_NEAR(m.std_difference() / expected, 1.0, 1e-3);
    // Marginals are stretched by the long pump coherence time, times are positively correlated.
    EXPECT_NEAR(m.std_s() / std::sqrt(oracle.temporal_cov(0, 0)), 1.0, 1e-3);
    EXPECT_GT(m.cov, 0.0);
}

TEST(Biphoton, MarginalsIntegrateToOne)
{
    const auto c = reference_source();
    const auto g = small_grid(c);
    const auto t = to_temporal(build_jsa(c, g.spectral_s, g.spectral_i));
    const auto [ms, mi] = marginals(t);
    double ss = 0, si = 0;
    for (double v : ms)
        ss += v * t.axis_s.step;
    for (double v : mi)
        si += v * t.axis_i.step;
    EXPECT_NEAR(ss, 1.0, 1e-9);
    EXPECT_NEAR(si, 1.0, 1e-9);
}

TEST(Biphoton, SeparableStateVariancesAdd)
{
    JointAmplitude f;
    f.axis_s = {0.0, 5.0, 128};
    f.axis_i = {0.0, 5.0, 128};
    f.values.resize(128, 128);
    for (std::size_t r = 0; r < 128; ++r)
        for (std::size_t k = 0; k < 128; ++k)
            f.values(r, k) = std::exp(-std::pow(f.axis_s[r] - 10.0, 2) / (4 * 40.0 * 40.0) -
                                      std::pow(f.axis_i[k] + 5.0, 2) / (4 * 30.0 * 30.0));
    normalize(f);
    const auto m = rotated_stats(f);
    EXPECT_NEAR(m.cov, 0.0, 1e-9);
    EXPECT_NEAR(m.std_sum() * m.std_sum(), m.var_s + m.var_i, 1e-9);
    EXPECT_NEAR(m.std_s(), 40.0, 1e-6);
}

TEST(Biphoton, NonLocalDispersionCancellation)
{
    auto c = reference_source();
    const auto g0 = small_grid(c);
    const auto m0 = rotated_stats(to_temporal(build_jsa(c, g0.spectral_s, g0.spectral_i)));

    c.chirp_s_fs2 = 10910.0;
    c.chirp_i_fs2 = 344064.0;
    c.compressor_fs2 = -(344064.0 + 10910.0);
    const auto gc = small_grid(c);
    const auto mc = rotated_stats(to_temporal(chirped_jsa(c, gc)));
    EXPECT_NEAR(mc.std_difference() / m0.std_difference(), 1.0, 0.05);
    EXPECT_GT(mc.std_s(), m0.std_s() * 1.0001);
    EXPECT_NEAR(mc.std_difference(), GaussianOracle::std_difference(GaussianOracle(c).temporal_cov),
                1e-3 * mc.std_difference());

    c.compressor_fs2.reset();
    const auto gu = small_grid(c);
    const auto mu = rotated_stats(to_temporal(chirped_jsa(c, gu)));
    EXPECT_GT(mu.std_difference(), 5.0 * m0.std_difference());
    EXPECT_NEAR(mu.std_difference(), GaussianOracle::std_difference(GaussianOracle(c).temporal_cov),
                1e-3 * mu.std_difference());
}

TEST(Pulse, FourierPairTransformLimited)
{
    const double sigma = bandwidths(reference_source()).signal;
    const AxisGrid axis{units::wavelength_to_omega(714.0), 12.0 * sigma / 1024.0 * 4.0, 1024};
    const auto t = to_temporal(gaussian_pulse(axis, sigma));
    EXPECT_NEAR(t.norm(), 1.0, 1e-9);
    EXPECT_NEAR(t.std_width() * sigma, 0.5, 0.005);
    EXPECT_NEAR(t.std_width(), 53.1, 0.05);
}

TEST(Pulse, ChirpBroadeningMatchesClosedForm)
{
    const auto bw = bandwidths(reference_source());
    for (auto [sigma, phi] : {std::pair{bw.signal, 10910.0}, std::pair{bw.idler, 344064.0}}) {
        const double expected = chirped_gaussian_width(sigma, phi);
        // Span the chirped pulse +-8 widths in time, +-8 sigma in frequency.
        const double dw = std::numbers::pi / (8.0 * expected);
        const auto n = next_power_of_two(static_cast<std::size_t>(16.0 * sigma / dw));
        const AxisGrid axis{1.0, dw, std::max<std::size_t>(n, 1024)};
        const auto t = to_temporal(apply_quadratic_phase(gaussian_pulse(axis, sigma), phi));
        EXPECT_NEAR(t.std_width() / expected, 1.0, 0.01) << phi;
    }
    EXPECT_NEAR(chirped_gaussian_width(bw.idler, 344064.0), 2302.4, 1.0);
}
