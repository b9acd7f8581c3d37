#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "oksim/scan.hpp"

using namespace oksim;

namespace {

Map2D gaussian_map(const AxisGrid& s, const AxisGrid& i, double ms, double mi, double ss, double si, double rho)
{
    Map2D m{s, i, RealMatrix(static_cast<Eigen::Index>(s.count), static_cast<Eigen::Index>(i.count))};
    for (std::size_t r = 0; r < s.count; ++r)
        for (std::size_t c = 0; c < i.count; ++c) {
            const double a = (s[r] - ms) / ss, b = (i[c] - mi) / si;
            m.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                std::exp(-(a * a - 2 * rho * a * b + b * b) / (2 * (1 - rho * rho)));
        }
    m.values /= m.integral();
    return m;
}

GateProfile spike_gate(double step)
{
    GateProfile g{AxisGrid{0.0, step, 16}, std::vector<double>(16, 0.0), 1.0};
    g.values[8] = 1.0;
    return g;
}

GateProfile reference_gate(double photon_nm, double step)
{
    GateConfig c;
    c.photon_nm = photon_nm;
    return gate_profile(c, symmetric_axis(required_gate_half_span(c), step));
}

double pearson(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b)
{
    const Eigen::ArrayXd x = a - a.mean(), y = b - b.mean();
    return (x * y).sum() / std::sqrt((x * x).sum() * (y * y).sum());
}

} // namespace

TEST(Scan, FftMatchesDirectSum)
{
    const AxisGrid ax{0.0, 20.0, 64};
    const auto jti = gaussian_map(ax, ax, 40.0, -30.0, 120.0, 90.0, 0.6);
    GateConfig gc;
    gc.fiber.length_mm = 10.0;
    gc.pump_fwhm_fs = 60.0;
    const auto gs = gate_profile(gc, symmetric_axis(required_gate_half_span(gc), 20.0));
    gc.photon_nm = 847.0;
    const auto gi = gate_profile(gc, symmetric_axis(required_gate_half_span(gc), 20.0));
    const auto fft = expected_coincidence_map(jti, gs, gi, 1e5, CorrelationMethod::fft);
    const auto direct = expected_coincidence_map(jti, gs, gi, 1e5, CorrelationMethod::direct);
    EXPECT_LT((fft.values - direct.values).abs().maxCoeff() / direct.values.abs().maxCoeff(), 1e-9);
}

TEST(Scan, KernelMassConserved)
{
    for (double step : {20.0, 10.0, 5.0}) {
        const auto ax = symmetric_axis(4000.0, step);
        const auto jti = gaussian_map(ax, ax, 0.0, 0.0, 300.0, 250.0, 0.8);
        const auto gs = reference_gate(714.0, step);
        const auto gi = reference_gate(847.0, step);
        const double area_s = std::accumulate(gs.values.begin(), gs.values.end(), 0.0) * step;
        const double area_i = std::accumulate(gi.values.begin(), gi.values.end(), 0.0) * step;
        const auto c = expected_coincidence_map(jti, gs, gi, 4e5);
        EXPECT_NEAR(c.integral() / (4e5 * area_s * area_i * jti.integral()), 1.0, 1e-6) << step;
    }
}

TEST(Scan, DeltaGatesReturnTheJti)
{
    const AxisGrid ax{0.0, 10.0, 64};
    const auto jti = gaussian_map(ax, ax, 15.0, 5.0, 60.0, 80.0, 0.3);
    const auto c = expected_coincidence_map(jti, spike_gate(10.0), spike_gate(10.0), 2.0);
    EXPECT_LT((c.values - 2.0 * jti.cell() * jti.values).abs().maxCoeff(), 1e-12 * jti.values.maxCoeff());
}

TEST(Scan, DeltaJtiReturnsReflectedGates)
{
    const AxisGrid ax{0.0, 10.0, 128};
    Map2D jti{ax, ax, RealMatrix::Zero(128, 128)};
    jti.values(64, 64) = 1.0;
    const auto gs = reference_gate(714.0, 10.0);
    const auto gi = reference_gate(847.0, 10.0);
    // Shift the idler gate so that a reflection error would show.
    GateProfile gi_shift = gi;
    gi_shift.axis.center = 100.0;
    const auto c = expected_coincidence_map(jti, gs, gi_shift, 1.0);
    double worst = 0.0;
    for (std::size_t r = 0; r < 128; ++r)
        for (std::size_t k = 0; k < 128; ++k) {
            const double expect = jti.cell() * gs.at(-ax[r]) * gi_shift.at(-ax[k]);
            worst = std::max(worst, std::abs(c.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) - expect));
        }
    EXPECT_LT(worst, 1e-12);
}

TEST(Scan, GateOnCoarserGridIsResampled)
{
    const AxisGrid ax{0.0, 5.0, 128};
    const auto jti = gaussian_map(ax, ax, 0.0, 0.0, 100.0, 100.0, 0.0);
    const auto fine = expected_coincidence_map(jti, reference_gate(714.0, 5.0), reference_gate(847.0, 5.0), 1.0);
    const auto coarse = expected_coincidence_map(jti, reference_gate(714.0, 10.0), reference_gate(847.0, 10.0), 1.0);
    EXPECT_LT((fine.values - coarse.values).abs().maxCoeff() / fine.values.maxCoeff(), 2e-3);
    EXPECT_THROW(expected_coincidence_map(jti, reference_gate(714.0, 40.0), reference_gate(847.0, 5.0), 1.0), GridError);
}

TEST(Scan, SinglesFloorsAndStripes)
{
    const AxisGrid ax{0.0, 10.0, 256};
    const auto jti = gaussian_map(ax, ax, 0.0, 0.0, 300.0, 300.0, 0.9);
    auto zero_s = reference_gate(714.0, 10.0);
    auto zero_i = reference_gate(847.0, 10.0);
    std::fill(zero_s.values.begin(), zero_s.values.end(), 0.0);
    std::fill(zero_i.values.begin(), zero_i.values.end(), 0.0);
    const AxisGrid delays{0.0, 1500.0 / 64.0, 64};
    const auto floors = singles_maps(jti, zero_s, zero_i, 3.6e6, 2.6e6, 2e5, 4.8e5, delays, delays);
    for (std::size_t k = 0; k < 64; ++k) {
        EXPECT_DOUBLE_EQ(floors.s[k], 2e5);
        EXPECT_DOUBLE_EQ(floors.i[k] / floors.s[k], 2.4);
    }

    const auto gated = singles_maps(jti, reference_gate(714.0, 10.0), reference_gate(847.0, 10.0), 3.6e6 * 0.0625,
                                    2.6e6 * 0.0625, 2e5, 4.8e5, delays, delays);
    EXPECT_GT(gated.s[32], 2e5);
    const RealMatrix acc = accidental_map(gated.s, gated.i, 80e6);
    const Eigen::ArrayXd singles_i = Eigen::Map<const Eigen::ArrayXd>(gated.i.data(), 64);
    for (Eigen::Index r = 0; r < 64; ++r)
        EXPECT_NEAR(pearson(acc.row(r).transpose(), singles_i), 1.0, 1e-12);
}

TEST(Scan, FlatMarginalGivesConstantSingles)
{
    const AxisGrid ax{0.0, 10.0, 512};
    std::vector<double> flat(512, 1.0 / (512 * 10.0));
    const AxisGrid delays{0.0, 20.0, 32};
    const auto s = singles_rate(flat, ax, reference_gate(714.0, 10.0), 1e6, 0.0, delays);
    for (double v : s)
        EXPECT_NEAR(v / s.front(), 1.0, 1e-9);
}

TEST(Scan, AccidentalRateFromSourceSingles)
{
    const RealMatrix a = accidental_map({3.6e6}, {2.6e6}, 80e6);
    EXPECT_DOUBLE_EQ(a(0, 0), 1.17e5);
    const RealMatrix floor = accidental_map(std::vector<double>(4, 0.0), std::vector<double>(3, 5.0), 80e6, 7.0);
    EXPECT_TRUE((floor == 7.0).all());
    EXPECT_THROW(accidental_map({1.0}, {1.0}, 0.0), DomainError);
}

TEST(Scan, DefaultConfigurationPeakWellBelowSourceRate)
{
    SourceConfig src;
    src.chirp_s_fs2 = 10910.0;
    src.chirp_i_fs2 = 344064.0;
    src.compressor_fs2 = -354974.0;
    GridPlanOptions opt;
    opt.min_time_half_span_fs = 1500.0 + 1400.0;
    const auto jti = intensity_map(to_temporal(chirped_jsa(src, plan_joint_grid(src, opt))));
    ScanConfig sc;
    const auto m = model_scan(jti, reference_gate(714.0, jti.axis_s.step), reference_gate(847.0, jti.axis_i.step), sc);
    EXPECT_GT(m.truth.maxCoeff(), 0.0);
    EXPECT_LT(m.truth.maxCoeff(), 1e-3 * sc.pair_rate);
    EXPECT_NEAR(m.dwell_s * m.truth.maxCoeff(), sc.target_peak_counts, 1e-6 * sc.target_peak_counts);
    EXPECT_GE(sc.target_peak_counts, 200.0);
}

TEST(Scan, SamplingIsDeterministicAcrossThreads)
{
    const RealMatrix truth = RealMatrix::Constant(16, 16, 3.0);
    const RealMatrix acc = RealMatrix::Constant(16, 16, 50.0);
    const std::vector<double> s(16, 2e5), i(16, 4.8e5);
    const AxisGrid ax{0.0, 10.0, 16};
    const auto one = sample_scan(truth, acc, s, i, ax, ax, 2.0, 80e6, 42, {1});
    const auto many = sample_scan(truth, acc, s, i, ax, ax, 2.0, 80e6, 42, {7});
    EXPECT_TRUE((one.raw == many.raw).all());
    EXPECT_TRUE((one.background_estimate == many.background_estimate).all());
    EXPECT_TRUE((one.singles_s == many.singles_s).all());
    const auto other = sample_scan(truth, acc, s, i, ax, ax, 2.0, 80e6, 43, {1});
    EXPECT_FALSE((one.raw == other.raw).all());
    EXPECT_THROW(sample_scan(truth, acc, s, i, ax, ax, 0.0, 80e6, 1), DomainError);
}

TEST(Scan, LongDwellApproachesMeanRates)
{
    const AxisGrid ax{0.0, 10.0, 32};
    RealMatrix truth(32, 32), acc(32, 32);
    for (Eigen::Index r = 0; r < 32; ++r)
        for (Eigen::Index c = 0; c < 32; ++c) {
            truth(r, c) = 5.0 + r;
            acc(r, c) = 100.0 + 3.0 * c;
        }
    const double dwell = 1e4;
    const auto res = sample_scan(truth, acc, std::vector<double>(32, 1.0), std::vector<double>(32, 1.0), ax, ax, dwell,
                                 80e6, 9);
    int inside = 0;
    for (Eigen::Index r = 0; r < 32; ++r)
        for (Eigen::Index c = 0; c < 32; ++c) {
            const double mean = (truth(r, c) + acc(r, c)) * dwell;
            inside += std::abs(static_cast<double>(res.raw(r, c)) - mean) <= 3.0 * std::sqrt(mean);
        }
    EXPECT_GE(inside, static_cast<int>(0.99 * 32 * 32));
}

TEST(Scan, SubtractedCountsUnbiasedOverSeeds)
{
    const AxisGrid ax{0.0, 10.0, 8};
    RealMatrix truth(8, 8), acc(8, 8);
    for (Eigen::Index r = 0; r < 8; ++r)
        for (Eigen::Index c = 0; c < 8; ++c) {
            truth(r, c) = (r + c) % 3;
            acc(r, c) = 20.0 + r;
        }
    const int seeds = 400;
    const double dwell = 3.0;
    RealMatrix sum = RealMatrix::Zero(8, 8);
    for (int s = 0; s < seeds; ++s) {
        const auto res = sample_scan(truth, acc, std::vector<double>(8, 1.0), std::vector<double>(8, 1.0), ax, ax, dwell,
                                     80e6, static_cast<std::uint64_t>(s));
        sum += (res.raw - res.background_estimate).cast<double>();
    }
    for (Eigen::Index r = 0; r < 8; ++r)
        for (Eigen::Index c = 0; c < 8; ++c) {
            const double mean = sum(r, c) / seeds;
            const double se = std::sqrt((2 * acc(r, c) + truth(r, c)) * dwell / seeds);
            EXPECT_LE(std::abs(mean - truth(r, c) * dwell), 4.0 * se) << r << "," << c;
        }
}
