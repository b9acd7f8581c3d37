#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oksim/dispersion.hpp"
#include "oksim/units.hpp"

using namespace oksim;

namespace {

// Independent evaluation of the fused-silica Sellmeier index (lambda in nm).
long double silica_index(long double nm)
{
    const long double l2 = (nm / 1000.0L) * (nm / 1000.0L);
    const long double n2 = 1.0L + 0.6961663L * l2 / (l2 - 0.0684043L * 0.0684043L) +
                           0.4079426L * l2 / (l2 - 0.1162414L * 0.1162414L) +
                           0.8974794L * l2 / (l2 - 9.896161L * 9.896161L);
    return std::sqrt(n2);
}

double fd_group_index(long double nm, long double h)
{
    const long double d1 = (silica_index(nm + h) - silica_index(nm - h)) / (2 * h);
    return static_cast<double>(silica_index(nm) - nm * d1);
}

double fd_gvd(long double nm, long double h)
{
    const long double d2 = (silica_index(nm + h) - 2 * silica_index(nm) + silica_index(nm - h)) / (h * h);
    return static_cast<double>(nm * nm * nm / (units::two_pi * units::c_nm_per_fs * units::c_nm_per_fs) * d2 * 1e6L);
}

} // namespace

TEST(Units, WavelengthToOmega)
{
    EXPECT_NEAR(units::wavelength_to_omega(714.0), 2.63817, 1e-5);
    EXPECT_NEAR(units::wavelength_to_omega(847.0), 2.22391, 1e-5);
    EXPECT_DOUBLE_EQ(units::wavelength_to_omega(1000.0), units::two_pi * 0.299792458);
}

TEST(Units, NonPositiveWavelengthIsDomainError)
{
    EXPECT_THROW(units::wavelength_to_omega(0.0), DomainError);
    EXPECT_THROW(units::wavelength_to_omega(-5.0), DomainError);
    EXPECT_THROW(units::omega_to_wavelength(0.0), DomainError);
}

TEST(Units, RoundTripIsBijective)
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> lam(200.0, 2000.0);
    for (int k = 0; k < 10000; ++k) {
        const double l = lam(rng);
        EXPECT_NEAR(units::omega_to_wavelength(units::wavelength_to_omega(l)) / l, 1.0, 1e-12);
    }
}

TEST(Units, FwhmSigmaConstant)
{
    EXPECT_NEAR(units::fwhm_per_sigma, 2.354820045, 1e-9);
    EXPECT_DOUBLE_EQ(units::sigma_to_fwhm(units::fwhm_to_sigma(148.0)), 148.0);
}

TEST(Units, EnergyConservationOfRoundedWavelengths)
{
    const double mismatch =
        units::wavelength_to_omega(387.5) - units::wavelength_to_omega(714.0) - units::wavelength_to_omega(847.0);
    EXPECT_LT(std::abs(mismatch), 2e-3);
    // mpmath: -0.00104091917958
    EXPECT_NEAR(mismatch, -0.00104091917958, 1e-11);
}

TEST(Dispersion, FusedSilicaGoldenValues)
{
    // Frozen from a 30-digit mpmath evaluation of the Sellmeier form with numeric derivatives.
    const IndexModel silica = fused_silica();
    EXPECT_NEAR(refractive_index(silica, 714.0), 1.4549805474053033, 1e-13);
    EXPECT_NEAR(group_index(silica, 714.0), 1.4705400466293876, 1e-12);
    EXPECT_NEAR(group_index(silica, 775.0), 1.4679917170041430, 1e-12);
    EXPECT_NEAR(group_index(silica, 847.0), 1.4658000743114054, 1e-12);
    EXPECT_NEAR(gvd(silica, 714.0), 43.602664938746699, 1e-9);
    EXPECT_NEAR(gvd(silica, 847.0), 32.458876179949482, 1e-9);
    EXPECT_NEAR(gvd(silica, 1600.0), -34.073866060593854, 1e-9);
}

TEST(Dispersion, GroupIndexMonotoneAcrossPhotonWavelengths)
{
    EXPECT_GT(group_index(fused_silica(), 714.0), group_index(fused_silica(), 847.0));
}

TEST(Dispersion, AnalyticDerivativesMatchFiniteDifferences)
{
    const IndexModel silica = fused_silica();
    for (double nm = 400.0; nm <= 1600.0; nm += 25.0) {
        EXPECT_NEAR(group_index(silica, nm) / fd_group_index(nm, 1e-3), 1.0, 1e-6) << nm;
        // Second differences lose digits at h = 1e-3 nm; a wider step keeps truncation
        // and rounding both well under the tolerance.
        EXPECT_NEAR(gvd(silica, nm), fd_gvd(nm, 0.1), 1e-6 * std::max(1.0, std::abs(gvd(silica, nm)))) << nm;
    }
}

TEST(Dispersion, ConstantIndexModel)
{
    const IndexModel flat = ConstantIndexModel{1.5};
    EXPECT_DOUBLE_EQ(group_index(flat, 714.0), 1.5);
    EXPECT_DOUBLE_EQ(gvd(flat, 714.0), 0.0);
}

TEST(Dispersion, OutsideValidityRangeIsDomainError)
{
    EXPECT_THROW(group_index(fused_silica(), 150.0), DomainError);
    EXPECT_THROW(gvd(fused_silica(), 5000.0), DomainError);
}

TEST(Dispersion, TransportFiberOverrides)
{
    FiberSegment signal{500.0, fused_silica(), {{714.0, 10910.0 / 500.0, std::nullopt}}};
    FiberSegment idler{21200.0, fused_silica(), {{847.0, 344064.0 / 21200.0, std::nullopt}}};
    EXPECT_NEAR(gvd(signal, 714.0), 21.82, 1e-12);
    EXPECT_NEAR(gvd(idler, 847.0), 16.229, 1e-3);
    EXPECT_NEAR(gdd(signal, 714.0), 10910.0, 1e-9);
    EXPECT_NEAR(gdd(idler, 847.0), 344064.0, 1e-9);
    // Away from the override wavelength the material model applies.
    EXPECT_DOUBLE_EQ(gvd(signal, 800.0), gvd(fused_silica(), 800.0));
}

TEST(Dispersion, WalkoffGoldenAndLimits)
{
    FiberSegment gate{35.0, fused_silica(), {}};
    // mpmath oracle: 35 mm * (n_g(714) - n_g(775)) / c
    EXPECT_NEAR(walkoff(gate, 714.0, 775.0), 297.51094299896879, 1e-6);
    EXPECT_NEAR(walkoff(gate, 847.0, 775.0), -255.86865913023134, 1e-6);
    EXPECT_EQ(walkoff(FiberSegment{0.0, fused_silica(), {}}, 714.0, 775.0), 0.0);
    EXPECT_EQ(walkoff(gate, 775.0, 775.0), 0.0);
    EXPECT_THROW(walkoff(FiberSegment{-1.0, fused_silica(), {}}, 714.0, 775.0), DomainError);
}

TEST(Dispersion, WalkoffIsLinearInLength)
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> len(0.0, 1000.0), lam(450.0, 1500.0);
    for (int k = 0; k < 1000; ++k) {
        const double l = len(rng), a = lam(rng), b = lam(rng);
        EXPECT_EQ(walkoff(FiberSegment{2 * l, fused_silica(), {}}, a, b),
                  2 * walkoff(FiberSegment{l, fused_silica(), {}}, a, b));
    }
}

TEST(Dispersion, GroupIndexOverrideFeedsWalkoff)
{
    FiberSegment gate{10.0, ConstantIndexModel{1.45}, {{714.0, std::nullopt, 1.46}}};
    EXPECT_NEAR(walkoff(gate, 714.0, 775.0), 10.0 * 0.01 / units::c_mm_per_fs, 1e-9);
}
