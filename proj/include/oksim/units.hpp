#pragma once
// Unit conventions used throughout oksim:
//   time            fs
//   angular freq.   rad/fs
//   wavelength      nm (vacuum)
//   length          mm
//   GVD             fs^2/mm, accumulated GDD in fs^2

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace oksim {

class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

namespace units {

inline constexpr double c_nm_per_fs = 299.792458;
inline constexpr double c_mm_per_fs = c_nm_per_fs * 1e-6;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// FWHM of a Gaussian divided by its standard deviation, 2*sqrt(2 ln 2).
inline const double fwhm_per_sigma = 2.0 * std::sqrt(2.0 * std::numbers::ln2);

inline double fwhm_to_sigma(double fwhm) { return fwhm / fwhm_per_sigma; }
inline double sigma_to_fwhm(double sigma) { return sigma * fwhm_per_sigma; }

inline double wavelength_to_omega(double wavelength_nm)
{
    if (!(wavelength_nm > 0.0) || !std::isfinite(wavelength_nm))
        throw DomainError("wavelength must be positive, got " + std::to_string(wavelength_nm) + " nm");
    return two_pi * c_nm_per_fs / wavelength_nm;
}

inline double omega_to_wavelength(double omega_rad_per_fs)
{
    if (!(omega_rad_per_fs > 0.0) || !std::isfinite(omega_rad_per_fs))
        throw DomainError("angular frequency must be positive, got " + std::to_string(omega_rad_per_fs));
    return two_pi * c_nm_per_fs / omega_rad_per_fs;
}

/// Converts a wavelength FWHM around `center_nm` to an angular-frequency FWHM
/// (first-order, d omega = 2 pi c d lambda / lambda^2).
inline double bandwidth_nm_to_omega(double fwhm_nm, double center_nm)
{
    if (!(fwhm_nm > 0.0))
        throw DomainError("bandwidth must be positive, got " + std::to_string(fwhm_nm) + " nm");
    if (!(center_nm > 0.0))
        throw DomainError("center wavelength must be positive");
    return two_pi * c_nm_per_fs * fwhm_nm / (center_nm * center_nm);
}

/// Intensity standard deviation (rad/fs) of a filter given as a wavelength FWHM.
inline double filter_sigma_omega(double fwhm_nm, double center_nm)
{
    return fwhm_to_sigma(bandwidth_nm_to_omega(fwhm_nm, center_nm));
}

} // namespace units
} // namespace oksim
