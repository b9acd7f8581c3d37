#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "oksim/units.hpp"

namespace oksim {

/// Three-term Sellmeier model, n^2 = 1 + sum B_k l^2 / (l^2 - C_k^2) with l in micrometres.
struct SellmeierModel {
    std::string name;
    std::array<double, 3> b{};
    std::array<double, 3> c_um{};
    double min_nm = 0.0;
    double max_nm = 0.0;
};

struct ConstantIndexModel {
    double n0 = 1.0;
};

using IndexModel = std::variant<SellmeierModel, ConstantIndexModel>;

/// Malitson (1965) fused silica, valid 210 nm .. 3710 nm.
inline SellmeierModel fused_silica()
{
    return {"fused_silica",
            {0.6961663, 0.4079426, 0.8974794},
            {0.0684043, 0.1162414, 9.896161},
            210.0,
            3710.0};
}

inline std::string model_name(const IndexModel& model)
{
    if (const auto* s = std::get_if<SellmeierModel>(&model))
        return s->name;
    return "constant";
}

/// n and its first two wavelength derivatives, per nm and per nm^2.
struct IndexDerivatives {
    double n = 1.0;
    double dn = 0.0;
    double d2n = 0.0;
};

inline IndexDerivatives index_derivatives(const IndexModel& model, double wavelength_nm)
{
    if (!(wavelength_nm > 0.0))
        throw DomainError("wavelength must be positive");

    if (const auto* k = std::get_if<ConstantIndexModel>(&model))
        return {k->n0, 0.0, 0.0};

    const auto& s = std::get<SellmeierModel>(model);
    if (wavelength_nm < s.min_nm || wavelength_nm > s.max_nm)
        throw DomainError(s.name + ": wavelength " + std::to_string(wavelength_nm) + " nm outside validity range [" +
                          std::to_string(s.min_nm) + ", " + std::to_string(s.max_nm) + "] nm");

    const double l = wavelength_nm * 1e-3;
    const double l2 = l * l;
    double eps = 1.0, deps = 0.0, d2eps = 0.0; // n^2 and derivatives in um
    for (std::size_t k = 0; k < 3; ++k) {
        const double c2 = s.c_um[k] * s.c_um[k];
        const double den = l2 - c2;
        eps += s.b[k] * l2 / den;
        deps += -2.0 * s.b[k] * c2 * l / (den * den);
        d2eps += 2.0 * s.b[k] * c2 * (3.0 * l2 + c2) / (den * den * den);
    }
    const double n = std::sqrt(eps);
    const double dn = deps / (2.0 * n);
    const double d2n = (d2eps - 2.0 * dn * dn) / (2.0 * n);
    return {n, dn * 1e-3, d2n * 1e-6};
}

inline double refractive_index(const IndexModel& model, double wavelength_nm)
{
    return index_derivatives(model, wavelength_nm).n;
}

/// n_g = n - lambda dn/dlambda
inline double group_index(const IndexModel& model, double wavelength_nm)
{
    const auto d = index_derivatives(model, wavelength_nm);
    return d.n - wavelength_nm * d.dn;
}

/// beta_2 in fs^2/mm.
inline double gvd(const IndexModel& model, double wavelength_nm)
{
    const auto d = index_derivatives(model, wavelength_nm);
    const double c = units::c_nm_per_fs;
    const double beta2_fs2_per_nm = wavelength_nm * wavelength_nm * wavelength_nm / (units::two_pi * c * c) * d.d2n;
    return beta2_fs2_per_nm * 1e6;
}

struct DispersionOverride {
    double wavelength_nm = 0.0;
    std::optional<double> gvd_fs2_per_mm;
    std::optional<double> group_index;
};

struct FiberSegment {
    double length_mm = 0.0;
    IndexModel material = fused_silica();
    std::vector<DispersionOverride> overrides;

    // Overrides match within this distance of their nominal wavelength.
    static constexpr double override_tolerance_nm = 0.05;

    const DispersionOverride* find_override(double wavelength_nm) const
    {
        for (const auto& o : overrides)
            if (std::abs(o.wavelength_nm - wavelength_nm) <= override_tolerance_nm)
                return &o;
        return nullptr;
    }
};

inline void validate(const FiberSegment& segment)
{
    if (!(segment.length_mm >= 0.0) || !std::isfinite(segment.length_mm))
        throw DomainError("fiber length must be >= 0 mm");
}

inline double group_index(const FiberSegment& segment, double wavelength_nm)
{
    if (const auto* o = segment.find_override(wavelength_nm); o && o->group_index)
        return *o->group_index;
    return group_index(segment.material, wavelength_nm);
}

inline double gvd(const FiberSegment& segment, double wavelength_nm)
{
    if (const auto* o = segment.find_override(wavelength_nm); o && o->gvd_fs2_per_mm)
        return *o->gvd_fs2_per_mm;
    return gvd(segment.material, wavelength_nm);
}

/// Accumulated group-delay dispersion over the segment, fs^2.
inline double gdd(const FiberSegment& segment, double wavelength_nm)
{
    validate(segment);
    return gvd(segment, wavelength_nm) * segment.length_mm;
}

/// Signed group-delay difference photon minus pump over the segment, fs.
/// Positive when the photon lags the pump.
inline double walkoff(const FiberSegment& segment, double photon_nm, double pump_nm)
{
    validate(segment);
    const double dng = group_index(segment, photon_nm) - group_index(segment, pump_nm);
    return segment.length_mm * dng / units::c_mm_per_fs;
}

} // namespace oksim
