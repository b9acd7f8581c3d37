#pragma once
// Heatmap export as portable pixmaps. Row 0 of the matrix is the top image row.
//
// grayscale: binary PGM, 16 bit, linear from [min, max] to [0, 65535];
//            a constant matrix maps to 32768.
// diverging: binary PPM, 8 bit, blue (-m) .. white (0) .. red (+m), m = max |value|;
//            an all-zero matrix is white.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>

#include "oksim/grid.hpp"
#include "oksim/matrix_io.hpp"
#include "oksim/units.hpp"

namespace oksim {

enum class Colormap { grayscale, diverging };

inline const char* to_string(Colormap c) { return c == Colormap::grayscale ? "grayscale" : "diverging"; }

namespace detail {

inline void require_finite(const RealMatrix& m)
{
    if (m.size() == 0)
        throw DomainError("heatmap: empty matrix");
    if (!m.allFinite())
        throw DomainError("heatmap: matrix has non-finite values");
}

inline std::string pnm_header(const char* magic, Eigen::Index rows, Eigen::Index cols, int maxval)
{
    return std::string(magic) + "\n" + std::to_string(cols) + " " + std::to_string(rows) + "\n" +
           std::to_string(maxval) + "\n";
}

} // namespace detail

/// Grey levels of the grayscale map, row-major.
inline std::vector<std::uint16_t> gray_levels(const RealMatrix& m)
{
    detail::require_finite(m);
    const double lo = m.minCoeff();
    const double hi = m.maxCoeff();
    std::vector<std::uint16_t> out(static_cast<std::size_t>(m.size()));
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const double t = hi > lo ? (m(r, c) - lo) / (hi - lo) : 32768.0 / 65535.0;
            out[k++] = static_cast<std::uint16_t>(std::lround(std::clamp(t, 0.0, 1.0) * 65535.0));
        }
    return out;
}

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    bool operator==(const Rgb&) const = default;
};

inline Rgb diverging_color(double value, double magnitude)
{
    const double t = magnitude > 0.0 ? std::clamp(value / magnitude, -1.0, 1.0) : 0.0;
    auto q = [](double x) { return static_cast<std::uint8_t>(std::lround(255.0 * x)); };
    if (t < 0.0)
        return {q(1.0 + t), q(1.0 + t), 255};
    return {255, q(1.0 - t), q(1.0 - t)};
}

inline std::string encode_pgm(const RealMatrix& m)
{
    const auto levels = gray_levels(m);
    std::string out = detail::pnm_header("P5", m.rows(), m.cols(), 65535);
    out.reserve(out.size() + 2 * levels.size());
    for (auto v : levels) {
        out += static_cast<char>(v >> 8);
        out += static_cast<char>(v & 0xff);
    }
    return out;
}

inline std::string encode_ppm(const RealMatrix& m)
{
    detail::require_finite(m);
    const double mag = m.abs().maxCoeff();
    std::string out = detail::pnm_header("P6", m.rows(), m.cols(), 255);
    out.reserve(out.size() + 3 * static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const auto px = diverging_color(m(r, c), mag);
            out += static_cast<char>(px.r);
            out += static_cast<char>(px.g);
            out += static_cast<char>(px.b);
        }
    return out;
}

inline void export_heatmap(const RealMatrix& m, const std::filesystem::path& path, Colormap map)
{
    write_text(path, map == Colormap::grayscale ? encode_pgm(m) : encode_ppm(m));
}

} // namespace oksim
