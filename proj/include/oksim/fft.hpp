#pragma once
// Thin RAII layer over FFTW. Planning goes through a process-wide mutex since
// the FFTW planner is not re-entrant; execution is thread-safe.

#include <complex>
#include <memory>
#include <mutex>
#include <vector>

#include <fftw3.h>

#include "oksim/grid.hpp"

namespace oksim::fft {

enum class Direction { forward = FFTW_FORWARD, backward = FFTW_BACKWARD };

namespace detail {

inline std::mutex& planner_mutex()
{
    static std::mutex m;
    return m;
}

struct PlanDeleter {
    void operator()(fftw_plan_s* p) const
    {
        std::scoped_lock lock(planner_mutex());
        fftw_destroy_plan(p);
    }
};

using Plan = std::unique_ptr<fftw_plan_s, PlanDeleter>;

inline fftw_complex* as_fftw(std::complex<double>* p) { return reinterpret_cast<fftw_complex*>(p); }

} // namespace detail

/// In-place unnormalized DFT of a contiguous length-n buffer.
inline void transform_1d(std::complex<double>* data, int n, Direction dir)
{
    detail::Plan plan;
    {
        std::scoped_lock lock(detail::planner_mutex());
        plan.reset(fftw_plan_dft_1d(n, detail::as_fftw(data), detail::as_fftw(data), static_cast<int>(dir),
                                    FFTW_ESTIMATE));
    }
    fftw_execute(plan.get());
}

/// In-place unnormalized DFT of a row-major rows x cols buffer.
inline void transform_2d(std::complex<double>* data, int rows, int cols, Direction dir)
{
    detail::Plan plan;
    {
        std::scoped_lock lock(detail::planner_mutex());
        plan.reset(fftw_plan_dft_2d(rows, cols, detail::as_fftw(data), detail::as_fftw(data), static_cast<int>(dir),
                                    FFTW_ESTIMATE));
    }
    fftw_execute(plan.get());
}

/// Linear (non-circular) convolution of two real sequences via zero-padded FFT.
inline std::vector<double> convolve(const std::vector<double>& a, const std::vector<double>& b)
{
    if (a.empty() || b.empty())
        return {};
    const std::size_t out_len = a.size() + b.size() - 1;
    const std::size_t n = next_power_of_two(out_len);
    std::vector<std::complex<double>> fa(n), fb(n);
    for (std::size_t k = 0; k < a.size(); ++k)
        fa[k] = a[k];
    for (std::size_t k = 0; k < b.size(); ++k)
        fb[k] = b[k];
    transform_1d(fa.data(), static_cast<int>(n), Direction::forward);
    transform_1d(fb.data(), static_cast<int>(n), Direction::forward);
    for (std::size_t k = 0; k < n; ++k)
        fa[k] *= fb[k];
    transform_1d(fa.data(), static_cast<int>(n), Direction::backward);
    std::vector<double> out(out_len);
    const double scale = 1.0 / static_cast<double>(n);
    for (std::size_t k = 0; k < out_len; ++k)
        out[k] = fa[k].real() * scale;
    return out;
}

} // namespace oksim::fft
