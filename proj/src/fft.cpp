#include "mcno/fft.hpp"

#include "mcno/error.hpp"

#include <fftw3.h>

#include <algorithm>
#include <mutex>
#include <string>

namespace mcno {

namespace {
// The FFTW planner is not re-entrant.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

RealFft::RealFft(std::size_t n) : n_(n) {
    if (n < 2) throw ConfigError("FFT length must be at least 2, got " + std::to_string(n));
    real_ = fftw_alloc_real(n);
    auto* spec = fftw_alloc_complex(n / 2 + 1);
    spectrum_ = spec;
    std::lock_guard lock(planner_mutex());
    plan_forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), real_, spec, FFTW_ESTIMATE);
    plan_inverse_ = fftw_plan_dft_c2r_1d(static_cast<int>(n), spec, real_, FFTW_ESTIMATE);
}

RealFft::~RealFft() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(static_cast<fftw_plan>(plan_inverse_));
    fftw_destroy_plan(static_cast<fftw_plan>(plan_forward_));
    fftw_free(static_cast<fftw_complex*>(spectrum_));
    fftw_free(real_);
}

void RealFft::forward(std::span<const double> in, std::span<std::complex<double>> out) {
    if (in.size() != n_ || out.size() != spectrum_size()) throw ShapeError("RealFft::forward size");
    std::copy(in.begin(), in.end(), real_);
    fftw_execute(static_cast<fftw_plan>(plan_forward_));
    const auto* spec = static_cast<const std::complex<double>*>(spectrum_);
    std::copy(spec, spec + spectrum_size(), out.begin());
}

void RealFft::inverse(std::span<const std::complex<double>> in, std::span<double> out) {
    if (in.size() != spectrum_size() || out.size() != n_) throw ShapeError("RealFft::inverse size");
    auto* spec = static_cast<std::complex<double>*>(spectrum_);
    std::copy(in.begin(), in.end(), spec);
    fftw_execute(static_cast<fftw_plan>(plan_inverse_));
    std::copy(real_, real_ + n_, out.begin());
}

}  // namespace mcno
