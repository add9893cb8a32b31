#pragma once

#include <complex>
#include <cstddef>
#include <span>

namespace mcno {

// Real-to-complex FFT of fixed length backed by FFTW. Transforms are
// unnormalized: inverse(forward(u)) == n * u.
class RealFft {
public:
    explicit RealFft(std::size_t n);
    ~RealFft();
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;

    [[nodiscard]] std::size_t size() const { return n_; }
    [[nodiscard]] std::size_t spectrum_size() const { return n_ / 2 + 1; }

    void forward(std::span<const double> in, std::span<std::complex<double>> out);
    void inverse(std::span<const std::complex<double>> in, std::span<double> out);

private:
    std::size_t n_;
    double* real_;
    void* spectrum_;
    void* plan_forward_;
    void* plan_inverse_;
};

}  // namespace mcno
