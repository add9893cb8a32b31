#pragma once

#include "mcno/grid_function.hpp"

#include <cstddef>
#include <random>

namespace mcno {

// Covariance amplitude * (-Laplacian + shift * I)^(-exponent) on the unit torus.
struct CovarianceSpec {
    double amplitude = 625.0;
    double shift = 25.0;
    double exponent = 2.0;

    // Variance of the complex Fourier coefficient at integer wavenumber k.
    [[nodiscard]] double eigenvalue(double k) const;
    void validate() const;
};

// Samples a mean-zero real Gaussian field on `resolution` grid points.
//
// The field is u(x) = sum_k c_k exp(2 pi i k x) over -s/2 < k <= s/2 with
// c_0 = 0, c_{-k} = conj(c_k), E|c_k|^2 = eigenvalue(k). Real and imaginary
// parts of c_k for 0 < k < s/2 are independent N(0, eigenvalue/2); the
// Nyquist coefficient is real N(0, eigenvalue). Normals come from
// std::normal_distribution over the supplied mt19937_64, drawn in order of
// increasing k (real part first).
[[nodiscard]] GridFunction grf_sample(const CovarianceSpec& spec, std::size_t resolution,
                                      std::mt19937_64& rng);

}  // namespace mcno
