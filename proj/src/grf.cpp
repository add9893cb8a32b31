#include "mcno/grf.hpp"

#include "mcno/error.hpp"
#include "mcno/fft.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <string>

namespace mcno {

double CovarianceSpec::eigenvalue(double k) const {
    const double w = 2.0 * std::numbers::pi * k;
    return amplitude * std::pow(w * w + shift, -exponent);
}

void CovarianceSpec::validate() const {
    // A zero amplitude is allowed and yields the zero field.
    if (!(amplitude >= 0.0) || !(shift > 0.0) || !(exponent > 0.0)) {
        throw ConfigError("covariance spec needs amplitude >= 0, shift > 0, exponent > 0");
    }
}

GridFunction grf_sample(const CovarianceSpec& spec, std::size_t resolution, std::mt19937_64& rng) {
    spec.validate();
    if (resolution < 16 || !is_power_of_two(resolution)) {
        throw ConfigError("grf_sample: resolution must be a power of two >= 16, got " +
                          std::to_string(resolution));
    }
    const std::size_t half = resolution / 2;
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<std::complex<double>> coeff(half + 1, {0.0, 0.0});
    for (std::size_t k = 1; k < half; ++k) {
        const double sd = std::sqrt(spec.eigenvalue(static_cast<double>(k)) / 2.0);
        const double re = normal(rng);
        const double im = normal(rng);
        coeff[k] = {sd * re, sd * im};
    }
    coeff[half] = {std::sqrt(spec.eigenvalue(static_cast<double>(half))) * normal(rng), 0.0};

    RealFft fft(resolution);
    std::vector<double> values(resolution);
    fft.inverse(coeff, values);
    return GridFunction(std::move(values));
}

}  // namespace mcno
