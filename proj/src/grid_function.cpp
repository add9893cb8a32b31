#include "mcno/grid_function.hpp"

#include "mcno/error.hpp"

#include <cmath>
#include <string>

namespace mcno {

GridFunction::GridFunction(std::vector<double> values) : values_(std::move(values)) {}

GridFunction GridFunction::constant(std::size_t resolution, double value) {
    return GridFunction(std::vector<double>(resolution, value));
}

double GridFunction::mean() const {
    if (values_.empty()) return 0.0;
    double acc = 0.0;
    for (double v : values_) acc += v;
    return acc / static_cast<double>(values_.size());
}

double GridFunction::max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

bool GridFunction::all_finite() const {
    for (double v : values_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

GridFunction subsample(const GridFunction& u, std::size_t target_resolution) {
    const std::size_t s = u.resolution();
    if (target_resolution == 0 || s % target_resolution != 0) {
        throw ConfigError("subsample: target resolution " + std::to_string(target_resolution) +
                          " does not divide " + std::to_string(s));
    }
    const std::size_t stride = s / target_resolution;
    std::vector<double> out(target_resolution);
    for (std::size_t j = 0; j < target_resolution; ++j) out[j] = u[j * stride];
    return GridFunction(std::move(out));
}

}  // namespace mcno
