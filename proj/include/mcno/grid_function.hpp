#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mcno {

// Samples of a periodic function on the uniform grid x_j = j / s over [0, 1).
class GridFunction {
public:
    GridFunction() = default;
    explicit GridFunction(std::vector<double> values);
    static GridFunction constant(std::size_t resolution, double value);

    [[nodiscard]] std::size_t resolution() const { return values_.size(); }
    [[nodiscard]] double coordinate(std::size_t j) const {
        return static_cast<double>(j) / static_cast<double>(values_.size());
    }
    [[nodiscard]] std::span<const double> values() const { return values_; }
    [[nodiscard]] std::vector<double>& mutable_values() { return values_; }
    [[nodiscard]] double operator[](std::size_t j) const { return values_[j]; }

    [[nodiscard]] double mean() const;
    [[nodiscard]] double max_abs() const;
    [[nodiscard]] bool all_finite() const;

    friend bool operator==(const GridFunction&, const GridFunction&) = default;

private:
    std::vector<double> values_;
};

[[nodiscard]] bool is_power_of_two(std::size_t n);

// Stride sampling: keeps indices 0, stride, 2*stride, ... where
// stride = resolution / target_resolution.
[[nodiscard]] GridFunction subsample(const GridFunction& u, std::size_t target_resolution);

}  // namespace mcno
