#pragma once

#include "mcno/grf.hpp"
#include "mcno/grid_function.hpp"

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace mcno {

enum class Task : std::uint32_t { burgers = 1, kdv = 2 };

[[nodiscard]] std::string_view task_name(Task task);
[[nodiscard]] Task parse_task(std::string_view name);

struct SolverParams {
    double final_time = 1.0;
    double dt = 1e-4;
    bool dealias = true;
    // Burgers viscosity; ignored for KdV.
    double nu = 0.1;
};

[[nodiscard]] SolverParams default_solver_params(Task task);
[[nodiscard]] std::size_t default_base_resolution(Task task);
[[nodiscard]] CovarianceSpec default_covariance(Task task);

struct Dataset {
    Task task = Task::burgers;
    std::size_t base_resolution = 0;
    double nu = 0.0;  // 0 when the task has no viscosity
    std::uint64_t seed = 0;
    SolverParams solver;
    std::vector<GridFunction> inputs;
    std::vector<GridFunction> outputs;
    std::vector<std::string> warnings;

    [[nodiscard]] std::size_t size() const { return inputs.size(); }
    void validate() const;
};

// Per-sample generator: mt19937_64 seeded through std::seed_seq with the
// 32-bit halves of (seed, index). Streams are independent of generation order.
[[nodiscard]] std::mt19937_64 sample_rng(std::uint64_t seed, std::uint64_t index);

// GRF initial condition -> solver to t = final_time, for `count` samples.
// Solver failures are rethrown with the sample index prepended.
[[nodiscard]] Dataset build_dataset(Task task, std::size_t count, std::size_t base_resolution,
                                    std::uint64_t seed, const SolverParams& solver,
                                    const std::function<void(std::size_t)>& progress = {});

// Binary layout (little-endian):
//   "MCNO" | version u32 | task u32 | count u32 | base_resolution u32 |
//   nu f64 | seed u64 | count * input[f64 x base_resolution] |
//   count * output[f64 x base_resolution]
inline constexpr std::uint32_t dataset_format_version = 1;

[[nodiscard]] std::vector<char> encode_dataset(const Dataset& ds);
[[nodiscard]] Dataset decode_dataset(std::vector<char> bytes, const std::string& source);

[[nodiscard]] std::filesystem::path sidecar_path(const std::filesystem::path& path);

// Writes the binary file and a JSON sidecar (header fields, solver params,
// covariance, warnings, plus `extra`), both atomically.
void write_dataset(const Dataset& ds, const std::filesystem::path& path,
                   const nlohmann::json& extra = nlohmann::json::object());

// Reads the binary file; solver params come from the sidecar when present.
[[nodiscard]] Dataset read_dataset(const std::filesystem::path& path);

}  // namespace mcno
