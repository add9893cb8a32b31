#pragma once

// Experiment configuration shared by the command-line subcommands: one JSON
// document, task-dependent defaults, and a stable hash of the effective values.

#include "mcno/dataset.hpp"
#include "mcno/model.hpp"
#include "mcno/trainer.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mcno {

struct Seeds {
    std::uint64_t data = 0;
    std::uint64_t model = 0;
    std::uint64_t shuffle = 0;
};

struct DataConfig {
    std::size_t count = 1100;
    std::size_t base_resolution = 8192;
    SolverParams solver;
};

struct ExperimentConfig {
    Task task = Task::burgers;
    std::filesystem::path dataset;
    std::filesystem::path output_dir = "mcno_out";
    Seeds seeds;
    DataConfig data;
    MCNOConfig model;
    TrainConfig train;
    std::vector<std::size_t> eval_resolutions;
    std::vector<std::size_t> sweep_samples{25, 50, 75, 100};

    // Copies the seed triple into the model and trainer configs.
    void sync_seeds();
    void validate() const;
};

// Defaults for a task: Burgers 8192-point data, N = 100, s = 256;
// KdV 1024-point data, N = 75, s = 128.
[[nodiscard]] ExperimentConfig default_experiment(Task task);

// Task defaults overlaid with every field present in `j`. Unknown keys are
// rejected with ConfigError.
[[nodiscard]] ExperimentConfig experiment_from_json(const nlohmann::json& j);
[[nodiscard]] ExperimentConfig load_experiment(const std::filesystem::path& path);

[[nodiscard]] nlohmann::json to_json(const ExperimentConfig& cfg);

// FNV-1a of the canonical JSON of everything except paths, as 16 hex digits.
[[nodiscard]] std::string config_hash(const ExperimentConfig& cfg);

[[nodiscard]] nlohmann::json seeds_json(const Seeds& s);

}  // namespace mcno
