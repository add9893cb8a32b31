#pragma once

// Adam training loop with a step-halving learning rate and a mean relative-L2
// objective.

#include "mcno/dataset.hpp"
#include "mcno/grid_function.hpp"
#include "mcno/model.hpp"
#include "mcno/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace mcno {

struct TrainConfig {
    std::size_t epochs = 500;
    std::size_t batch_size = 20;
    double lr0 = 1e-3;
    std::size_t halve_every = 100;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t train_count = 1000;
    std::size_t test_count = 100;
    std::uint64_t shuffle_seed = 0;
    // Resolution the training pairs are subsampled to.
    std::size_t resolution = 256;
    // Also retain the parameters with the lowest test loss.
    bool keep_best = false;

    // epochs may be 0; lr0 may be 0 (a frozen run).
    void validate() const;
};

// ||pred - target||_2 / ||target||_2 over grid values.
[[nodiscard]] double relative_l2(const GridFunction& pred, const GridFunction& target);

// lr0 * 0.5^floor(epoch / halve_every)
[[nodiscard]] double lr_at(std::size_t epoch, const TrainConfig& cfg);

struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    std::size_t t = 0;

    [[nodiscard]] static AdamState for_parameters(std::span<const Tensor> params);
};

// One bias-corrected Adam update of every parameter. grads[i] must have the
// size of params[i].
void adam_step(std::span<Tensor> params, std::span<const std::span<const double>> grads, AdamState& state,
               double lr, const TrainConfig& cfg);

// Same, reading each parameter's accumulated gradient (zeros when absent).
void adam_step(std::span<Tensor> params, AdamState& state, double lr, const TrainConfig& cfg);

struct EpochRecord {
    std::size_t epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double test_loss = 0.0;
    double seconds = 0.0;
};

struct ResolutionError {
    std::size_t resolution = 0;
    double rel_l2 = 0.0;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    // Test loss of the parameters in the model before the first update.
    double initial_test_loss = 0.0;
    double final_test_loss = 0.0;
    std::size_t best_epoch = 0;
    double best_test_loss = 0.0;
    std::optional<MCNOModel> best_model;
    std::vector<ResolutionError> resolutions;

    [[nodiscard]] double mean_epoch_seconds() const;
};

struct TrainHooks {
    std::function<void(const EpochRecord&)> on_epoch;
    // Written after the last epoch when non-empty.
    std::filesystem::path checkpoint;
};

// Train/test pairs at the training resolution.
struct SplitData {
    std::vector<GridFunction> train_inputs, train_outputs;
    std::vector<GridFunction> test_inputs, test_outputs;
};

// First train_count samples train, the next test_count test; both subsampled
// to cfg.resolution.
[[nodiscard]] SplitData split_dataset(const Dataset& ds, const TrainConfig& cfg);

// Mean relative L2 of the model over (inputs, targets), evaluated in batches.
[[nodiscard]] double evaluate(const MCNOModel& model, std::span<const GridFunction> inputs,
                              std::span<const GridFunction> targets);

// Trains `model` in place. Throws NumericalError naming epoch and batch when a
// loss is non-finite.
[[nodiscard]] TrainReport train(MCNOModel& model, const SplitData& data, const TrainConfig& cfg,
                                const TrainHooks& hooks = {});
[[nodiscard]] TrainReport train(MCNOModel& model, const Dataset& ds, const TrainConfig& cfg,
                                const TrainHooks& hooks = {});

// Subsamples every test pair to each resolution and averages relative L2.
// Each resolution must divide the base resolution of the pairs.
[[nodiscard]] std::vector<ResolutionError> evaluate_multires(const MCNOModel& model,
                                                             std::span<const GridFunction> inputs,
                                                             std::span<const GridFunction> targets,
                                                             std::span<const std::size_t> resolutions);

}  // namespace mcno
