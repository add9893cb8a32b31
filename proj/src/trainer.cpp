#include "mcno/trainer.hpp"

#include "mcno/error.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace mcno {

namespace {

constexpr std::size_t eval_batch = 25;

Tensor target_tensor(std::span<const GridFunction> outputs) {
    const std::size_t s = outputs.front().resolution();
    std::vector<double> data;
    data.reserve(outputs.size() * s);
    for (const auto& u : outputs) {
        if (u.resolution() != s) throw ShapeError("target batch: mixed resolutions");
        data.insert(data.end(), u.values().begin(), u.values().end());
    }
    return Tensor::from({outputs.size(), s, 1}, std::move(data));
}

void check_pairs(std::span<const GridFunction> inputs, std::span<const GridFunction> targets) {
    if (inputs.size() != targets.size()) throw ShapeError("input and target counts differ");
}

}  // namespace

void TrainConfig::validate() const {
    if (batch_size < 1 || train_count < 1 || test_count < 1 || halve_every < 1 || resolution < 2) {
        throw ConfigError("train config: batch_size, train_count, test_count, halve_every must be >= 1");
    }
    if (batch_size > train_count) throw ConfigError("train config: batch_size exceeds train_count");
    if (!(lr0 >= 0.0) || !(adam_eps > 0.0) || !(adam_beta1 >= 0.0 && adam_beta1 < 1.0) ||
        !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
        throw ConfigError("train config: invalid optimizer constants");
    }
}

double relative_l2(const GridFunction& pred, const GridFunction& target) {
    if (pred.resolution() != target.resolution()) {
        throw ShapeError("relative_l2: resolutions " + std::to_string(pred.resolution()) + " and " +
                         std::to_string(target.resolution()) + " differ");
    }
    double diff = 0.0, norm = 0.0;
    for (std::size_t j = 0; j < target.resolution(); ++j) {
        const double d = pred[j] - target[j];
        diff += d * d;
        norm += target[j] * target[j];
    }
    if (!(norm > 0.0)) throw NumericalError("relative_l2: target has zero norm");
    return std::sqrt(diff) / std::sqrt(norm);
}

double lr_at(std::size_t epoch, const TrainConfig& cfg) {
    return cfg.lr0 * std::pow(0.5, static_cast<double>(epoch / cfg.halve_every));
}

AdamState AdamState::for_parameters(std::span<const Tensor> params) {
    AdamState s;
    for (const auto& p : params) {
        s.m.emplace_back(p.numel(), 0.0);
        s.v.emplace_back(p.numel(), 0.0);
    }
    return s;
}

void adam_step(std::span<Tensor> params, std::span<const std::span<const double>> grads, AdamState& state,
               double lr, const TrainConfig& cfg) {
    if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
        throw ShapeError("adam_step: parameter, gradient and state counts differ");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (grads[i].size() != params[i].numel() || state.m[i].size() != params[i].numel()) {
            throw ShapeError("adam_step: size mismatch for parameter " + std::to_string(i) + " " +
                             shape_string(params[i].shape()));
        }
    }
    state.t += 1;
    const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto theta = params[i].mutable_data();
        auto& m = state.m[i];
        auto& v = state.v[i];
        const auto g = grads[i];
        for (std::size_t j = 0; j < theta.size(); ++j) {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            const double mhat = m[j] / c1;
            const double vhat = v[j] / c2;
            theta[j] -= lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
        }
    }
}

void adam_step(std::span<Tensor> params, AdamState& state, double lr, const TrainConfig& cfg) {
    std::vector<std::vector<double>> zeros;
    std::vector<std::span<const double>> grads;
    grads.reserve(params.size());
    for (auto& p : params) {
        if (p.has_grad()) {
            grads.push_back(p.grad());
        } else {
            zeros.emplace_back(p.numel(), 0.0);
            grads.emplace_back();
        }
    }
    for (std::size_t i = 0, z = 0; i < params.size(); ++i) {
        if (!params[i].has_grad()) grads[i] = zeros[z++];
    }
    adam_step(params, grads, state, lr, cfg);
}

double TrainReport::mean_epoch_seconds() const {
    if (epochs.empty()) return 0.0;
    double total = 0.0;
    for (const auto& e : epochs) total += e.seconds;
    return total / static_cast<double>(epochs.size());
}

SplitData split_dataset(const Dataset& ds, const TrainConfig& cfg) {
    if (ds.size() < cfg.train_count + cfg.test_count) {
        throw ConfigError("dataset has " + std::to_string(ds.size()) + " samples; need " +
                          std::to_string(cfg.train_count) + " train + " + std::to_string(cfg.test_count) +
                          " test");
    }
    SplitData out;
    for (std::size_t i = 0; i < cfg.train_count; ++i) {
        out.train_inputs.push_back(subsample(ds.inputs[i], cfg.resolution));
        out.train_outputs.push_back(subsample(ds.outputs[i], cfg.resolution));
    }
    for (std::size_t i = cfg.train_count; i < cfg.train_count + cfg.test_count; ++i) {
        out.test_inputs.push_back(subsample(ds.inputs[i], cfg.resolution));
        out.test_outputs.push_back(subsample(ds.outputs[i], cfg.resolution));
    }
    return out;
}

double evaluate(const MCNOModel& model, std::span<const GridFunction> inputs,
                std::span<const GridFunction> targets) {
    check_pairs(inputs, targets);
    if (inputs.empty()) throw ConfigError("evaluate: empty test set");
    double total = 0.0;
    for (std::size_t start = 0; start < inputs.size(); start += eval_batch) {
        const std::size_t count = std::min(eval_batch, inputs.size() - start);
        const Tensor out = forward_batch(model, inputs.subspan(start, count));
        const auto d = out.data();
        const std::size_t s = inputs[start].resolution();
        for (std::size_t b = 0; b < count; ++b) {
            GridFunction pred(std::vector<double>(d.begin() + static_cast<std::ptrdiff_t>(b * s),
                                                  d.begin() + static_cast<std::ptrdiff_t>((b + 1) * s)));
            total += relative_l2(pred, targets[start + b]);
        }
    }
    return total / static_cast<double>(inputs.size());
}

TrainReport train(MCNOModel& model, const SplitData& data, const TrainConfig& cfg, const TrainHooks& hooks) {
    cfg.validate();
    check_pairs(data.train_inputs, data.train_outputs);
    check_pairs(data.test_inputs, data.test_outputs);
    const std::size_t n_train = data.train_inputs.size();
    if (n_train < cfg.batch_size) throw ConfigError("train: fewer training samples than batch_size");

    TrainReport report;
    report.initial_test_loss = evaluate(model, data.test_inputs, data.test_outputs);
    report.final_test_loss = report.initial_test_loss;
    report.best_test_loss = report.initial_test_loss;
    if (cfg.keep_best) report.best_model = model;

    std::vector<Tensor> params = model.parameters();
    AdamState adam = AdamState::for_parameters(params);
    std::seed_seq shuffle_seq{static_cast<std::uint32_t>(cfg.shuffle_seed),
                              static_cast<std::uint32_t>(cfg.shuffle_seed >> 32), 0x7u};
    std::mt19937_64 shuffle_rng(shuffle_seq);
    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::vector<GridFunction> batch_in, batch_out;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr = lr_at(epoch, cfg);
        for (std::size_t i = n_train - 1; i > 0; --i) {
            std::uniform_int_distribution<std::size_t> pick(0, i);
            std::swap(order[i], order[pick(shuffle_rng)]);
        }
        double loss_sum = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < n_train; start += cfg.batch_size, ++batch_index) {
            const std::size_t count = std::min(cfg.batch_size, n_train - start);
            batch_in.clear();
            batch_out.clear();
            for (std::size_t k = 0; k < count; ++k) {
                batch_in.push_back(data.train_inputs[order[start + k]]);
                batch_out.push_back(data.train_outputs[order[start + k]]);
            }
            for (auto& p : params) p.zero_grad();
            double loss_value = 0.0;
            try {
                Tape tape;
                TapeScope scope(tape);
                const Tensor loss = mean_relative_l2(forward_batch(model, batch_in), target_tensor(batch_out));
                loss_value = loss.item();
                if (!std::isfinite(loss_value)) throw NumericalError("non-finite loss");
                tape.backward(loss);
            } catch (const NumericalError& e) {
                throw NumericalError("train: epoch " + std::to_string(epoch) + ", batch " +
                                     std::to_string(batch_index) + ": " + e.what());
            }
            adam_step(params, adam, lr, cfg);
            loss_sum += loss_value * static_cast<double>(count);
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = lr;
        rec.train_loss = loss_sum / static_cast<double>(n_train);
        rec.test_loss = evaluate(model, data.test_inputs, data.test_outputs);
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report.final_test_loss = rec.test_loss;
        if (rec.test_loss < report.best_test_loss) {
            report.best_test_loss = rec.test_loss;
            report.best_epoch = epoch + 1;
            if (cfg.keep_best) report.best_model = model;
        }
        report.epochs.push_back(rec);
        if (hooks.on_epoch) hooks.on_epoch(rec);
    }
    for (auto& p : params) p.zero_grad();
    if (!hooks.checkpoint.empty()) save_checkpoint(model, hooks.checkpoint);
    return report;
}

TrainReport train(MCNOModel& model, const Dataset& ds, const TrainConfig& cfg, const TrainHooks& hooks) {
    cfg.validate();
    return train(model, split_dataset(ds, cfg), cfg, hooks);
}

std::vector<ResolutionError> evaluate_multires(const MCNOModel& model, std::span<const GridFunction> inputs,
                                               std::span<const GridFunction> targets,
                                               std::span<const std::size_t> resolutions) {
    check_pairs(inputs, targets);
    std::vector<ResolutionError> out;
    for (std::size_t s : resolutions) {
        std::vector<GridFunction> in, tg;
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            in.push_back(subsample(inputs[i], s));
            tg.push_back(subsample(targets[i], s));
        }
        out.push_back({s, evaluate(model, in, tg)});
    }
    return out;
}

}  // namespace mcno
