#include "mcno/experiment.hpp"

#include "mcno/binary_io.hpp"
#include "mcno/error.hpp"

#include <fstream>
#include <functional>
#include <map>

namespace mcno {

namespace {

using json = nlohmann::json;

// Applies each key of `obj` through the matching setter; unknown keys throw.
void apply_section(const json& obj, const std::string& section,
                   const std::map<std::string, std::function<void(const json&)>>& setters) {
    if (!obj.is_object()) throw ConfigError("config: '" + section + "' must be an object");
    for (const auto& [key, value] : obj.items()) {
        const auto it = setters.find(key);
        if (it == setters.end()) throw ConfigError("config: unknown key '" + section + "." + key + "'");
        try {
            it->second(value);
        } catch (const json::exception& e) {
            throw ConfigError("config: bad value for '" + section + "." + key + "': " + e.what());
        }
    }
}

template <class T>
std::function<void(const json&)> set(T& field) {
    return [&field](const json& v) { field = v.get<T>(); };
}

}  // namespace

void ExperimentConfig::sync_seeds() {
    model.sample_seed = seeds.model;
    model.init_seed = seeds.model;
    train.shuffle_seed = seeds.shuffle;
}

void ExperimentConfig::validate() const {
    model.validate();
    train.validate();
    if (data.count < 1) throw ConfigError("config: data.count must be >= 1");
    if (!is_power_of_two(data.base_resolution) || data.base_resolution < 16) {
        throw ConfigError("config: data.base_resolution must be a power of two >= 16");
    }
    if (model.train_resolution != train.resolution) {
        throw ConfigError("config: model.train_resolution and train.resolution differ");
    }
}

ExperimentConfig default_experiment(Task task) {
    ExperimentConfig c;
    c.task = task;
    c.data.base_resolution = default_base_resolution(task);
    c.data.solver = default_solver_params(task);
    if (task == Task::burgers) {
        c.model.samples = 100;
        c.model.train_resolution = 256;
        c.eval_resolutions = {256, 512, 1024, 2048, 4096, 8192};
    } else {
        c.model.samples = 75;
        c.model.train_resolution = 128;
        c.eval_resolutions = {128, 256, 512, 1024};
    }
    c.train.resolution = c.model.train_resolution;
    c.sync_seeds();
    return c;
}

ExperimentConfig experiment_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    Task task = Task::burgers;
    if (j.contains("task")) {
        if (!j["task"].is_string()) throw ConfigError("config: 'task' must be a string");
        task = parse_task(j["task"].get<std::string>());
    }
    ExperimentConfig c = default_experiment(task);
    std::string dataset = c.dataset.string(), output_dir = c.output_dir.string();
    std::string task_str(task_name(task));
    bool train_res_set = false, model_res_set = false;

    const std::map<std::string, std::function<void(const json&)>> top{
        {"task", set(task_str)},
        {"dataset", set(dataset)},
        {"output_dir", set(output_dir)},
        {"seeds",
         [&](const json& v) {
             apply_section(v, "seeds", {{"data", set(c.seeds.data)},
                                        {"model", set(c.seeds.model)},
                                        {"shuffle", set(c.seeds.shuffle)}});
         }},
        {"data",
         [&](const json& v) {
             apply_section(v, "data", {{"count", set(c.data.count)},
                                       {"base_resolution", set(c.data.base_resolution)},
                                       {"final_time", set(c.data.solver.final_time)},
                                       {"dt", set(c.data.solver.dt)},
                                       {"dealias", set(c.data.solver.dealias)},
                                       {"nu", set(c.data.solver.nu)}});
         }},
        {"model",
         [&](const json& v) {
             apply_section(v, "model",
                           {{"width", set(c.model.width)},
                            {"layers", set(c.model.layers)},
                            {"samples", set(c.model.samples)},
                            {"train_resolution",
                             [&](const json& x) {
                                 c.model.train_resolution = x.get<std::size_t>();
                                 model_res_set = true;
                             }},
                            {"include_coordinate_channel", set(c.model.include_coordinate_channel)},
                            {"projection_hidden", set(c.model.projection_hidden)},
                            {"mc_scaling", set(c.model.mc_scaling)},
                            {"per_layer_samples", set(c.model.per_layer_samples)}});
         }},
        {"train",
         [&](const json& v) {
             apply_section(v, "train",
                           {{"epochs", set(c.train.epochs)},
                            {"batch_size", set(c.train.batch_size)},
                            {"lr0", set(c.train.lr0)},
                            {"halve_every", set(c.train.halve_every)},
                            {"adam_beta1", set(c.train.adam_beta1)},
                            {"adam_beta2", set(c.train.adam_beta2)},
                            {"adam_eps", set(c.train.adam_eps)},
                            {"train_count", set(c.train.train_count)},
                            {"test_count", set(c.train.test_count)},
                            {"resolution",
                             [&](const json& x) {
                                 c.train.resolution = x.get<std::size_t>();
                                 train_res_set = true;
                             }},
                            {"keep_best", set(c.train.keep_best)}});
         }},
        {"eval", [&](const json& v) { apply_section(v, "eval", {{"resolutions", set(c.eval_resolutions)}}); }},
        {"sweep", [&](const json& v) { apply_section(v, "sweep", {{"samples", set(c.sweep_samples)}}); }},
    };
    apply_section(j, "config", top);

    // One resolution drives both; either key may set it.
    if (train_res_set && !model_res_set) c.model.train_resolution = c.train.resolution;
    if (model_res_set && !train_res_set) c.train.resolution = c.model.train_resolution;
    c.dataset = dataset;
    c.output_dir = output_dir;
    c.sync_seeds();
    return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config file not found: " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": invalid JSON: " + e.what());
    }
    return experiment_from_json(j);
}

json seeds_json(const Seeds& s) { return {{"data", s.data}, {"model", s.model}, {"shuffle", s.shuffle}}; }

json to_json(const ExperimentConfig& c) {
    return {
        {"task", task_name(c.task)},
        {"dataset", c.dataset.string()},
        {"output_dir", c.output_dir.string()},
        {"seeds", seeds_json(c.seeds)},
        {"data",
         {{"count", c.data.count},
          {"base_resolution", c.data.base_resolution},
          {"final_time", c.data.solver.final_time},
          {"dt", c.data.solver.dt},
          {"dealias", c.data.solver.dealias},
          {"nu", c.data.solver.nu}}},
        {"model",
         {{"width", c.model.width},
          {"layers", c.model.layers},
          {"samples", c.model.samples},
          {"train_resolution", c.model.train_resolution},
          {"include_coordinate_channel", c.model.include_coordinate_channel},
          {"projection_hidden", c.model.projection_hidden},
          {"mc_scaling", c.model.mc_scaling},
          {"per_layer_samples", c.model.per_layer_samples}}},
        {"train",
         {{"epochs", c.train.epochs},
          {"batch_size", c.train.batch_size},
          {"lr0", c.train.lr0},
          {"halve_every", c.train.halve_every},
          {"adam_beta1", c.train.adam_beta1},
          {"adam_beta2", c.train.adam_beta2},
          {"adam_eps", c.train.adam_eps},
          {"train_count", c.train.train_count},
          {"test_count", c.train.test_count},
          {"resolution", c.train.resolution},
          {"keep_best", c.train.keep_best}}},
        {"eval", {{"resolutions", c.eval_resolutions}}},
        {"sweep", {{"samples", c.sweep_samples}}},
    };
}

std::string config_hash(const ExperimentConfig& cfg) {
    json j = to_json(cfg);
    j.erase("dataset");
    j.erase("output_dir");
    return hex64(fnv1a64(j.dump()));
}

}  // namespace mcno
