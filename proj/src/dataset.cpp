#include "mcno/dataset.hpp"

#include "mcno/binary_io.hpp"
#include "mcno/error.hpp"
#include "mcno/solvers.hpp"

#include <fstream>

namespace mcno {

std::string_view task_name(Task task) {
    switch (task) {
        case Task::burgers: return "burgers";
        case Task::kdv: return "kdv";
    }
    return "unknown";
}

Task parse_task(std::string_view name) {
    if (name == "burgers") return Task::burgers;
    if (name == "kdv") return Task::kdv;
    throw ConfigError("unknown task '" + std::string(name) + "' (expected burgers or kdv)");
}

SolverParams default_solver_params(Task task) {
    SolverParams p;
    if (task == Task::burgers) {
        p.dt = 1e-4;
        p.nu = 0.1;
    } else {
        p.dt = 1e-5;
        p.nu = 0.0;
    }
    return p;
}

std::size_t default_base_resolution(Task task) { return task == Task::burgers ? 8192 : 1024; }

CovarianceSpec default_covariance(Task task) {
    if (task == Task::burgers) return {625.0, 25.0, 2.0};
    return {2401.0, 49.0, 2.5};
}

void Dataset::validate() const {
    if (inputs.size() != outputs.size()) throw ConfigError("dataset: input/output count mismatch");
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (inputs[i].resolution() != base_resolution || outputs[i].resolution() != base_resolution) {
            throw ConfigError("dataset: sample " + std::to_string(i) + " is not at base resolution");
        }
    }
}

std::mt19937_64 sample_rng(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(seq);
}

Dataset build_dataset(Task task, std::size_t count, std::size_t base_resolution, std::uint64_t seed,
                      const SolverParams& solver, const std::function<void(std::size_t)>& progress) {
    if (count == 0) throw ConfigError("build_dataset: count must be positive");
    Dataset ds;
    ds.task = task;
    ds.base_resolution = base_resolution;
    ds.nu = task == Task::burgers ? solver.nu : 0.0;
    ds.seed = seed;
    ds.solver = solver;
    ds.inputs.reserve(count);
    ds.outputs.reserve(count);
    const CovarianceSpec cov = default_covariance(task);

    for (std::size_t i = 0; i < count; ++i) {
        auto rng = sample_rng(seed, i);
        GridFunction a = grf_sample(cov, base_resolution, rng);
        try {
            if (task == Task::burgers) {
                BurgersParams bp;
                bp.nu = solver.nu;
                bp.final_time = solver.final_time;
                bp.dt = solver.dt;
                bp.dealias = solver.dealias;
                auto r = burgers_evolve(a, bp);
                if (r.warning) ds.warnings.push_back("sample " + std::to_string(i) + ": " + *r.warning);
                ds.outputs.push_back(std::move(r.solution));
            } else {
                KdvParams kp;
                kp.final_time = solver.final_time;
                kp.dt = solver.dt;
                kp.dealias = solver.dealias;
                ds.outputs.push_back(kdv_evolve(a, kp));
            }
        } catch (const NumericalError& e) {
            throw NumericalError("sample " + std::to_string(i) + ": " + e.what());
        } catch (const ConfigError& e) {
            throw ConfigError("sample " + std::to_string(i) + ": " + e.what());
        }
        ds.inputs.push_back(std::move(a));
        if (progress) progress(i);
    }
    return ds;
}

std::vector<char> encode_dataset(const Dataset& ds) {
    ds.validate();
    ByteWriter w;
    w.bytes("MCNO");
    w.u32(dataset_format_version);
    w.u32(static_cast<std::uint32_t>(ds.task));
    w.u32(static_cast<std::uint32_t>(ds.size()));
    w.u32(static_cast<std::uint32_t>(ds.base_resolution));
    w.f64(ds.nu);
    w.u64(ds.seed);
    for (const auto& a : ds.inputs) w.f64s(a.values());
    for (const auto& u : ds.outputs) w.f64s(u.values());
    return w.buffer();
}

Dataset decode_dataset(std::vector<char> bytes, const std::string& source) {
    ByteReader r(std::move(bytes), source);
    if (r.bytes(4) != "MCNO") throw IoError(source + ": not a dataset file (bad magic)");
    const auto version = r.u32();
    if (version != dataset_format_version) {
        throw IoError(source + ": unsupported dataset version " + std::to_string(version));
    }
    Dataset ds;
    const auto task = r.u32();
    if (task != 1 && task != 2) throw IoError(source + ": unknown task code " + std::to_string(task));
    ds.task = static_cast<Task>(task);
    const std::size_t count = r.u32();
    ds.base_resolution = r.u32();
    ds.nu = r.f64();
    ds.seed = r.u64();
    if (r.remaining() != 2 * count * ds.base_resolution * 8) {
        throw IoError(source + ": payload size does not match header");
    }
    auto read_block = [&](std::vector<GridFunction>& dst) {
        dst.reserve(count);
        for (std::size_t i = 0; i < count; ++i) {
            std::vector<double> v(ds.base_resolution);
            r.f64s(v);
            dst.emplace_back(std::move(v));
        }
    };
    read_block(ds.inputs);
    read_block(ds.outputs);
    ds.solver = default_solver_params(ds.task);
    if (ds.task == Task::burgers) ds.solver.nu = ds.nu;
    return ds;
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
    auto p = path;
    p += ".meta.json";
    return p;
}

void write_dataset(const Dataset& ds, const std::filesystem::path& path, const nlohmann::json& extra) {
    const auto bytes = encode_dataset(ds);
    const auto cov = default_covariance(ds.task);
    nlohmann::json meta = {
        {"format", "MCNO"},
        {"version", dataset_format_version},
        {"task", task_name(ds.task)},
        {"count", ds.size()},
        {"base_resolution", ds.base_resolution},
        {"nu", ds.nu},
        {"seed", ds.seed},
        {"rng", "mt19937_64 per sample, seed_seq{seed_lo, seed_hi, index_lo, index_hi}"},
        {"covariance", {{"amplitude", cov.amplitude}, {"shift", cov.shift}, {"exponent", cov.exponent}}},
        {"solver",
         {{"scheme", ds.task == Task::burgers ? "strang-split, exact diffusion, heun flux"
                                              : "etdrk4, exact dispersion"},
          {"final_time", ds.solver.final_time},
          {"dt", ds.solver.dt},
          {"dealias", ds.solver.dealias}}},
        {"payload_bytes", 2 * ds.size() * ds.base_resolution * 8},
        {"warnings", ds.warnings},
    };
    for (const auto& [k, v] : extra.items()) meta[k] = v;
    write_file_atomic(path, std::span<const char>(bytes));
    write_text_atomic(sidecar_path(path), meta.dump(2) + "\n");
}

Dataset read_dataset(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoError("dataset not found: " + path.string());
    Dataset ds = decode_dataset(read_file(path), path.string());
    const auto side = sidecar_path(path);
    if (std::filesystem::exists(side)) {
        try {
            std::ifstream in(side);
            const auto meta = nlohmann::json::parse(in);
            const auto& s = meta.at("solver");
            ds.solver.final_time = s.at("final_time").get<double>();
            ds.solver.dt = s.at("dt").get<double>();
            ds.solver.dealias = s.at("dealias").get<bool>();
        } catch (const nlohmann::json::exception& e) {
            throw IoError(side.string() + ": malformed sidecar: " + e.what());
        }
    }
    return ds;
}

}  // namespace mcno
