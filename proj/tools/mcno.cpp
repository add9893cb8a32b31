// mcno: dataset generation, training, evaluation, sample sweeps and Monte Carlo
// scaling analysis.
//
// Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 numerical
// failure, 1 anything else.

#include "mcno/binary_io.hpp"
#include "mcno/csv.hpp"
#include "mcno/dataset.hpp"
#include "mcno/error.hpp"
#include "mcno/experiment.hpp"
#include "mcno/mc_analysis.hpp"
#include "mcno/model.hpp"
#include "mcno/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mcno;

namespace {

constexpr int exit_config = 2;
constexpr int exit_io = 3;
constexpr int exit_numerical = 4;
constexpr const char* output_env = "MCNO_OUTPUT_DIR";

std::vector<std::size_t> parse_size_list(const std::string& text, const char* what) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t pos = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(item, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != item.size() || item.front() == '-') {
            throw ConfigError(std::string(what) + ": '" + item + "' is not a non-negative integer");
        }
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& text, const char* what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t pos = 0;
        double v = 0;
        try {
            v = std::stod(item, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != item.size()) throw ConfigError(std::string(what) + ": '" + item + "' is not a number");
        out.push_back(v);
    }
    return out;
}

// Options every subcommand shares. Overrides apply only when given.
struct Common {
    std::string config_path;
    std::string out_dir;
    std::string task;
    std::vector<std::uint64_t> seed_triple;
    std::optional<std::uint64_t> data_seed, model_seed, shuffle_seed;
    bool quiet = false;

    void attach(CLI::App* app) {
        app->add_option("-c,--config", config_path, "JSON experiment config");
        app->add_option("-o,--out-dir", out_dir, "Output directory (overrides $" + std::string(output_env) + ")");
        app->add_option("--task", task, "burgers or kdv");
        app->add_option("--seed", seed_triple, "Seed triple: DATA MODEL SHUFFLE")->expected(3);
        app->add_option("--data-seed", data_seed, "Dataset seed");
        app->add_option("--model-seed", model_seed, "Sample-set and initialization seed");
        app->add_option("--shuffle-seed", shuffle_seed, "Training shuffle seed");
        app->add_flag("-q,--quiet", quiet, "No progress output");
    }

    ExperimentConfig resolve() const {
        ExperimentConfig cfg;
        if (!config_path.empty()) {
            cfg = load_experiment(config_path);
            if (!task.empty() && parse_task(task) != cfg.task) {
                // Task defaults belong to the config's task; refuse silent mixing.
                throw ConfigError("--task " + task + " contradicts the config file task " +
                                  std::string(task_name(cfg.task)));
            }
        } else {
            cfg = default_experiment(task.empty() ? Task::burgers : parse_task(task));
        }
        if (const char* env = std::getenv(output_env); env != nullptr && *env != '\0') cfg.output_dir = env;
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        if (!seed_triple.empty()) cfg.seeds = {seed_triple[0], seed_triple[1], seed_triple[2]};
        if (data_seed) cfg.seeds.data = *data_seed;
        if (model_seed) cfg.seeds.model = *model_seed;
        if (shuffle_seed) cfg.seeds.shuffle = *shuffle_seed;
        cfg.sync_seeds();
        return cfg;
    }
};

json artifact_meta(const ExperimentConfig& cfg, const std::string& command) {
    return {{"command", command},
            {"seeds", seeds_json(cfg.seeds)},
            {"config_hash", config_hash(cfg)},
            {"config", to_json(cfg)}};
}

void write_meta(const fs::path& artifact, const json& meta) {
    write_text_atomic(sidecar_path(artifact), meta.dump(2) + "\n");
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
}

fs::path require_dataset(const ExperimentConfig& cfg, const std::string& flag_value) {
    fs::path p = flag_value.empty() ? cfg.dataset : fs::path(flag_value);
    if (p.empty()) throw ConfigError("no dataset given (use --dataset or the config's \"dataset\")");
    if (!fs::exists(p)) throw IoError("dataset not found: " + p.string());
    return p;
}

// --- gen-data ------------------------------------------------------------------

struct GenData {
    Common common;
    std::string output;
    std::optional<std::size_t> count, base_resolution;
    std::optional<double> dt, nu;

    void attach(CLI::App* app) {
        common.attach(app);
        app->add_option("--output", output, "Dataset file (default <out-dir>/<task>.mcno)");
        app->add_option("--count", count, "Number of samples");
        app->add_option("--base-resolution", base_resolution, "Grid points of the generated data");
        app->add_option("--dt", dt, "Solver time step");
        app->add_option("--nu", nu, "Burgers viscosity");
    }

    int run() const {
        ExperimentConfig cfg = common.resolve();
        if (count) cfg.data.count = *count;
        if (base_resolution) cfg.data.base_resolution = *base_resolution;
        if (dt) cfg.data.solver.dt = *dt;
        if (nu) cfg.data.solver.nu = *nu;
        if (cfg.task == Task::kdv) cfg.data.solver.nu = 0.0;
        if (cfg.data.count < 1) throw ConfigError("--count must be >= 1");

        const fs::path path = output.empty() ? cfg.output_dir / (std::string(task_name(cfg.task)) + ".mcno")
                                             : fs::path(output);
        if (path.has_parent_path()) ensure_dir(path.parent_path());
        const bool quiet = common.quiet;
        const std::size_t total = cfg.data.count;
        Dataset ds = build_dataset(cfg.task, cfg.data.count, cfg.data.base_resolution, cfg.seeds.data,
                                   cfg.data.solver, [&](std::size_t i) {
                                       if (!quiet && ((i + 1) % 10 == 0 || i + 1 == total)) {
                                           std::cerr << "gen-data: " << i + 1 << "/" << total << "\n";
                                       }
                                   });
        for (const auto& w : ds.warnings) std::cerr << "gen-data: warning: " << w << "\n";
        json extra = artifact_meta(cfg, "gen-data");
        write_dataset(ds, path, extra);
        std::cout << path.string() << "\n";
        return 0;
    }
};

// --- train -----------------------------------------------------------------------

struct TrainOverrides {
    std::optional<std::size_t> epochs, train_count, test_count, samples, width, layers, resolution, batch_size;
    std::optional<double> lr;

    void attach(CLI::App* app) {
        app->add_option("--epochs", epochs, "Training epochs");
        app->add_option("--train-count", train_count, "Training samples taken from the dataset start");
        app->add_option("--test-count", test_count, "Test samples following the training samples");
        app->add_option("--samples", samples, "Monte Carlo sample count N");
        app->add_option("--width", width, "Channel width");
        app->add_option("--layers", layers, "Operator layers");
        app->add_option("--resolution", resolution, "Training resolution");
        app->add_option("--batch-size", batch_size, "Batch size");
        app->add_option("--lr", lr, "Initial learning rate");
    }

    void apply(ExperimentConfig& cfg) const {
        if (epochs) cfg.train.epochs = *epochs;
        if (train_count) cfg.train.train_count = *train_count;
        if (test_count) cfg.train.test_count = *test_count;
        if (samples) cfg.model.samples = *samples;
        if (width) cfg.model.width = *width;
        if (layers) cfg.model.layers = *layers;
        if (resolution) {
            cfg.train.resolution = *resolution;
            cfg.model.train_resolution = *resolution;
        }
        if (batch_size) cfg.train.batch_size = *batch_size;
        if (lr) cfg.train.lr0 = *lr;
    }
};

void write_train_log(const TrainReport& report, const fs::path& path, const json& meta) {
    CsvTable t({"epoch", "lr", "train_loss", "test_loss", "seconds"});
    for (const auto& e : report.epochs) {
        t.cell(std::uint64_t{e.epoch}).cell(e.lr).cell(e.train_loss).cell(e.test_loss).cell(e.seconds);
        t.end_row();
    }
    t.write(path);
    write_meta(path, meta);
}

struct Train {
    Common common;
    TrainOverrides over;
    std::string dataset;

    void attach(CLI::App* app) {
        common.attach(app);
        over.attach(app);
        app->add_option("--dataset", dataset, "Dataset file");
    }

    int run() const {
        ExperimentConfig cfg = common.resolve();
        over.apply(cfg);
        const fs::path ds_path = require_dataset(cfg, dataset);
        cfg.dataset = ds_path;
        cfg.validate();
        const Dataset ds = read_dataset(ds_path);
        cfg.seeds.data = ds.seed;
        ensure_dir(cfg.output_dir);

        MCNOModel model = MCNOModel::initialize(cfg.model);
        TrainHooks hooks;
        hooks.checkpoint = cfg.output_dir / "checkpoint.mcnp";
        if (!common.quiet) {
            hooks.on_epoch = [](const EpochRecord& e) {
                std::cerr << "epoch " << e.epoch << " lr " << e.lr << " train " << e.train_loss << " test "
                          << e.test_loss << " (" << e.seconds << " s)\n";
            };
        }
        const TrainReport report = train(model, ds, cfg.train, hooks);
        const json meta = artifact_meta(cfg, "train");
        write_meta(hooks.checkpoint, meta);
        write_train_log(report, cfg.output_dir / "train_log.csv", meta);
        if (report.best_model) {
            const fs::path best = cfg.output_dir / "checkpoint_best.mcnp";
            save_checkpoint(*report.best_model, best);
            json bm = meta;
            bm["best_epoch"] = report.best_epoch;
            bm["best_test_loss"] = report.best_test_loss;
            write_meta(best, bm);
        }
        std::cout << "final_test_rel_l2 " << format_double(report.final_test_loss) << "\n";
        return 0;
    }
};

// --- eval ------------------------------------------------------------------------

struct Eval {
    Common common;
    std::string checkpoint, dataset, resolutions;
    bool resolutions_given = false;
    std::optional<std::size_t> test_offset, test_count;
    std::string output;

    void attach(CLI::App* app) {
        common.attach(app);
        app->add_option("--checkpoint", checkpoint, "Checkpoint file (default <out-dir>/checkpoint.mcnp)");
        app->add_option("--dataset", dataset, "Dataset file");
        app->add_option("--resolutions", resolutions, "Comma-separated resolutions; empty for none");
        app->add_option("--test-offset", test_offset, "First test sample (default: the training run's train_count)");
        app->add_option("--test-count", test_count, "Number of test samples");
        app->add_option("--output", output, "Results CSV (default <out-dir>/eval.csv)");
    }

    int run(const CLI::App* app) const {
        ExperimentConfig cfg = common.resolve();
        const fs::path ckpt = checkpoint.empty() ? cfg.output_dir / "checkpoint.mcnp" : fs::path(checkpoint);
        const MCNOModel model = load_checkpoint(ckpt);
        const fs::path ds_path = require_dataset(cfg, dataset);
        cfg.dataset = ds_path;
        const Dataset ds = read_dataset(ds_path);
        cfg.seeds.data = ds.seed;
        cfg.seeds.model = model.config().init_seed;
        // The shuffle seed and the train/test split come from the training
        // run's metadata when it is present.
        if (const fs::path side = sidecar_path(ckpt); fs::exists(side)) {
            try {
                std::ifstream in(side);
                const json meta = json::parse(in);
                cfg.seeds.shuffle = meta.at("seeds").at("shuffle").get<std::uint64_t>();
                const json& tr = meta.at("config").at("train");
                cfg.train.train_count = tr.at("train_count").get<std::size_t>();
                cfg.train.test_count = tr.at("test_count").get<std::size_t>();
            } catch (const json::exception& e) {
                throw IoError(side.string() + ": malformed metadata: " + e.what());
            }
        }
        if (test_count) cfg.train.test_count = *test_count;
        cfg.model = model.config();
        cfg.train.resolution = model.config().train_resolution;

        const std::vector<std::size_t> res =
            app->count("--resolutions") > 0 ? parse_size_list(resolutions, "--resolutions") : cfg.eval_resolutions;
        cfg.eval_resolutions = res;
        const std::size_t offset = test_offset.value_or(cfg.train.train_count);
        const std::size_t count = cfg.train.test_count;
        if (offset + count > ds.size()) {
            throw ConfigError("test range [" + std::to_string(offset) + ", " + std::to_string(offset + count) +
                              ") exceeds dataset size " + std::to_string(ds.size()));
        }
        const std::span<const GridFunction> in(ds.inputs.data() + offset, count);
        const std::span<const GridFunction> out(ds.outputs.data() + offset, count);
        const auto table = evaluate_multires(model, in, out, res);

        const std::string hash = config_hash(cfg);
        CsvTable t({"resolution", "rel_l2", "data_seed", "model_seed", "shuffle_seed", "config_hash"});
        for (const auto& r : table) {
            t.cell(std::uint64_t{r.resolution}).cell(r.rel_l2);
            t.cell(cfg.seeds.data).cell(cfg.seeds.model).cell(cfg.seeds.shuffle).cell(hash);
            t.end_row();
            std::cout << r.resolution << " " << format_double(r.rel_l2) << "\n";
        }
        const fs::path path = output.empty() ? cfg.output_dir / "eval.csv" : fs::path(output);
        if (path.has_parent_path()) ensure_dir(path.parent_path());
        t.write(path);
        json meta = artifact_meta(cfg, "eval");
        meta["checkpoint"] = ckpt.string();
        meta["test_offset"] = offset;
        write_meta(path, meta);
        return 0;
    }
};

// --- sweep -----------------------------------------------------------------------

struct Sweep {
    Common common;
    TrainOverrides over;
    std::string dataset, samples;

    void attach(CLI::App* app) {
        common.attach(app);
        over.attach(app);
        app->add_option("--dataset", dataset, "Dataset file");
        app->add_option("--sample-counts", samples, "Comma-separated N values (default from config)");
    }

    int run(const CLI::App* app) const {
        ExperimentConfig cfg = common.resolve();
        over.apply(cfg);
        if (app->count("--sample-counts") > 0) cfg.sweep_samples = parse_size_list(samples, "--sample-counts");
        const fs::path ds_path = require_dataset(cfg, dataset);
        cfg.dataset = ds_path;
        cfg.validate();
        const Dataset ds = read_dataset(ds_path);
        cfg.seeds.data = ds.seed;
        ensure_dir(cfg.output_dir);
        const SplitData split = split_dataset(ds, cfg.train);

        const std::string hash = config_hash(cfg);
        CsvTable t({"samples", "rel_l2", "seconds_per_epoch", "data_seed", "model_seed", "shuffle_seed",
                    "config_hash"});
        for (std::size_t n : cfg.sweep_samples) {
            if (n > cfg.model.train_resolution) {
                throw ConfigError("sample count " + std::to_string(n) + " exceeds the training resolution");
            }
            MCNOConfig mc = cfg.model;
            mc.samples = n;
            MCNOModel model = MCNOModel::initialize(mc);
            if (!common.quiet) std::cerr << "sweep: N = " << n << "\n";
            const TrainReport report = train(model, split, cfg.train);
            t.cell(std::uint64_t{n}).cell(report.final_test_loss).cell(report.mean_epoch_seconds());
            t.cell(cfg.seeds.data).cell(cfg.seeds.model).cell(cfg.seeds.shuffle).cell(hash);
            t.end_row();
            std::cout << n << " " << format_double(report.final_test_loss) << " "
                      << format_double(report.mean_epoch_seconds()) << "\n";
        }
        const fs::path path = cfg.output_dir / "sweep.csv";
        t.write(path);
        write_meta(path, artifact_meta(cfg, "sweep"));
        return 0;
    }
};

// --- analyze-mc --------------------------------------------------------------------

struct AnalyzeMc {
    Common common;
    std::string kernel = "gauss", test_function = "one", placement = "corner", sampling = "without";
    std::size_t dim = 1, trials = 400, n_grid = 8192, probes = 64;
    double delta = 0.05;
    std::uint64_t seed = 0;
    bool cost = false;
    std::string eps = "0.2,0.1,0.05,0.025";

    void attach(CLI::App* app) {
        common.attach(app);
        app->add_option("--kernel", kernel, "zero, const, sin, gauss or trig")->capture_default_str();
        app->add_option("--test-function", test_function, "one or wave")->capture_default_str();
        app->add_option("--dim", dim, "Dimension 1..3")->capture_default_str();
        app->add_option("--placement", placement, "corner or midpoint")->capture_default_str();
        app->add_option("--trials", trials, "Variance trials per N")->capture_default_str();
        app->add_option("--delta", delta, "Failure probability")->capture_default_str();
        app->add_option("--n-grid", n_grid, "Grid size for the variance study")->capture_default_str();
        app->add_option("--probes", probes, "Probe points for the sup over x")->capture_default_str();
        app->add_option("--mc-seed", seed, "Seed for the variance trials")->capture_default_str();
        app->add_option("--sampling", sampling, "without or with (replacement)")->capture_default_str();
        app->add_flag("--cost", cost, "Also write the cost table and stage timings");
        app->add_option("--eps", eps, "Comma-separated tolerances for the cost table")->capture_default_str();
    }

    int run() const {
        ExperimentConfig cfg = common.resolve();
        ensure_dir(cfg.output_dir);
        if (placement != "corner" && placement != "midpoint") throw ConfigError("--placement: corner or midpoint");
        if (sampling != "without" && sampling != "with") throw ConfigError("--sampling: without or with");
        const mc::Placement pl = placement == "corner" ? mc::Placement::corner : mc::Placement::midpoint;

        json meta = artifact_meta(cfg, "analyze-mc");
        meta["mc"] = {{"kernel", kernel}, {"test_function", test_function}, {"dim", dim},
                      {"placement", placement}, {"trials", trials}, {"delta", delta},
                      {"n_grid", n_grid}, {"probes", probes}, {"mc_seed", seed},
                      {"sampling", sampling}, {"c2", "C * sqrt(2), derived from the Hoeffding form"}};

        const auto k = mc::make_kernel(kernel, dim);
        const auto v = mc::make_test_function(test_function, dim);
        const auto axes = mc::default_bias_axes(dim);
        const auto bias = mc::bias_curve(k, v, axes, pl, probes);
        const fs::path bias_path = cfg.output_dir / ("mc_bias_" + kernel + "_d" + std::to_string(dim) + ".csv");
        mc::write_scaling_csv(bias, bias_path);
        write_meta(bias_path, meta);
        std::cout << "bias " << kernel << " d=" << dim << " slope "
                  << (bias.below_resolution ? std::string("below_resolution") : format_double(bias.slope))
                  << " theory " << format_double(bias.theory_slope) << "\n";

        if (dim == 1) {
            mc::VarianceConfig vc;
            vc.trials = trials;
            vc.n_grid = n_grid;
            vc.delta = delta;
            vc.probes = probes;
            vc.seed = seed;
            vc.sampling = sampling == "with" ? mc::Sampling::with_replacement : mc::Sampling::without_replacement;
            const auto var = mc::variance_curve(k, v, vc);
            const fs::path var_path = cfg.output_dir / ("mc_variance_" + kernel + "_d1.csv");
            mc::write_scaling_csv(var, var_path);
            write_meta(var_path, meta);
            std::cout << "variance " << kernel << " slope "
                      << (var.below_resolution ? std::string("below_resolution") : format_double(var.slope))
                      << " theory -0.5 violations " << var.total_violations() << " bound_holds "
                      << (var.bound_holds() ? "yes" : "no") << "\n";
        } else if (!common.quiet) {
            std::cerr << "analyze-mc: the variance study runs for dim 1 only\n";
        }

        if (cost) {
            const auto eps_list = parse_double_list(eps, "--eps");
            const std::vector<std::size_t> dims{1, 2, 3};
            const auto rows = mc::cost_table(eps_list, dims);
            const fs::path cost_path = cfg.output_dir / "mc_cost.csv";
            mc::write_cost_csv(rows, cost_path);
            write_meta(cost_path, meta);
            const std::vector<std::size_t> ns{1024, 2048, 4096, 8192};
            const std::vector<std::size_t> gs{4096, 8192, 16384, 32768};
            const std::vector<mc::TimingScan> scans{mc::time_aggregation(ns, 8),
                                                    mc::time_reconstruction(gs, 64, 8)};
            const fs::path timing_path = cfg.output_dir / "mc_timing.csv";
            mc::write_timing_csv(scans, timing_path);
            write_meta(timing_path, meta);
            for (const auto& s : scans) std::cout << s.stage << " slope " << format_double(s.slope) << "\n";
        }
        return 0;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Monte Carlo neural operator: data generation, training, evaluation and analysis"};
    app.require_subcommand(1);

    GenData gen;
    Train tr;
    Eval ev;
    Sweep sw;
    AnalyzeMc am;
    auto* gen_app = app.add_subcommand("gen-data", "Generate a dataset of GRF inputs and PDE solutions");
    auto* train_app = app.add_subcommand("train", "Train a model; writes a checkpoint and a per-epoch CSV");
    auto* eval_app = app.add_subcommand("eval", "Evaluate a checkpoint at several resolutions");
    auto* sweep_app = app.add_subcommand("sweep", "Train one model per sample count N");
    auto* mc_app = app.add_subcommand("analyze-mc", "Bias and variance scaling of grid and Monte Carlo quadrature");
    gen.attach(gen_app);
    tr.attach(train_app);
    ev.attach(eval_app);
    sw.attach(sweep_app);
    am.attach(mc_app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_config;
    }

    try {
        if (*gen_app) return gen.run();
        if (*train_app) return tr.run();
        if (*eval_app) return ev.run(eval_app);
        if (*sweep_app) return sw.run(sweep_app);
        if (*mc_app) return am.run();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const ShapeError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return exit_io;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return exit_numerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
