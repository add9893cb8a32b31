#include "mcno/model.hpp"

#include "mcno/binary_io.hpp"
#include "mcno/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace mcno {

namespace {

std::mt19937_64 seeded(std::uint64_t seed, std::uint32_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
    return std::mt19937_64(seq);
}

std::vector<double> uniform_values(std::mt19937_64& rng, std::size_t n, double bound) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> out(n);
    for (double& v : out) v = dist(rng);
    return out;
}

Tensor init_param(std::mt19937_64& rng, Shape shape, double bound) {
    const auto n = shape_numel(shape);
    return Tensor::parameter(std::move(shape), uniform_values(rng, n, bound));
}

std::uint64_t layer_seed(std::uint64_t seed, std::size_t layer) {
    auto rng = seeded(seed, 0x5a000000u + static_cast<std::uint32_t>(layer));
    return rng();
}

}  // namespace

void MCNOConfig::validate() const {
    if (width < 1 || layers < 1 || samples < 1 || projection_hidden < 1) {
        throw ConfigError("MCNO config: width, layers, samples and projection_hidden must be >= 1");
    }
    if (train_resolution < 1) throw ConfigError("MCNO config: train_resolution must be >= 1");
}

SampleSet sample_points(std::size_t count, std::size_t grid_resolution, std::uint64_t seed) {
    if (count < 1) throw ConfigError("sample_points: need at least one sample");
    if (count > grid_resolution) {
        throw ConfigError("sample_points: cannot draw " + std::to_string(count) +
                          " distinct points from a grid of " + std::to_string(grid_resolution));
    }
    std::vector<std::size_t> idx(grid_resolution);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    auto rng = seeded(seed, 0x53u);
    for (std::size_t i = 0; i < count; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, grid_resolution - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(count);
    std::sort(idx.begin(), idx.end());
    SampleSet set;
    set.draw_seed = seed;
    set.coords.reserve(count);
    for (std::size_t j : idx) {
        set.coords.push_back(static_cast<double>(j) / static_cast<double>(grid_resolution));
    }
    return set;
}

std::vector<Tensor> MCNOParameters::list() const {
    std::vector<Tensor> out{lift_weight, lift_bias};
    for (const auto& l : layers) {
        out.push_back(l.w);
        out.push_back(l.phi);
    }
    out.insert(out.end(), {proj_hidden_weight, proj_hidden_bias, proj_out_weight, proj_out_bias});
    return out;
}

MCNOModel::MCNOModel(MCNOConfig config, std::vector<SampleSet> sample_sets, MCNOParameters params)
    : config_(config), sample_sets_(std::move(sample_sets)), params_(std::move(params)) {
    config_.validate();
    const std::size_t expected_sets = config_.per_layer_samples ? config_.layers : 1;
    if (sample_sets_.size() != expected_sets) throw ConfigError("MCNO model: wrong number of sample sets");
    for (const auto& s : sample_sets_) {
        if (s.size() != config_.samples) throw ConfigError("MCNO model: sample set size mismatch");
    }
    if (params_.layers.size() != config_.layers) throw ConfigError("MCNO model: layer count mismatch");
}

MCNOModel MCNOModel::initialize(const MCNOConfig& config) {
    config.validate();
    if (config.samples < 2) {
        throw ConfigError("MCNO model: interpolation back to the grid needs at least 2 samples");
    }
    std::vector<SampleSet> sets;
    if (config.per_layer_samples) {
        for (std::size_t t = 0; t < config.layers; ++t) {
            sets.push_back(sample_points(config.samples, config.train_resolution,
                                         layer_seed(config.sample_seed, t)));
        }
    } else {
        sets.push_back(sample_points(config.samples, config.train_resolution, config.sample_seed));
    }

    auto rng = seeded(config.init_seed, 0x1au);
    const std::size_t dv = config.width;
    const std::size_t cin = config.in_channels();
    const double n = static_cast<double>(config.samples);
    MCNOParameters p;
    const double lift_bound = 1.0 / std::sqrt(static_cast<double>(cin));
    p.lift_weight = init_param(rng, {cin, dv}, lift_bound);
    p.lift_bias = init_param(rng, {dv}, lift_bound);
    const double w_bound = 1.0 / std::sqrt(static_cast<double>(dv));
    const double phi_bound = (1.0 / static_cast<double>(dv)) * (config.mc_scaling ? n : 1.0);
    for (std::size_t t = 0; t < config.layers; ++t) {
        LayerParams l;
        l.w = init_param(rng, {dv, dv}, w_bound);
        l.phi = init_param(rng, {config.samples, dv, dv}, phi_bound);
        p.layers.push_back(std::move(l));
    }
    const std::size_t hid = config.projection_hidden;
    p.proj_hidden_weight = init_param(rng, {dv, hid}, w_bound);
    p.proj_hidden_bias = init_param(rng, {hid}, w_bound);
    const double out_bound = 1.0 / std::sqrt(static_cast<double>(hid));
    p.proj_out_weight = init_param(rng, {hid, 1}, out_bound);
    p.proj_out_bias = init_param(rng, {1}, out_bound);
    return MCNOModel(config, std::move(sets), std::move(p));
}

namespace {
MCNOParameters clone_params(const MCNOParameters& src) {
    MCNOParameters p;
    p.lift_weight = src.lift_weight.clone();
    p.lift_bias = src.lift_bias.clone();
    for (const auto& l : src.layers) p.layers.push_back({l.w.clone(), l.phi.clone()});
    p.proj_hidden_weight = src.proj_hidden_weight.clone();
    p.proj_hidden_bias = src.proj_hidden_bias.clone();
    p.proj_out_weight = src.proj_out_weight.clone();
    p.proj_out_bias = src.proj_out_bias.clone();
    return p;
}
}  // namespace

MCNOModel::MCNOModel(const MCNOModel& other)
    : config_(other.config_), sample_sets_(other.sample_sets_), params_(clone_params(other.params_)) {}

MCNOModel& MCNOModel::operator=(const MCNOModel& other) {
    if (this != &other) {
        config_ = other.config_;
        sample_sets_ = other.sample_sets_;
        params_ = clone_params(other.params_);
    }
    return *this;
}

const SampleSet& MCNOModel::samples(std::size_t layer) const {
    return config_.per_layer_samples ? sample_sets_.at(layer) : sample_sets_.front();
}

std::size_t MCNOModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : params_.list()) n += t.numel();
    return n;
}

// --- forward pieces ----------------------------------------------------------

Tensor input_channels(std::span<const GridFunction> inputs, bool coordinate_channel) {
    if (inputs.empty()) throw ShapeError("input_channels: empty batch");
    const std::size_t s = inputs.front().resolution();
    const std::size_t c = coordinate_channel ? 2 : 1;
    std::vector<double> data;
    data.reserve(inputs.size() * s * c);
    for (const auto& a : inputs) {
        if (a.resolution() != s) throw ShapeError("input_channels: mixed resolutions in one batch");
        for (std::size_t j = 0; j < s; ++j) {
            data.push_back(a[j]);
            if (coordinate_channel) data.push_back(a.coordinate(j));
        }
    }
    return Tensor::from({inputs.size(), s, c}, std::move(data));
}

Tensor lift(const Tensor& channels, const Tensor& weight, const Tensor& bias) {
    return add_bias(pointwise_linear(channels, weight), bias);
}

std::shared_ptr<const RowMap> gather_map(const SampleSet& samples, std::size_t s) {
    auto map = std::make_shared<RowMap>();
    map->rows_in = s;
    const double sd = static_cast<double>(s);
    for (double y : samples.coords) {
        const double pos = y * sd;
        const double base = std::floor(pos);
        const double frac = pos - base;
        const std::size_t j0 = static_cast<std::size_t>(base) % s;
        if (frac == 0.0) {
            map->add_row({{j0, 1.0}});
        } else {
            map->add_row({{j0, 1.0 - frac}, {(j0 + 1) % s, frac}});
        }
    }
    return map;
}

Tensor gather_at_samples(const Tensor& v, const SampleSet& samples) {
    if (v.rank() != 3) throw ShapeError("gather_at_samples: expected [B, s, c], got " + shape_string(v.shape()));
    return row_combine(v, gather_map(samples, v.shape()[1]));
}

Tensor kernel_estimate(const Tensor& v_samples, const Tensor& phi, bool mc_scaling) {
    Tensor w = batched_mix(phi, v_samples);
    if (!mc_scaling) return w;
    return scale(w, 1.0 / static_cast<double>(phi.shape()[0]));
}

std::shared_ptr<const RowMap> interpolation_map(const SampleSet& samples, std::size_t s_out) {
    const auto& y = samples.coords;
    const std::size_t n = y.size();
    if (n < 2) throw ConfigError("interpolate_to_grid: need at least 2 samples, got " + std::to_string(n));
    auto map = std::make_shared<RowMap>();
    map->rows_in = n;
    for (std::size_t g = 0; g < s_out; ++g) {
        const double x = static_cast<double>(g) / static_cast<double>(s_out);
        const auto it = std::upper_bound(y.begin(), y.end(), x);
        std::size_t left, right;
        double xl, xr;
        if (it == y.begin()) {
            left = n - 1;
            right = 0;
            xl = y[n - 1] - 1.0;
            xr = y[0];
        } else {
            left = static_cast<std::size_t>(it - y.begin()) - 1;
            if (y[left] == x) {
                map->add_row({{left, 1.0}});
                continue;
            }
            right = left + 1 == n ? 0 : left + 1;
            xl = y[left];
            xr = right == 0 ? y[0] + 1.0 : y[right];
        }
        const double t = (x - xl) / (xr - xl);
        map->add_row({{left, 1.0 - t}, {right, t}});
    }
    return map;
}

Tensor interpolate_to_grid(const SampleSet& samples, const Tensor& w, std::size_t s_out) {
    return row_combine(w, interpolation_map(samples, s_out));
}

Tensor layer_forward(const Tensor& v, const LayerParams& layer, const SampleSet& samples, bool mc_scaling,
                     bool activate) {
    const std::size_t s = v.shape().at(1);
    Tensor local = pointwise_linear(v, layer.w);
    Tensor kernel = interpolate_to_grid(samples, kernel_estimate(gather_at_samples(v, samples), layer.phi, mc_scaling), s);
    Tensor pre = add(local, kernel);
    return activate ? relu(pre) : pre;
}

Tensor forward_batch(const MCNOModel& model, std::span<const GridFunction> inputs) {
    const auto& cfg = model.config();
    const auto& p = model.params();
    if (inputs.empty()) throw ShapeError("forward: empty batch");
    if (inputs.front().resolution() < 2) throw ShapeError("forward: resolution must be >= 2");
    Tensor v = lift(input_channels(inputs, cfg.include_coordinate_channel), p.lift_weight, p.lift_bias);
    for (std::size_t t = 0; t < cfg.layers; ++t) {
        v = layer_forward(v, p.layers[t], model.samples(t), cfg.mc_scaling, t + 1 < cfg.layers);
    }
    Tensor h = relu(add_bias(pointwise_linear(v, p.proj_hidden_weight), p.proj_hidden_bias));
    return add_bias(pointwise_linear(h, p.proj_out_weight), p.proj_out_bias);
}

GridFunction forward(const MCNOModel& model, const GridFunction& a) {
    const Tensor out = forward_batch(model, std::span<const GridFunction>(&a, 1));
    const auto d = out.data();
    return GridFunction(std::vector<double>(d.begin(), d.end()));
}

// --- checkpoints ---------------------------------------------------------------

std::vector<char> encode_checkpoint(const MCNOModel& model) {
    const auto& c = model.config();
    ByteWriter w;
    w.bytes("MCNP");
    w.u32(checkpoint_format_version);
    for (std::size_t v : {c.width, c.layers, c.samples, c.train_resolution, c.projection_hidden, c.in_channels()}) {
        w.u32(static_cast<std::uint32_t>(v));
    }
    const std::uint32_t flags = (c.include_coordinate_channel ? 1u : 0u) | (c.mc_scaling ? 2u : 0u) |
                                (c.per_layer_samples ? 4u : 0u);
    w.u32(flags);
    w.u64(c.sample_seed);
    w.u64(c.init_seed);
    w.u32(static_cast<std::uint32_t>(model.sample_sets().size()));
    for (const auto& set : model.sample_sets()) {
        w.u32(static_cast<std::uint32_t>(set.size()));
        w.u64(set.draw_seed);
        w.f64s(set.coords);
    }
    const auto tensors = model.parameters();
    w.u32(static_cast<std::uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
        w.u32(static_cast<std::uint32_t>(t.rank()));
        for (std::size_t e : t.shape()) w.u32(static_cast<std::uint32_t>(e));
        w.f64s(t.data());
    }
    return w.buffer();
}

MCNOModel decode_checkpoint(std::vector<char> bytes, const std::string& source) {
    ByteReader r(std::move(bytes), source);
    if (r.bytes(4) != "MCNP") throw IoError(source + ": not a checkpoint (bad magic)");
    const auto version = r.u32();
    if (version != checkpoint_format_version) {
        throw IoError(source + ": unsupported checkpoint version " + std::to_string(version));
    }
    MCNOConfig c;
    c.width = r.u32();
    c.layers = r.u32();
    c.samples = r.u32();
    c.train_resolution = r.u32();
    c.projection_hidden = r.u32();
    const std::size_t in_channels = r.u32();
    const auto flags = r.u32();
    c.include_coordinate_channel = (flags & 1u) != 0;
    c.mc_scaling = (flags & 2u) != 0;
    c.per_layer_samples = (flags & 4u) != 0;
    c.sample_seed = r.u64();
    c.init_seed = r.u64();
    if (in_channels != c.in_channels()) throw IoError(source + ": inconsistent channel count");

    std::vector<SampleSet> sets(r.u32());
    for (auto& set : sets) {
        set.coords.resize(r.u32());
        set.draw_seed = r.u64();
        r.f64s(set.coords);
    }
    std::vector<Tensor> tensors(r.u32());
    for (auto& t : tensors) {
        Shape shape(r.u32());
        for (auto& e : shape) e = r.u32();
        std::vector<double> values(shape_numel(shape));
        r.f64s(values);
        t = Tensor::parameter(std::move(shape), std::move(values));
    }
    if (r.remaining() != 0) throw IoError(source + ": trailing bytes");

    const std::size_t expected = 2 + 2 * c.layers + 4;
    if (tensors.size() != expected) throw IoError(source + ": unexpected parameter tensor count");
    const std::size_t dv = c.width, hid = c.projection_hidden;
    auto expect = [&](const Tensor& t, const Shape& s) {
        if (t.shape() != s) {
            throw IoError(source + ": parameter shape " + shape_string(t.shape()) + ", expected " + shape_string(s));
        }
    };
    MCNOParameters p;
    std::size_t k = 0;
    p.lift_weight = tensors[k++];
    expect(p.lift_weight, {c.in_channels(), dv});
    p.lift_bias = tensors[k++];
    expect(p.lift_bias, {dv});
    for (std::size_t t = 0; t < c.layers; ++t) {
        LayerParams l{tensors[k], tensors[k + 1]};
        k += 2;
        expect(l.w, {dv, dv});
        expect(l.phi, {c.samples, dv, dv});
        p.layers.push_back(std::move(l));
    }
    p.proj_hidden_weight = tensors[k++];
    expect(p.proj_hidden_weight, {dv, hid});
    p.proj_hidden_bias = tensors[k++];
    expect(p.proj_hidden_bias, {hid});
    p.proj_out_weight = tensors[k++];
    expect(p.proj_out_weight, {hid, 1});
    p.proj_out_bias = tensors[k++];
    expect(p.proj_out_bias, {1});
    try {
        return MCNOModel(c, std::move(sets), std::move(p));
    } catch (const ConfigError& e) {
        throw IoError(source + ": " + e.what());
    }
}

void save_checkpoint(const MCNOModel& model, const std::filesystem::path& path) {
    const auto bytes = encode_checkpoint(model);
    write_file_atomic(path, std::span<const char>(bytes));
}

MCNOModel load_checkpoint(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoError("checkpoint not found: " + path.string());
    return decode_checkpoint(read_file(path), path.string());
}

std::vector<char> parameter_bytes(const MCNOModel& model) {
    ByteWriter w;
    for (const auto& t : model.parameters()) w.f64s(t.data());
    return w.buffer();
}

}  // namespace mcno
