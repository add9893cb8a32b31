#pragma once

// Monte Carlo-type neural operator.
//
//   v_0(x)     = P [a(x); x]
//   v_{t+1}(x) = relu( v_t(x) W_t + I_s( (1/N) phi_t,i v_t(y_i) ) )
//   G(a)(x)    = Q v_T(x)
//
// y_1..y_N are fixed sample coordinates in [0, 1), v_t(y_i) is read by periodic
// linear interpolation of the grid values, and I_s is periodic piecewise-linear
// interpolation of the per-sample outputs back onto the s-point grid. The last
// operator layer has no activation. Q is affine -> relu -> affine.
//
// Every parameter shape depends on (width, layers, samples, in_channels,
// projection_hidden) only, so one model evaluates at any grid resolution.

#include "mcno/grid_function.hpp"
#include "mcno/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

namespace mcno {

struct MCNOConfig {
    std::size_t width = 64;
    std::size_t layers = 4;
    std::size_t samples = 100;
    // Grid the sample coordinates are drawn from.
    std::size_t train_resolution = 256;
    std::uint64_t sample_seed = 0;
    std::uint64_t init_seed = 0;
    bool include_coordinate_channel = true;
    std::size_t projection_hidden = 128;
    // Applies the 1/N Monte Carlo prefactor in the kernel path.
    bool mc_scaling = true;
    // Draw a separate sample set per layer instead of one shared set.
    bool per_layer_samples = false;

    [[nodiscard]] std::size_t in_channels() const { return include_coordinate_channel ? 2 : 1; }
    void validate() const;
};

struct SampleSet {
    std::vector<double> coords;  // strictly increasing, in [0, 1)
    std::uint64_t draw_seed = 0;

    [[nodiscard]] std::size_t size() const { return coords.size(); }
};

// N distinct grid indices of the resolution-s grid, drawn uniformly without
// replacement (partial Fisher-Yates over mt19937_64), sorted and stored as j/s.
[[nodiscard]] SampleSet sample_points(std::size_t count, std::size_t grid_resolution,
                                      std::uint64_t seed);

struct LayerParams {
    Tensor w;    // [width, width], applied as v . w
    Tensor phi;  // [N, width, width], phi[i] maps input channels to output channels
};

struct MCNOParameters {
    Tensor lift_weight;  // [in_channels, width]
    Tensor lift_bias;    // [width]
    std::vector<LayerParams> layers;
    Tensor proj_hidden_weight;  // [width, projection_hidden]
    Tensor proj_hidden_bias;    // [projection_hidden]
    Tensor proj_out_weight;     // [projection_hidden, 1]
    Tensor proj_out_bias;       // [1]

    // Fixed order: lift w, lift b, (W_t, phi_t) per layer, Q hidden w, b, Q out w, b.
    [[nodiscard]] std::vector<Tensor> list() const;
};

class MCNOModel {
public:
    MCNOModel(MCNOConfig config, std::vector<SampleSet> sample_sets, MCNOParameters params);

    // Draws the sample set(s) and initializes parameters:
    // P, W, Q entries ~ U[-1/sqrt(fan_in), 1/sqrt(fan_in)] (biases included),
    // phi entries ~ U[-1/width, 1/width], times N when mc_scaling is on.
    [[nodiscard]] static MCNOModel initialize(const MCNOConfig& config);

    // Copies are deep: parameters are cloned.
    MCNOModel(const MCNOModel& other);
    MCNOModel& operator=(const MCNOModel& other);
    MCNOModel(MCNOModel&&) noexcept = default;
    MCNOModel& operator=(MCNOModel&&) noexcept = default;

    [[nodiscard]] const MCNOConfig& config() const { return config_; }
    [[nodiscard]] const SampleSet& samples(std::size_t layer) const;
    [[nodiscard]] const std::vector<SampleSet>& sample_sets() const { return sample_sets_; }
    [[nodiscard]] const MCNOParameters& params() const { return params_; }
    [[nodiscard]] MCNOParameters& params() { return params_; }
    [[nodiscard]] std::vector<Tensor> parameters() const { return params_.list(); }
    [[nodiscard]] std::size_t parameter_count() const;

private:
    MCNOConfig config_;
    std::vector<SampleSet> sample_sets_;
    MCNOParameters params_;
};

// [B, s, in_channels] channel stack of a(x) and, optionally, x = j/s.
[[nodiscard]] Tensor input_channels(std::span<const GridFunction> inputs, bool coordinate_channel);

// Per-point affine map: channels[B, s, in] . weight + bias -> [B, s, width].
[[nodiscard]] Tensor lift(const Tensor& channels, const Tensor& weight, const Tensor& bias);

// Row map reading a resolution-s grid at the sample coordinates by periodic
// linear interpolation; a pure gather where y_i * s is an integer.
[[nodiscard]] std::shared_ptr<const RowMap> gather_map(const SampleSet& samples, std::size_t s);

// v[B, s, width] -> [B, N, width]
[[nodiscard]] Tensor gather_at_samples(const Tensor& v, const SampleSet& samples);

// w_i = phi_i v_i, divided by N when mc_scaling is on.
[[nodiscard]] Tensor kernel_estimate(const Tensor& v_samples, const Tensor& phi, bool mc_scaling);

// Row map for periodic piecewise-linear interpolation of N >= 2 sample values
// onto the s_out grid; the interval after the last sample wraps through x = 1.
[[nodiscard]] std::shared_ptr<const RowMap> interpolation_map(const SampleSet& samples,
                                                              std::size_t s_out);

// w[B, N, width] -> [B, s_out, width]
[[nodiscard]] Tensor interpolate_to_grid(const SampleSet& samples, const Tensor& w, std::size_t s_out);

[[nodiscard]] Tensor layer_forward(const Tensor& v, const LayerParams& layer, const SampleSet& samples,
                                   bool mc_scaling, bool activate);

// Batch forward pass; every input must share one resolution. Returns [B, s, 1].
[[nodiscard]] Tensor forward_batch(const MCNOModel& model, std::span<const GridFunction> inputs);

[[nodiscard]] GridFunction forward(const MCNOModel& model, const GridFunction& a);

// Checkpoint (little-endian):
//   "MCNP" | version u32 |
//   width, layers, samples, train_resolution, projection_hidden, in_channels,
//   flags u32 (bit0 coordinate channel, bit1 mc_scaling, bit2 per-layer samples) |
//   sample_seed u64 | init_seed u64 |
//   set_count u32 | per set: size u32, draw_seed u64, coords f64 x size |
//   tensor_count u32 | per tensor, in MCNOParameters::list() order:
//   rank u32, extents u32 x rank, values f64 x numel
inline constexpr std::uint32_t checkpoint_format_version = 1;

[[nodiscard]] std::vector<char> encode_checkpoint(const MCNOModel& model);
[[nodiscard]] MCNOModel decode_checkpoint(std::vector<char> bytes, const std::string& source);
void save_checkpoint(const MCNOModel& model, const std::filesystem::path& path);
[[nodiscard]] MCNOModel load_checkpoint(const std::filesystem::path& path);

// Parameter values only, in list() order, as raw little-endian f64 bytes.
[[nodiscard]] std::vector<char> parameter_bytes(const MCNOModel& model);

}  // namespace mcno
