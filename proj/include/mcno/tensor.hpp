#pragma once

// Dense float64 tensors with tape-based reverse-mode differentiation.
//
// Every op computes its output eagerly. When at least one input requires a
// gradient and a Tape is active on the calling thread, the op appends a
// TapeNode describing how to push gradients back to its inputs. backward()
// replays the active tape once, in reverse creation order, and then clears it.
//
// There is no implicit broadcasting. The only scalar-vs-tensor forms are the
// rank-0 right-hand operand of the elementwise ops; row-wise bias addition and
// the sparse row maps used for interpolation are explicit ops.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mcno {

using Shape = std::vector<std::size_t>;

[[nodiscard]] std::size_t shape_numel(const Shape& shape);
[[nodiscard]] std::string shape_string(const Shape& shape);

class Tape;

namespace detail {
struct TensorStorage;
}

class Tensor {
public:
    // Rank-0 zero.
    Tensor();

    [[nodiscard]] static Tensor zeros(Shape shape);
    [[nodiscard]] static Tensor full(Shape shape, double value);
    [[nodiscard]] static Tensor from(Shape shape, std::vector<double> values);
    [[nodiscard]] static Tensor scalar(double value);
    // Leaf tensor with requires_grad set; used for trainable parameters.
    [[nodiscard]] static Tensor parameter(Shape shape, std::vector<double> values);

    [[nodiscard]] const Shape& shape() const;
    [[nodiscard]] std::size_t rank() const { return shape().size(); }
    [[nodiscard]] std::size_t numel() const;
    [[nodiscard]] std::uint64_t id() const;

    [[nodiscard]] std::span<const double> data() const;
    // Writes bypass the tape. Only optimizers and initializers should call this,
    // and never while the tensor is referenced by a live tape node.
    [[nodiscard]] std::span<double> mutable_data();
    [[nodiscard]] double item() const;

    [[nodiscard]] bool requires_grad() const;
    void set_requires_grad(bool flag);

    [[nodiscard]] bool has_grad() const;
    [[nodiscard]] std::span<const double> grad() const;
    // Allocates a zero gradient buffer on first use.
    [[nodiscard]] std::span<double> mutable_grad();
    void zero_grad();

    // True when this tensor was produced by a node on the given tape.
    [[nodiscard]] bool produced_on(const Tape& tape) const;

    // Deep copy of the values; the copy is detached from any tape.
    [[nodiscard]] Tensor clone() const;

private:
    explicit Tensor(std::shared_ptr<detail::TensorStorage> storage);
    std::shared_ptr<detail::TensorStorage> storage_;

    friend class Tape;
    friend struct TensorAccess;
};

enum class OpKind : std::uint8_t {
    add,
    sub,
    mul,
    scale,
    add_bias,
    matmul,
    pointwise_linear,
    batched_mix,
    relu,
    sum,
    row_combine,
    mean_relative_l2,
};

[[nodiscard]] const char* op_name(OpKind kind);

// Fixed sparse linear map between row spaces, stored CSR-style: output row r is
// sum_e weight[e] * input row source[e] for e in [offsets[r], offsets[r+1]).
struct RowMap {
    std::size_t rows_in = 0;
    std::vector<std::size_t> offsets{0};
    std::vector<std::size_t> source;
    std::vector<double> weight;

    [[nodiscard]] std::size_t rows_out() const { return offsets.size() - 1; }
    void add_row(std::initializer_list<std::pair<std::size_t, double>> entries);
};

struct SavedContext {
    double scalar = 0.0;
    bool scalar_rhs = false;
    std::shared_ptr<const RowMap> row_map;
};

struct TapeNode {
    OpKind op = OpKind::add;
    std::vector<std::uint64_t> input_ids;
    std::uint64_t output_id = 0;
    SavedContext saved;
};

class Tape {
public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    [[nodiscard]] std::size_t size() const;
    [[nodiscard]] const TapeNode& node(std::size_t index) const;

    // Fills grad on every requires_grad tensor reachable from `loss`, then
    // clears the tape. Leaf gradients accumulate; call zero_grad between steps.
    void backward(const Tensor& loss);
    void clear();

    // Appends a node; called by the ops.
    void record(OpKind op, std::vector<Tensor> inputs, const Tensor& output,
                SavedContext saved = {});

private:
    struct Entry;
    std::vector<Entry> entries_;
};

// Makes `tape` the active tape of the calling thread for the scope lifetime.
class TapeScope {
public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* previous_;
};

[[nodiscard]] Tape* active_tape();

// Runs backward on the active tape.
void backward(const Tensor& loss);

// When enabled every op output is scanned for NaN/Inf and a NumericalError
// names the producing op. Defaults to on in builds without NDEBUG.
void set_finite_checks(bool enabled);
[[nodiscard]] bool finite_checks();

// --- ops -------------------------------------------------------------------

[[nodiscard]] Tensor add(const Tensor& a, const Tensor& b);
[[nodiscard]] Tensor sub(const Tensor& a, const Tensor& b);
[[nodiscard]] Tensor mul(const Tensor& a, const Tensor& b);
[[nodiscard]] Tensor scale(const Tensor& a, double factor);

// x[..., n] + bias[n], the bias repeated over all leading positions.
[[nodiscard]] Tensor add_bias(const Tensor& x, const Tensor& bias);

// a[m, k] . b[k, n]
[[nodiscard]] Tensor matmul(const Tensor& a, const Tensor& b);

// x[B, n, k] . w[k, m] -> [B, n, m]; a matmul over the flattened leading rows.
[[nodiscard]] Tensor pointwise_linear(const Tensor& x, const Tensor& w);

// out[i] = phi[i] . v[i] for phi[N, o, c] and v[N, c] (or v[B, N, c] with the
// same phi applied to every batch entry).
[[nodiscard]] Tensor batched_mix(const Tensor& phi, const Tensor& v);

[[nodiscard]] Tensor relu(const Tensor& x);

// Sum of all entries as a rank-0 tensor.
[[nodiscard]] Tensor sum(const Tensor& x);

// x[B, rows_in, c] -> [B, rows_out, c] through the row map.
[[nodiscard]] Tensor row_combine(const Tensor& x, std::shared_ptr<const RowMap> map);

// Mean over the leading axis of ||pred_b - target_b|| / ||target_b||. The
// target is treated as a constant. Throws NumericalError for a zero-norm target.
[[nodiscard]] Tensor mean_relative_l2(const Tensor& pred, const Tensor& target);

}  // namespace mcno
