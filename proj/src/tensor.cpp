#include "mcno/tensor.hpp"

#include "mcno/error.hpp"

#include <cblas.h>

#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <utility>

namespace mcno {

namespace detail {

struct TensorStorage {
    std::uint64_t id = 0;
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
    const Tape* tape = nullptr;
    std::size_t node = 0;
};

namespace {
std::atomic<std::uint64_t> next_id{1};
}

std::shared_ptr<TensorStorage> make_storage(Shape shape, std::vector<double> data) {
    if (shape_numel(shape) != data.size()) {
        throw ShapeError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_string(shape));
    }
    auto s = std::make_shared<TensorStorage>();
    s->id = next_id.fetch_add(1, std::memory_order_relaxed);
    s->shape = std::move(shape);
    s->data = std::move(data);
    return s;
}

}  // namespace detail

struct TensorAccess {
    static detail::TensorStorage& get(const Tensor& t) { return *t.storage_; }
    static const std::shared_ptr<detail::TensorStorage>& ptr(const Tensor& t) { return t.storage_; }
    static Tensor wrap(std::shared_ptr<detail::TensorStorage> s) { return Tensor(std::move(s)); }
};

namespace {

using detail::TensorStorage;

thread_local Tape* g_active_tape = nullptr;

#ifdef NDEBUG
bool g_finite_checks = false;
#else
bool g_finite_checks = true;
#endif

TensorStorage& st(const Tensor& t) { return TensorAccess::get(t); }

std::vector<double>& grad_buffer(TensorStorage& s) {
    if (s.grad.empty()) s.grad.assign(s.data.size(), 0.0);
    return s.grad;
}

Tensor make_output(Shape shape, std::vector<double> data, OpKind op) {
    if (g_finite_checks) {
        for (double v : data) {
            if (!std::isfinite(v)) {
                throw NumericalError(std::string("non-finite value produced by op '") +
                                     op_name(op) + "'");
            }
        }
    }
    return TensorAccess::wrap(detail::make_storage(std::move(shape), std::move(data)));
}

// Records `op` on the active tape when any input needs a gradient.
void maybe_record(OpKind op, std::vector<Tensor> inputs, const Tensor& out,
                  SavedContext saved = {}) {
    Tape* tape = g_active_tape;
    if (tape == nullptr) return;
    bool needs = false;
    for (const auto& in : inputs) needs = needs || in.requires_grad();
    if (!needs) return;
    tape->record(op, std::move(inputs), out, std::move(saved));
}

int blas_int(std::size_t v) {
    if (v > static_cast<std::size_t>(std::numeric_limits<int>::max())) {
        throw ShapeError("matrix extent too large for BLAS: " + std::to_string(v));
    }
    return static_cast<int>(v);
}

[[noreturn]] void shape_mismatch(const char* what, const Shape& a, const Shape& b) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_string(a) + " vs " +
                     shape_string(b));
}

// GEMM kernels on row-major buffers, all accumulating into c.

// c[m, n] += a[m, k] . b[k, n]
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
             double* c) {
    if (m == 0 || n == 0 || k == 0) return;
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, blas_int(m), blas_int(n), blas_int(k), 1.0, a,
                blas_int(k), b, blas_int(n), 1.0, c, blas_int(n));
}

// c[m, k] += g[m, n] . b[k, n]^T
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* g, const double* b,
             double* c) {
    if (m == 0 || n == 0 || k == 0) return;
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, blas_int(m), blas_int(k), blas_int(n), 1.0, g,
                blas_int(n), b, blas_int(n), 1.0, c, blas_int(k));
}

// c[k, n] += a[m, k]^T . g[m, n]
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* g,
             double* c) {
    if (m == 0 || n == 0 || k == 0) return;
    cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, blas_int(k), blas_int(n), blas_int(m), 1.0, a,
                blas_int(k), g, blas_int(n), 1.0, c, blas_int(n));
}

struct MixDims {
    std::size_t batch, samples, out, in;
};

MixDims mix_dims(const Shape& phi, const Shape& v) {
    if (phi.size() != 3) shape_mismatch("batched_mix (phi must be [N, o, c])", phi, v);
    if (v.size() == 2) {
        if (v[0] != phi[0] || v[1] != phi[2]) shape_mismatch("batched_mix", phi, v);
        return {1, phi[0], phi[1], phi[2]};
    }
    if (v.size() == 3) {
        if (v[1] != phi[0] || v[2] != phi[2]) shape_mismatch("batched_mix", phi, v);
        return {v[0], phi[0], phi[1], phi[2]};
    }
    shape_mismatch("batched_mix (v must be [N, c] or [B, N, c])", phi, v);
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

const char* op_name(OpKind kind) {
    switch (kind) {
        case OpKind::add: return "add";
        case OpKind::sub: return "sub";
        case OpKind::mul: return "mul";
        case OpKind::scale: return "scale";
        case OpKind::add_bias: return "add_bias";
        case OpKind::matmul: return "matmul";
        case OpKind::pointwise_linear: return "pointwise_linear";
        case OpKind::batched_mix: return "batched_mix";
        case OpKind::relu: return "relu";
        case OpKind::sum: return "sum";
        case OpKind::row_combine: return "row_combine";
        case OpKind::mean_relative_l2: return "mean_relative_l2";
    }
    return "unknown";
}

void RowMap::add_row(std::initializer_list<std::pair<std::size_t, double>> entries) {
    for (const auto& [src, w] : entries) {
        source.push_back(src);
        weight.push_back(w);
    }
    offsets.push_back(source.size());
}

// --- Tensor ------------------------------------------------------------------

Tensor::Tensor() : storage_(detail::make_storage({}, {0.0})) {}

Tensor::Tensor(std::shared_ptr<detail::TensorStorage> storage) : storage_(std::move(storage)) {}

Tensor Tensor::zeros(Shape shape) {
    const auto n = shape_numel(shape);
    return Tensor(detail::make_storage(std::move(shape), std::vector<double>(n, 0.0)));
}

Tensor Tensor::full(Shape shape, double value) {
    const auto n = shape_numel(shape);
    return Tensor(detail::make_storage(std::move(shape), std::vector<double>(n, value)));
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
    return Tensor(detail::make_storage(std::move(shape), std::move(values)));
}

Tensor Tensor::scalar(double value) { return Tensor(detail::make_storage({}, {value})); }

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
    Tensor t = from(std::move(shape), std::move(values));
    t.storage_->requires_grad = true;
    return t;
}

const Shape& Tensor::shape() const { return storage_->shape; }
std::size_t Tensor::numel() const { return storage_->data.size(); }
std::uint64_t Tensor::id() const { return storage_->id; }
std::span<const double> Tensor::data() const { return storage_->data; }
std::span<double> Tensor::mutable_data() { return storage_->data; }

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape()));
    return storage_->data[0];
}

bool Tensor::requires_grad() const { return storage_->requires_grad; }
void Tensor::set_requires_grad(bool flag) { storage_->requires_grad = flag; }
bool Tensor::has_grad() const { return !storage_->grad.empty(); }
std::span<const double> Tensor::grad() const { return storage_->grad; }
std::span<double> Tensor::mutable_grad() { return grad_buffer(*storage_); }

void Tensor::zero_grad() {
    std::fill(storage_->grad.begin(), storage_->grad.end(), 0.0);
}

bool Tensor::produced_on(const Tape& tape) const { return storage_->tape == &tape; }

Tensor Tensor::clone() const {
    auto copy = detail::make_storage(storage_->shape, storage_->data);
    copy->requires_grad = storage_->requires_grad;
    return Tensor(std::move(copy));
}

// --- Tape --------------------------------------------------------------------

struct Tape::Entry {
    TapeNode node;
    std::vector<std::shared_ptr<TensorStorage>> inputs;
    std::shared_ptr<TensorStorage> output;
};

Tape::Tape() = default;

Tape::~Tape() { clear(); }

std::size_t Tape::size() const { return entries_.size(); }

const TapeNode& Tape::node(std::size_t index) const { return entries_.at(index).node; }

void Tape::clear() {
    for (auto& e : entries_) {
        if (e.output->tape == this) e.output->tape = nullptr;
    }
    entries_.clear();
}

void Tape::record(OpKind op, std::vector<Tensor> inputs, const Tensor& output, SavedContext saved) {
    Entry e;
    e.node.op = op;
    e.node.output_id = output.id();
    e.node.saved = std::move(saved);
    for (const auto& in : inputs) {
        e.node.input_ids.push_back(in.id());
        e.inputs.push_back(TensorAccess::ptr(in));
    }
    e.output = TensorAccess::ptr(output);
    e.output->requires_grad = true;
    e.output->tape = this;
    e.output->node = entries_.size();
    entries_.push_back(std::move(e));
}

void Tape::backward(const Tensor& loss) {
    if (loss.numel() != 1) {
        throw ShapeError("backward: loss must be scalar, got shape " + shape_string(loss.shape()));
    }
    if (!loss.produced_on(*this)) {
        throw Error("backward: loss was not produced on this tape");
    }
    TensorStorage& ls = st(loss);
    grad_buffer(ls)[0] = 1.0;

    for (std::size_t idx = ls.node + 1; idx-- > 0;) {
        Entry& e = entries_[idx];
        TensorStorage& out = *e.output;
        if (out.grad.empty()) continue;
        const std::vector<double>& g = out.grad;
        auto wants = [&](std::size_t i) { return e.inputs[i]->requires_grad; };
        auto gin = [&](std::size_t i) -> std::vector<double>& { return grad_buffer(*e.inputs[i]); };

        switch (e.node.op) {
            case OpKind::add:
            case OpKind::sub: {
                const double sign = e.node.op == OpKind::add ? 1.0 : -1.0;
                if (wants(0)) {
                    auto& ga = gin(0);
                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                }
                if (wants(1)) {
                    auto& gb = gin(1);
                    if (e.node.saved.scalar_rhs) {
                        double acc = 0.0;
                        for (double v : g) acc += v;
                        gb[0] += sign * acc;
                    } else {
                        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += sign * g[i];
                    }
                }
                break;
            }
            case OpKind::mul: {
                const auto& a = e.inputs[0]->data;
                const auto& b = e.inputs[1]->data;
                const bool sc = e.node.saved.scalar_rhs;
                if (wants(0)) {
                    auto& ga = gin(0);
                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[sc ? 0 : i];
                }
                if (wants(1)) {
                    auto& gb = gin(1);
                    if (sc) {
                        double acc = 0.0;
                        for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * a[i];
                        gb[0] += acc;
                    } else {
                        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
                    }
                }
                break;
            }
            case OpKind::scale: {
                if (wants(0)) {
                    auto& ga = gin(0);
                    const double c = e.node.saved.scalar;
                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
                }
                break;
            }
            case OpKind::add_bias: {
                const std::size_t n = e.inputs[1]->data.size();
                if (wants(0)) {
                    auto& gx = gin(0);
                    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                }
                if (wants(1)) {
                    auto& gb = gin(1);
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i % n] += g[i];
                }
                break;
            }
            case OpKind::matmul:
            case OpKind::pointwise_linear: {
                const auto& a = *e.inputs[0];
                const auto& b = *e.inputs[1];
                const std::size_t k = b.shape[0];
                const std::size_t n = b.shape[1];
                const std::size_t m = a.data.size() / k;
                if (wants(0)) gemm_nt(m, n, k, g.data(), b.data.data(), gin(0).data());
                if (wants(1)) gemm_tn(m, k, n, a.data.data(), g.data(), gin(1).data());
                break;
            }
            case OpKind::batched_mix: {
                const auto& phi = e.inputs[0]->data;
                const auto& v = e.inputs[1]->data;
                const MixDims d = mix_dims(e.inputs[0]->shape, e.inputs[1]->shape);
                // Per sample i, with rows b strided by samples * width:
                //   grad phi_i += g_i^T v_i,  grad v_i += g_i phi_i
                const int ldv = blas_int(d.samples * d.in), ldg = blas_int(d.samples * d.out);
                const bool empty = d.batch == 0 || d.out == 0 || d.in == 0;
                if (wants(0) && !empty) {
                    auto& gphi = gin(0);
                    for (std::size_t i = 0; i < d.samples; ++i) {
                        cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, blas_int(d.out), blas_int(d.in),
                                    blas_int(d.batch), 1.0, g.data() + i * d.out, ldg, v.data() + i * d.in, ldv,
                                    1.0, gphi.data() + i * d.out * d.in, blas_int(d.in));
                    }
                }
                if (wants(1) && !empty) {
                    auto& gv = gin(1);
                    for (std::size_t i = 0; i < d.samples; ++i) {
                        cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, blas_int(d.batch), blas_int(d.in),
                                    blas_int(d.out), 1.0, g.data() + i * d.out, ldg,
                                    phi.data() + i * d.out * d.in, blas_int(d.in), 1.0, gv.data() + i * d.in, ldv);
                    }
                }
                break;
            }
            case OpKind::relu: {
                if (wants(0)) {
                    const auto& x = e.inputs[0]->data;
                    auto& gx = gin(0);
                    for (std::size_t i = 0; i < g.size(); ++i) {
                        if (x[i] > 0.0) gx[i] += g[i];
                    }
                }
                break;
            }
            case OpKind::sum: {
                if (wants(0)) {
                    auto& gx = gin(0);
                    for (double& v : gx) v += g[0];
                }
                break;
            }
            case OpKind::row_combine: {
                if (wants(0)) {
                    const RowMap& map = *e.node.saved.row_map;
                    const auto& in_shape = e.inputs[0]->shape;
                    const std::size_t batch = in_shape[0];
                    const std::size_t ch = in_shape[2];
                    const std::size_t rows_out = map.rows_out();
                    auto& gx = gin(0);
                    for (std::size_t b = 0; b < batch; ++b) {
                        for (std::size_t r = 0; r < rows_out; ++r) {
                            const double* gr = g.data() + (b * rows_out + r) * ch;
                            for (std::size_t e2 = map.offsets[r]; e2 < map.offsets[r + 1]; ++e2) {
                                const double w = map.weight[e2];
                                double* dst = gx.data() + (b * map.rows_in + map.source[e2]) * ch;
                                for (std::size_t c = 0; c < ch; ++c) dst[c] += w * gr[c];
                            }
                        }
                    }
                }
                break;
            }
            case OpKind::mean_relative_l2: {
                if (wants(0)) {
                    const auto& p = e.inputs[0]->data;
                    const auto& t = e.inputs[1]->data;
                    const std::size_t batch = e.inputs[0]->shape[0];
                    const std::size_t len = p.size() / batch;
                    auto& gp = gin(0);
                    for (std::size_t b = 0; b < batch; ++b) {
                        double diff2 = 0.0, tgt2 = 0.0;
                        for (std::size_t j = 0; j < len; ++j) {
                            const double d = p[b * len + j] - t[b * len + j];
                            diff2 += d * d;
                            tgt2 += t[b * len + j] * t[b * len + j];
                        }
                        const double dn = std::sqrt(diff2);
                        if (dn == 0.0) continue;
                        const double coef = g[0] / (dn * std::sqrt(tgt2) * static_cast<double>(batch));
                        for (std::size_t j = 0; j < len; ++j) {
                            gp[b * len + j] += coef * (p[b * len + j] - t[b * len + j]);
                        }
                    }
                }
                break;
            }
        }
    }
    clear();
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

Tape* active_tape() { return g_active_tape; }

void backward(const Tensor& loss) {
    if (g_active_tape == nullptr) throw Error("backward: no active tape");
    g_active_tape->backward(loss);
}

void set_finite_checks(bool enabled) { g_finite_checks = enabled; }
bool finite_checks() { return g_finite_checks; }

// --- ops -----------------------------------------------------------------------

namespace {

Tensor elementwise(OpKind op, const Tensor& a, const Tensor& b) {
    const bool scalar_rhs = b.rank() == 0;
    if (!scalar_rhs && a.shape() != b.shape()) shape_mismatch(op_name(op), a.shape(), b.shape());
    const auto x = a.data();
    const auto y = b.data();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double yv = y[scalar_rhs ? 0 : i];
        switch (op) {
            case OpKind::add: out[i] = x[i] + yv; break;
            case OpKind::sub: out[i] = x[i] - yv; break;
            default: out[i] = x[i] * yv; break;
        }
    }
    Tensor r = make_output(a.shape(), std::move(out), op);
    SavedContext saved;
    saved.scalar_rhs = scalar_rhs;
    maybe_record(op, {a, b}, r, std::move(saved));
    return r;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(OpKind::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(OpKind::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(OpKind::mul, a, b); }

Tensor scale(const Tensor& a, double factor) {
    std::vector<double> out(a.data().begin(), a.data().end());
    for (double& v : out) v *= factor;
    Tensor r = make_output(a.shape(), std::move(out), OpKind::scale);
    SavedContext saved;
    saved.scalar = factor;
    maybe_record(OpKind::scale, {a}, r, std::move(saved));
    return r;
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
    if (bias.rank() != 1 || x.rank() == 0 || x.shape().back() != bias.shape()[0]) {
        shape_mismatch("add_bias", x.shape(), bias.shape());
    }
    const std::size_t n = bias.numel();
    const auto b = bias.data();
    std::vector<double> out(x.data().begin(), x.data().end());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i % n];
    Tensor r = make_output(x.shape(), std::move(out), OpKind::add_bias);
    maybe_record(OpKind::add_bias, {x, bias}, r);
    return r;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
        shape_mismatch("matmul", a.shape(), b.shape());
    }
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    std::vector<double> out(m * n, 0.0);
    gemm_nn(m, k, n, a.data().data(), b.data().data(), out.data());
    Tensor r = make_output({m, n}, std::move(out), OpKind::matmul);
    maybe_record(OpKind::matmul, {a, b}, r);
    return r;
}

Tensor pointwise_linear(const Tensor& x, const Tensor& w) {
    if (x.rank() != 3 || w.rank() != 2 || x.shape()[2] != w.shape()[0]) {
        shape_mismatch("pointwise_linear", x.shape(), w.shape());
    }
    const std::size_t rows = x.shape()[0] * x.shape()[1];
    const std::size_t k = w.shape()[0], n = w.shape()[1];
    std::vector<double> out(rows * n, 0.0);
    gemm_nn(rows, k, n, x.data().data(), w.data().data(), out.data());
    Tensor r = make_output({x.shape()[0], x.shape()[1], n}, std::move(out), OpKind::pointwise_linear);
    maybe_record(OpKind::pointwise_linear, {x, w}, r);
    return r;
}

Tensor batched_mix(const Tensor& phi, const Tensor& v) {
    const MixDims d = mix_dims(phi.shape(), v.shape());
    const auto p = phi.data();
    const auto x = v.data();
    std::vector<double> out(d.batch * d.samples * d.out, 0.0);
    if (d.batch > 0 && d.out > 0 && d.in > 0) {
        // out_i[B, o] = v_i[B, c] . phi_i^T, rows strided by samples * width.
        for (std::size_t i = 0; i < d.samples; ++i) {
            cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, blas_int(d.batch), blas_int(d.out),
                        blas_int(d.in), 1.0, x.data() + i * d.in, blas_int(d.samples * d.in),
                        p.data() + i * d.out * d.in, blas_int(d.in), 0.0, out.data() + i * d.out,
                        blas_int(d.samples * d.out));
        }
    }
    Shape shape = v.rank() == 2 ? Shape{d.samples, d.out} : Shape{d.batch, d.samples, d.out};
    Tensor r = make_output(std::move(shape), std::move(out), OpKind::batched_mix);
    maybe_record(OpKind::batched_mix, {phi, v}, r);
    return r;
}

Tensor relu(const Tensor& x) {
    std::vector<double> out(x.data().begin(), x.data().end());
    for (double& v : out) v = v > 0.0 ? v : 0.0;
    Tensor r = make_output(x.shape(), std::move(out), OpKind::relu);
    maybe_record(OpKind::relu, {x}, r);
    return r;
}

Tensor sum(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    Tensor r = make_output({}, {acc}, OpKind::sum);
    maybe_record(OpKind::sum, {x}, r);
    return r;
}

Tensor row_combine(const Tensor& x, std::shared_ptr<const RowMap> map) {
    if (!map) throw Error("row_combine: null row map");
    if (x.rank() != 3 || x.shape()[1] != map->rows_in) {
        shape_mismatch("row_combine", x.shape(), Shape{0, map->rows_in, 0});
    }
    const std::size_t batch = x.shape()[0], ch = x.shape()[2], rows_out = map->rows_out();
    const auto in = x.data();
    std::vector<double> out(batch * rows_out * ch, 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t r = 0; r < rows_out; ++r) {
            double* dst = out.data() + (b * rows_out + r) * ch;
            for (std::size_t e = map->offsets[r]; e < map->offsets[r + 1]; ++e) {
                const double w = map->weight[e];
                const double* src = in.data() + (b * map->rows_in + map->source[e]) * ch;
                for (std::size_t c = 0; c < ch; ++c) dst[c] += w * src[c];
            }
        }
    }
    Tensor r = make_output({batch, rows_out, ch}, std::move(out), OpKind::row_combine);
    SavedContext saved;
    saved.row_map = std::move(map);
    maybe_record(OpKind::row_combine, {x}, r, std::move(saved));
    return r;
}

Tensor mean_relative_l2(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape() || pred.rank() == 0 || pred.shape()[0] == 0) {
        shape_mismatch("mean_relative_l2", pred.shape(), target.shape());
    }
    const std::size_t batch = pred.shape()[0];
    const std::size_t len = pred.numel() / batch;
    const auto p = pred.data();
    const auto t = target.data();
    double total = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
        double diff2 = 0.0, tgt2 = 0.0;
        for (std::size_t j = 0; j < len; ++j) {
            const double d = p[b * len + j] - t[b * len + j];
            diff2 += d * d;
            tgt2 += t[b * len + j] * t[b * len + j];
        }
        if (tgt2 == 0.0) throw NumericalError("relative L2 with zero-norm target");
        total += std::sqrt(diff2) / std::sqrt(tgt2);
    }
    Tensor r = make_output({}, {total / static_cast<double>(batch)}, OpKind::mean_relative_l2);
    maybe_record(OpKind::mean_relative_l2, {pred, target}, r);
    return r;
}

}  // namespace mcno
