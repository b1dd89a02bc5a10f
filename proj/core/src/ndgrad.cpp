#include "cp3er/ndgrad.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <utility>

namespace cp3er {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMatrix = Eigen::Map<RowMatrix>;
using ConstMapMatrix = Eigen::Map<const RowMatrix>;

thread_local Tape* g_active_tape = nullptr;

bool tracking(std::initializer_list<const Tensor*> inputs) {
  if (g_active_tape == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

void check_finite(const char* op, std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(op) + ": non-finite output");
    }
  }
}

// Fixed row order, so the rounding never depends on where the buffer lives.
void add_column_sums(double* dst, const double* src, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = src + r * cols;
    for (std::size_t j = 0; j < cols; ++j) dst[j] += row[j];
  }
}

void require_rank(const char* op, const Tensor& t, std::size_t rank) {
  if (t.dim() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got shape " + shape_str(t.shape()));
  }
}

// Output tensor whose requires_grad flag reflects whether it is recorded.
Tensor make_output(Shape shape, std::vector<double> data, bool recorded) {
  return Tensor(std::move(shape), std::move(data), recorded);
}

void record(const char* name, std::vector<Tensor> inputs, const Tensor& out,
            std::function<void()> backward) {
  g_active_tape->record(name, std::move(inputs), out, std::move(backward));
}

template <typename Forward, typename Derivative>
Tensor unary(const char* name, const Tensor& x, Forward f, Derivative df) {
  auto xs = x.data();
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = f(xs[i]);
  check_finite(name, out);
  const bool rec = tracking({&x});
  Tensor y = make_output(x.shape(), std::move(out), rec);
  if (rec) {
    record(name, {x}, y, [x, y, df]() mutable {
      auto g = y.grad();
      auto gx = x.grad_buffer();
      auto xs = std::as_const(x).data();
      auto ys = std::as_const(y).data();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * df(xs[i], ys[i]);
    });
  }
  return y;
}

enum class Broadcast { kEqual, kLeftScalar, kRightScalar };

Broadcast broadcast_kind(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return Broadcast::kEqual;
  if (a.numel() == 1) return Broadcast::kLeftScalar;
  if (b.numel() == 1) return Broadcast::kRightScalar;
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) +
                       " and " + shape_str(b.shape()));
}

// f(a, b) -> value, da(a, b) and db(a, b) -> partial derivatives.
template <typename F, typename DA, typename DB>
Tensor binary(const char* name, const Tensor& a, const Tensor& b, F f, DA da, DB db) {
  const Broadcast kind = broadcast_kind(name, a, b);
  const Shape& shape = kind == Broadcast::kLeftScalar ? b.shape() : a.shape();
  const std::size_t n = shape_numel(shape);
  auto as = a.data();
  auto bs = b.data();
  auto ai = [&](std::size_t i) { return kind == Broadcast::kLeftScalar ? as[0] : as[i]; };
  auto bi = [&](std::size_t i) { return kind == Broadcast::kRightScalar ? bs[0] : bs[i]; };
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = f(ai(i), bi(i));
  check_finite(name, out);
  const bool rec = tracking({&a, &b});
  Tensor y = make_output(shape, std::move(out), rec);
  if (rec) {
    const bool need_a = a.requires_grad(), need_b = b.requires_grad();
    record(name, {a, b}, y, [a, b, y, kind, da, db, need_a, need_b]() mutable {
      auto g = y.grad();
      auto as = std::as_const(a).data();
      auto bs = std::as_const(b).data();
      const bool a_scalar = kind == Broadcast::kLeftScalar;
      const bool b_scalar = kind == Broadcast::kRightScalar;
      if (need_a) {
        auto ga = a.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double av = a_scalar ? as[0] : as[i];
          const double bv = b_scalar ? bs[0] : bs[i];
          ga[a_scalar ? 0 : i] += g[i] * da(av, bv);
        }
      }
      if (need_b) {
        auto gb = b.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double av = a_scalar ? as[0] : as[i];
          const double bv = b_scalar ? bs[0] : bs[i];
          gb[b_scalar ? 0 : i] += g[i] * db(av, bv);
        }
      }
    });
  }
  return y;
}

struct AxisView {
  std::size_t outer;
  std::size_t extent;
  std::size_t inner;
};

AxisView axis_view(const char* op, const Tensor& x, std::size_t axis) {
  if (axis >= x.dim()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for shape " + shape_str(x.shape()));
  }
  AxisView v{1, x.shape()[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) v.outer *= x.shape()[i];
  for (std::size_t i = axis + 1; i < x.dim(); ++i) v.inner *= x.shape()[i];
  return v;
}

double stable_softplus(double v) {
  return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
}

double stable_sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor() = default;

Tensor::Tensor(Shape shape, double fill, bool requires_grad)
    : storage_(std::make_shared<Storage>()) {
  storage_->data.assign(shape_numel(shape), fill);
  storage_->shape = std::move(shape);
  storage_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : storage_(std::make_shared<Storage>()) {
  if (shape_numel(shape) != data.size()) {
    throw DimensionError("Tensor: shape " + shape_str(shape) + " does not match " +
                         std::to_string(data.size()) + " values");
  }
  storage_->shape = std::move(shape);
  storage_->data = std::move(data);
  storage_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, std::vector<double>{value}, requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  Shape shape{values.size()};
  return Tensor(std::move(shape), std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows,
                      bool requires_grad) {
  const std::size_t m = rows.size();
  const std::size_t n = m ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(m * n);
  for (const auto& row : rows) {
    if (row.size() != n) throw DimensionError("Tensor::matrix: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({m, n}, std::move(data), requires_grad);
}

const Shape& Tensor::shape() const {
  if (!storage_) throw ContractError("Tensor: use of undefined tensor");
  return storage_->shape;
}

std::size_t Tensor::size(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) throw DimensionError("Tensor::size: axis out of range");
  return s[axis];
}

std::size_t Tensor::numel() const { return shape_numel(shape()); }

std::span<double> Tensor::data() {
  shape();
  return storage_->data;
}

std::span<const double> Tensor::data() const {
  shape();
  return storage_->data;
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("Tensor::item: tensor has " + std::to_string(numel()) + " elements");
  return storage_->data[0];
}

double& Tensor::at(std::size_t row, std::size_t col) {
  return storage_->data[row * shape().back() + col];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  return storage_->data[row * shape().back() + col];
}

bool Tensor::requires_grad() const { return storage_ && storage_->requires_grad; }

void Tensor::set_requires_grad(bool value) {
  shape();
  storage_->requires_grad = value;
}

bool Tensor::has_grad() const { return storage_ && !storage_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  shape();
  return storage_->grad;
}

std::span<double> Tensor::grad_buffer() const {
  shape();
  if (storage_->grad.empty()) storage_->grad.assign(storage_->data.size(), 0.0);
  return storage_->grad;
}

void Tensor::zero_grad() {
  if (storage_) std::fill(storage_->grad.begin(), storage_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return Tensor(shape(), storage_->data, false); }

Tensor Tensor::clone() const {
  Tensor t(shape(), storage_->data, storage_->requires_grad);
  return t;
}

// ---------------------------------------------------------------------------
// Tape

void Tape::record(std::string name, std::vector<Tensor> inputs, Tensor output,
                  std::function<void()> backward) {
  ops_.push_back(Op{std::move(name), std::move(inputs), std::move(output), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward: loss must be a scalar tensor");
  }
  if (ops_.empty()) throw ContractError("backward: tape is empty");
  Tensor seed = loss;
  seed.grad_buffer()[0] += 1.0;
  Pause pause;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
    if (it->output.has_grad()) it->backward();
  }
}

void Tape::clear() { ops_.clear(); }

Tape* Tape::active() { return g_active_tape; }

Tape::Scope::Scope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
Tape::Scope::~Scope() { g_active_tape = previous_; }

Tape::Pause::Pause() : previous_(g_active_tape) { g_active_tape = nullptr; }
Tape::Pause::~Pause() { g_active_tape = previous_; }

// ---------------------------------------------------------------------------
// Linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t m = a.size(0), k = a.size(1), n = b.size(1);
  if (b.size(0) != k) {
    throw DimensionError("matmul: inner dimensions differ: " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  std::vector<double> out(m * n);
  MapMatrix(out.data(), m, n).noalias() =
      ConstMapMatrix(a.data().data(), m, k) * ConstMapMatrix(b.data().data(), k, n);
  check_finite("matmul", out);
  const bool rec = tracking({&a, &b});
  Tensor y = make_output({m, n}, std::move(out), rec);
  if (rec) {
    const bool need_a = a.requires_grad(), need_b = b.requires_grad();
    record("matmul", {a, b}, y, [a, b, y, m, k, n, need_a, need_b]() mutable {
      ConstMapMatrix g(y.grad().data(), m, n);
      if (need_a) {
        MapMatrix(a.grad_buffer().data(), m, k).noalias() +=
            g * ConstMapMatrix(std::as_const(b).data().data(), k, n).transpose();
      }
      if (need_b) {
        MapMatrix(b.grad_buffer().data(), k, n).noalias() +=
            ConstMapMatrix(std::as_const(a).data().data(), m, k).transpose() * g;
      }
    });
  }
  return y;
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank("linear", x, 2);
  require_rank("linear", weight, 2);
  const std::size_t m = x.size(0), k = x.size(1), n = weight.size(1);
  if (weight.size(0) != k) {
    throw DimensionError("linear: input " + shape_str(x.shape()) + " does not match weight " +
                         shape_str(weight.shape()));
  }
  if (bias.numel() != n) {
    throw DimensionError("linear: bias " + shape_str(bias.shape()) + " does not match " +
                         std::to_string(n) + " outputs");
  }
  std::vector<double> out(m * n);
  MapMatrix o(out.data(), m, n);
  o.noalias() = ConstMapMatrix(x.data().data(), m, k) * ConstMapMatrix(weight.data().data(), k, n);
  o.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.data().data(), n);
  check_finite("linear", out);
  const bool rec = tracking({&x, &weight, &bias});
  Tensor y = make_output({m, n}, std::move(out), rec);
  if (rec) {
    const bool need_x = x.requires_grad(), need_w = weight.requires_grad(),
               need_b = bias.requires_grad();
    record("linear", {x, weight, bias}, y,
           [x, weight, bias, y, m, k, n, need_x, need_w, need_b]() mutable {
      ConstMapMatrix g(y.grad().data(), m, n);
      if (need_x) {
        MapMatrix(x.grad_buffer().data(), m, k).noalias() +=
            g * ConstMapMatrix(std::as_const(weight).data().data(), k, n).transpose();
      }
      if (need_w) {
        MapMatrix(weight.grad_buffer().data(), k, n).noalias() +=
            ConstMapMatrix(std::as_const(x).data().data(), m, k).transpose() * g;
      }
      if (need_b) {
        add_column_sums(bias.grad_buffer().data(), y.grad().data(), m, n);
      }
    });
  }
  return y;
}

Tensor conv2d(const Tensor& x, const Tensor& kernels, std::size_t stride, const Tensor& bias) {
  if (x.dim() != 3 && x.dim() != 4) {
    throw DimensionError("conv2d: input must be [c×h×w] or [b×c×h×w], got " + shape_str(x.shape()));
  }
  require_rank("conv2d", kernels, 4);
  if (stride == 0) throw DimensionError("conv2d: stride must be positive");
  const bool batched = x.dim() == 4;
  const std::size_t batch = batched ? x.size(0) : 1;
  const std::size_t c = x.shape()[batched ? 1 : 0];
  const std::size_t h = x.shape()[batched ? 2 : 1];
  const std::size_t w = x.shape()[batched ? 3 : 2];
  const std::size_t oc = kernels.size(0), kh = kernels.size(2), kw = kernels.size(3);
  if (kernels.size(1) != c) {
    throw DimensionError("conv2d: kernel channels " + shape_str(kernels.shape()) +
                         " do not match input " + shape_str(x.shape()));
  }
  if (kh > h || kw > w) {
    throw DimensionError("conv2d: kernel " + shape_str(kernels.shape()) + " larger than input " +
                         shape_str(x.shape()));
  }
  if (bias.defined() && bias.numel() != oc) throw DimensionError("conv2d: bias size mismatch");
  const std::size_t oh = (h - kh) / stride + 1, ow = (w - kw) / stride + 1;
  const std::size_t patches = oh * ow;
  const std::size_t patch_len = c * kh * kw;

  // im2col: one row per (image, output position).
  auto cols = std::make_shared<std::vector<double>>(batch * patches * patch_len);
  auto xs = x.data();
  for (std::size_t b = 0; b < batch; ++b) {
    const double* img = xs.data() + b * c * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double* row = cols->data() + ((b * patches) + oy * ow + ox) * patch_len;
        for (std::size_t ci = 0; ci < c; ++ci) {
          for (std::size_t ky = 0; ky < kh; ++ky) {
            const double* src = img + (ci * h + oy * stride + ky) * w + ox * stride;
            std::copy_n(src, kw, row + (ci * kh + ky) * kw);
          }
        }
      }
    }
  }
  // One product per image so a result never depends on its neighbours in the batch.
  std::vector<double> out(batch * oc * patches);
  const ConstMapMatrix kmat(kernels.data().data(), oc, patch_len);
  for (std::size_t b = 0; b < batch; ++b) {
    MapMatrix dst(out.data() + b * oc * patches, oc, patches);
    dst.noalias() = kmat * ConstMapMatrix(cols->data() + b * patches * patch_len, patches, patch_len).transpose();
    if (bias.defined()) dst.colwise() += Eigen::Map<const Eigen::VectorXd>(bias.data().data(), oc);
  }
  check_finite("conv2d", out);
  Shape out_shape = batched ? Shape{batch, oc, oh, ow} : Shape{oc, oh, ow};
  const bool rec = tracking({&x, &kernels, &bias});
  Tensor y = make_output(out_shape, std::move(out), rec);
  if (rec) {
    std::vector<Tensor> inputs{x, kernels};
    if (bias.defined()) inputs.push_back(bias);
    const bool need_x = x.requires_grad(), need_k = kernels.requires_grad(),
               need_b = bias.defined() && bias.requires_grad();
    record("conv2d", std::move(inputs), y,
           [x, kernels, bias, y, cols, need_x, need_k, need_b, batch, c, h, w, oc, kh, kw, oh, ow, stride, patches,
            patch_len]() mutable {
             auto g = y.grad();
             RowMatrix gy(batch * patches, oc);
             for (std::size_t b = 0; b < batch; ++b) {
               for (std::size_t o = 0; o < oc; ++o) {
                 const double* src = g.data() + (b * oc + o) * patches;
                 for (std::size_t p = 0; p < patches; ++p) gy(b * patches + p, o) = src[p];
               }
             }
             if (need_b) {
               add_column_sums(bias.grad_buffer().data(), gy.data(), batch * patches, oc);
             }
             if (need_k) {
               MapMatrix(kernels.grad_buffer().data(), oc, patch_len).noalias() +=
                   gy.transpose() * ConstMapMatrix(cols->data(), batch * patches, patch_len);
             }
             if (need_x) {
               RowMatrix gcols =
                   gy * ConstMapMatrix(std::as_const(kernels).data().data(), oc, patch_len);
               auto gx = x.grad_buffer();
               for (std::size_t b = 0; b < batch; ++b) {
                 double* img = gx.data() + b * c * h * w;
                 for (std::size_t oy = 0; oy < oh; ++oy) {
                   for (std::size_t ox = 0; ox < ow; ++ox) {
                     const double* row = gcols.data() + ((b * patches) + oy * ow + ox) * patch_len;
                     for (std::size_t ci = 0; ci < c; ++ci) {
                       for (std::size_t ky = 0; ky < kh; ++ky) {
                         double* dst = img + (ci * h + oy * stride + ky) * w + ox * stride;
                         const double* src = row + (ci * kh + ky) * kw;
                         for (std::size_t kx = 0; kx < kw; ++kx) dst[kx] += src[kx];
                       }
                     }
                   }
                 }
               }
             }
           });
  }
  return y;
}

// ---------------------------------------------------------------------------
// Elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  for (double v : b.data()) {
    if (v == 0.0) throw NumericError("div: division by zero");
  }
  return binary(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; }, [](double x, double y) { return -x / (y * y); });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      "scale", x, [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double value) {
  return unary(
      "add_scalar", x, [value](double v) { return v + value; }, [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& x) { return scale(x, -1.0); }

Tensor relu(const Tensor& x) {
  return unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& x) {
  return unary(
      "tanh", x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor exp(const Tensor& x) {
  return unary(
      "exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  for (double v : x.data()) {
    if (!(v > 0.0)) throw NumericError("log: argument must be positive");
  }
  return unary(
      "log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor softplus(const Tensor& x) {
  return unary("softplus", x, stable_softplus, [](double v, double) { return stable_sigmoid(v); });
}

Tensor sigmoid(const Tensor& x) {
  return unary("sigmoid", x, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor square(const Tensor& x) {
  return unary(
      "square", x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (lo > hi) throw ContractError("clamp: lo > hi");
  return unary(
      "clamp", x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------
// Reductions

Tensor sum(const Tensor& x) {
  auto xs = x.data();
  double total = 0.0;
  for (double v : xs) total += v;
  check_finite("sum", std::span<const double>(&total, 1));
  const bool rec = tracking({&x});
  Tensor y = make_output({1}, {total}, rec);
  if (rec) {
    record("sum", {x}, y, [x, y]() mutable {
      const double g = y.grad()[0];
      for (double& v : x.grad_buffer()) v += g;
    });
  }
  return y;
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw ContractError("mean: empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor sum(const Tensor& x, std::size_t axis) {
  const AxisView v = axis_view("sum", x, axis);
  Shape out_shape = x.shape();
  out_shape[axis] = 1;
  std::vector<double> out(v.outer * v.inner, 0.0);
  auto xs = x.data();
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t e = 0; e < v.extent; ++e)
      for (std::size_t i = 0; i < v.inner; ++i)
        out[o * v.inner + i] += xs[(o * v.extent + e) * v.inner + i];
  check_finite("sum", out);
  const bool rec = tracking({&x});
  Tensor y = make_output(std::move(out_shape), std::move(out), rec);
  if (rec) {
    record("sum_axis", {x}, y, [x, y, v]() mutable {
      auto g = y.grad();
      auto gx = x.grad_buffer();
      for (std::size_t o = 0; o < v.outer; ++o)
        for (std::size_t e = 0; e < v.extent; ++e)
          for (std::size_t i = 0; i < v.inner; ++i)
            gx[(o * v.extent + e) * v.inner + i] += g[o * v.inner + i];
    });
  }
  return y;
}

Tensor mean(const Tensor& x, std::size_t axis) {
  const AxisView v = axis_view("mean", x, axis);
  if (v.extent == 0) throw ContractError("mean: empty axis");
  return scale(sum(x, axis), 1.0 / static_cast<double>(v.extent));
}

Tensor log_sum_exp(const Tensor& x, std::size_t axis) {
  const AxisView v = axis_view("log_sum_exp", x, axis);
  if (v.extent == 0) throw ContractError("log_sum_exp: empty axis");
  Shape out_shape = x.shape();
  out_shape[axis] = 1;
  std::vector<double> out(v.outer * v.inner);
  auto xs = x.data();
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t i = 0; i < v.inner; ++i) {
      double peak = -std::numeric_limits<double>::infinity();
      for (std::size_t e = 0; e < v.extent; ++e)
        peak = std::max(peak, xs[(o * v.extent + e) * v.inner + i]);
      double acc = 0.0;
      for (std::size_t e = 0; e < v.extent; ++e)
        acc += std::exp(xs[(o * v.extent + e) * v.inner + i] - peak);
      out[o * v.inner + i] = peak + std::log(acc);
    }
  }
  check_finite("log_sum_exp", out);
  const bool rec = tracking({&x});
  Tensor y = make_output(std::move(out_shape), std::move(out), rec);
  if (rec) {
    record("log_sum_exp", {x}, y, [x, y, v]() mutable {
      auto g = y.grad();
      auto ys = std::as_const(y).data();
      auto xs = std::as_const(x).data();
      auto gx = x.grad_buffer();
      for (std::size_t o = 0; o < v.outer; ++o)
        for (std::size_t e = 0; e < v.extent; ++e)
          for (std::size_t i = 0; i < v.inner; ++i) {
            const std::size_t src = (o * v.extent + e) * v.inner + i;
            const std::size_t dst = o * v.inner + i;
            gx[src] += g[dst] * std::exp(xs[src] - ys[dst]);
          }
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// Shape plumbing

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  const auto xs = x.data();
  const bool rec = tracking({&x});
  Tensor y = make_output(std::move(shape), std::vector<double>(xs.begin(), xs.end()), rec);
  if (rec) {
    record("reshape", {x}, y, [x, y]() mutable {
      auto g = y.grad();
      auto gx = x.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
  }
  return y;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const std::size_t m = parts.front().size(0);
  std::size_t total = 0;
  bool rec = false;
  for (const Tensor& p : parts) {
    require_rank("concat_cols", p, 2);
    if (p.size(0) != m) throw DimensionError("concat_cols: row counts differ");
    total += p.size(1);
    rec = rec || tracking({&p});
  }
  std::vector<double> out(m * total);
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    const std::size_t n = p.size(1);
    auto ps = p.data();
    for (std::size_t r = 0; r < m; ++r)
      std::copy_n(ps.data() + r * n, n, out.data() + r * total + offset);
    offset += n;
  }
  Tensor y = make_output({m, total}, std::move(out), rec);
  if (rec) {
    std::vector<bool> need;
    for (const Tensor& p : parts) need.push_back(p.requires_grad());
    record("concat_cols", parts, y, [parts, y, m, total, need]() mutable {
      auto g = y.grad();
      std::size_t offset = 0;
      for (std::size_t idx = 0; idx < parts.size(); ++idx) {
        const Tensor& p = parts[idx];
        const std::size_t n = p.size(1);
        if (need[idx]) {
          auto gp = p.grad_buffer();
          for (std::size_t r = 0; r < m; ++r)
            for (std::size_t j = 0; j < n; ++j) gp[r * n + j] += g[r * total + offset + j];
        }
        offset += n;
      }
    });
  }
  return y;
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  require_rank("slice_cols", x, 2);
  const std::size_t m = x.size(0), n = x.size(1);
  if (begin > end || end > n) throw DimensionError("slice_cols: range out of bounds");
  const std::size_t width = end - begin;
  std::vector<double> out(m * width);
  auto xs = x.data();
  for (std::size_t r = 0; r < m; ++r) std::copy_n(xs.data() + r * n + begin, width, out.data() + r * width);
  const bool rec = tracking({&x});
  Tensor y = make_output({m, width}, std::move(out), rec);
  if (rec) {
    record("slice_cols", {x}, y, [x, y, m, n, begin, width]() mutable {
      auto g = y.grad();
      auto gx = x.grad_buffer();
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t j = 0; j < width; ++j) gx[r * n + begin + j] += g[r * width + j];
    });
  }
  return y;
}

Tensor expand(const Tensor& x, std::size_t rows, std::size_t cols) {
  require_rank("expand", x, 2);
  const std::size_t m = x.size(0), n = x.size(1);
  if ((m != 1 && m != rows) || (n != 1 && n != cols)) {
    throw DimensionError("expand: cannot expand " + shape_str(x.shape()) + " to " +
                         shape_str({rows, cols}));
  }
  std::vector<double> out(rows * cols);
  auto xs = x.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < cols; ++j)
      out[r * cols + j] = xs[(m == 1 ? 0 : r) * n + (n == 1 ? 0 : j)];
  const bool rec = tracking({&x});
  Tensor y = make_output({rows, cols}, std::move(out), rec);
  if (rec) {
    record("expand", {x}, y, [x, y, m, n, rows, cols]() mutable {
      auto g = y.grad();
      auto gx = x.grad_buffer();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < cols; ++j)
          gx[(m == 1 ? 0 : r) * n + (n == 1 ? 0 : j)] += g[r * cols + j];
    });
  }
  return y;
}

Tensor repeat_rows(const Tensor& x, std::size_t times) {
  require_rank("repeat_rows", x, 2);
  if (times == 0) throw ContractError("repeat_rows: times must be positive");
  const std::size_t m = x.size(0), n = x.size(1);
  std::vector<double> out(m * times * n);
  auto xs = x.data();
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t t = 0; t < times; ++t)
      std::copy_n(xs.data() + r * n, n, out.data() + (r * times + t) * n);
  const bool rec = tracking({&x});
  Tensor y = make_output({m * times, n}, std::move(out), rec);
  if (rec) {
    record("repeat_rows", {x}, y, [x, y, m, n, times]() mutable {
      auto g = y.grad();
      auto gx = x.grad_buffer();
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t t = 0; t < times; ++t)
          for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += g[(r * times + t) * n + j];
    });
  }
  return y;
}

}  // namespace cp3er
