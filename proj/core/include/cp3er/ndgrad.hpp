#pragma once

// Minimal reverse-mode automatic differentiation over dense row-major
// float64 arrays.
//
// A Tensor is a shared handle: copies alias the same storage, so a parameter
// tensor captured in a network and in an optimizer is one object. Operations
// record themselves on the active Tape when any input requires a gradient;
// Tape::backward walks the record in reverse insertion order.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cp3er {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                       bool requires_grad = false);

  bool defined() const { return storage_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim() const { return shape().size(); }
  std::size_t size(std::size_t axis) const;
  std::size_t numel() const;

  std::span<double> data();
  std::span<const double> data() const;
  double item() const;
  double& at(std::size_t row, std::size_t col);
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  void set_requires_grad(bool value);

  bool has_grad() const;
  // Empty span when no gradient has been accumulated yet.
  std::span<const double> grad() const;
  // Allocates a zero gradient buffer on first use.
  std::span<double> grad_buffer() const;
  void zero_grad();

  Tensor detach() const;
  Tensor clone() const;
  bool is_same(const Tensor& other) const { return storage_ == other.storage_; }

 private:
  struct Storage {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> storage_;
};

class Tape {
 public:
  struct Op {
    std::string name;
    std::vector<Tensor> inputs;
    Tensor output;
    std::function<void()> backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::string name, std::vector<Tensor> inputs, Tensor output,
              std::function<void()> backward);

  // Seeds d(loss)/d(loss) = 1 and propagates in exact reverse insertion order.
  void backward(const Tensor& loss);
  void clear();

  std::size_t size() const { return ops_.size(); }
  bool empty() const { return ops_.empty(); }
  const std::vector<Op>& ops() const { return ops_; }

  // The tape ops record onto; nullptr when gradients are not being tracked.
  static Tape* active();

  // Makes a tape active for the lifetime of the scope.
  class Scope {
   public:
    explicit Scope(Tape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

  // Suspends recording for the lifetime of the scope.
  class Pause {
   public:
    Pause();
    ~Pause();
    Pause(const Pause&) = delete;
    Pause& operator=(const Pause&) = delete;

   private:
    Tape* previous_;
  };

 private:
  std::vector<Op> ops_;
};

// Linear algebra
Tensor matmul(const Tensor& a, const Tensor& b);
// x[m×k]·w[k×n] + bias[n] broadcast over rows.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
// Valid convolution. x is [c×h×w] or [batch×c×h×w]; kernels [o×c×kh×kw];
// bias is optional (undefined Tensor) or [o].
Tensor conv2d(const Tensor& x, const Tensor& kernels, std::size_t stride,
              const Tensor& bias = Tensor());

// Binary elementwise: equal shapes, or one operand with a single element.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);
Tensor neg(const Tensor& x);

// Unary elementwise
Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor square(const Tensor& x);
Tensor clamp(const Tensor& x, double lo, double hi);

// Reductions. Axis reductions keep the reduced axis with extent 1.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor sum(const Tensor& x, std::size_t axis);
Tensor mean(const Tensor& x, std::size_t axis);
Tensor log_sum_exp(const Tensor& x, std::size_t axis);

// Shape plumbing (rank-2 unless noted)
Tensor reshape(const Tensor& x, Shape shape);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
// [m×1] → [m×n], [1×n] → [m×n] or [1×1] → [m×n].
Tensor expand(const Tensor& x, std::size_t rows, std::size_t cols);
// Each row repeated `times` times consecutively.
Tensor repeat_rows(const Tensor& x, std::size_t times);

}  // namespace cp3er
