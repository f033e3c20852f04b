#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace hwnas {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

enum class TapeOp : std::uint8_t {
  Leaf,
  Add,
  Sub,
  Mul,
  Scale,
  MulScalar,
  Sum,
  Log,
  Exp,
  Relu,
  Concat,
  Slice,
  Softmax,
  Gather,
  Conv3d,
  MaxPool3d,
  Upsample,
  CrossEntropy,
  Zero,
};

class Tensor;

namespace detail {
struct TapeNode;
}

// Backward rule of a recorded operation: receives the gradient of the
// operation's output and the operation's inputs, and accumulates into the
// inputs via Tensor::grad_accumulator().
using BackwardFn = std::function<void(std::span<const double> grad_out, std::span<const Tensor> inputs)>;

/// Dense row-major float64 tensor with an optional gradient slot.
///
/// Tensor is a shared handle: copies alias the same storage and tape node.
/// Results of differentiable operations remember their inputs when any input
/// requires a gradient and gradient recording is enabled, which forms the
/// tape consumed by backward().
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor full(Shape shape, double value);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t ndim() const { return shape().size(); }
  std::size_t extent(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  // Direct writes bypass the tape; used for parameter updates and fixtures.
  std::span<double> mutable_data();
  double item() const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);

  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();
  // Zero-initialised on first access. Empty when the tensor does not
  // require a gradient.
  std::span<double> grad_accumulator() const;

  TapeOp op() const;
  // Same values, no history, no gradient.
  Tensor detach() const;

  bool same_node(const Tensor& other) const noexcept { return node_ == other.node_; }

 private:
  friend Tensor record(Shape, std::vector<double>, TapeOp, std::vector<Tensor>, BackwardFn);
  friend void backward(const Tensor& root);

  std::shared_ptr<detail::TapeNode> node_;
};

// Builds the result tensor of an operation and, when recording is active and
// any input requires a gradient, links it into the tape.
Tensor record(Shape shape, std::vector<double> values, TapeOp op, std::vector<Tensor> inputs,
              BackwardFn backward_fn);

bool grad_enabled();

// Disables tape recording for its lifetime (inference, profiling).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Elementwise arithmetic. Binary operations require equal shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
// a * s where s holds exactly one element; the only broadcast supported.
Tensor mul_scalar(const Tensor& a, const Tensor& s);
Tensor sum(const Tensor& a);
Tensor log(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor relu(const Tensor& a);

// Channel axis is axis 1 of an [N, C, ...] tensor.
Tensor concat_channels(std::span<const Tensor> tensors);
Tensor concat_channels(std::initializer_list<Tensor> tensors);
Tensor slice_channels(const Tensor& a, std::size_t begin, std::size_t end);

// Max-subtracted softmax along `axis`.
Tensor softmax(const Tensor& a, std::size_t axis);

// 1-D tensor of a's flat elements at `indices`; gradient scatters back.
Tensor gather(const Tensor& a, std::span<const std::size_t> indices);
// Scalar tensor holding a's flat element `index`.
Tensor select(const Tensor& a, std::size_t index);

// Reverse-mode pass from a single-element root. Gradients accumulate into
// every reachable tensor that requires one; callers zero leaves between steps.
void backward(const Tensor& root);

// Max over coordinates of |analytic - central difference| / (|analytic| + 1e-8)
// for a scalar-valued f.
double finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h);

}  // namespace hwnas
