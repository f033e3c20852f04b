#include "hwnas/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <thread>
#include <unordered_set>

#include "hwnas/errors.hpp"
#include "hwnas/parallel.hpp"

namespace hwnas {

namespace detail {

struct TapeNode {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  TapeOp op = TapeOp::Leaf;
  std::vector<Tensor> inputs;
  BackwardFn backward_fn;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// parallel

namespace {

int& thread_setting() {
  static int value = [] {
    int n = 0;
    if (const char* env = std::getenv("NAS_RT_THREADS")) n = std::atoi(env);
    if (n <= 0) n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    return n;
  }();
  return value;
}

}  // namespace

int num_threads() { return thread_setting(); }

void set_num_threads(int n) {
  thread_setting() = n > 0 ? n : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(num_threads()), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += workers) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

// ---------------------------------------------------------------------------
// Tensor

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape shape, bool requires_grad) : node_(std::make_shared<detail::TapeNode>()) {
  node_->data.assign(shape_numel(shape), 0.0);
  node_->shape = std::move(shape);
  node_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : node_(std::make_shared<detail::TapeNode>()) {
  if (values.size() != shape_numel(shape))
    throw ShapeError("tensor data length " + std::to_string(values.size()) + " does not match shape " +
                     shape_str(shape));
  node_->shape = std::move(shape);
  node_->data = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor(Shape{}, {value}, requires_grad); }

Tensor Tensor::full(Shape shape, double value) {
  Tensor t(std::move(shape));
  std::fill(t.node_->data.begin(), t.node_->data.end(), value);
  return t;
}

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::extent(std::size_t axis) const {
  if (axis >= node_->shape.size())
    throw ArgumentError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(node_->shape));
  return node_->shape[axis];
}

std::size_t Tensor::numel() const { return node_->data.size(); }

std::span<const double> Tensor::data() const { return node_->data; }

std::span<double> Tensor::mutable_data() { return node_->data; }

double Tensor::item() const {
  if (numel() != 1) throw ArgumentError("item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }

void Tensor::set_requires_grad(bool flag) { node_->requires_grad = flag; }

bool Tensor::has_grad() const { return !node_->grad.empty(); }

std::span<const double> Tensor::grad() const { return node_->grad; }

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

std::span<double> Tensor::grad_accumulator() const {
  if (!node_->requires_grad) return {};
  if (node_->grad.empty()) node_->grad.assign(node_->data.size(), 0.0);
  return node_->grad;
}

TapeOp Tensor::op() const { return node_->op; }

Tensor Tensor::detach() const { return Tensor(node_->shape, node_->data, false); }

// ---------------------------------------------------------------------------
// recording

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor record(Shape shape, std::vector<double> values, TapeOp op, std::vector<Tensor> inputs,
              BackwardFn backward_fn) {
  Tensor out(std::move(shape), std::move(values));
  out.node_->op = op;
  if (!g_grad_enabled) return out;
  const bool any = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (!any) return out;
  out.node_->requires_grad = true;
  out.node_->inputs = std::move(inputs);
  out.node_->backward_fn = std::move(backward_fn);
  return out;
}

void backward(const Tensor& root) {
  if (!root.defined() || root.numel() != 1)
    throw ArgumentError("backward() needs a single-element root, got shape " +
                        (root.defined() ? shape_str(root.shape()) : std::string("<undefined>")));
  if (!root.requires_grad()) return;

  // Iterative post-order DFS; `order` ends up topologically sorted.
  std::vector<detail::TapeNode*> order;
  std::unordered_set<detail::TapeNode*> seen;
  std::vector<std::pair<detail::TapeNode*, std::size_t>> stack;
  stack.emplace_back(root.node_.get(), 0);
  seen.insert(root.node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::TapeNode* child = node->inputs[next++].node_.get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Interior gradients are per-pass; only leaves accumulate across calls.
  for (auto* node : order)
    if (node->backward_fn) node->grad.assign(node->data.size(), 0.0);

  auto& root_grad = root.node_->grad;
  if (root_grad.empty()) root_grad.assign(1, 0.0);
  root_grad[0] += 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::TapeNode* node = *it;
    if (node->backward_fn) node->backward_fn(node->grad, node->inputs);
  }
}

// ---------------------------------------------------------------------------
// elementwise

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

template <class F>
std::vector<double> map_values(const Tensor& a, F f) {
  auto src = a.data();
  std::vector<double> out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = f(src[i]);
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return record(a.shape(), std::move(out), TapeOp::Add, {a, b}, [](auto g, auto in) {
    for (const auto& t : in) {
      auto acc = t.grad_accumulator();
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return record(a.shape(), std::move(out), TapeOp::Sub, {a, b}, [](auto g, auto in) {
    auto ga = in[0].grad_accumulator();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
    auto gb = in[1].grad_accumulator();
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return record(a.shape(), std::move(out), TapeOp::Mul, {a, b}, [](auto g, auto in) {
    auto x = in[0].data(), y = in[1].data();
    auto ga = in[0].grad_accumulator();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * y[i];
    auto gb = in[1].grad_accumulator();
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * x[i];
  });
}

Tensor scale(const Tensor& a, double c) {
  return record(a.shape(), map_values(a, [c](double v) { return v * c; }), TapeOp::Scale, {a},
                [c](auto g, auto in) {
                  auto ga = in[0].grad_accumulator();
                  for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * c;
                });
}

Tensor mul_scalar(const Tensor& a, const Tensor& s) {
  if (s.numel() != 1) throw ShapeError("mul_scalar: factor must hold one element, got " + shape_str(s.shape()));
  const double c = s.data()[0];
  return record(a.shape(), map_values(a, [c](double v) { return v * c; }), TapeOp::MulScalar, {a, s},
                [](auto g, auto in) {
                  auto x = in[0].data();
                  const double c = in[1].data()[0];
                  auto ga = in[0].grad_accumulator();
                  for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * c;
                  auto gs = in[1].grad_accumulator();
                  if (!gs.empty()) {
                    double dot = 0.0;
                    for (std::size_t i = 0; i < x.size(); ++i) dot += g[i] * x[i];
                    gs[0] += dot;
                  }
                });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  return record(Shape{}, {total}, TapeOp::Sum, {a}, [](auto g, auto in) {
    auto ga = in[0].grad_accumulator();
    for (auto& v : ga) v += g[0];
  });
}

Tensor log(const Tensor& a) {
  return record(a.shape(), map_values(a, [](double v) { return std::log(v); }), TapeOp::Log, {a},
                [](auto g, auto in) {
                  auto x = in[0].data();
                  auto ga = in[0].grad_accumulator();
                  for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] / x[i];
                });
}

Tensor exp(const Tensor& a) {
  auto values = map_values(a, [](double v) { return std::exp(v); });
  auto saved = std::make_shared<std::vector<double>>(values);
  return record(a.shape(), std::move(values), TapeOp::Exp, {a}, [saved](auto g, auto in) {
    auto ga = in[0].grad_accumulator();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * (*saved)[i];
  });
}

Tensor relu(const Tensor& a) {
  return record(a.shape(), map_values(a, [](double v) { return v > 0.0 ? v : 0.0; }), TapeOp::Relu, {a},
                [](auto g, auto in) {
                  auto x = in[0].data();
                  auto ga = in[0].grad_accumulator();
                  for (std::size_t i = 0; i < ga.size(); ++i)
                    if (x[i] > 0.0) ga[i] += g[i];
                });
}

// ---------------------------------------------------------------------------
// channel concat / slice

Tensor concat_channels(std::initializer_list<Tensor> tensors) {
  return concat_channels(std::span<const Tensor>(tensors.begin(), tensors.size()));
}

Tensor concat_channels(std::span<const Tensor> tensors) {
  if (tensors.empty()) throw ArgumentError("concat_channels: empty tensor list");
  const Shape& first = tensors[0].shape();
  if (first.size() < 2) throw ShapeError("concat_channels: need rank >= 2, got " + shape_str(first));
  std::size_t channels = 0;
  for (const auto& t : tensors) {
    const Shape& s = t.shape();
    bool ok = s.size() == first.size();
    for (std::size_t ax = 0; ok && ax < s.size(); ++ax)
      if (ax != 1 && s[ax] != first[ax]) ok = false;
    if (!ok) throw ShapeError("concat_channels: " + shape_str(s) + " incompatible with " + shape_str(first));
    channels += s[1];
  }
  const std::size_t batch = first[0];
  const std::size_t inner = shape_numel(first) / (first[0] * first[1]);
  Shape out_shape = first;
  out_shape[1] = channels;

  std::vector<double> out(shape_numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t c0 = 0;
  for (const auto& t : tensors) {
    offsets.push_back(c0);
    const std::size_t block = t.shape()[1] * inner;
    auto src = t.data();
    for (std::size_t n = 0; n < batch; ++n)
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(n * block), block,
                  out.begin() + static_cast<std::ptrdiff_t>((n * channels + c0) * inner));
    c0 += t.shape()[1];
  }
  std::vector<Tensor> inputs(tensors.begin(), tensors.end());
  return record(out_shape, std::move(out), TapeOp::Concat, std::move(inputs),
                [offsets, batch, inner, channels](auto g, auto in) {
                  for (std::size_t k = 0; k < in.size(); ++k) {
                    auto acc = in[k].grad_accumulator();
                    if (acc.empty()) continue;
                    const std::size_t block = in[k].shape()[1] * inner;
                    for (std::size_t n = 0; n < batch; ++n) {
                      const double* src = g.data() + (n * channels + offsets[k]) * inner;
                      double* dst = acc.data() + n * block;
                      for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
                    }
                  }
                });
}

Tensor slice_channels(const Tensor& a, std::size_t begin, std::size_t end) {
  const Shape& s = a.shape();
  if (s.size() < 2 || begin >= end || end > s[1])
    throw ShapeError("slice_channels: invalid range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") for " + shape_str(s));
  const std::size_t batch = s[0], channels = s[1];
  const std::size_t inner = shape_numel(s) / (batch * channels);
  Shape out_shape = s;
  out_shape[1] = end - begin;
  const std::size_t block = (end - begin) * inner;
  std::vector<double> out(batch * block);
  auto src = a.data();
  for (std::size_t n = 0; n < batch; ++n)
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>((n * channels + begin) * inner), block,
                out.begin() + static_cast<std::ptrdiff_t>(n * block));
  return record(out_shape, std::move(out), TapeOp::Slice, {a}, [=](auto g, auto in) {
    auto acc = in[0].grad_accumulator();
    for (std::size_t n = 0; n < batch; ++n) {
      double* dst = acc.data() + (n * channels + begin) * inner;
      const double* gs = g.data() + n * block;
      for (std::size_t i = 0; i < block; ++i) dst[i] += gs[i];
    }
  });
}

// ---------------------------------------------------------------------------
// softmax / gather

Tensor softmax(const Tensor& a, std::size_t axis) {
  const Shape& s = a.shape();
  if (axis >= s.size()) throw ArgumentError("softmax: axis " + std::to_string(axis) + " invalid for " + shape_str(s));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t n = s[axis];

  auto x = a.data();
  std::vector<double> y(x.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < n; ++k) mx = std::max(mx, x[base + k * inner]);
      double z = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const double e = std::exp(x[base + k * inner] - mx);
        y[base + k * inner] = e;
        z += e;
      }
      for (std::size_t k = 0; k < n; ++k) y[base + k * inner] /= z;
    }
  }
  auto saved = std::make_shared<std::vector<double>>(y);
  return record(s, std::move(y), TapeOp::Softmax, {a}, [saved, outer, inner, n](auto g, auto in) {
    auto acc = in[0].grad_accumulator();
    const auto& y = *saved;
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t base = o * n * inner + i;
        double dot = 0.0;
        for (std::size_t k = 0; k < n; ++k) dot += g[base + k * inner] * y[base + k * inner];
        for (std::size_t k = 0; k < n; ++k) {
          const std::size_t idx = base + k * inner;
          acc[idx] += y[idx] * (g[idx] - dot);
        }
      }
    }
  });
}

Tensor gather(const Tensor& a, std::span<const std::size_t> indices) {
  auto x = a.data();
  std::vector<double> out(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= x.size())
      throw ArgumentError("gather: index " + std::to_string(indices[i]) + " out of range " + std::to_string(x.size()));
    out[i] = x[indices[i]];
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return record(Shape{indices.size()}, std::move(out), TapeOp::Gather, {a}, [idx](auto g, auto in) {
    auto acc = in[0].grad_accumulator();
    for (std::size_t i = 0; i < idx.size(); ++i) acc[idx[i]] += g[i];
  });
}

Tensor select(const Tensor& a, std::size_t index) {
  if (index >= a.numel())
    throw ArgumentError("select: index " + std::to_string(index) + " out of range " + std::to_string(a.numel()));
  return record(Shape{}, {a.data()[index]}, TapeOp::Gather, {a}, [index](auto g, auto in) {
    in[0].grad_accumulator()[index] += g[0];
  });
}

// ---------------------------------------------------------------------------

double finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h) {
  if (!(h > 0.0)) throw ArgumentError("finite_diff_check: h must be positive");
  std::vector<double> base(x.data().begin(), x.data().end());
  Tensor probe(x.shape(), base, true);
  Tensor y = f(probe);
  if (y.numel() != 1) throw ArgumentError("finite_diff_check: f must be scalar-valued");
  backward(y);
  std::vector<double> analytic(base.size(), 0.0);
  if (probe.has_grad()) std::copy(probe.grad().begin(), probe.grad().end(), analytic.begin());

  NoGradGuard no_grad;
  double worst = 0.0;
  for (std::size_t i = 0; i < base.size(); ++i) {
    auto plus = base, minus = base;
    plus[i] += h;
    minus[i] -= h;
    const double fp = f(Tensor(x.shape(), std::move(plus))).item();
    const double fm = f(Tensor(x.shape(), std::move(minus))).item();
    const double numeric = (fp - fm) / (2.0 * h);
    worst = std::max(worst, std::abs(analytic[i] - numeric) / (std::abs(analytic[i]) + 1e-8));
  }
  return worst;
}

}  // namespace hwnas
