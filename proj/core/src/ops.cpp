#include "hwnas/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "hwnas/errors.hpp"
#include "hwnas/parallel.hpp"

namespace hwnas {

std::string_view to_string(PrimitiveOp op) {
  switch (op) {
    case PrimitiveOp::Conv3d: return "conv3d";
    case PrimitiveOp::DilatedConv3d: return "dil_conv3d";
    case PrimitiveOp::SeparableConv3d: return "sep_conv3d";
    case PrimitiveOp::MaxPool3d: return "maxpool3d";
    case PrimitiveOp::Identity: return "identity";
    case PrimitiveOp::Zero: return "zero";
  }
  return "?";
}

PrimitiveOp primitive_from_string(std::string_view name) {
  for (auto op : kPrimitiveOps)
    if (to_string(op) == name) return op;
  throw ArgumentError("unknown primitive op '" + std::string(name) + "'");
}

bool has_weights(PrimitiveOp op) {
  return op == PrimitiveOp::Conv3d || op == PrimitiveOp::DilatedConv3d || op == PrimitiveOp::SeparableConv3d;
}

// ---------------------------------------------------------------------------
// conv3d

namespace {

struct Extents {
  std::size_t n, c, d, h, w;
};

Extents extents5(const Tensor& t, const char* what) {
  if (t.ndim() != 5) throw ShapeError(std::string(what) + ": expected rank-5 tensor, got " + shape_str(t.shape()));
  const auto& s = t.shape();
  return {s[0], s[1], s[2], s[3], s[4]};
}

std::size_t out_extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad, std::size_t dil,
                       const char* what) {
  const long span = static_cast<long>(dil * (k - 1) + 1);
  const long padded = static_cast<long>(in + 2 * pad);
  if (stride == 0 || padded < span)
    throw ShapeError(std::string(what) + ": invalid geometry for extent " + std::to_string(in));
  return static_cast<std::size_t>((padded - span) / static_cast<long>(stride) + 1);
}

// Range of output positions o with 0 <= o*stride - pad + koff < in.
inline void valid_range(long in, long out, long stride, long pad, long koff, long& lo, long& hi) {
  long a = pad - koff;  // o*stride >= a
  lo = a <= 0 ? 0 : (a + stride - 1) / stride;
  long b = in - 1 + pad - koff;  // o*stride <= b
  hi = b < 0 ? 0 : std::min(out, b / stride + 1);
  if (lo > hi) lo = hi;
}

struct ConvPlan {
  Extents x;
  std::size_t cout, kd, kh, kw, od, oh, ow, cin_g, cout_g;
  ConvGeometry g;
};

void conv_forward(const ConvPlan& p, const double* x, const double* w, const double* b, double* y) {
  const std::size_t in_plane = p.x.d * p.x.h * p.x.w;
  const std::size_t out_plane = p.od * p.oh * p.ow;
  const long s = static_cast<long>(p.g.stride), pad = static_cast<long>(p.g.pad), dil = static_cast<long>(p.g.dilation);
  parallel_for(p.x.n * p.cout, [&](std::size_t job) {
    const std::size_t n = job / p.cout, co = job % p.cout;
    double* out = y + job * out_plane;
    std::fill(out, out + out_plane, b ? b[co] : 0.0);
    const std::size_t group = co / p.cout_g;
    for (std::size_t cig = 0; cig < p.cin_g; ++cig) {
      const std::size_t ci = group * p.cin_g + cig;
      const double* in = x + (n * p.x.c + ci) * in_plane;
      const double* wk = w + (co * p.cin_g + cig) * p.kd * p.kh * p.kw;
      for (std::size_t a = 0; a < p.kd; ++a) {
        long d_lo, d_hi;
        valid_range(static_cast<long>(p.x.d), static_cast<long>(p.od), s, pad, static_cast<long>(a) * dil, d_lo, d_hi);
        for (std::size_t bb = 0; bb < p.kh; ++bb) {
          long h_lo, h_hi;
          valid_range(static_cast<long>(p.x.h), static_cast<long>(p.oh), s, pad, static_cast<long>(bb) * dil, h_lo, h_hi);
          for (std::size_t c = 0; c < p.kw; ++c) {
            long w_lo, w_hi;
            valid_range(static_cast<long>(p.x.w), static_cast<long>(p.ow), s, pad, static_cast<long>(c) * dil, w_lo, w_hi);
            const double wv = wk[(a * p.kh + bb) * p.kw + c];
            const long woff = static_cast<long>(c) * dil - pad;
            for (long od = d_lo; od < d_hi; ++od) {
              const long id = od * s - pad + static_cast<long>(a) * dil;
              for (long oh = h_lo; oh < h_hi; ++oh) {
                const long ih = oh * s - pad + static_cast<long>(bb) * dil;
                const double* row = in + (id * static_cast<long>(p.x.h) + ih) * static_cast<long>(p.x.w);
                double* orow = out + (od * static_cast<long>(p.oh) + oh) * static_cast<long>(p.ow);
                if (s == 1) {
                  const double* r = row + woff;
                  for (long ow = w_lo; ow < w_hi; ++ow) orow[ow] += wv * r[ow];
                } else {
                  for (long ow = w_lo; ow < w_hi; ++ow) orow[ow] += wv * row[ow * s + woff];
                }
              }
            }
          }
        }
      }
    }
  });
}

void conv_backward_input(const ConvPlan& p, const double* gy, const double* w, double* gx) {
  const std::size_t in_plane = p.x.d * p.x.h * p.x.w;
  const std::size_t out_plane = p.od * p.oh * p.ow;
  const long s = static_cast<long>(p.g.stride), pad = static_cast<long>(p.g.pad), dil = static_cast<long>(p.g.dilation);
  parallel_for(p.x.n * p.x.c, [&](std::size_t job) {
    const std::size_t n = job / p.x.c, ci = job % p.x.c;
    const std::size_t group = ci / p.cin_g, cig = ci % p.cin_g;
    double* gin = gx + job * in_plane;
    for (std::size_t cog = 0; cog < p.cout_g; ++cog) {
      const std::size_t co = group * p.cout_g + cog;
      const double* go = gy + (n * p.cout + co) * out_plane;
      const double* wk = w + (co * p.cin_g + cig) * p.kd * p.kh * p.kw;
      for (std::size_t a = 0; a < p.kd; ++a) {
        long d_lo, d_hi;
        valid_range(static_cast<long>(p.x.d), static_cast<long>(p.od), s, pad, static_cast<long>(a) * dil, d_lo, d_hi);
        for (std::size_t bb = 0; bb < p.kh; ++bb) {
          long h_lo, h_hi;
          valid_range(static_cast<long>(p.x.h), static_cast<long>(p.oh), s, pad, static_cast<long>(bb) * dil, h_lo, h_hi);
          for (std::size_t c = 0; c < p.kw; ++c) {
            long w_lo, w_hi;
            valid_range(static_cast<long>(p.x.w), static_cast<long>(p.ow), s, pad, static_cast<long>(c) * dil, w_lo, w_hi);
            const double wv = wk[(a * p.kh + bb) * p.kw + c];
            const long woff = static_cast<long>(c) * dil - pad;
            for (long od = d_lo; od < d_hi; ++od) {
              const long id = od * s - pad + static_cast<long>(a) * dil;
              for (long oh = h_lo; oh < h_hi; ++oh) {
                const long ih = oh * s - pad + static_cast<long>(bb) * dil;
                double* row = gin + (id * static_cast<long>(p.x.h) + ih) * static_cast<long>(p.x.w);
                const double* grow = go + (od * static_cast<long>(p.oh) + oh) * static_cast<long>(p.ow);
                if (s == 1) {
                  double* r = row + woff;
                  for (long ow = w_lo; ow < w_hi; ++ow) r[ow] += wv * grow[ow];
                } else {
                  for (long ow = w_lo; ow < w_hi; ++ow) row[ow * s + woff] += wv * grow[ow];
                }
              }
            }
          }
        }
      }
    }
  });
}

void conv_backward_weight(const ConvPlan& p, const double* gy, const double* x, double* gw, double* gb) {
  const std::size_t in_plane = p.x.d * p.x.h * p.x.w;
  const std::size_t out_plane = p.od * p.oh * p.ow;
  const long s = static_cast<long>(p.g.stride), pad = static_cast<long>(p.g.pad), dil = static_cast<long>(p.g.dilation);
  parallel_for(p.cout, [&](std::size_t co) {
    const std::size_t group = co / p.cout_g;
    if (gb) {
      double acc = 0.0;
      for (std::size_t n = 0; n < p.x.n; ++n) {
        const double* go = gy + (n * p.cout + co) * out_plane;
        for (std::size_t i = 0; i < out_plane; ++i) acc += go[i];
      }
      gb[co] += acc;
    }
    if (!gw) return;
    for (std::size_t cig = 0; cig < p.cin_g; ++cig) {
      const std::size_t ci = group * p.cin_g + cig;
      double* gk = gw + (co * p.cin_g + cig) * p.kd * p.kh * p.kw;
      for (std::size_t a = 0; a < p.kd; ++a) {
        long d_lo, d_hi;
        valid_range(static_cast<long>(p.x.d), static_cast<long>(p.od), s, pad, static_cast<long>(a) * dil, d_lo, d_hi);
        for (std::size_t bb = 0; bb < p.kh; ++bb) {
          long h_lo, h_hi;
          valid_range(static_cast<long>(p.x.h), static_cast<long>(p.oh), s, pad, static_cast<long>(bb) * dil, h_lo, h_hi);
          for (std::size_t c = 0; c < p.kw; ++c) {
            long w_lo, w_hi;
            valid_range(static_cast<long>(p.x.w), static_cast<long>(p.ow), s, pad, static_cast<long>(c) * dil, w_lo, w_hi);
            const long woff = static_cast<long>(c) * dil - pad;
            double acc = 0.0;
            for (std::size_t n = 0; n < p.x.n; ++n) {
              const double* in = x + (n * p.x.c + ci) * in_plane;
              const double* go = gy + (n * p.cout + co) * out_plane;
              for (long od = d_lo; od < d_hi; ++od) {
                const long id = od * s - pad + static_cast<long>(a) * dil;
                for (long oh = h_lo; oh < h_hi; ++oh) {
                  const long ih = oh * s - pad + static_cast<long>(bb) * dil;
                  const double* row = in + (id * static_cast<long>(p.x.h) + ih) * static_cast<long>(p.x.w);
                  const double* grow = go + (od * static_cast<long>(p.oh) + oh) * static_cast<long>(p.ow);
                  if (s == 1) {
                    const double* r = row + woff;
                    for (long ow = w_lo; ow < w_hi; ++ow) acc += grow[ow] * r[ow];
                  } else {
                    for (long ow = w_lo; ow < w_hi; ++ow) acc += grow[ow] * row[ow * s + woff];
                  }
                }
              }
            }
            gk[(a * p.kh + bb) * p.kw + c] += acc;
          }
        }
      }
    }
  });
}

}  // namespace

Tensor conv3d(const Tensor& x, const Tensor& w, const Tensor& bias, const ConvGeometry& geom) {
  const Extents xe = extents5(x, "conv3d input");
  const Extents we = extents5(w, "conv3d weight");
  if (geom.groups == 0 || xe.c % geom.groups != 0 || we.n % geom.groups != 0 || we.c != xe.c / geom.groups)
    throw ShapeError("conv3d: weight " + shape_str(w.shape()) + " incompatible with input " + shape_str(x.shape()) +
                     " and groups=" + std::to_string(geom.groups));
  if (bias.defined() && (bias.numel() != we.n))
    throw ShapeError("conv3d: bias " + shape_str(bias.shape()) + " does not match Cout=" + std::to_string(we.n));
  ConvPlan plan{xe,
                we.n,
                we.d,
                we.h,
                we.w,
                out_extent(xe.d, we.d, geom.stride, geom.pad, geom.dilation, "conv3d"),
                out_extent(xe.h, we.h, geom.stride, geom.pad, geom.dilation, "conv3d"),
                out_extent(xe.w, we.w, geom.stride, geom.pad, geom.dilation, "conv3d"),
                xe.c / geom.groups,
                we.n / geom.groups,
                geom};
  Shape out_shape{xe.n, plan.cout, plan.od, plan.oh, plan.ow};
  std::vector<double> y(shape_numel(out_shape));
  conv_forward(plan, x.data().data(), w.data().data(), bias.defined() ? bias.data().data() : nullptr, y.data());

  std::vector<Tensor> inputs{x, w};
  if (bias.defined()) inputs.push_back(bias);
  return record(std::move(out_shape), std::move(y), TapeOp::Conv3d, std::move(inputs), [plan](auto g, auto in) {
    auto gx = in[0].grad_accumulator();
    if (!gx.empty()) conv_backward_input(plan, g.data(), in[1].data().data(), gx.data());
    auto gw = in[1].grad_accumulator();
    std::span<double> gb;
    if (in.size() > 2) gb = in[2].grad_accumulator();
    if (!gw.empty() || !gb.empty())
      conv_backward_weight(plan, g.data(), in[0].data().data(), gw.empty() ? nullptr : gw.data(),
                           gb.empty() ? nullptr : gb.data());
  });
}

Tensor separable_conv3d(const Tensor& x, const Tensor& dw, const Tensor& pw, const Tensor& bias) {
  const Extents xe = extents5(x, "separable_conv3d input");
  if (dw.ndim() != 5 || dw.shape()[0] != xe.c || dw.shape()[1] != 1)
    throw ShapeError("separable_conv3d: depthwise weight " + shape_str(dw.shape()) + " needs [" +
                     std::to_string(xe.c) + ",1,k,k,k]");
  if (pw.ndim() != 5 || pw.shape()[1] != xe.c)
    throw ShapeError("separable_conv3d: pointwise weight " + shape_str(pw.shape()) + " needs Cin=" +
                     std::to_string(xe.c));
  Tensor depth = conv3d(x, dw, Tensor(), ConvGeometry{1, 1, 1, xe.c});
  return conv3d(depth, pw, bias, ConvGeometry{1, 0, 1, 1});
}

// ---------------------------------------------------------------------------
// pooling / resampling

Tensor maxpool3d(const Tensor& x, std::size_t kernel, std::size_t stride, std::size_t pad) {
  const Extents e = extents5(x, "maxpool3d");
  const std::size_t od = out_extent(e.d, kernel, stride, pad, 1, "maxpool3d");
  const std::size_t oh = out_extent(e.h, kernel, stride, pad, 1, "maxpool3d");
  const std::size_t ow = out_extent(e.w, kernel, stride, pad, 1, "maxpool3d");
  Shape out_shape{e.n, e.c, od, oh, ow};
  const std::size_t in_plane = e.d * e.h * e.w, out_plane = od * oh * ow;
  std::vector<double> y(shape_numel(out_shape));
  auto argmax = std::make_shared<std::vector<std::size_t>>(y.size());
  auto src = x.data();
  parallel_for(e.n * e.c, [&](std::size_t plane) {
    const double* in = src.data() + plane * in_plane;
    for (std::size_t a = 0; a < od; ++a)
      for (std::size_t b = 0; b < oh; ++b)
        for (std::size_t c = 0; c < ow; ++c) {
          double best = -std::numeric_limits<double>::infinity();
          std::size_t best_idx = 0;
          bool found = false;
          for (std::size_t i = 0; i < kernel; ++i) {
            const long id = static_cast<long>(a * stride + i) - static_cast<long>(pad);
            if (id < 0 || id >= static_cast<long>(e.d)) continue;
            for (std::size_t j = 0; j < kernel; ++j) {
              const long ih = static_cast<long>(b * stride + j) - static_cast<long>(pad);
              if (ih < 0 || ih >= static_cast<long>(e.h)) continue;
              for (std::size_t k = 0; k < kernel; ++k) {
                const long iw = static_cast<long>(c * stride + k) - static_cast<long>(pad);
                if (iw < 0 || iw >= static_cast<long>(e.w)) continue;
                const std::size_t idx = (static_cast<std::size_t>(id) * e.h + static_cast<std::size_t>(ih)) * e.w +
                                        static_cast<std::size_t>(iw);
                if (!found || in[idx] > best) {
                  best = in[idx];
                  best_idx = idx;
                  found = true;
                }
              }
            }
          }
          const std::size_t o = plane * out_plane + (a * oh + b) * ow + c;
          y[o] = best;
          (*argmax)[o] = plane * in_plane + best_idx;
        }
  });
  return record(std::move(out_shape), std::move(y), TapeOp::MaxPool3d, {x}, [argmax](auto g, auto in) {
    auto acc = in[0].grad_accumulator();
    const auto& am = *argmax;
    for (std::size_t i = 0; i < am.size(); ++i) acc[am[i]] += g[i];
  });
}

Tensor identity_op(const Tensor& x) { return x; }

Tensor zero_op(const Tensor& x) {
  return record(x.shape(), std::vector<double>(x.numel(), 0.0), TapeOp::Zero, {x}, [](auto, auto) {});
}

Tensor upsample_nearest2(const Tensor& x) {
  const Extents e = extents5(x, "upsample_nearest2");
  const std::size_t D = 2 * e.d, H = 2 * e.h, W = 2 * e.w;
  Shape out_shape{e.n, e.c, D, H, W};
  const std::size_t in_plane = e.d * e.h * e.w, out_plane = D * H * W;
  std::vector<double> y(shape_numel(out_shape));
  auto src = x.data();
  for (std::size_t p = 0; p < e.n * e.c; ++p)
    for (std::size_t d = 0; d < D; ++d)
      for (std::size_t h = 0; h < H; ++h)
        for (std::size_t w = 0; w < W; ++w)
          y[p * out_plane + (d * H + h) * W + w] = src[p * in_plane + ((d / 2) * e.h + h / 2) * e.w + w / 2];
  return record(std::move(out_shape), std::move(y), TapeOp::Upsample, {x}, [e, D, H, W](auto g, auto in) {
    auto acc = in[0].grad_accumulator();
    const std::size_t in_plane = e.d * e.h * e.w, out_plane = D * H * W;
    for (std::size_t p = 0; p < e.n * e.c; ++p)
      for (std::size_t d = 0; d < D; ++d)
        for (std::size_t h = 0; h < H; ++h)
          for (std::size_t w = 0; w < W; ++w)
            acc[p * in_plane + ((d / 2) * e.h + h / 2) * e.w + w / 2] += g[p * out_plane + (d * H + h) * W + w];
  });
}

// ---------------------------------------------------------------------------
// weights

std::vector<Tensor> OpWeights::parameters() const {
  std::vector<Tensor> out;
  for (const Tensor* t : {&weight, &depthwise, &pointwise, &bias})
    if (t->defined()) out.push_back(*t);
  return out;
}

namespace {

Tensor he_normal(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  std::vector<double> values(shape_numel(shape));
  for (auto& v : values) v = dist(rng);
  return Tensor(std::move(shape), std::move(values), true);
}

}  // namespace

OpWeights init_op_weights(PrimitiveOp op, std::size_t cin, std::size_t cout, std::mt19937_64& rng) {
  OpWeights w;
  switch (op) {
    case PrimitiveOp::Conv3d:
    case PrimitiveOp::DilatedConv3d:
      w.weight = he_normal({cout, cin, 3, 3, 3}, cin * 27, rng);
      w.bias = Tensor({cout}, true);
      break;
    case PrimitiveOp::SeparableConv3d:
      w.depthwise = he_normal({cin, 1, 3, 3, 3}, 27, rng);
      w.pointwise = he_normal({cout, cin, 1, 1, 1}, cin, rng);
      w.bias = Tensor({cout}, true);
      break;
    default:
      if (cin != cout)
        throw ShapeError(std::string(to_string(op)) + " cannot change channel count " + std::to_string(cin) + "->" +
                         std::to_string(cout));
      break;
  }
  return w;
}

std::size_t parameter_count(PrimitiveOp op, std::size_t cin, std::size_t cout) {
  switch (op) {
    case PrimitiveOp::Conv3d:
    case PrimitiveOp::DilatedConv3d: return 27 * cin * cout + cout;
    case PrimitiveOp::SeparableConv3d: return 27 * cin + cin * cout + cout;
    default: return 0;
  }
}

Tensor apply_primitive(PrimitiveOp op, const Tensor& x, const OpWeights& weights) {
  switch (op) {
    case PrimitiveOp::Conv3d: return relu(conv3d(x, weights.weight, weights.bias, ConvGeometry{1, 1, 1, 1}));
    case PrimitiveOp::DilatedConv3d: return relu(conv3d(x, weights.weight, weights.bias, ConvGeometry{1, 2, 2, 1}));
    case PrimitiveOp::SeparableConv3d:
      return relu(separable_conv3d(x, weights.depthwise, weights.pointwise, weights.bias));
    case PrimitiveOp::MaxPool3d: return maxpool3d(x, 3, 1, 1);
    case PrimitiveOp::Identity: return identity_op(x);
    case PrimitiveOp::Zero: return zero_op(x);
  }
  throw ArgumentError("apply_primitive: unknown op");
}

PointwiseConv init_pointwise(std::size_t cin, std::size_t cout, std::mt19937_64& rng) {
  return {he_normal({cout, cin, 1, 1, 1}, cin, rng), Tensor({cout}, true)};
}

Tensor apply_pointwise(const Tensor& x, const PointwiseConv& conv) {
  return conv3d(x, conv.weight, conv.bias, ConvGeometry{1, 0, 1, 1});
}

Tensor contract_preprocess(const Tensor& x, const PointwiseConv& conv) {
  const Extents e = extents5(x, "contract_preprocess");
  if (e.d % 2 || e.h % 2 || e.w % 2)
    throw ShapeError("contract_preprocess: spatial extents must be even, got " + shape_str(x.shape()));
  return apply_pointwise(maxpool3d(x, 2, 2, 0), conv);
}

Tensor expand_preprocess(const Tensor& x, const PointwiseConv& conv) {
  return apply_pointwise(upsample_nearest2(x), conv);
}

Tensor nonscale_preprocess(const Tensor& x, const PointwiseConv& conv) { return apply_pointwise(x, conv); }

// ---------------------------------------------------------------------------
// loss / metric

Tensor cross_entropy(const Tensor& logits, std::span<const std::uint8_t> labels) {
  const Extents e = extents5(logits, "cross_entropy");
  const std::size_t plane = e.d * e.h * e.w;
  const std::size_t voxels = e.n * plane;
  if (labels.size() != voxels)
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " + std::to_string(voxels) +
                     " voxels");
  for (std::size_t i = 0; i < voxels; ++i)
    if (labels[i] >= e.c)
      throw DataError("cross_entropy: label " + std::to_string(labels[i]) + " out of range [0," +
                      std::to_string(e.c) + ")");

  auto x = logits.data();
  auto probs = std::make_shared<std::vector<double>>(x.size());
  double total = 0.0;
  for (std::size_t n = 0; n < e.n; ++n) {
    const double* base = x.data() + n * e.c * plane;
    double* pb = probs->data() + n * e.c * plane;
    for (std::size_t v = 0; v < plane; ++v) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < e.c; ++k) mx = std::max(mx, base[k * plane + v]);
      double z = 0.0;
      for (std::size_t k = 0; k < e.c; ++k) {
        const double ev = std::exp(base[k * plane + v] - mx);
        pb[k * plane + v] = ev;
        z += ev;
      }
      for (std::size_t k = 0; k < e.c; ++k) pb[k * plane + v] /= z;
      const std::size_t label = labels[n * plane + v];
      total += (mx + std::log(z)) - base[label * plane + v];
    }
  }
  const double inv = 1.0 / static_cast<double>(voxels);
  std::vector<std::uint8_t> saved_labels(labels.begin(), labels.end());
  return record(Shape{}, {total * inv}, TapeOp::CrossEntropy, {logits},
                [probs, saved_labels = std::move(saved_labels), e, plane, inv](auto g, auto in) {
                  auto acc = in[0].grad_accumulator();
                  const double scale = g[0] * inv;
                  for (std::size_t n = 0; n < e.n; ++n)
                    for (std::size_t k = 0; k < e.c; ++k)
                      for (std::size_t v = 0; v < plane; ++v) {
                        const std::size_t idx = (n * e.c + k) * plane + v;
                        const double onehot = saved_labels[n * plane + v] == k ? 1.0 : 0.0;
                        acc[idx] += scale * ((*probs)[idx] - onehot);
                      }
                });
}

LabelVolume argmax_labels(const Tensor& logits) {
  const Extents e = extents5(logits, "argmax_labels");
  const std::size_t plane = e.d * e.h * e.w;
  LabelVolume out(e.n * plane);
  auto x = logits.data();
  for (std::size_t n = 0; n < e.n; ++n)
    for (std::size_t v = 0; v < plane; ++v) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < e.c; ++k)
        if (x[(n * e.c + k) * plane + v] > x[(n * e.c + best) * plane + v]) best = k;
      out[n * plane + v] = static_cast<std::uint8_t>(best);
    }
  return out;
}

double dice_score(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth, int class_id) {
  if (predicted.size() != truth.size()) throw ShapeError("dice_score: label volumes differ in size");
  std::size_t a = 0, b = 0, both = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool p = predicted[i] == class_id, t = truth[i] == class_id;
    a += p;
    b += t;
    both += p && t;
  }
  if (a + b == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(a + b);
}

}  // namespace hwnas
