#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "hwnas/tensor.hpp"

namespace hwnas {

using LabelVolume = std::vector<std::uint8_t>;

// The six searchable candidates of every cell edge.
enum class PrimitiveOp : std::uint8_t { Conv3d, DilatedConv3d, SeparableConv3d, MaxPool3d, Identity, Zero };

inline constexpr std::size_t kNumPrimitiveOps = 6;
inline constexpr std::array<PrimitiveOp, kNumPrimitiveOps> kPrimitiveOps = {
    PrimitiveOp::Conv3d,    PrimitiveOp::DilatedConv3d, PrimitiveOp::SeparableConv3d,
    PrimitiveOp::MaxPool3d, PrimitiveOp::Identity,      PrimitiveOp::Zero};

std::string_view to_string(PrimitiveOp op);
PrimitiveOp primitive_from_string(std::string_view name);
bool has_weights(PrimitiveOp op);

struct ConvGeometry {
  std::size_t stride = 1;
  std::size_t pad = 1;
  std::size_t dilation = 1;
  std::size_t groups = 1;
};

// Cross-correlation. x: [N,Cin,D,H,W]; w: [Cout,Cin/groups,kD,kH,kW];
// bias may be an undefined Tensor.
Tensor conv3d(const Tensor& x, const Tensor& w, const Tensor& bias, const ConvGeometry& geom);

// Depthwise 3x3x3 (groups = Cin) followed by 1x1x1 pointwise plus bias.
// dw: [Cin,1,3,3,3]; pw: [Cout,Cin,1,1,1].
Tensor separable_conv3d(const Tensor& x, const Tensor& dw, const Tensor& pw, const Tensor& bias);

// Padding positions never win (acts as -inf fill). Gradient goes to the
// first maximal element of a window in scan order.
Tensor maxpool3d(const Tensor& x, std::size_t kernel = 3, std::size_t stride = 1, std::size_t pad = 1);

Tensor identity_op(const Tensor& x);
// All zeros of x's shape; still linked to x (with zero gradient).
Tensor zero_op(const Tensor& x);

// Nearest-neighbour x2 in D, H and W.
Tensor upsample_nearest2(const Tensor& x);

/// Learnable tensors of one primitive instance. Unused members stay undefined.
struct OpWeights {
  Tensor weight;     // Conv3d / DilatedConv3d: [Cout,Cin,3,3,3]
  Tensor bias;       // [Cout] for every learnable kind
  Tensor depthwise;  // SeparableConv3d: [Cin,1,3,3,3]
  Tensor pointwise;  // SeparableConv3d: [Cout,Cin,1,1,1]

  std::vector<Tensor> parameters() const;
};

// He-normal weights, zero bias.
OpWeights init_op_weights(PrimitiveOp op, std::size_t cin, std::size_t cout, std::mt19937_64& rng);
std::size_t parameter_count(PrimitiveOp op, std::size_t cin, std::size_t cout);

// Runs one candidate with its fixed hyperparameters (kernel 3, stride 1,
// pad 1; dilated: pad 2 dilation 2). Convolutional kinds are followed by ReLU.
Tensor apply_primitive(PrimitiveOp op, const Tensor& x, const OpWeights& weights);

/// 1x1x1 convolution used by preprocessing, cell merge and the head.
struct PointwiseConv {
  Tensor weight;  // [Cout,Cin,1,1,1]
  Tensor bias;    // [Cout]

  std::vector<Tensor> parameters() const { return {weight, bias}; }
};

PointwiseConv init_pointwise(std::size_t cin, std::size_t cout, std::mt19937_64& rng);
Tensor apply_pointwise(const Tensor& x, const PointwiseConv& conv);

// Scale-changing preprocessing of a cell input. contract: kernel-2 stride-2
// maxpool then 1x1x1 conv; expand: nearest x2 upsample then 1x1x1 conv;
// nonscale: 1x1x1 conv.
Tensor contract_preprocess(const Tensor& x, const PointwiseConv& conv);
Tensor expand_preprocess(const Tensor& x, const PointwiseConv& conv);
Tensor nonscale_preprocess(const Tensor& x, const PointwiseConv& conv);

// Mean over all voxels of -log softmax(logits)[label]. logits: [N,K,D,H,W];
// labels: N*D*H*W values in [0,K).
Tensor cross_entropy(const Tensor& logits, std::span<const std::uint8_t> labels);

// Per-voxel argmax over the class axis.
LabelVolume argmax_labels(const Tensor& logits);

// 2|A∩B| / (|A|+|B|) for the masks of class_id; 1 when both are empty.
double dice_score(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth, int class_id);

}  // namespace hwnas
