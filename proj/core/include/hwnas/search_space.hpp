#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hwnas/ops.hpp"
#include "hwnas/tensor.hpp"

namespace hwnas {

// Network-level edge kinds; the order is the last axis of ArchParams::beta.
enum class EdgeKind : std::uint8_t { Contract, NonScale, Expand, Skip };
inline constexpr std::size_t kNumEdgeKinds = 4;
inline constexpr std::array<EdgeKind, kNumEdgeKinds> kEdgeKinds = {EdgeKind::Contract, EdgeKind::NonScale,
                                                                   EdgeKind::Expand, EdgeKind::Skip};

enum class CellKind : std::uint8_t { Contracting, NonScaling, Expanding };
inline constexpr std::size_t kNumCellKinds = 3;
inline constexpr std::array<CellKind, kNumCellKinds> kCellKinds = {CellKind::Contracting, CellKind::NonScaling,
                                                                   CellKind::Expanding};

std::string_view to_string(EdgeKind kind);
std::string_view to_string(CellKind kind);
EdgeKind edge_kind_from_string(std::string_view name);
CellKind cell_kind_from_string(std::string_view name);
// Scale change of an edge: contract +1, expand -1, others 0.
int scale_step(EdgeKind kind);
// Cell kind owned by a non-skip edge.
CellKind cell_kind_of(EdgeKind kind);

struct SearchConfig {
  int layers = 4;         // L
  int scales = 3;         // S
  int nodes = 3;          // m, intermediate nodes per cell
  int base_channels = 4;  // C0; scale s carries C0 * 2^s channels
  int k_partial = 2;      // channel split divisor
  int num_classes = 2;    // K
  int in_channels = 1;
  std::array<int, 3> input_shape = {8, 16, 16};  // D, H, W
  int n_fusion = 1;

  // Throws ConfigError naming the first violated constraint.
  void validate() const;

  std::size_t channels(int scale) const { return static_cast<std::size_t>(base_channels) << scale; }
  std::array<std::size_t, 3> spatial(int scale) const;
  std::size_t cell_edges() const { return static_cast<std::size_t>(nodes * (nodes + 1) / 2); }

  // Full-size reference geometry (L=8, m=3, k=4, 20x128x112, three scales, K=4).
  static SearchConfig reference();
};

// Flat index of the cell-internal edge v_source -> v_node (node in [1, m]).
std::size_t cell_edge_index(int source, int node);

// A vertex is live when it lies on at least one stem-to-head path.
bool vertex_live(const SearchConfig& cfg, int layer, int scale);
// Edge kinds whose target scale is in range, in canonical order. These are
// the kinds a vertex's beta softmax normalises over.
std::vector<EdgeKind> out_kinds(const SearchConfig& cfg, int scale);

struct SupernetEdge {
  int layer = 0;       // source layer; target is layer + 1
  int from_scale = 0;
  EdgeKind kind = EdgeKind::NonScale;

  int to_scale() const { return from_scale + scale_step(kind); }
  friend bool operator==(const SupernetEdge&, const SupernetEdge&) = default;
  friend auto operator<=>(const SupernetEdge&, const SupernetEdge&) = default;
};

// Live edges (both endpoints live), ordered by layer, source scale, kind.
std::vector<SupernetEdge> live_edges(const SearchConfig& cfg);

/// Architecture parameters. Probabilities are always derived by softmax.
struct ArchParams {
  Tensor alpha;  // [3, E, 6]: cell kind, cell edge, primitive op
  Tensor gamma;  // [3, E]: softmax groups are the edges entering each node
  Tensor beta;   // [L, S, 4]: source vertex, edge kind; out-of-range kinds unused

  static ArchParams zeros(const SearchConfig& cfg);
  std::vector<Tensor> tensors() const { return {alpha, gamma, beta}; }
  ArchParams clone() const;
};

Tensor alpha_probs(const ArchParams& params, CellKind kind, std::size_t edge);
// Length `node`: probabilities of sources v_0..v_{node-1}.
Tensor gamma_probs(const ArchParams& params, CellKind kind, int node);
// Length out_kinds(cfg, scale).size(), in that order.
Tensor beta_probs(const ArchParams& params, const SearchConfig& cfg, int layer, int scale);

/// Plain probability lookup for vertex (layer, scale); absent kinds read 0.
struct BetaGrid {
  int layers = 0;
  int scales = 0;
  std::vector<double> p;  // [layers][scales][kNumEdgeKinds]

  double at(int layer, int scale, EdgeKind kind) const {
    return p[(static_cast<std::size_t>(layer) * scales + scale) * kNumEdgeKinds + static_cast<std::size_t>(kind)];
  }
  double& at(int layer, int scale, EdgeKind kind) {
    return p[(static_cast<std::size_t>(layer) * scales + scale) * kNumEdgeKinds + static_cast<std::size_t>(kind)];
  }
};
BetaGrid beta_grid(const ArchParams& params, const SearchConfig& cfg);

struct MixedEdge {
  std::array<OpWeights, kNumPrimitiveOps> ops;
};

/// Searchable cell owned by one supernet edge: preprocessing, m(m+1)/2 mixed
/// edges over the partial channel slice, and a 1x1x1 merge that maps the
/// concatenated m*C output back to the canonical width.
struct Cell {
  CellKind kind = CellKind::NonScaling;
  std::size_t in_channels = 0;
  std::size_t channels = 0;     // canonical width of the target scale
  std::size_t op_channels = 0;  // channels / k_partial
  PointwiseConv preprocess;
  std::vector<MixedEdge> edges;
  PointwiseConv merge;

  std::vector<std::pair<std::string, Tensor>> named_parameters(const std::string& prefix) const;
};

Tensor cell_preprocess(const Cell& cell, const Tensor& x);

// Relaxed cell with partial channel connection: the first C/k channels of
// each source pass through the weighted mixed op, the rest bypass, and the
// gamma-weighted per-source results are summed. Returns concat(v_1..v_m).
Tensor cell_forward(const Cell& cell, const Tensor& x, const ArchParams& params, int k_partial);

// Unsplit form (every channel through the mixed op). Requires op_channels ==
// channels, i.e. a cell built with k_partial = 1.
Tensor cell_forward_unsplit(const Cell& cell, const Tensor& x, const ArchParams& params);

// Cell output at canonical width: merge(cell_forward(...)).
Tensor cell_output(const Cell& cell, const Tensor& x, const ArchParams& params, int k_partial);

class Supernet {
 public:
  Supernet(const SearchConfig& cfg, std::uint64_t seed);

  const SearchConfig& config() const { return cfg_; }
  const std::vector<SupernetEdge>& edges() const { return edges_; }
  // Cell of a non-skip live edge.
  const Cell& cell(const SupernetEdge& edge) const;
  Cell& cell(const SupernetEdge& edge);
  std::size_t cell_count() const { return cells_.size(); }

  const OpWeights& stem() const { return stem_; }
  const PointwiseConv& head() const { return head_; }

  // Stable names, used by checkpoints.
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
  std::vector<Tensor> parameters() const;

  Tensor stem_forward(const Tensor& x) const;
  Tensor head_forward(const Tensor& x) const;

 private:
  std::size_t cell_slot(const SupernetEdge& edge) const;

  SearchConfig cfg_;
  std::vector<SupernetEdge> edges_;
  std::vector<Cell> cells_;
  std::vector<std::size_t> slot_of_edge_;  // parallel to edges_; npos for skip
  OpWeights stem_;
  PointwiseConv head_;
};

// Fresh supernet (seeded He init) plus all-zero architecture parameters.
std::pair<Supernet, ArchParams> build_supernet(const SearchConfig& cfg, std::uint64_t seed);

// Relaxed multi-scale forward. x: [N, in_channels, D, H, W]; returns logits
// [N, K, D, H, W].
Tensor network_forward(const Supernet& net, const Tensor& x, const ArchParams& params);

}  // namespace hwnas
