#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "hwnas/latency.hpp"
#include "hwnas/ops.hpp"
#include "hwnas/search_space.hpp"
#include "hwnas/tensor.hpp"

namespace hwnas {

struct CellNode {
  int source = 0;  // index of the chosen predecessor v_source, < node index
  PrimitiveOp op = PrimitiveOp::Conv3d;

  friend bool operator==(const CellNode&, const CellNode&) = default;
};

/// Discrete cell: nodes[j - 1] describes intermediate node v_j.
struct CellArch {
  CellKind kind = CellKind::NonScaling;
  std::vector<CellNode> nodes;

  friend bool operator==(const CellArch&, const CellArch&) = default;
};

// Argmax over gamma for each node's source, then argmax over the non-Zero ops
// of that edge. Ties go to the lowest index.
CellArch decode_cell(const ArchParams& params, CellKind kind);

// Top-n paths by beta probability with all-skip paths ineligible.
PathSearchResult decode_network(const ArchParams& params, const SearchConfig& cfg, int n);

/// Fused discrete architecture: the union of the decoded paths' edges, one
/// shared CellArch per cell kind, element-wise sum where edges meet.
struct ArchGraph {
  SearchConfig config;
  std::array<CellArch, kNumCellKinds> cells;
  std::vector<SupernetEdge> edges;  // sorted, unique
  std::string merge = "sum";

  // Throws DecodeError on broken chaining, out-of-range coordinates,
  // malformed cells or vertices not on a stem-to-head route.
  void validate() const;

  const CellArch& cell(CellKind kind) const { return cells[static_cast<std::size_t>(kind)]; }
  int in_degree(int layer, int scale) const;
  std::size_t vertex_channels(int scale) const { return config.channels(scale); }
  std::array<std::size_t, 3> vertex_shape(int scale) const { return config.spatial(scale); }

  friend bool operator==(const ArchGraph& a, const ArchGraph& b);
};

ArchGraph fuse_paths(const std::vector<PathSpec>& paths, const ArchParams& params, const SearchConfig& cfg);

// decode_network + fuse_paths.
ArchGraph decode_arch(const ArchParams& params, const SearchConfig& cfg, int n);

std::string export_arch(const ArchGraph& arch);
ArchGraph import_arch(std::string_view json_text);
void save_arch(const ArchGraph& arch, const std::filesystem::path& path);
ArchGraph load_arch(const std::filesystem::path& path);

// Table estimate of one forward pass: stem + head + for every retained
// non-skip edge its preprocess, merge and the chosen full-width ops.
double estimate_arch_latency(const ArchGraph& arch, const LatencyTable& table);

// Rendering of the layers x scales grid with the retained edges.
std::string render_arch_grid(const ArchGraph& arch);

/// Weights for a decoded architecture, trained from scratch.
class DiscreteNetwork {
 public:
  DiscreteNetwork(const ArchGraph& arch, std::uint64_t seed);

  const ArchGraph& arch() const { return arch_; }
  Tensor forward(const Tensor& x) const;  // [N, Cin, D, H, W] -> [N, K, D, H, W]

  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
  std::vector<Tensor> parameters() const;

 private:
  struct EdgeCell {
    PointwiseConv preprocess;
    std::vector<OpWeights> ops;  // one per node
    PointwiseConv merge;
  };
  Tensor run_cell(const SupernetEdge& edge, const EdgeCell& cell, const Tensor& x) const;

  ArchGraph arch_;
  OpWeights stem_;
  PointwiseConv head_;
  std::map<SupernetEdge, EdgeCell> cells_;
};

struct LatencyStats {
  double median = 0.0;  // seconds
  double mean = 0.0;
  double min = 0.0;
  int reps = 0;
};

// Single-sample inference timing (no tape), median over `reps` after `warmup`.
LatencyStats measure_latency(const DiscreteNetwork& net, int reps, int warmup);

}  // namespace hwnas
