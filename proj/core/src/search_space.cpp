#include "hwnas/search_space.hpp"

#include <limits>
#include <random>
#include <string>

#include "hwnas/errors.hpp"

namespace hwnas {

std::string_view to_string(EdgeKind kind) {
  switch (kind) {
    case EdgeKind::Contract: return "contract";
    case EdgeKind::NonScale: return "nonscale";
    case EdgeKind::Expand: return "expand";
    case EdgeKind::Skip: return "skip";
  }
  return "?";
}

std::string_view to_string(CellKind kind) {
  switch (kind) {
    case CellKind::Contracting: return "contracting";
    case CellKind::NonScaling: return "nonscaling";
    case CellKind::Expanding: return "expanding";
  }
  return "?";
}

EdgeKind edge_kind_from_string(std::string_view name) {
  for (auto k : kEdgeKinds)
    if (to_string(k) == name) return k;
  throw ArgumentError("unknown edge kind '" + std::string(name) + "'");
}

CellKind cell_kind_from_string(std::string_view name) {
  for (auto k : kCellKinds)
    if (to_string(k) == name) return k;
  throw ArgumentError("unknown cell kind '" + std::string(name) + "'");
}

int scale_step(EdgeKind kind) {
  switch (kind) {
    case EdgeKind::Contract: return 1;
    case EdgeKind::Expand: return -1;
    default: return 0;
  }
}

CellKind cell_kind_of(EdgeKind kind) {
  switch (kind) {
    case EdgeKind::Contract: return CellKind::Contracting;
    case EdgeKind::NonScale: return CellKind::NonScaling;
    case EdgeKind::Expand: return CellKind::Expanding;
    case EdgeKind::Skip: break;
  }
  throw ArgumentError("skip edges carry no cell");
}

// ---------------------------------------------------------------------------
// SearchConfig

void SearchConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("search config: " + msg); };
  if (layers < 1) fail("layers must be >= 1");
  if (scales < 1) fail("scales must be >= 1");
  if (scales > 16) fail("scales must be <= 16");
  if (nodes < 1) fail("nodes must be >= 1");
  if (base_channels < 1) fail("base_channels must be >= 1");
  if (k_partial < 1) fail("k_partial must be >= 1");
  if (num_classes < 2) fail("num_classes must be >= 2");
  if (num_classes > 255) fail("num_classes must be <= 255");
  if (in_channels < 1) fail("in_channels must be >= 1");
  if (n_fusion < 1) fail("n_fusion must be >= 1");
  if (static_cast<long long>(base_channels) << (scales - 1) > std::numeric_limits<int>::max())
    fail("channel width at the coarsest scale overflows");
  const int factor = 1 << (scales - 1);
  for (int v : input_shape)
    if (v < 1 || v % factor != 0)
      fail("input extents must be positive multiples of 2^(scales-1) = " + std::to_string(factor));
  // C_s = C0 * 2^s, so divisibility at scale 0 covers every scale.
  if (base_channels % k_partial != 0)
    fail("base_channels (" + std::to_string(base_channels) + ") not divisible by k_partial (" +
         std::to_string(k_partial) + ")");
}

std::array<std::size_t, 3> SearchConfig::spatial(int scale) const {
  std::array<std::size_t, 3> out{};
  for (std::size_t i = 0; i < 3; ++i) out[i] = static_cast<std::size_t>(input_shape[i]) >> scale;
  return out;
}

SearchConfig SearchConfig::reference() {
  SearchConfig cfg;
  cfg.layers = 8;
  cfg.scales = 3;  // depth 20 admits two halvings
  cfg.nodes = 3;
  cfg.base_channels = 16;
  cfg.k_partial = 4;
  cfg.num_classes = 4;
  cfg.input_shape = {20, 128, 112};
  cfg.n_fusion = 2;
  return cfg;
}

std::size_t cell_edge_index(int source, int node) {
  return static_cast<std::size_t>(node * (node - 1) / 2 + source);
}

bool vertex_live(const SearchConfig& cfg, int layer, int scale) {
  return layer >= 0 && layer <= cfg.layers && scale >= 0 && scale < cfg.scales && scale <= layer &&
         scale <= cfg.layers - layer;
}

std::vector<EdgeKind> out_kinds(const SearchConfig& cfg, int scale) {
  std::vector<EdgeKind> kinds;
  for (auto k : kEdgeKinds) {
    const int t = scale + scale_step(k);
    if (t >= 0 && t < cfg.scales) kinds.push_back(k);
  }
  return kinds;
}

std::vector<SupernetEdge> live_edges(const SearchConfig& cfg) {
  std::vector<SupernetEdge> edges;
  for (int l = 0; l < cfg.layers; ++l)
    for (int s = 0; s < cfg.scales; ++s) {
      if (!vertex_live(cfg, l, s)) continue;
      for (auto k : out_kinds(cfg, s))
        if (vertex_live(cfg, l + 1, s + scale_step(k))) edges.push_back({l, s, k});
    }
  return edges;
}

// ---------------------------------------------------------------------------
// ArchParams

ArchParams ArchParams::zeros(const SearchConfig& cfg) {
  const std::size_t e = cfg.cell_edges();
  ArchParams p;
  p.alpha = Tensor({kNumCellKinds, e, kNumPrimitiveOps}, true);
  p.gamma = Tensor({kNumCellKinds, e}, true);
  p.beta = Tensor({static_cast<std::size_t>(cfg.layers), static_cast<std::size_t>(cfg.scales), kNumEdgeKinds}, true);
  return p;
}

ArchParams ArchParams::clone() const {
  ArchParams p;
  p.alpha = Tensor(alpha.shape(), {alpha.data().begin(), alpha.data().end()}, alpha.requires_grad());
  p.gamma = Tensor(gamma.shape(), {gamma.data().begin(), gamma.data().end()}, gamma.requires_grad());
  p.beta = Tensor(beta.shape(), {beta.data().begin(), beta.data().end()}, beta.requires_grad());
  return p;
}

Tensor alpha_probs(const ArchParams& params, CellKind kind, std::size_t edge) {
  const std::size_t e = params.alpha.extent(1);
  if (edge >= e) throw ArgumentError("alpha_probs: edge " + std::to_string(edge) + " out of range");
  std::array<std::size_t, kNumPrimitiveOps> idx{};
  for (std::size_t k = 0; k < kNumPrimitiveOps; ++k)
    idx[k] = (static_cast<std::size_t>(kind) * e + edge) * kNumPrimitiveOps + k;
  return softmax(gather(params.alpha, idx), 0);
}

Tensor gamma_probs(const ArchParams& params, CellKind kind, int node) {
  const std::size_t e = params.gamma.extent(1);
  if (node < 1 || cell_edge_index(node - 1, node) >= e)
    throw ArgumentError("gamma_probs: node " + std::to_string(node) + " out of range");
  std::vector<std::size_t> idx;
  for (int i = 0; i < node; ++i) idx.push_back(static_cast<std::size_t>(kind) * e + cell_edge_index(i, node));
  return softmax(gather(params.gamma, idx), 0);
}

Tensor beta_probs(const ArchParams& params, const SearchConfig& cfg, int layer, int scale) {
  if (layer < 0 || layer >= cfg.layers || scale < 0 || scale >= cfg.scales)
    throw ArgumentError("beta_probs: vertex (" + std::to_string(layer) + "," + std::to_string(scale) +
                        ") has no outgoing edges");
  std::vector<std::size_t> idx;
  for (auto k : out_kinds(cfg, scale))
    idx.push_back((static_cast<std::size_t>(layer) * cfg.scales + scale) * kNumEdgeKinds + static_cast<std::size_t>(k));
  return softmax(gather(params.beta, idx), 0);
}

BetaGrid beta_grid(const ArchParams& params, const SearchConfig& cfg) {
  NoGradGuard no_grad;
  BetaGrid grid{cfg.layers, cfg.scales,
                std::vector<double>(static_cast<std::size_t>(cfg.layers * cfg.scales) * kNumEdgeKinds, 0.0)};
  for (int l = 0; l < cfg.layers; ++l)
    for (int s = 0; s < cfg.scales; ++s) {
      const auto kinds = out_kinds(cfg, s);
      const Tensor p = beta_probs(params, cfg, l, s);
      for (std::size_t i = 0; i < kinds.size(); ++i) grid.at(l, s, kinds[i]) = p.data()[i];
    }
  return grid;
}

// ---------------------------------------------------------------------------
// cells

std::vector<std::pair<std::string, Tensor>> Cell::named_parameters(const std::string& prefix) const {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back(prefix + ".pre.weight", preprocess.weight);
  out.emplace_back(prefix + ".pre.bias", preprocess.bias);
  for (std::size_t e = 0; e < edges.size(); ++e)
    for (std::size_t k = 0; k < kNumPrimitiveOps; ++k) {
      const auto& w = edges[e].ops[k];
      const std::string base = prefix + ".edge" + std::to_string(e) + "." + std::string(to_string(kPrimitiveOps[k]));
      if (w.weight.defined()) out.emplace_back(base + ".weight", w.weight);
      if (w.depthwise.defined()) out.emplace_back(base + ".depthwise", w.depthwise);
      if (w.pointwise.defined()) out.emplace_back(base + ".pointwise", w.pointwise);
      if (w.bias.defined()) out.emplace_back(base + ".bias", w.bias);
    }
  out.emplace_back(prefix + ".merge.weight", merge.weight);
  out.emplace_back(prefix + ".merge.bias", merge.bias);
  return out;
}

Tensor cell_preprocess(const Cell& cell, const Tensor& x) {
  if (x.ndim() != 5 || x.extent(1) != cell.in_channels)
    throw ShapeError("cell input " + shape_str(x.shape()) + " does not have " + std::to_string(cell.in_channels) +
                     " channels");
  switch (cell.kind) {
    case CellKind::Contracting: return contract_preprocess(x, cell.preprocess);
    case CellKind::NonScaling: return nonscale_preprocess(x, cell.preprocess);
    case CellKind::Expanding: return expand_preprocess(x, cell.preprocess);
  }
  throw ArgumentError("cell_preprocess: unknown cell kind");
}

namespace {

Tensor mixed_op(const MixedEdge& edge, const Tensor& x, const Tensor& p_alpha) {
  Tensor acc;
  for (std::size_t k = 0; k < kNumPrimitiveOps; ++k) {
    Tensor term = mul_scalar(apply_primitive(kPrimitiveOps[k], x, edge.ops[k]), select(p_alpha, k));
    acc = acc.defined() ? add(acc, term) : term;
  }
  return acc;
}

int node_count(const Cell& cell) {
  // edges = m(m+1)/2
  int m = 0;
  while (static_cast<std::size_t>((m + 1) * (m + 2) / 2) <= cell.edges.size()) ++m;
  return m;
}

}  // namespace

Tensor cell_forward(const Cell& cell, const Tensor& x, const ArchParams& params, int k_partial) {
  if (k_partial < 1 || cell.channels % static_cast<std::size_t>(k_partial) != 0)
    throw ConfigError("cell_forward: " + std::to_string(cell.channels) + " channels not divisible by k_partial=" +
                      std::to_string(k_partial));
  const std::size_t part = cell.channels / static_cast<std::size_t>(k_partial);
  if (part != cell.op_channels)
    throw ConfigError("cell_forward: cell was built for " + std::to_string(cell.op_channels) +
                      " mixed-op channels, k_partial gives " + std::to_string(part));
  const int m = node_count(cell);
  std::vector<Tensor> nodes{cell_preprocess(cell, x)};
  for (int j = 1; j <= m; ++j) {
    const Tensor p_gamma = gamma_probs(params, cell.kind, j);
    Tensor acc;
    for (int i = 0; i < j; ++i) {
      const std::size_t e = cell_edge_index(i, j);
      const Tensor& src = nodes[static_cast<std::size_t>(i)];
      Tensor routed;
      if (part == cell.channels) {
        routed = mixed_op(cell.edges[e], src, alpha_probs(params, cell.kind, e));
      } else {
        Tensor mixed = mixed_op(cell.edges[e], slice_channels(src, 0, part), alpha_probs(params, cell.kind, e));
        routed = concat_channels({mixed, slice_channels(src, part, cell.channels)});
      }
      Tensor term = mul_scalar(routed, select(p_gamma, static_cast<std::size_t>(i)));
      acc = acc.defined() ? add(acc, term) : term;
    }
    nodes.push_back(acc);
  }
  return concat_channels(std::span<const Tensor>(nodes.data() + 1, nodes.size() - 1));
}

Tensor cell_forward_unsplit(const Cell& cell, const Tensor& x, const ArchParams& params) {
  if (cell.op_channels != cell.channels)
    throw ConfigError("cell_forward_unsplit: cell was built with partial channels");
  const int m = node_count(cell);
  std::vector<Tensor> nodes{cell_preprocess(cell, x)};
  for (int j = 1; j <= m; ++j) {
    const Tensor p_gamma = gamma_probs(params, cell.kind, j);
    Tensor acc;
    for (int i = 0; i < j; ++i) {
      const std::size_t e = cell_edge_index(i, j);
      const Tensor p_alpha = alpha_probs(params, cell.kind, e);
      const Tensor& src = nodes[static_cast<std::size_t>(i)];
      Tensor mixture;
      for (std::size_t k = 0; k < kNumPrimitiveOps; ++k) {
        Tensor weighted = mul_scalar(apply_primitive(kPrimitiveOps[k], src, cell.edges[e].ops[k]), select(p_alpha, k));
        mixture = k == 0 ? weighted : add(mixture, weighted);
      }
      Tensor term = mul_scalar(mixture, select(p_gamma, static_cast<std::size_t>(i)));
      acc = acc.defined() ? add(acc, term) : term;
    }
    nodes.push_back(acc);
  }
  return concat_channels(std::span<const Tensor>(nodes.data() + 1, nodes.size() - 1));
}

Tensor cell_output(const Cell& cell, const Tensor& x, const ArchParams& params, int k_partial) {
  return apply_pointwise(cell_forward(cell, x, params, k_partial), cell.merge);
}

// ---------------------------------------------------------------------------
// Supernet

namespace {
constexpr std::size_t kNoCell = std::numeric_limits<std::size_t>::max();
}

Supernet::Supernet(const SearchConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  stem_ = init_op_weights(PrimitiveOp::Conv3d, static_cast<std::size_t>(cfg_.in_channels), cfg_.channels(0), rng);
  edges_ = live_edges(cfg_);
  const std::size_t e = cfg_.cell_edges();
  for (const auto& edge : edges_) {
    if (edge.kind == EdgeKind::Skip) {
      slot_of_edge_.push_back(kNoCell);
      continue;
    }
    Cell cell;
    cell.kind = cell_kind_of(edge.kind);
    cell.in_channels = cfg_.channels(edge.from_scale);
    cell.channels = cfg_.channels(edge.to_scale());
    cell.op_channels = cell.channels / static_cast<std::size_t>(cfg_.k_partial);
    cell.preprocess = init_pointwise(cell.in_channels, cell.channels, rng);
    cell.edges.resize(e);
    for (auto& mixed : cell.edges)
      for (std::size_t k = 0; k < kNumPrimitiveOps; ++k)
        mixed.ops[k] = init_op_weights(kPrimitiveOps[k], cell.op_channels, cell.op_channels, rng);
    cell.merge = init_pointwise(static_cast<std::size_t>(cfg_.nodes) * cell.channels, cell.channels, rng);
    slot_of_edge_.push_back(cells_.size());
    cells_.push_back(std::move(cell));
  }
  head_ = init_pointwise(cfg_.channels(0), static_cast<std::size_t>(cfg_.num_classes), rng);
}

std::size_t Supernet::cell_slot(const SupernetEdge& edge) const {
  for (std::size_t i = 0; i < edges_.size(); ++i)
    if (edges_[i] == edge) {
      if (slot_of_edge_[i] == kNoCell) break;
      return slot_of_edge_[i];
    }
  throw ArgumentError("supernet has no cell for edge (layer " + std::to_string(edge.layer) + ", scale " +
                      std::to_string(edge.from_scale) + ", " + std::string(to_string(edge.kind)) + ")");
}

const Cell& Supernet::cell(const SupernetEdge& edge) const { return cells_[cell_slot(edge)]; }
Cell& Supernet::cell(const SupernetEdge& edge) { return cells_[cell_slot(edge)]; }

std::vector<std::pair<std::string, Tensor>> Supernet::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back("stem.weight", stem_.weight);
  out.emplace_back("stem.bias", stem_.bias);
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    if (slot_of_edge_[i] == kNoCell) continue;
    const auto& edge = edges_[i];
    const std::string prefix = "cell.l" + std::to_string(edge.layer) + ".s" + std::to_string(edge.from_scale) + "." +
                               std::string(to_string(edge.kind));
    auto named = cells_[slot_of_edge_[i]].named_parameters(prefix);
    out.insert(out.end(), named.begin(), named.end());
  }
  out.emplace_back("head.weight", head_.weight);
  out.emplace_back("head.bias", head_.bias);
  return out;
}

std::vector<Tensor> Supernet::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

Tensor Supernet::stem_forward(const Tensor& x) const {
  return conv3d(x, stem_.weight, stem_.bias, ConvGeometry{1, 1, 1, 1});
}

Tensor Supernet::head_forward(const Tensor& x) const { return apply_pointwise(x, head_); }

std::pair<Supernet, ArchParams> build_supernet(const SearchConfig& cfg, std::uint64_t seed) {
  Supernet net(cfg, seed);
  return {std::move(net), ArchParams::zeros(cfg)};
}

Tensor network_forward(const Supernet& net, const Tensor& x, const ArchParams& params) {
  const SearchConfig& cfg = net.config();
  if (x.ndim() != 5 || x.extent(1) != static_cast<std::size_t>(cfg.in_channels) ||
      x.extent(2) != static_cast<std::size_t>(cfg.input_shape[0]) ||
      x.extent(3) != static_cast<std::size_t>(cfg.input_shape[1]) ||
      x.extent(4) != static_cast<std::size_t>(cfg.input_shape[2]))
    throw ShapeError("network input " + shape_str(x.shape()) + " does not match configured [N," +
                     std::to_string(cfg.in_channels) + "," + std::to_string(cfg.input_shape[0]) + "," +
                     std::to_string(cfg.input_shape[1]) + "," + std::to_string(cfg.input_shape[2]) + "]");
  const auto L = static_cast<std::size_t>(cfg.layers), S = static_cast<std::size_t>(cfg.scales);
  std::vector<Tensor> X((L + 1) * S);
  auto at = [&](int l, int s) -> Tensor& { return X[static_cast<std::size_t>(l) * S + static_cast<std::size_t>(s)]; };
  at(0, 0) = net.stem_forward(x);

  // Beta probabilities are computed once per source vertex.
  std::vector<Tensor> beta(L * S);
  for (const auto& edge : net.edges()) {
    Tensor& src = at(edge.layer, edge.from_scale);
    Tensor& bp = beta[static_cast<std::size_t>(edge.layer) * S + static_cast<std::size_t>(edge.from_scale)];
    if (!bp.defined()) bp = beta_probs(params, cfg, edge.layer, edge.from_scale);
    const auto kinds = out_kinds(cfg, edge.from_scale);
    std::size_t slot = 0;
    while (kinds[slot] != edge.kind) ++slot;

    Tensor value = edge.kind == EdgeKind::Skip ? src : cell_output(net.cell(edge), src, params, cfg.k_partial);
    Tensor term = mul_scalar(value, select(bp, slot));
    Tensor& dst = at(edge.layer + 1, edge.to_scale());
    dst = dst.defined() ? add(dst, term) : term;
  }
  return net.head_forward(at(cfg.layers, 0));
}

}  // namespace hwnas
