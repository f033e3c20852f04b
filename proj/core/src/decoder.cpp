#include "hwnas/decoder.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <set>
#include <sstream>

#include "hwnas/errors.hpp"
#include "hwnas/stats.hpp"
#include "json_util.hpp"

namespace hwnas {

using detail::json;

namespace {

std::size_t argmax_first(std::span<const double> v, std::size_t begin = 0) {
  std::size_t best = begin;
  for (std::size_t i = begin + 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

int nodes_of(const ArchParams& params) {
  const std::size_t e = params.alpha.extent(1);
  int m = 0;
  while (static_cast<std::size_t>(m * (m + 1) / 2) < e) ++m;
  if (static_cast<std::size_t>(m * (m + 1) / 2) != e) throw ArgumentError("alpha edge axis is not m(m+1)/2");
  return m;
}

std::string edge_str(const SupernetEdge& e) {
  return "(layer " + std::to_string(e.layer) + ", scale " + std::to_string(e.from_scale) + ", " +
         std::string(to_string(e.kind)) + ")";
}

}  // namespace

CellArch decode_cell(const ArchParams& params, CellKind kind) {
  NoGradGuard guard;
  CellArch arch;
  arch.kind = kind;
  const int m = nodes_of(params);
  for (int j = 1; j <= m; ++j) {
    const Tensor pg = gamma_probs(params, kind, j);
    const int source = static_cast<int>(argmax_first(pg.data()));
    const Tensor pa = alpha_probs(params, kind, cell_edge_index(source, j));
    // Zero is last in the op order, so excluding it is a prefix argmax.
    static_assert(kPrimitiveOps.back() == PrimitiveOp::Zero);
    const auto probs = pa.data().first(kNumPrimitiveOps - 1);
    arch.nodes.push_back({source, kPrimitiveOps[argmax_first(probs)]});
  }
  return arch;
}

PathSearchResult decode_network(const ArchParams& params, const SearchConfig& cfg, int n) {
  NoGradGuard guard;
  return top_n_longest_paths(beta_grid(params, cfg), n, /*exclude_all_skip=*/true);
}

// ---------------------------------------------------------------------------
// ArchGraph

bool operator==(const ArchGraph& a, const ArchGraph& b) {
  return detail::config_to_json(a.config) == detail::config_to_json(b.config) && a.cells == b.cells &&
         a.edges == b.edges && a.merge == b.merge;
}

int ArchGraph::in_degree(int layer, int scale) const {
  return static_cast<int>(std::count_if(edges.begin(), edges.end(), [&](const SupernetEdge& e) {
    return e.layer + 1 == layer && e.to_scale() == scale;
  }));
}

void ArchGraph::validate() const {
  try {
    config.validate();
  } catch (const ConfigError& ex) {
    throw DecodeError(std::string("architecture config: ") + ex.what());
  }
  if (merge != "sum") throw DecodeError("unsupported merge rule '" + merge + "'");
  for (std::size_t c = 0; c < kNumCellKinds; ++c) {
    const CellArch& cell = cells[c];
    const std::string name(to_string(kCellKinds[c]));
    if (cell.kind != kCellKinds[c]) throw DecodeError("cell '" + name + "' has mismatched kind");
    if (cell.nodes.size() != static_cast<std::size_t>(config.nodes))
      throw DecodeError("cell '" + name + "' has " + std::to_string(cell.nodes.size()) + " nodes, expected " +
                        std::to_string(config.nodes));
    for (std::size_t j = 0; j < cell.nodes.size(); ++j) {
      const auto& node = cell.nodes[j];
      if (node.source < 0 || node.source > static_cast<int>(j))
        throw DecodeError("cell '" + name + "' node " + std::to_string(j + 1) + " reads from v" +
                          std::to_string(node.source) + ", not a predecessor");
      if (node.op == PrimitiveOp::Zero)
        throw DecodeError("cell '" + name + "' node " + std::to_string(j + 1) + " uses the zero op");
    }
  }
  if (edges.empty()) throw DecodeError("architecture has no edges");
  if (!std::is_sorted(edges.begin(), edges.end()) || std::adjacent_find(edges.begin(), edges.end()) != edges.end())
    throw DecodeError("architecture edges must be sorted and unique");

  const int L = config.layers, S = config.scales;
  std::set<std::pair<int, int>> reached = {{0, 0}};
  for (const auto& e : edges) {
    if (e.layer < 0 || e.layer >= L || e.from_scale < 0 || e.from_scale >= S || e.to_scale() < 0 || e.to_scale() >= S)
      throw DecodeError("edge " + edge_str(e) + " lies outside the " + std::to_string(L) + "x" + std::to_string(S) +
                        " grid");
    if (!vertex_live(config, e.layer, e.from_scale) || !vertex_live(config, e.layer + 1, e.to_scale()))
      throw DecodeError("edge " + edge_str(e) + " touches a vertex with no route to the head");
    if (!reached.count({e.layer, e.from_scale}))
      throw DecodeError("edge " + edge_str(e) + " starts at a vertex not reachable from the stem");
    reached.insert({e.layer + 1, e.to_scale()});
  }
  if (!reached.count({L, 0})) throw DecodeError("head vertex (layer " + std::to_string(L) + ", scale 0) not reached");
  std::set<std::pair<int, int>> coreached = {{L, 0}};
  for (auto it = edges.rbegin(); it != edges.rend(); ++it) {
    if (!coreached.count({it->layer + 1, it->to_scale()}))
      throw DecodeError("edge " + edge_str(*it) + " ends at a vertex that does not reach the head");
    coreached.insert({it->layer, it->from_scale});
  }
}

ArchGraph fuse_paths(const std::vector<PathSpec>& paths, const ArchParams& params, const SearchConfig& cfg) {
  if (paths.empty()) throw DecodeError("fuse_paths: no paths to fuse");
  ArchGraph arch;
  arch.config = cfg;
  for (std::size_t c = 0; c < kNumCellKinds; ++c) arch.cells[c] = decode_cell(params, kCellKinds[c]);
  for (std::size_t p = 0; p < paths.size(); ++p) {
    const auto& steps = paths[p].steps;
    if (steps.size() != static_cast<std::size_t>(cfg.layers))
      throw DecodeError("path " + std::to_string(p) + " has " + std::to_string(steps.size()) + " steps, expected " +
                        std::to_string(cfg.layers));
    int scale = 0;
    for (std::size_t i = 0; i < steps.size(); ++i) {
      if (steps[i].layer != static_cast<int>(i) || steps[i].from_scale != scale)
        throw DecodeError("path " + std::to_string(p) + " breaks at step " + std::to_string(i));
      scale = steps[i].to_scale();
    }
    if (scale != 0) throw DecodeError("path " + std::to_string(p) + " ends at scale " + std::to_string(scale) + ", not 0");
    arch.edges.insert(arch.edges.end(), steps.begin(), steps.end());
  }
  std::sort(arch.edges.begin(), arch.edges.end());
  arch.edges.erase(std::unique(arch.edges.begin(), arch.edges.end()), arch.edges.end());
  arch.validate();
  return arch;
}

ArchGraph decode_arch(const ArchParams& params, const SearchConfig& cfg, int n) {
  return fuse_paths(decode_network(params, cfg, n).paths, params, cfg);
}

// ---------------------------------------------------------------------------
// JSON

std::string export_arch(const ArchGraph& arch) {
  json cells = json::object();
  for (const auto& cell : arch.cells) {
    json nodes = json::array();
    for (const auto& node : cell.nodes) nodes.push_back({{"source", node.source}, {"op", to_string(node.op)}});
    cells[std::string(to_string(cell.kind))] = {{"nodes", nodes}};
  }
  json edges = json::array();
  for (const auto& e : arch.edges)
    edges.push_back(
        {{"layer", e.layer}, {"from_scale", e.from_scale}, {"to_scale", e.to_scale()}, {"kind", to_string(e.kind)}});
  json doc{{"config", detail::config_to_json(arch.config)}, {"cells", cells}, {"edges", edges}, {"merge", arch.merge}};
  return doc.dump(2) + "\n";
}

namespace {

void require_keys(const json& node, const std::string& where, std::initializer_list<const char*> keys) {
  if (!node.is_object()) throw DecodeError(where + ": expected an object");
  for (const auto& [key, value] : node.items())
    if (std::find_if(keys.begin(), keys.end(), [&](const char* k) { return key == k; }) == keys.end())
      throw DecodeError(where + "." + key + ": unknown key");
  for (const char* k : keys)
    if (!node.contains(k)) throw DecodeError(where + "." + k + ": missing");
}

int get_int(const json& node, const std::string& where) {
  if (!node.is_number_integer()) throw DecodeError(where + ": expected an integer");
  return node.get<int>();
}

std::string get_string(const json& node, const std::string& where) {
  if (!node.is_string()) throw DecodeError(where + ": expected a string");
  return node.get<std::string>();
}

}  // namespace

ArchGraph import_arch(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& ex) {
    throw DecodeError(std::string("$: invalid JSON: ") + ex.what());
  }
  require_keys(doc, "$", {"config", "cells", "edges", "merge"});
  ArchGraph arch;
  arch.config = detail::config_from_json<DecodeError>(doc.at("config"), "$.config");
  arch.merge = get_string(doc.at("merge"), "$.merge");

  const json& cells = doc.at("cells");
  require_keys(cells, "$.cells", {"contracting", "nonscaling", "expanding"});
  for (std::size_t c = 0; c < kNumCellKinds; ++c) {
    const std::string name(to_string(kCellKinds[c]));
    const std::string where = "$.cells." + name;
    require_keys(cells.at(name), where, {"nodes"});
    const json& nodes = cells.at(name).at("nodes");
    if (!nodes.is_array()) throw DecodeError(where + ".nodes: expected an array");
    arch.cells[c].kind = kCellKinds[c];
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      const std::string nw = where + ".nodes[" + std::to_string(j) + "]";
      require_keys(nodes[j], nw, {"source", "op"});
      CellNode node;
      node.source = get_int(nodes[j].at("source"), nw + ".source");
      try {
        node.op = primitive_from_string(get_string(nodes[j].at("op"), nw + ".op"));
      } catch (const ArgumentError&) {
        throw DecodeError(nw + ".op: unknown primitive '" + nodes[j].at("op").get<std::string>() + "'");
      }
      arch.cells[c].nodes.push_back(node);
    }
  }

  const json& edges = doc.at("edges");
  if (!edges.is_array()) throw DecodeError("$.edges: expected an array");
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const std::string where = "$.edges[" + std::to_string(i) + "]";
    require_keys(edges[i], where, {"layer", "from_scale", "to_scale", "kind"});
    SupernetEdge e;
    e.layer = get_int(edges[i].at("layer"), where + ".layer");
    e.from_scale = get_int(edges[i].at("from_scale"), where + ".from_scale");
    const std::string kind = get_string(edges[i].at("kind"), where + ".kind");
    try {
      e.kind = edge_kind_from_string(kind);
    } catch (const ArgumentError&) {
      throw DecodeError(where + ".kind: unknown edge kind '" + kind + "'");
    }
    const int to = get_int(edges[i].at("to_scale"), where + ".to_scale");
    if (to != e.to_scale())
      throw DecodeError(where + ".to_scale: " + std::to_string(to) + " inconsistent with a " + kind + " edge from scale " +
                        std::to_string(e.from_scale));
    arch.edges.push_back(e);
  }
  arch.validate();
  return arch;
}

void save_arch(const ArchGraph& arch, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DecodeError("cannot write architecture file " + path.string());
  out << export_arch(arch);
}

ArchGraph load_arch(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DecodeError("cannot open architecture file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return import_arch(ss.str());
}

// ---------------------------------------------------------------------------
// latency estimate and rendering

double estimate_arch_latency(const ArchGraph& arch, const LatencyTable& table) {
  const SearchConfig& cfg = arch.config;
  double total = table.lookup(stem_signature(cfg)) + table.lookup(head_signature(cfg));
  for (const auto& e : arch.edges) {
    if (e.kind == EdgeKind::Skip) continue;
    total += table.lookup(preprocess_signature(cfg, e.kind, e.from_scale));
    total += table.lookup(merge_signature(cfg, e.to_scale()));
    for (const auto& node : arch.cell(cell_kind_of(e.kind)).nodes)
      total += table.lookup(primitive_signature(cfg, node.op, e.to_scale(), false));
  }
  return total;
}

std::string render_arch_grid(const ArchGraph& arch) {
  const int L = arch.config.layers, S = arch.config.scales;
  const auto has = [&](int l, int s, EdgeKind k) {
    return std::binary_search(arch.edges.begin(), arch.edges.end(), SupernetEdge{l, s, k});
  };
  std::set<std::pair<int, int>> used;
  for (const auto& e : arch.edges) {
    used.insert({e.layer, e.from_scale});
    used.insert({e.layer + 1, e.to_scale()});
  }
  // Vertex rows at even lines, diagonal edges on the odd lines between them.
  std::vector<std::string> lines(static_cast<std::size_t>(2 * S - 1), std::string(static_cast<std::size_t>(4 * L + 1), ' '));
  for (int s = 0; s < S; ++s) {
    auto& row = lines[static_cast<std::size_t>(2 * s)];
    for (int l = 0; l <= L; ++l) row[static_cast<std::size_t>(4 * l)] = used.count({l, s}) ? 'o' : '.';
    for (int l = 0; l < L; ++l) {
      const bool ns = has(l, s, EdgeKind::NonScale), sk = has(l, s, EdgeKind::Skip);
      if (ns || sk) {
        const auto base = static_cast<std::size_t>(4 * l);
        row[base + 1] = '-';
        row[base + 2] = ns && sk ? 'B' : (ns ? 'N' : 'S');
        row[base + 3] = '-';
      }
      if (s + 1 < S) {
        const bool ct = has(l, s, EdgeKind::Contract), ex = has(l, s + 1, EdgeKind::Expand);
        if (ct || ex) lines[static_cast<std::size_t>(2 * s + 1)][static_cast<std::size_t>(4 * l + 2)] = ct && ex ? 'X' : (ct ? '\\' : '/');
      }
    }
  }
  std::ostringstream out;
  out << "layers 0.." << L << " left to right, scale 0 on top\n";
  for (int s = 0; s < 2 * S - 1; ++s) {
    std::string line = lines[static_cast<std::size_t>(s)];
    line.erase(line.find_last_not_of(' ') + 1);
    out << (s % 2 == 0 ? "s" + std::to_string(s / 2) + " " : "   ") << line << '\n';
  }
  out << "legend: N nonscale, S skip, B both, \\ contract, / expand, X both, o vertex in use\n";
  for (const auto& cell : arch.cells) {
    out << to_string(cell.kind) << ":";
    for (std::size_t j = 0; j < cell.nodes.size(); ++j)
      out << " v" << j + 1 << "=" << to_string(cell.nodes[j].op) << "(v" << cell.nodes[j].source << ")";
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// DiscreteNetwork

DiscreteNetwork::DiscreteNetwork(const ArchGraph& arch, std::uint64_t seed) : arch_(arch) {
  arch_.validate();
  const SearchConfig& cfg = arch_.config;
  std::mt19937_64 rng(seed);
  stem_ = init_op_weights(PrimitiveOp::Conv3d, static_cast<std::size_t>(cfg.in_channels), cfg.channels(0), rng);
  for (const auto& e : arch_.edges) {
    if (e.kind == EdgeKind::Skip) continue;
    const std::size_t cin = cfg.channels(e.from_scale), c = cfg.channels(e.to_scale());
    EdgeCell cell;
    cell.preprocess = init_pointwise(cin, c, rng);
    for (const auto& node : arch_.cell(cell_kind_of(e.kind)).nodes) cell.ops.push_back(init_op_weights(node.op, c, c, rng));
    cell.merge = init_pointwise(c * cell.ops.size(), c, rng);
    cells_.emplace(e, std::move(cell));
  }
  head_ = init_pointwise(cfg.channels(0), static_cast<std::size_t>(cfg.num_classes), rng);
}

Tensor DiscreteNetwork::run_cell(const SupernetEdge& edge, const EdgeCell& cell, const Tensor& x) const {
  std::vector<Tensor> v;
  switch (edge.kind) {
    case EdgeKind::Contract: v.push_back(contract_preprocess(x, cell.preprocess)); break;
    case EdgeKind::Expand: v.push_back(expand_preprocess(x, cell.preprocess)); break;
    default: v.push_back(nonscale_preprocess(x, cell.preprocess)); break;
  }
  const auto& nodes = arch_.cell(cell_kind_of(edge.kind)).nodes;
  for (std::size_t j = 0; j < nodes.size(); ++j)
    v.push_back(apply_primitive(nodes[j].op, v[static_cast<std::size_t>(nodes[j].source)], cell.ops[j]));
  return apply_pointwise(concat_channels(std::span<const Tensor>(v).subspan(1)), cell.merge);
}

Tensor DiscreteNetwork::forward(const Tensor& x) const {
  const SearchConfig& cfg = arch_.config;
  if (x.ndim() != 5 || x.extent(1) != static_cast<std::size_t>(cfg.in_channels) ||
      x.extent(2) != static_cast<std::size_t>(cfg.input_shape[0]) ||
      x.extent(3) != static_cast<std::size_t>(cfg.input_shape[1]) ||
      x.extent(4) != static_cast<std::size_t>(cfg.input_shape[2]))
    throw ShapeError("discrete network input " + shape_str(x.shape()) + " does not match the architecture config");
  std::map<std::pair<int, int>, Tensor> values;
  values[{0, 0}] = conv3d(x, stem_.weight, stem_.bias, ConvGeometry{1, 1, 1, 1});
  for (const auto& e : arch_.edges) {
    const Tensor& src = values.at({e.layer, e.from_scale});
    Tensor term = e.kind == EdgeKind::Skip ? src : run_cell(e, cells_.at(e), src);
    auto [it, fresh] = values.try_emplace({e.layer + 1, e.to_scale()}, term);
    if (!fresh) it->second = add(it->second, term);
  }
  return apply_pointwise(values.at({cfg.layers, 0}), head_);
}

std::vector<std::pair<std::string, Tensor>> DiscreteNetwork::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back("stem.weight", stem_.weight);
  out.emplace_back("stem.bias", stem_.bias);
  for (const auto& [e, cell] : cells_) {
    const std::string p = "cell.l" + std::to_string(e.layer) + ".s" + std::to_string(e.from_scale) + "." +
                          std::string(to_string(e.kind)) + ".";
    out.emplace_back(p + "pre.weight", cell.preprocess.weight);
    out.emplace_back(p + "pre.bias", cell.preprocess.bias);
    for (std::size_t j = 0; j < cell.ops.size(); ++j) {
      const std::string np = p + "node" + std::to_string(j + 1) + ".";
      const auto& w = cell.ops[j];
      if (w.weight.defined()) out.emplace_back(np + "weight", w.weight);
      if (w.depthwise.defined()) out.emplace_back(np + "depthwise", w.depthwise);
      if (w.pointwise.defined()) out.emplace_back(np + "pointwise", w.pointwise);
      if (w.bias.defined()) out.emplace_back(np + "bias", w.bias);
    }
    out.emplace_back(p + "merge.weight", cell.merge.weight);
    out.emplace_back(p + "merge.bias", cell.merge.bias);
  }
  out.emplace_back("head.weight", head_.weight);
  out.emplace_back("head.bias", head_.bias);
  return out;
}

std::vector<Tensor> DiscreteNetwork::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

LatencyStats measure_latency(const DiscreteNetwork& net, int reps, int warmup) {
  if (reps < 1 || warmup < 0) throw ArgumentError("measure_latency: reps >= 1 and warmup >= 0 required");
  NoGradGuard guard;
  const SearchConfig& cfg = net.arch().config;
  Tensor x({1, static_cast<std::size_t>(cfg.in_channels), static_cast<std::size_t>(cfg.input_shape[0]),
            static_cast<std::size_t>(cfg.input_shape[1]), static_cast<std::size_t>(cfg.input_shape[2])});
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& v : x.mutable_data()) v = unit(rng);
  for (int i = 0; i < warmup; ++i) (void)net.forward(x);
  std::vector<double> times;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Tensor y = net.forward(x);
    times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  LatencyStats stats;
  stats.reps = reps;
  stats.mean = mean(times);
  stats.min = *std::min_element(times.begin(), times.end());
  stats.median = median(times);
  return stats;
}

}  // namespace hwnas
