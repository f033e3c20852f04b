#include "hwnas/latency.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hwnas/errors.hpp"
#include "hwnas/stats.hpp"

#ifdef __linux__
#include <sched.h>
#include <sys/utsname.h>
#include <unistd.h>
#endif

namespace hwnas {

using json = nlohmann::json;

std::string_view to_string(LatencyOp op) {
  switch (op) {
    case LatencyOp::Conv3d: return "conv3d";
    case LatencyOp::DilatedConv3d: return "dil_conv3d";
    case LatencyOp::SeparableConv3d: return "sep_conv3d";
    case LatencyOp::MaxPool3d: return "maxpool3d";
    case LatencyOp::Identity: return "identity";
    case LatencyOp::Zero: return "zero";
    case LatencyOp::Contract: return "contract";
    case LatencyOp::Expand: return "expand";
    case LatencyOp::NonScale: return "nonscale";
    case LatencyOp::Merge: return "merge";
    case LatencyOp::Stem: return "stem";
    case LatencyOp::Head: return "head";
  }
  return "?";
}

LatencyOp latency_op_from_string(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(LatencyOp::Head); ++i) {
    auto op = static_cast<LatencyOp>(i);
    if (to_string(op) == name) return op;
  }
  throw ArgumentError("unknown latency op '" + std::string(name) + "'");
}

LatencyOp latency_op(PrimitiveOp op) {
  switch (op) {
    case PrimitiveOp::Conv3d: return LatencyOp::Conv3d;
    case PrimitiveOp::DilatedConv3d: return LatencyOp::DilatedConv3d;
    case PrimitiveOp::SeparableConv3d: return LatencyOp::SeparableConv3d;
    case PrimitiveOp::MaxPool3d: return LatencyOp::MaxPool3d;
    case PrimitiveOp::Identity: return LatencyOp::Identity;
    case PrimitiveOp::Zero: return LatencyOp::Zero;
  }
  throw ArgumentError("latency_op: unknown primitive");
}

std::string OpSignature::str() const {
  std::ostringstream os;
  os << to_string(op) << "(cin=" << cin << ",cout=" << cout << ",dhw=" << d << "x" << h << "x" << w
     << (partial ? ",partial" : "") << ")";
  return os.str();
}

// ---------------------------------------------------------------------------
// signatures

namespace {

OpSignature at_scale(const SearchConfig& cfg, LatencyOp op, std::size_t cin, std::size_t cout, int scale,
                     bool partial) {
  const auto sp = cfg.spatial(scale);
  return {op, cin, cout, sp[0], sp[1], sp[2], partial};
}

}  // namespace

OpSignature primitive_signature(const SearchConfig& cfg, PrimitiveOp op, int scale, bool partial) {
  std::size_t c = cfg.channels(scale);
  if (partial) c /= static_cast<std::size_t>(cfg.k_partial);
  return at_scale(cfg, latency_op(op), c, c, scale, partial);
}

OpSignature preprocess_signature(const SearchConfig& cfg, EdgeKind kind, int from_scale) {
  const int to = from_scale + scale_step(kind);
  LatencyOp op = LatencyOp::NonScale;
  if (kind == EdgeKind::Contract) op = LatencyOp::Contract;
  else if (kind == EdgeKind::Expand) op = LatencyOp::Expand;
  else if (kind == EdgeKind::Skip) throw ArgumentError("skip edges have no preprocessing");
  return at_scale(cfg, op, cfg.channels(from_scale), cfg.channels(to), from_scale, false);
}

OpSignature merge_signature(const SearchConfig& cfg, int scale) {
  return at_scale(cfg, LatencyOp::Merge, static_cast<std::size_t>(cfg.nodes) * cfg.channels(scale), cfg.channels(scale),
                  scale, false);
}

OpSignature stem_signature(const SearchConfig& cfg) {
  return at_scale(cfg, LatencyOp::Stem, static_cast<std::size_t>(cfg.in_channels), cfg.channels(0), 0, false);
}

OpSignature head_signature(const SearchConfig& cfg) {
  return at_scale(cfg, LatencyOp::Head, cfg.channels(0), static_cast<std::size_t>(cfg.num_classes), 0, false);
}

std::vector<OpSignature> required_signatures(const SearchConfig& cfg) {
  std::vector<OpSignature> sigs{stem_signature(cfg), head_signature(cfg)};
  for (const auto& edge : live_edges(cfg)) {
    if (edge.kind == EdgeKind::Skip) continue;
    const int t = edge.to_scale();
    sigs.push_back(preprocess_signature(cfg, edge.kind, edge.from_scale));
    sigs.push_back(merge_signature(cfg, t));
    for (auto op : kPrimitiveOps) {
      sigs.push_back(primitive_signature(cfg, op, t, false));
      if (cfg.k_partial > 1) sigs.push_back(primitive_signature(cfg, op, t, true));
    }
  }
  std::sort(sigs.begin(), sigs.end());
  sigs.erase(std::unique(sigs.begin(), sigs.end()), sigs.end());
  return sigs;
}

// ---------------------------------------------------------------------------
// table

void LatencyTable::set(const OpSignature& sig, double seconds) {
  if (!(seconds >= 0.0) || !std::isfinite(seconds))
    throw ArgumentError("latency for " + sig.str() + " must be finite and non-negative");
  entries_[sig] = seconds;
}

double LatencyTable::lookup(const OpSignature& sig) const {
  ++accesses_;
  auto it = entries_.find(sig);
  if (it == entries_.end()) throw LookupError("latency table has no entry for " + sig.str());
  return it->second;
}

std::string LatencyTable::to_json() const {
  json doc;
  doc["metadata"] = {{"host", metadata.host},
                     {"reps", metadata.reps},
                     {"warmup", metadata.warmup},
                     {"timestamp", metadata.timestamp}};
  json entries = json::array();
  for (const auto& [sig, seconds] : entries_)
    entries.push_back({{"op", std::string(to_string(sig.op))},
                       {"cin", sig.cin},
                       {"cout", sig.cout},
                       {"d", sig.d},
                       {"h", sig.h},
                       {"w", sig.w},
                       {"partial", sig.partial},
                       {"seconds", seconds}});
  doc["entries"] = std::move(entries);
  return doc.dump(2);
}

LatencyTable LatencyTable::from_json(std::string_view text) {
  LatencyTable table;
  try {
    const json doc = json::parse(text);
    const auto& meta = doc.at("metadata");
    table.metadata.host = meta.at("host").get<std::string>();
    table.metadata.reps = meta.at("reps").get<int>();
    table.metadata.warmup = meta.at("warmup").get<int>();
    table.metadata.timestamp = meta.at("timestamp").get<std::string>();
    for (const auto& e : doc.at("entries")) {
      OpSignature sig{latency_op_from_string(e.at("op").get<std::string>()),
                      e.at("cin").get<std::size_t>(),
                      e.at("cout").get<std::size_t>(),
                      e.at("d").get<std::size_t>(),
                      e.at("h").get<std::size_t>(),
                      e.at("w").get<std::size_t>(),
                      e.at("partial").get<bool>()};
      table.set(sig, e.at("seconds").get<double>());
    }
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("malformed latency table: ") + ex.what());
  } catch (const ArgumentError& ex) {
    throw ConfigError(std::string("malformed latency table: ") + ex.what());
  }
  return table;
}

void LatencyTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write latency table " + path.string());
  out << to_json() << '\n';
}

LatencyTable LatencyTable::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LookupError("cannot open latency table " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

// ---------------------------------------------------------------------------
// profiling

namespace {

#ifdef __linux__
class CpuPin {
 public:
  CpuPin() {
    if (sched_getaffinity(0, sizeof(saved_), &saved_) != 0) return;
    const int cpu = sched_getcpu();
    if (cpu < 0) return;
    cpu_set_t one;
    CPU_ZERO(&one);
    CPU_SET(cpu, &one);
    active_ = sched_setaffinity(0, sizeof(one), &one) == 0;
  }
  ~CpuPin() {
    if (active_) sched_setaffinity(0, sizeof(saved_), &saved_);
  }
  CpuPin(const CpuPin&) = delete;
  CpuPin& operator=(const CpuPin&) = delete;

 private:
  cpu_set_t saved_{};
  bool active_ = false;
};
#else
struct CpuPin {};
#endif

Tensor random_tensor(Shape shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> values(shape_numel(shape));
  for (auto& v : values) v = dist(rng);
  return Tensor(std::move(shape), std::move(values));
}

std::string host_description() {
#ifdef __linux__
  char name[256] = {};
  gethostname(name, sizeof(name) - 1);
  utsname u{};
  uname(&u);
  return std::string(name) + " (" + u.sysname + " " + u.machine + ")";
#else
  return "unknown";
#endif
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

namespace {

// Builds a closure running the operator on fixed random input.
std::function<Tensor()> make_runner(const OpSignature& sig) {
  if (sig.cin == 0 || sig.cout == 0 || sig.d == 0 || sig.h == 0 || sig.w == 0)
    throw ConfigError("profile_op: unconstructible signature " + sig.str());

  std::mt19937_64 rng(0x5eedULL);
  const Tensor x = random_tensor({1, sig.cin, sig.d, sig.h, sig.w}, rng);
  std::function<Tensor()> run;
  switch (sig.op) {
    case LatencyOp::Conv3d:
    case LatencyOp::DilatedConv3d:
    case LatencyOp::SeparableConv3d:
    case LatencyOp::MaxPool3d: {
      PrimitiveOp prim = sig.op == LatencyOp::Conv3d          ? PrimitiveOp::Conv3d
                         : sig.op == LatencyOp::DilatedConv3d ? PrimitiveOp::DilatedConv3d
                         : sig.op == LatencyOp::SeparableConv3d ? PrimitiveOp::SeparableConv3d
                                                                : PrimitiveOp::MaxPool3d;
      if (sig.cin != sig.cout) throw ConfigError("profile_op: primitive ops keep channel count, got " + sig.str());
      auto weights = init_op_weights(prim, sig.cin, sig.cout, rng);
      run = [=] { return apply_primitive(prim, x, weights); };
      break;
    }
    case LatencyOp::Contract: {
      if (sig.d % 2 || sig.h % 2 || sig.w % 2) throw ConfigError("profile_op: contract needs even extents, " + sig.str());
      auto conv = init_pointwise(sig.cin, sig.cout, rng);
      run = [=] { return contract_preprocess(x, conv); };
      break;
    }
    case LatencyOp::Expand: {
      auto conv = init_pointwise(sig.cin, sig.cout, rng);
      run = [=] { return expand_preprocess(x, conv); };
      break;
    }
    case LatencyOp::NonScale:
    case LatencyOp::Merge:
    case LatencyOp::Head: {
      auto conv = init_pointwise(sig.cin, sig.cout, rng);
      run = [=] { return apply_pointwise(x, conv); };
      break;
    }
    case LatencyOp::Stem: {
      auto w = init_op_weights(PrimitiveOp::Conv3d, sig.cin, sig.cout, rng);
      run = [=] { return conv3d(x, w.weight, w.bias, ConvGeometry{1, 1, 1, 1}); };
      break;
    }
    default: throw ConfigError("profile_op: unconstructible signature " + sig.str());
  }
  return run;
}

double time_once(const std::function<Tensor()>& run, volatile double& sink) {
  const auto t0 = std::chrono::steady_clock::now();
  Tensor y = run();
  const auto t1 = std::chrono::steady_clock::now();
  sink = sink + y.data()[0];
  return std::chrono::duration<double>(t1 - t0).count();
}

// A kernel that runs below clock resolution still costs something.
double settle(std::vector<double>& samples) { return std::max(median(samples), 1e-9); }

bool is_free(const OpSignature& sig) { return sig.op == LatencyOp::Identity || sig.op == LatencyOp::Zero; }

void check_reps(int reps, int warmup) {
  if (reps < 3 || warmup < 1) throw ConfigError("profile_op: need reps >= 3 and warmup >= 1");
}

}  // namespace

double profile_op(const OpSignature& sig, int reps, int warmup) {
  check_reps(reps, warmup);
  if (is_free(sig)) return 0.0;
  NoGradGuard no_grad;
  const auto run = make_runner(sig);
  CpuPin pin;
  volatile double sink = 0.0;
  for (int i = 0; i < warmup; ++i) sink = sink + run().data()[0];
  std::vector<double> samples(static_cast<std::size_t>(reps));
  for (auto& s : samples) s = time_once(run, sink);
  return settle(samples);
}

LatencyTable build_table(const SearchConfig& cfg, int reps, int warmup,
                         const std::function<void(const OpSignature&, double)>& on_entry) {
  cfg.validate();
  check_reps(reps, warmup);
  const auto sigs = required_signatures(cfg);
  NoGradGuard no_grad;
  std::vector<std::function<Tensor()>> runs;
  for (const auto& sig : sigs) runs.push_back(is_free(sig) ? nullptr : make_runner(sig));

  // Repetitions go round-robin over the signatures, so a slow spell on the
  // host spreads over every entry instead of inflating whichever ran then.
  CpuPin pin;
  volatile double sink = 0.0;
  for (int i = 0; i < warmup; ++i)
    for (const auto& run : runs)
      if (run) sink = sink + run().data()[0];
  std::vector<std::vector<double>> samples(sigs.size());
  for (int r = 0; r < reps; ++r)
    for (std::size_t k = 0; k < sigs.size(); ++k)
      if (runs[k]) samples[k].push_back(time_once(runs[k], sink));

  LatencyTable table;
  table.metadata = {host_description(), reps, warmup, utc_timestamp()};
  for (std::size_t k = 0; k < sigs.size(); ++k) {
    const double seconds = runs[k] ? settle(samples[k]) : 0.0;
    table.set(sigs[k], seconds);
    if (on_entry) on_entry(sigs[k], seconds);
  }
  return table;
}

// ---------------------------------------------------------------------------
// Gumbel-Softmax

std::vector<double> sample_gumbel(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<double> g(n);
  for (auto& v : g) {
    double u = uni(rng);
    while (u <= 0.0) u = uni(rng);
    v = -std::log(-std::log(u));
  }
  return g;
}

Tensor gumbel_softmax(const Tensor& weights, double tau, std::span<const double> noise) {
  if (!(tau > 0.0)) throw ArgumentError("gumbel_softmax: tau must be positive");
  if (weights.ndim() != 1 || noise.size() != weights.numel())
    throw ShapeError("gumbel_softmax: weights " + shape_str(weights.shape()) + " vs " + std::to_string(noise.size()) +
                     " noise values");
  Tensor perturbed = add(weights, Tensor(weights.shape(), {noise.begin(), noise.end()}));
  return softmax(scale(perturbed, 1.0 / tau), 0);
}

Tensor gumbel_softmax(const Tensor& weights, double tau, std::mt19937_64& rng) {
  const auto noise = sample_gumbel(weights.numel(), rng);
  return gumbel_softmax(weights, tau, noise);
}

LatencyNoise LatencyNoise::zeros(const SearchConfig& cfg) {
  const std::size_t e = cfg.cell_edges();
  return {std::vector<double>(kNumCellKinds * e * kNumPrimitiveOps, 0.0), std::vector<double>(kNumCellKinds * e, 0.0),
          std::vector<double>(static_cast<std::size_t>(cfg.layers * cfg.scales) * kNumEdgeKinds, 0.0)};
}

LatencyNoise LatencyNoise::sample(const SearchConfig& cfg, std::mt19937_64& rng) {
  LatencyNoise n = zeros(cfg);
  n.alpha = sample_gumbel(n.alpha.size(), rng);
  n.gamma = sample_gumbel(n.gamma.size(), rng);
  n.beta = sample_gumbel(n.beta.size(), rng);
  return n;
}

// ---------------------------------------------------------------------------
// expectations

Tensor expected_mixed_op_latency(const Tensor& alpha_edge, const LatencyTable& table, const SearchConfig& cfg,
                                 int scale, double tau, std::span<const double> noise) {
  if (alpha_edge.numel() != kNumPrimitiveOps)
    throw ShapeError("expected_mixed_op_latency: need " + std::to_string(kNumPrimitiveOps) + " op weights");
  std::vector<double> f(kNumPrimitiveOps);
  for (std::size_t k = 0; k < kNumPrimitiveOps; ++k)
    f[k] = table.lookup(primitive_signature(cfg, kPrimitiveOps[k], scale, false));
  const Tensor gs = gumbel_softmax(alpha_edge, tau, noise);
  return sum(mul(gs, Tensor({kNumPrimitiveOps}, std::move(f))));
}

Tensor expected_cell_latency(const ArchParams& params, const SearchConfig& cfg, EdgeKind kind, int from_scale,
                             const LatencyTable& table, double tau, const LatencyNoise& noise) {
  const CellKind ck = cell_kind_of(kind);
  const int to = from_scale + scale_step(kind);
  const std::size_t e_count = cfg.cell_edges();
  const std::size_t type = static_cast<std::size_t>(ck);
  const double fixed = table.lookup(preprocess_signature(cfg, kind, from_scale)) + table.lookup(merge_signature(cfg, to));

  Tensor total = Tensor::scalar(fixed);
  for (int j = 1; j <= cfg.nodes; ++j) {
    std::vector<std::size_t> gidx;
    std::vector<double> gnoise;
    for (int i = 0; i < j; ++i) {
      gidx.push_back(type * e_count + cell_edge_index(i, j));
      gnoise.push_back(noise.gamma[gidx.back()]);
    }
    const Tensor gs_gamma = gumbel_softmax(gather(params.gamma, gidx), tau, gnoise);
    for (int i = 0; i < j; ++i) {
      const std::size_t e = cell_edge_index(i, j);
      std::array<std::size_t, kNumPrimitiveOps> aidx{};
      for (std::size_t k = 0; k < kNumPrimitiveOps; ++k) aidx[k] = (type * e_count + e) * kNumPrimitiveOps + k;
      const std::span<const double> anoise(noise.alpha.data() + aidx[0], kNumPrimitiveOps);
      const Tensor mixed = expected_mixed_op_latency(gather(params.alpha, aidx), table, cfg, to, tau, anoise);
      total = add(total, mul(select(gs_gamma, static_cast<std::size_t>(i)), mixed));
    }
  }
  return total;
}

NetworkLatency expected_network_latency(const ArchParams& params, const SearchConfig& cfg, const LatencyTable& table,
                                        int n, double tau, const LatencyNoise& noise,
                                        const NetworkLatencyOptions& options) {
  NetworkLatency result;
  result.paths = top_n_longest_paths(beta_grid(params, cfg), n).paths;

  const double endpoints = table.lookup(stem_signature(cfg)) + table.lookup(head_signature(cfg));
  std::map<std::pair<int, EdgeKind>, Tensor> cell_cache;
  std::map<std::pair<int, int>, Tensor> gs_cache;

  auto cell_latency = [&](int from_scale, EdgeKind kind) -> Tensor {
    auto key = std::make_pair(from_scale, kind);
    auto it = cell_cache.find(key);
    if (it != cell_cache.end()) return it->second;
    Tensor t = expected_cell_latency(params, cfg, kind, from_scale, table, tau, noise);
    cell_cache.emplace(key, t);
    return t;
  };
  auto beta_gs = [&](int layer, int scale) -> Tensor {
    auto key = std::make_pair(layer, scale);
    auto it = gs_cache.find(key);
    if (it != gs_cache.end()) return it->second;
    std::vector<std::size_t> idx;
    std::vector<double> bnoise;
    for (auto k : out_kinds(cfg, scale)) {
      idx.push_back((static_cast<std::size_t>(layer) * cfg.scales + scale) * kNumEdgeKinds + static_cast<std::size_t>(k));
      bnoise.push_back(noise.beta[idx.back()]);
    }
    Tensor t = gumbel_softmax(gather(params.beta, idx), tau, bnoise);
    gs_cache.emplace(key, t);
    return t;
  };
  auto step_latency = [&](const SupernetEdge& step) -> Tensor {
    if (step.kind == EdgeKind::Skip) return Tensor();
    const auto kinds = out_kinds(cfg, step.from_scale);
    const auto slot = static_cast<std::size_t>(std::find(kinds.begin(), kinds.end(), step.kind) - kinds.begin());
    return mul(select(beta_gs(step.layer, step.from_scale), slot), cell_latency(step.from_scale, step.kind));
  };

  Tensor total = Tensor::scalar(0.0);
  if (options.union_of_edges) {
    std::vector<SupernetEdge> distinct;
    for (const auto& path : result.paths) distinct.insert(distinct.end(), path.steps.begin(), path.steps.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (!result.paths.empty()) total = Tensor::scalar(endpoints);
    for (const auto& step : distinct)
      if (Tensor t = step_latency(step); t.defined()) total = add(total, t);
  } else {
    for (const auto& path : result.paths) {
      total = add(total, Tensor::scalar(endpoints));
      for (const auto& step : path.steps)
        if (Tensor t = step_latency(step); t.defined()) total = add(total, t);
    }
  }
  result.total = total;
  return result;
}

}  // namespace hwnas
