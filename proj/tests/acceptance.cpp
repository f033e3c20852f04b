// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any fails.
//
//   hwnas_acceptance --cli PATH --workdir DIR [--only 1,2,...]

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hwnas/config.hpp"
#include "hwnas/decoder.hpp"
#include "hwnas/latency.hpp"
#include "hwnas/ops.hpp"
#include "hwnas/search.hpp"
#include "hwnas/stats.hpp"
#include "support/builders.hpp"
#include "support/oracles.hpp"

using namespace hwnas;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

std::string fix(double v, int digits = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Worst result of a family of checks and the label that produced it.
struct Worst {
  double value = -1.0;
  std::string label;
  void add(double v, const std::string& what) {
    if (!(v <= value)) {  // NaN wins
      value = v;
      label = what;
    }
  }
};

// Scalar probe of a tensor-valued op: <out, R> with a fixed random R.
Tensor project(const Tensor& out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Tensor r = oracle::random_tensor(out.shape(), rng);
  return sum(mul(out, r));
}

// Entries drawn without repetition at spacing 0.01 so max-pool windows never
// tie within a finite-difference step.
Tensor distinct_tensor(const Shape& shape, std::mt19937_64& rng) {
  std::vector<double> v(shape_numel(shape));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.01 * static_cast<double>(i) - 0.005 * static_cast<double>(v.size());
  std::shuffle(v.begin(), v.end(), rng);
  return Tensor(shape, std::move(v));
}

SearchConfig small_space(int layers, int scales, int nodes, int k) {
  SearchConfig cfg;
  cfg.layers = layers;
  cfg.scales = scales;
  cfg.nodes = nodes;
  cfg.base_channels = 4;
  cfg.k_partial = k;
  cfg.input_shape = {8, 8, 8};
  return cfg;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// ---------------------------------------------------------------------------
// 1. gradient suite

Outcome gradient_suite() {
  std::mt19937_64 rng(101);
  Worst op_level, net_level;
  std::uint64_t probe = 1000;

  for (auto op : kPrimitiveOps) {
    const Tensor x = distinct_tensor({2, 3, 5, 5, 5}, rng);
    const OpWeights w = init_op_weights(op, 3, 3, rng);
    std::vector<Tensor> wrt = w.parameters();
    wrt.push_back(x);
    const auto seed = probe++;
    op_level.add(oracle::grad_check([&] { return project(apply_primitive(op, x, w), seed); }, wrt),
                 std::string(to_string(op)));
  }
  {
    const Tensor x = oracle::random_tensor({2, 2, 6, 6, 6}, rng);
    const Tensor w = oracle::random_tensor({4, 1, 3, 3, 3}, rng);
    const Tensor b = oracle::random_tensor({4}, rng);
    const auto seed = probe++;
    op_level.add(oracle::grad_check([&] { return project(conv3d(x, w, b, {2, 1, 1, 2}), seed); }, {x, w, b}),
                 "grouped strided conv3d");
  }
  using Pre = Tensor (*)(const Tensor&, const PointwiseConv&);
  const std::vector<std::pair<const char*, Pre>> pre = {
      {"contract", contract_preprocess}, {"nonscale", nonscale_preprocess}, {"expand", expand_preprocess}};
  for (const auto& [name, fn] : pre) {
    const Tensor x = distinct_tensor({2, 4, 4, 4, 4}, rng);
    const PointwiseConv c = init_pointwise(4, 3, rng);
    const auto seed = probe++;
    op_level.add(oracle::grad_check([&, f = fn] { return project(f(x, c), seed); }, {x, c.weight, c.bias}),
                 std::string(name) + " preprocess");
  }
  {
    const Tensor a = oracle::random_tensor({2, 4, 6}, rng, -2, 2);
    const auto seed = probe++;
    op_level.add(oracle::grad_check([&] { return project(softmax(a, 1), seed); }, {a}), "softmax");
  }
  {
    const Tensor logits = oracle::random_tensor({2, 3, 4, 4, 4}, rng, -2, 2);
    LabelVolume y(2 * 64);
    std::uniform_int_distribution<int> cls(0, 2);
    for (auto& v : y) v = static_cast<std::uint8_t>(cls(rng));
    op_level.add(oracle::grad_check([&] { return cross_entropy(logits, y); }, {logits}), "cross_entropy");
  }
  {
    const Tensor w = oracle::random_tensor({6}, rng);
    const auto g = sample_gumbel(6, rng);
    const auto seed = probe++;
    op_level.add(oracle::grad_check([&] { return project(gumbel_softmax(w, 0.7, g), seed); }, {w}), "gumbel_softmax");
  }

  // Latency expectations, frozen noise; seconds scaled to ms.
  const auto cfg = small_space(4, 3, 2, 2);
  const auto table = builders::random_table(cfg, 102);
  auto params = ArchParams::zeros(cfg);
  builders::randomize(params, rng);
  const auto noise = LatencyNoise::sample(cfg, rng);
  {
    const Tensor a = oracle::random_tensor({6}, rng);
    const auto g = sample_gumbel(6, rng);
    op_level.add(
        oracle::grad_check([&] { return scale(expected_mixed_op_latency(a, table, cfg, 1, 0.8, g), 1e3); }, {a}),
        "mixed-op latency");
  }
  for (auto kind : kEdgeKinds) {
    if (kind == EdgeKind::Skip) continue;
    const int from = kind == EdgeKind::Expand ? 1 : 0;
    op_level.add(oracle::grad_check(
                     [&] { return scale(expected_cell_latency(params, cfg, kind, from, table, 0.8, noise), 1e3); },
                     params.tensors()),
                 "cell latency (" + std::string(to_string(kind)) + ")");
  }
  for (bool uni : {false, true}) {
    net_level.add(oracle::grad_check(
                      [&] {
                        return scale(expected_network_latency(params, cfg, table, 2, 0.7, noise, {uni}).total, 1e3);
                      },
                      params.tensors(), 1e-4),
                  uni ? "network latency (union)" : "network latency");
  }

  // Whole supernet: CE + lambda * LAT with respect to the architecture.
  {
    SearchConfig tiny = small_space(2, 2, 2, 2);
    tiny.base_channels = 2;
    tiny.input_shape = {4, 4, 4};
    auto [net, arch] = build_supernet(tiny, 103);
    builders::randomize(arch, rng);
    const auto tt = builders::random_table(tiny, 104);
    const auto nz = LatencyNoise::sample(tiny, rng);
    const Dataset data = gen_synthetic(2, {4, 4, 4}, 2, 105, {0.2, 0.25, 0.40});
    const std::size_t idx[] = {0, 1};
    auto [x, y] = make_batch(data, idx);
    TrainConfig tc;
    tc.lambda = 0.1;
    tc.n_fusion = 2;
    for (auto w : net.parameters()) w.set_requires_grad(false);
    net_level.add(oracle::grad_check([&] { return hardware_aware_loss(net, arch, x, y, &tt, tc, 0.7, nz).total; },
                                     arch.tensors()),
                  "search loss");
  }

  const bool pass = op_level.value < 1e-4 && net_level.value < 1e-3;
  return {pass, "worst op " + sci(op_level.value) + " (" + op_level.label + ", tol 1e-4), worst network " +
                    sci(net_level.value) + " (" + net_level.label + ", tol 1e-3)"};
}

// ---------------------------------------------------------------------------
// 2. oracle suite

Outcome oracle_suite() {
  std::mt19937_64 rng(201);
  Worst kernels;
  struct Geo {
    Shape x, w;
    ConvGeometry g;
  };
  const std::vector<Geo> geos = {{{2, 4, 6, 6, 6}, {4, 4, 3, 3, 3}, {1, 1, 1, 1}},
                                 {{2, 4, 6, 6, 6}, {3, 4, 3, 3, 3}, {1, 2, 2, 1}},
                                 {{1, 4, 6, 5, 4}, {4, 2, 3, 3, 3}, {2, 1, 1, 2}},
                                 {{2, 3, 5, 5, 5}, {2, 3, 1, 1, 1}, {1, 0, 1, 1}}};
  for (const auto& g : geos) {
    const Tensor x = oracle::random_tensor(g.x, rng), w = oracle::random_tensor(g.w, rng);
    const Tensor b = oracle::random_tensor({g.w[0]}, rng);
    Shape s;
    const auto ref = oracle::naive_conv3d(x, w, &b, static_cast<int>(g.g.stride), static_cast<int>(g.g.pad),
                                          static_cast<int>(g.g.dilation), static_cast<int>(g.g.groups), &s);
    const Tensor out = conv3d(x, w, b, g.g);
    kernels.add(out.shape() == s ? max_abs_diff(out.data(), ref) : INFINITY, "conv3d");
  }
  {
    const Tensor x = oracle::random_tensor({2, 4, 6, 6, 6}, rng);
    const Tensor dw = oracle::random_tensor({4, 1, 3, 3, 3}, rng), pw = oracle::random_tensor({3, 4, 1, 1, 1}, rng);
    const Tensor b = oracle::random_tensor({3}, rng);
    Shape s1, s2;
    const auto mid = oracle::naive_conv3d(x, dw, nullptr, 1, 1, 1, 4, &s1);
    const auto ref = oracle::naive_conv3d(Tensor(s1, mid), pw, &b, 1, 0, 1, 1, &s2);
    kernels.add(max_abs_diff(separable_conv3d(x, dw, pw, b).data(), ref), "separable");
  }
  for (auto [k, stride, pad] : {std::array<int, 3>{3, 1, 1}, {2, 2, 0}}) {
    const Tensor x = oracle::random_tensor({2, 3, 6, 6, 6}, rng);
    Shape s;
    const auto ref = oracle::naive_maxpool3d(x, k, stride, pad, &s);
    kernels.add(max_abs_diff(maxpool3d(x, static_cast<std::size_t>(k), static_cast<std::size_t>(stride),
                                       static_cast<std::size_t>(pad))
                                 .data(),
                             ref),
                "maxpool3d");
  }

  // Top-n longest paths against exhaustive enumeration.
  int path_mismatch = 0;
  std::uniform_int_distribution<int> Ld(1, 6), Sd(1, 3), nd(1, 3);
  for (int trial = 0; trial < 100; ++trial) {
    const int L = Ld(rng), S = Sd(rng), n = nd(rng);
    const auto grid = builders::random_grid(L, S, rng);
    auto all = oracle::enumerate_paths(grid);
    std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
      if (a.product != b.product) return a.product > b.product;
      return a.steps < b.steps;
    });
    const auto r = top_n_longest_paths(grid, n);
    const std::size_t want = std::min<std::size_t>(static_cast<std::size_t>(n), all.size());
    bool ok = r.paths.size() == want;
    for (std::size_t i = 0; ok && i < want; ++i)
      ok = r.paths[i].length == all[i].product && r.paths[i].steps == all[i].steps;
    path_mismatch += !ok;
  }

  // Expected cell latency at m = 2 against probability-weighted enumeration.
  const auto cfg = small_space(2, 2, 2, 1);
  const auto table = builders::random_table(cfg, 202);
  auto p = ArchParams::zeros(cfg);
  builders::randomize(p, rng);
  const std::size_t c = static_cast<std::size_t>(CellKind::Expanding);
  auto F = [&](std::size_t k) { return table.lookup(primitive_signature(cfg, kPrimitiveOps[k], 0, false)); };
  auto pa = [&](std::size_t e, std::size_t k) {
    return oracle::softmax_at(p.alpha.data().subspan((c * 3 + e) * 6, 6), k);
  };
  const auto g2 = p.gamma.data().subspan(c * 3 + 1, 2);
  const double fixed =
      table.lookup(preprocess_signature(cfg, EdgeKind::Expand, 1)) + table.lookup(merge_signature(cfg, 0));
  double exact = 0;
  for (std::size_t k0 = 0; k0 < 6; ++k0)
    for (std::size_t k1 = 0; k1 < 6; ++k1)
      for (std::size_t k2 = 0; k2 < 6; ++k2)
        for (std::size_t src = 0; src < 2; ++src) {
          const std::size_t second = src == 0 ? k1 : k2;
          exact += pa(0, k0) * pa(1, k1) * pa(2, k2) * oracle::softmax_at(g2, src) * (fixed + F(k0) + F(second));
        }
  std::vector<double> samples;
  {
    NoGradGuard guard;
    std::mt19937_64 noise_rng(203);
    for (int i = 0; i < 10000; ++i)
      samples.push_back(
          expected_cell_latency(p, cfg, EdgeKind::Expand, 1, table, 0.05, LatencyNoise::sample(cfg, noise_rng)).item());
  }
  const double sigma = stddev(samples) / std::sqrt(10000.0);
  const double dev = std::abs(mean(samples) - exact);

  const bool pass = kernels.value < 1e-10 && path_mismatch == 0 && dev <= 3 * sigma;
  return {pass, "kernels max abs " + sci(kernels.value) + " (" + kernels.label + "), path DP mismatches " +
                    std::to_string(path_mismatch) + "/100, cell latency |MC-exact| " + fix(dev / sigma, 2) +
                    " sigma"};
}

// ---------------------------------------------------------------------------
// 3. reduction identity

Outcome reduction_identity() {
  std::mt19937_64 rng(301);
  double worst = 0.0;
  int compared = 0;
  for (int trial = 0; compared < 20; ++trial) {
    SearchConfig cfg = small_space(3, 2, 1 + trial % 3, 1);
    cfg.base_channels = 2 + 2 * (trial % 2);
    cfg.input_shape = {4, 4, 4};
    Supernet net(cfg, static_cast<std::uint64_t>(trial));
    auto params = ArchParams::zeros(cfg);
    builders::randomize(params, rng);
    const auto& edge = net.edges()[static_cast<std::size_t>(trial * 7) % net.edges().size()];
    if (edge.kind == EdgeKind::Skip) continue;
    const Cell& cell = net.cell(edge);
    const std::size_t ext = 4u >> edge.from_scale;
    const Tensor x = oracle::random_tensor({1, cell.in_channels, ext, ext, ext}, rng);
    worst = std::max(worst, max_abs_diff(cell_forward(cell, x, params, 1).data(),
                                         cell_forward_unsplit(cell, x, params).data()));
    ++compared;
  }
  return {worst < 1e-12, std::to_string(compared) + " cells, max abs diff " + sci(worst) + " (tol 1e-12)"};
}

// ---------------------------------------------------------------------------
// CLI-driven criteria

std::string quote(const std::string& s) {
  std::string q = "'";
  for (char ch : s) q += ch == '\'' ? std::string("'\\''") : std::string(1, ch);
  return q + "'";
}

class Pipeline {
 public:
  Pipeline(std::string cli, fs::path work) : cli_(std::move(cli)), work_(std::move(work)) {
    fs::create_directories(work_ / "logs");
  }

  const fs::path& work() const { return work_; }
  fs::path config() const { return work_ / "config.json"; }
  fs::path table() const { return work_ / "table.json"; }

  // Runs one command; stdout and stderr go to logs/<tag>.log.
  bool run(const std::string& tag, const std::vector<std::string>& args) const {
    std::string cmd = quote(cli_) + " --config " + quote(config().string());
    for (const auto& a : args) cmd += " " + quote(a);
    const fs::path log = work_ / "logs" / (tag + ".log");
    cmd += " >" + quote(log.string()) + " 2>&1";
    const int status = std::system(cmd.c_str());
    const bool ok = WIFEXITED(status) && WEXITSTATUS(status) == 0;
    if (!ok) std::cerr << "command failed (" << tag << "), see " << log.string() << '\n';
    return ok;
  }

  // Toy task: 8x16x16 volumes, K=2, L=4, S=3, C0=4, 15 + 15 epochs.
  void write_config() const {
    SearchConfig s;
    s.layers = 4;
    s.scales = 3;
    s.base_channels = 4;
    s.num_classes = 2;
    s.input_shape = {8, 16, 16};
    TrainConfig t;
    t.total_epochs = 30;
    t.warmup_epochs = 15;
    json train = json::parse(to_json(t));
    train.erase("lambda");  // default, overridden per run with --lambda
    const json doc{{"search", json::parse(to_json(s))},
                   {"train", train},
                   {"data", {{"count", 20}, {"seed", 0}}},
                   {"paths", {{"table", table().string()}, {"dataset", (work_ / "data" / "manifest.json").string()}}},
                   {"out", work_.string()}};
    std::ofstream(config()) << doc.dump(2) << '\n';
  }

  bool prepared = false;
  bool prepare() {
    if (prepared) return true;
    write_config();
    prepared = run("profile", {"profile"}) && run("gen-data", {"gen-data"});
    return prepared;
  }

  fs::path search_run(const std::string& name, double lambda, std::uint64_t seed) const {
    const fs::path dir = work_ / "runs" / name;
    std::vector<std::string> args = {"--out", dir.string(), "--seed", std::to_string(seed)};
    if (lambda >= 0) {
      std::ostringstream l;
      l << lambda;
      args.insert(args.end(), {"--lambda", l.str()});
    }
    args.push_back("search");
    return run("search_" + name, args) ? dir : fs::path();
  }

 private:
  std::string cli_;
  fs::path work_;
};

Outcome mechanism(Pipeline& p) {
  if (!p.prepare()) return {false, "profile/gen-data failed"};
  std::vector<double> lat0, lat1, ce0, ce1;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    for (double lambda : {0.0, 1e-3}) {
      const auto dir = p.search_run((lambda == 0 ? "lam0_s" : "lam1e-3_s") + std::to_string(seed), lambda, seed);
      if (dir.empty()) return {false, "search run failed"};
      const json s = json::parse(slurp(dir / "summary.json"));
      (lambda == 0 ? lat0 : lat1).push_back(s["final_lat_ms"].get<double>());
      (lambda == 0 ? ce0 : ce1).push_back(s["final_ce"].get<double>());
    }
  }
  const double ml0 = median(lat0), ml1 = median(lat1), mc0 = median(ce0), mc1 = median(ce1);
  const bool pass = ml1 < ml0 && mc1 <= 1.5 * mc0;
  return {pass, "median LAT " + fix(ml0) + " ms (lambda 0) vs " + fix(ml1) + " ms (lambda 1e-3); median CE " +
                    fix(mc0) + " vs " + fix(mc1) + " (limit " + fix(1.5 * mc0) + ")"};
}

Outcome end_to_end(Pipeline& p) {
  if (!p.prepare()) return {false, "profile/gen-data failed"};
  const auto dir = p.search_run("pipeline", -1.0, 0);
  if (dir.empty()) return {false, "search failed"};
  const std::string out = dir.string();
  for (const char* n : {"1", "2"})
    if (!p.run(std::string("decode_n") + n, {"--out", out, "--n", n, "decode"})) return {false, "decode failed"};
  if (!p.run("retrain_n1", {"--out", out, "--n", "1", "retrain"})) return {false, "retrain failed"};
  for (const char* n : {"1", "2"})
    if (!p.run(std::string("bench_n") + n, {"--out", out, "--n", n, "bench"})) return {false, "bench failed"};
  const json m = json::parse(slurp(dir / "retrain_arch_n1" / "metrics.json"));
  const double dice = m["dice"]["per_class"][0]["mean"].get<double>();
  const double b1 = json::parse(slurp(dir / "bench_arch_n1.json"))["median_ms"].get<double>();
  const double b2 = json::parse(slurp(dir / "bench_arch_n2.json"))["median_ms"].get<double>();
  const auto e1 = load_arch(dir / "arch_n1.json").edges.size(), e2 = load_arch(dir / "arch_n2.json").edges.size();
  const bool pass = dice >= 0.85 && b2 >= b1;
  return {pass, "n=1 foreground Dice " + fix(dice) + " (min 0.85); median latency n=1 " + fix(b1, 3) + " ms (" +
                    std::to_string(e1) + " edges), n=2 " + fix(b2, 3) + " ms (" + std::to_string(e2) + " edges)"};
}

Outcome estimate_fidelity(Pipeline& p) {
  if (!p.prepare()) return {false, "profile/gen-data failed"};
  const LatencyTable table = LatencyTable::load(p.table());
  const SearchConfig cfg = search_config_from_json(json::parse(slurp(p.config()))["search"].dump());
  std::mt19937_64 rng(601);
  std::vector<double> est, meas;
  std::set<std::string> seen;
  for (int trial = 0; est.size() < 12 && trial < 200; ++trial) {
    auto params = ArchParams::zeros(cfg);
    builders::randomize(params, rng, 2.0);
    const ArchGraph arch = decode_arch(params, cfg, 1 + trial % 3);
    if (!seen.insert(export_arch(arch)).second) continue;
    const DiscreteNetwork net(arch, static_cast<std::uint64_t>(trial));
    est.push_back(estimate_arch_latency(arch, table));
    meas.push_back(measure_latency(net, 30, 3).median);
  }
  const double rho = est.size() >= 2 ? spearman(est, meas) : 0.0;
  std::ofstream csv(p.work() / "estimate_fidelity.csv");
  csv << "estimate_ms,measured_ms\n";
  csv.precision(17);
  for (std::size_t i = 0; i < est.size(); ++i) csv << est[i] * 1e3 << ',' << meas[i] * 1e3 << '\n';
  return {est.size() >= 10 && rho >= 0.8,
          std::to_string(est.size()) + " architectures, Spearman " + fix(rho, 3) + " (min 0.8)"};
}

Outcome determinism(Pipeline& p) {
  if (!p.prepare()) return {false, "profile/gen-data failed"};
  std::vector<fs::path> dirs;
  for (const char* name : {"repeat_a", "repeat_b"}) {
    const auto dir = p.search_run(name, 1e-3, 7);
    if (dir.empty()) return {false, "search failed"};
    for (const char* n : {"1", "2"})
      if (!p.run(std::string(name) + "_decode_n" + n, {"--out", dir.string(), "--n", n, "decode"}))
        return {false, "decode failed"};
    dirs.push_back(dir);
  }
  int identical = 0;
  const std::vector<std::string> files = {"loss.csv", "arch_n1.json", "arch_n2.json"};
  for (const auto& f : files) {
    const std::string a = slurp(dirs[0] / f), b = slurp(dirs[1] / f);
    identical += !a.empty() && a == b;
  }
  return {identical == static_cast<int>(files.size()),
          std::to_string(identical) + "/" + std::to_string(files.size()) +
              " artifacts bit-identical (loss.csv, arch_n1.json, arch_n2.json)"};
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli;
  fs::path work = fs::temp_directory_path() / "hwnas_acceptance";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--cli" && i + 1 < argc) {
      cli = argv[++i];
    } else if (a == "--workdir" && i + 1 < argc) {
      work = argv[++i];
    } else if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string tok; std::getline(ss, tok, ',');) only.insert(std::stoi(tok));
    } else {
      std::cerr << "usage: hwnas_acceptance --cli PATH [--workdir DIR] [--only 1,2,...]\n";
      return 2;
    }
  }
  if (cli.empty()) {
    std::cerr << "--cli is required\n";
    return 2;
  }
  fs::remove_all(work);
  Pipeline pipeline(cli, work);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient suite", gradient_suite},
      {"oracle suite", oracle_suite},
      {"reduction identity", reduction_identity},
      {"latency term lowers expected latency", [&] { return mechanism(pipeline); }},
      {"end-to-end pipeline", [&] { return end_to_end(pipeline); }},
      {"estimate fidelity", [&] { return estimate_fidelity(pipeline); }},
      {"determinism", [&] { return determinism(pipeline); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::cout << (o.pass ? "[PASS]" : "[FAIL]") << " criterion " << id << ": " << criteria[i].first << " - "
              << o.detail << " [" << fix(secs, 1) << " s]" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
