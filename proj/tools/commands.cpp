#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hwnas/decoder.hpp"
#include "hwnas/errors.hpp"
#include "hwnas/latency.hpp"
#include "hwnas/search.hpp"
#include "hwnas/stats.hpp"

namespace hwnas::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Human-readable progress goes to stdout, or to stderr under --json so that
// stdout carries only the summary document.
class Output {
 public:
  explicit Output(bool json) : json_(json) {}

  std::ostream& log() const { return json_ ? std::cerr : std::cout; }
  void summary(const json& doc) const {
    if (json_) std::cout << doc.dump(2) << '\n';
  }

 private:
  bool json_;
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

LatencyTable load_table(const RunConfig& rc) {
  const fs::path path = rc.table_path();
  if (!fs::exists(path)) throw LookupError("latency table " + path.string() + " not found; run `hwnas profile` first");
  return LatencyTable::load(path);
}

Dataset load_checked_dataset(const RunConfig& rc) {
  Dataset data = load_dataset(rc.dataset_path());
  if (data.empty()) throw DataError("dataset " + rc.dataset_path().string() + " is empty");
  if (data.num_classes != rc.search.num_classes)
    throw DataError("dataset has " + std::to_string(data.num_classes) + " classes, config expects " +
                    std::to_string(rc.search.num_classes));
  const std::array<std::size_t, 3> want = {static_cast<std::size_t>(rc.search.input_shape[0]),
                                           static_cast<std::size_t>(rc.search.input_shape[1]),
                                           static_cast<std::size_t>(rc.search.input_shape[2])};
  for (const auto& s : data.samples)
    if (s.spatial() != want) throw DataError("dataset volume shape does not match search.input_shape");
  return data;
}

fs::path arch_input(const RunConfig& rc, const CommandOptions& opt) {
  const fs::path path = opt.arch ? fs::path(*opt.arch) : rc.arch_path(rc.search.n_fusion);
  if (!fs::exists(path)) throw MissingArtifact("architecture file " + path.string() + " not found; run `hwnas decode`");
  return path;
}

json steps_json(const std::vector<SupernetEdge>& steps) {
  json out = json::array();
  for (const auto& e : steps)
    out.push_back(
        {{"layer", e.layer}, {"from_scale", e.from_scale}, {"to_scale", e.to_scale()}, {"kind", to_string(e.kind)}});
  return out;
}

double mean_ce(const Supernet& net, const ArchParams& params, const Dataset& data) {
  NoGradGuard guard;
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::size_t one[] = {i};
    auto [x, y] = make_batch(data, one);
    total += cross_entropy(network_forward(net, x, params), y).item();
  }
  return total / static_cast<double>(data.size());
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\r\n") == std::string::npos) return value;
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// ---------------------------------------------------------------------------

int cmd_profile(const RunConfig& rc, const CommandOptions& opt) {
  Output out(opt.json);
  const fs::path path = rc.table_path();
  out.log() << "profiling " << required_signatures(rc.search).size() << " signatures (reps " << rc.profile.reps
            << ", warmup " << rc.profile.warmup << ")\n";
  const LatencyTable table = build_table(rc.search, rc.profile.reps, rc.profile.warmup,
                                         [&](const OpSignature& sig, double seconds) {
                                           out.log() << "  " << sig.str() << "  " << fixed(seconds * 1e3, 4) << " ms\n";
                                         });
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  table.save(path);
  out.log() << "wrote " << path.string() << " (" << table.size() << " entries)\n";
  out.summary({{"command", "profile"}, {"table", path.string()}, {"entries", table.size()},
               {"reps", rc.profile.reps}, {"warmup", rc.profile.warmup}});
  return kOk;
}

int cmd_gen_data(const RunConfig& rc, const CommandOptions& opt) {
  Output out(opt.json);
  const std::array<std::size_t, 3> shape = {static_cast<std::size_t>(rc.search.input_shape[0]),
                                            static_cast<std::size_t>(rc.search.input_shape[1]),
                                            static_cast<std::size_t>(rc.search.input_shape[2])};
  const Dataset data = gen_synthetic(rc.data.count, shape, rc.search.num_classes, rc.data.seed, rc.data.synthetic);
  const fs::path manifest = rc.dataset_path();
  save_dataset(data, manifest.parent_path().empty() ? fs::path(".") : manifest.parent_path(),
               manifest.filename().string());
  out.log() << "wrote " << data.size() << " volumes, manifest " << manifest.string() << '\n';
  out.summary({{"command", "gen-data"}, {"manifest", manifest.string()}, {"count", data.size()},
               {"seed", rc.data.seed}, {"num_classes", data.num_classes}});
  return kOk;
}

int cmd_search(const RunConfig& rc, const CommandOptions& opt) {
  Output out(opt.json);
  const LatencyTable table = load_table(rc);
  const Dataset data = load_checked_dataset(rc);
  const auto [dw, da] = split_half(data, rc.train.seed);
  out.log() << "search: " << dw.size() << " weight / " << da.size() << " arch volumes, lambda " << rc.train.lambda
            << ", seed " << rc.train.seed << '\n';

  SearchState state(rc.search, rc.train);
  for (int epoch = 0; epoch < rc.train.total_epochs; ++epoch) {
    const std::size_t first = state.history.size();
    run_search(state, dw, da, &table, epoch + 1);
    double ce = 0.0;
    std::size_t count = 0;
    for (std::size_t i = first; i < state.history.size(); ++i)
      if (!state.history[i].arch) {
        ce += state.history[i].ce;
        ++count;
      }
    out.log() << "  epoch " << epoch << (epoch < rc.train.warmup_epochs ? " (warmup)" : "") << "  tau "
              << fixed(rc.train.tau_at(epoch), 3) << "  weight ce " << fixed(ce / static_cast<double>(count), 5)
              << '\n';
  }

  const fs::path dir = rc.out_dir();
  fs::create_directories(dir);
  save_checkpoint(state, rc.checkpoint_path());
  write_text(dir / "loss.csv", history_csv(state.history));
  const double lat = expected_latency_seconds(state.params, rc.search, table, rc.train.n_fusion,
                                              rc.train.union_of_edges);
  const double ce = mean_ce(state.net, state.params, da);
  const json summary{{"command", "search"},
                     {"lambda", rc.train.lambda},
                     {"seed", rc.train.seed},
                     {"n_fusion", rc.train.n_fusion},
                     {"epochs", rc.train.total_epochs},
                     {"warmup_epochs", rc.train.warmup_epochs},
                     {"steps", state.step},
                     {"final_lat_seconds", lat},
                     {"final_lat_ms", lat * 1e3},
                     {"final_ce", ce},
                     {"checkpoint", rc.checkpoint_path().string()},
                     {"loss_csv", (dir / "loss.csv").string()}};
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  write_text(dir / "config.json", rc.to_json() + "\n");
  out.log() << "final expected latency " << fixed(lat * 1e3, 4) << " ms, final CE " << fixed(ce, 5) << '\n';
  out.summary(summary);
  return kOk;
}

int cmd_decode(const RunConfig& rc, const CommandOptions& opt) {
  Output out(opt.json);
  const fs::path ckpt = rc.checkpoint_path();
  if (!fs::exists(ckpt)) throw MissingArtifact("checkpoint " + ckpt.string() + " not found; run `hwnas search`");
  const SearchState state = load_checkpoint(ckpt);
  const SearchConfig& cfg = state.config;
  const int n = rc.search.n_fusion;
  const LatencyTable table = load_table(rc);

  const PathSearchResult paths = decode_network(state.params, cfg, n);
  const ArchGraph arch = fuse_paths(paths.paths, state.params, cfg);
  const fs::path arch_file = opt.arch ? fs::path(*opt.arch) : rc.arch_path(n);
  if (arch_file.has_parent_path()) fs::create_directories(arch_file.parent_path());
  save_arch(arch, arch_file);

  json path_reports = json::array();
  for (std::size_t r = 0; r < paths.paths.size(); ++r) {
    const PathSpec& p = paths.paths[r];
    const double est = estimate_arch_latency(fuse_paths({p}, state.params, cfg), table);
    path_reports.push_back({{"rank", r + 1},
                            {"length", p.length},
                            {"log_length", p.log_length},
                            {"estimated_latency_seconds", est},
                            {"steps", steps_json(p.steps)}});
  }
  const double total = estimate_arch_latency(arch, table);
  const json report{{"command", "decode"},       {"n", n},
                    {"truncated", paths.truncated}, {"paths", path_reports},
                    {"total_estimated_latency_seconds", total}, {"arch", arch_file.string()}};
  write_text(rc.out_dir() / ("decode_n" + std::to_string(n) + ".json"), report.dump(2) + "\n");

  out.log() << render_arch_grid(arch);
  for (const auto& pr : path_reports)
    out.log() << "path " << pr["rank"].get<int>() << ": length " << pr["length"].get<double>() << ", estimate "
              << fixed(pr["estimated_latency_seconds"].get<double>() * 1e3, 4) << " ms\n";
  if (paths.truncated) out.log() << "warning: fewer than " << n << " eligible paths exist\n";
  out.log() << "fused estimate " << fixed(total * 1e3, 4) << " ms, wrote " << arch_file.string() << '\n';
  out.summary(report);
  return kOk;
}

int cmd_retrain(const RunConfig& rc, const CommandOptions& opt) {
  Output out(opt.json);
  const fs::path arch_file = arch_input(rc, opt);
  const ArchGraph arch = load_arch(arch_file);
  const Dataset data = load_checked_dataset(rc);
  out.log() << "retrain " << arch_file.string() << ": " << data.size() << " volumes, " << rc.retrain.folds
            << " folds, " << rc.retrain.epochs << " epochs\n";
  const RetrainResult res = retrain(arch, data, rc.retrain);

  json per_class = json::array();
  for (std::size_t c = 0; c < res.dice_mean.size(); ++c)
    per_class.push_back({{"class", c + 1}, {"mean", res.dice_mean[c]}, {"std", res.dice_std[c]}});
  std::vector<double> fold_means;
  json per_fold = json::array();
  for (std::size_t f = 0; f < res.folds.size(); ++f) {
    fold_means.push_back(mean(res.folds[f].dice));
    per_fold.push_back({{"fold", f}, {"dice", res.folds[f].dice}, {"final_loss", res.folds[f].epoch_loss.back()}});
  }
  const double latency_ms = res.latency.median * 1e3;
  const json metrics{{"dice", {{"per_class", per_class}, {"mean", mean(fold_means)}, {"std", stddev(fold_means)}}},
                     {"latency_ms", latency_ms},
                     {"throughput_fps", 1000.0 / latency_ms},
                     {"folds", rc.retrain.folds},
                     {"folds_run", res.folds.size()},
                     {"epochs", rc.retrain.epochs},
                     {"per_fold", per_fold},
                     {"arch", arch_file.string()}};
  const fs::path dir = rc.out_dir() / ("retrain_" + arch_file.stem().string());
  fs::create_directories(dir);
  write_text(dir / "metrics.json", metrics.dump(2) + "\n");
  save_tensors(res.weights, json{{"arch", arch_file.string()}, {"fold", 0}}.dump(), dir / "weights.bin");
  for (const auto& pc : per_class)
    out.log() << "class " << pc["class"].get<int>() << " dice " << fixed(pc["mean"].get<double>(), 4) << " +- "
              << fixed(pc["std"].get<double>(), 4) << '\n';
  out.log() << "latency " << fixed(latency_ms, 3) << " ms, wrote " << (dir / "metrics.json").string() << '\n';
  out.summary(metrics);
  return kOk;
}

int cmd_eval(const RunConfig& rc, const CommandOptions& opt) {
  Output out(opt.json);
  const fs::path arch_file = arch_input(rc, opt);
  const ArchGraph arch = load_arch(arch_file);
  const fs::path weights =
      opt.weights ? fs::path(*opt.weights) : rc.out_dir() / ("retrain_" + arch_file.stem().string()) / "weights.bin";
  if (!fs::exists(weights)) throw MissingArtifact("weights " + weights.string() + " not found; run `hwnas retrain`");
  DiscreteNetwork net(arch, 0);
  assign_tensors(net.named_parameters(), load_tensors(weights));
  const Dataset data = load_checked_dataset(rc);
  const std::vector<double> dice = evaluate_dice(net, data);
  json per_class = json::array();
  for (std::size_t c = 0; c < dice.size(); ++c) {
    per_class.push_back({{"class", c + 1}, {"dice", dice[c]}});
    out.log() << "class " << c + 1 << " dice " << fixed(dice[c], 4) << '\n';
  }
  const json report{{"command", "eval"}, {"arch", arch_file.string()}, {"weights", weights.string()},
                    {"volumes", data.size()}, {"per_class", per_class}, {"mean", mean(dice)}};
  write_text(rc.out_dir() / ("eval_" + arch_file.stem().string() + ".json"), report.dump(2) + "\n");
  out.summary(report);
  return kOk;
}

int cmd_bench(const RunConfig& rc, const CommandOptions& opt) {
  Output out(opt.json);
  const fs::path arch_file = arch_input(rc, opt);
  const ArchGraph arch = load_arch(arch_file);
  const DiscreteNetwork net(arch, rc.retrain.seed);
  const LatencyStats stats = measure_latency(net, rc.bench.reps, rc.bench.warmup);
  const double median_ms = stats.median * 1e3;
  const double fps = 1000.0 / median_ms;
  const bool latency_ok = median_ms <= rc.bench.budget_ms;
  const bool fps_ok = fps >= rc.bench.budget_fps;
  json report{{"command", "bench"},
              {"arch", arch_file.string()},
              {"reps", stats.reps},
              {"median_ms", median_ms},
              {"mean_ms", stats.mean * 1e3},
              {"min_ms", stats.min * 1e3},
              {"throughput_fps", fps},
              {"fps_consistent", std::abs(fps * median_ms - 1000.0) <= 1e-9 * 1000.0},
              {"budget_ms", rc.bench.budget_ms},
              {"budget_fps", rc.bench.budget_fps},
              {"latency_pass", latency_ok},
              {"throughput_pass", fps_ok},
              {"pass", latency_ok && fps_ok}};
  if (fs::exists(rc.table_path())) {
    const double est_ms = estimate_arch_latency(arch, LatencyTable::load(rc.table_path())) * 1e3;
    report["estimated_ms"] = est_ms;
    report["measured_over_estimate"] = median_ms / est_ms;
    out.log() << "table estimate " << fixed(est_ms, 4) << " ms, measured/estimate " << fixed(median_ms / est_ms, 3)
              << '\n';
  }
  write_text(rc.out_dir() / ("bench_" + arch_file.stem().string() + ".json"), report.dump(2) + "\n");
  out.log() << "median " << fixed(median_ms, 4) << " ms (budget " << rc.bench.budget_ms << " ms), "
            << fixed(fps, 2) << " FPS (budget " << rc.bench.budget_fps << ") "
            << (latency_ok && fps_ok ? "PASS" : "FAIL") << '\n';
  out.summary(report);
  return kOk;
}

int cmd_report(const RunConfig& rc, const CommandOptions& opt) {
  Output out(opt.json);
  const fs::path run = opt.run_dir ? fs::path(*opt.run_dir) : rc.out_dir();
  if (!fs::is_directory(run)) throw MissingArtifact("run directory " + run.string() + " not found");

  std::vector<fs::path> summaries, losses, archs;
  for (const auto& entry : fs::recursive_directory_iterator(run)) {
    if (!entry.is_regular_file()) continue;
    const auto name = entry.path().filename().string();
    if (entry.path().parent_path().filename() == "report") continue;
    if (name == "summary.json") summaries.push_back(entry.path());
    if (name == "loss.csv") losses.push_back(entry.path());
    if (name.rfind("arch_", 0) == 0 && entry.path().extension() == ".json") archs.push_back(entry.path());
  }
  if (summaries.empty() || losses.empty())
    throw MissingArtifact("no search runs (summary.json + loss.csv) under " + run.string());
  std::sort(summaries.begin(), summaries.end());
  std::sort(losses.begin(), losses.end());
  std::sort(archs.begin(), archs.end());
  auto run_name = [&](const fs::path& file) {
    const auto rel = fs::relative(file.parent_path(), run).generic_string();
    return rel.empty() ? std::string(".") : rel;
  };

  const fs::path dir = run / "report";
  std::ostringstream curve;
  curve << "run,step,ce,lat,total,tau,phase\n";
  for (const auto& file : losses) {
    std::istringstream lines(read_text(file));
    std::string line;
    std::getline(lines, line);  // header
    while (std::getline(lines, line))
      if (!line.empty()) curve << csv_field(run_name(file)) << ',' << line << '\n';
  }
  write_text(dir / "loss_curve.csv", curve.str());

  struct Row {
    double lambda, lat, ce;
    std::uint64_t seed;
    std::string run;
  };
  std::vector<Row> rows;
  for (const auto& file : summaries) {
    try {
      const json s = json::parse(read_text(file));
      rows.push_back({s.at("lambda").get<double>(), s.at("final_lat_seconds").get<double>(),
                      s.at("final_ce").get<double>(), s.at("seed").get<std::uint64_t>(), run_name(file)});
    } catch (const json::exception& ex) {
      throw MissingArtifact("malformed " + file.string() + ": " + ex.what());
    }
  }
  std::sort(rows.begin(), rows.end(),
            [](const Row& a, const Row& b) { return std::tie(a.lambda, a.run) < std::tie(b.lambda, b.run); });
  std::ostringstream sweep;
  sweep.precision(17);
  sweep << "lambda,final_lat,final_ce,seed,run\n";
  for (const auto& r : rows)
    sweep << r.lambda << ',' << r.lat << ',' << r.ce << ',' << r.seed << ',' << csv_field(r.run) << '\n';
  write_text(dir / "lambda_sweep.csv", sweep.str());

  json rendered = json::array();
  for (const auto& file : archs) {
    const ArchGraph arch = load_arch(file);
    const std::string name = (run_name(file) == "." ? "" : run_name(file) + "_") + file.stem().string();
    std::string safe = name;
    std::replace(safe.begin(), safe.end(), '/', '_');
    write_text(dir / (safe + ".txt"), render_arch_grid(arch));
    rendered.push_back((dir / (safe + ".txt")).string());
    out.log() << file.string() << ":\n" << render_arch_grid(arch);
  }
  out.log() << "wrote " << (dir / "loss_curve.csv").string() << ", " << (dir / "lambda_sweep.csv").string() << " ("
            << rows.size() << " runs)\n";
  out.summary({{"command", "report"},
               {"loss_curve", (dir / "loss_curve.csv").string()},
               {"lambda_sweep", (dir / "lambda_sweep.csv").string()},
               {"runs", rows.size()},
               {"arch_renderings", rendered}});
  return kOk;
}

}  // namespace hwnas::cli
