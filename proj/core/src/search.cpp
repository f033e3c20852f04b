#include "hwnas/search.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "hwnas/config.hpp"
#include "hwnas/errors.hpp"
#include "hwnas/stats.hpp"
#include "json_util.hpp"

namespace hwnas {

using detail::json;

namespace {

// Independent streams derived from the run seed.
enum Stream : std::uint32_t { kWeightOrder = 1, kArchOrder = 2, kGumbel = 3, kAugment = 4, kInit = 5 };

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t counter, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(counter), static_cast<std::uint32_t>(counter >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

std::vector<std::size_t> shuffled(std::size_t n, std::mt19937_64 rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

std::vector<std::vector<std::size_t>> batches_of(const std::vector<std::size_t>& order, int batch_size) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(batch_size))
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + static_cast<std::size_t>(batch_size))));
  return out;
}

void clip_gradients(const std::vector<Tensor>& tensors, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (const auto& t : tensors)
    if (t.has_grad())
      for (double g : t.grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (!(norm > max_norm)) return;
  const double factor = max_norm / norm;
  for (const auto& t : tensors)
    if (t.has_grad())
      for (double& g : t.grad_accumulator()) g *= factor;
}

void sgd_momentum(const std::vector<Tensor>& params, std::vector<std::vector<double>>& velocity, double lr,
                  double momentum) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) continue;
    auto g = params[i].grad();
    auto w = Tensor(params[i]).mutable_data();
    auto& v = velocity[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      v[j] = momentum * v[j] + g[j];
      w[j] -= lr * v[j];
    }
  }
}

void set_trainable(const std::vector<Tensor>& tensors, bool flag) {
  for (auto t : tensors) {
    t.set_requires_grad(flag);
    if (flag) t.zero_grad();
  }
}

void require_nonempty(const Dataset& d, const char* what) {
  if (d.empty()) throw DataError(std::string(what) + " dataset is empty");
}

}  // namespace

// ---------------------------------------------------------------------------
// configuration

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("train config: " + msg); };
  if (total_epochs < 1) fail("total_epochs must be >= 1");
  if (warmup_epochs < 0 || warmup_epochs > total_epochs) fail("warmup_epochs must lie in [0, total_epochs]");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(lr_w > 0.0) || !(lr_arch > 0.0)) fail("learning rates must be > 0");
  if (momentum < 0.0 || momentum >= 1.0) fail("momentum must lie in [0, 1)");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) fail("lambda must be finite and >= 0");
  if (!(tau_start > 0.0) || !(tau_end > 0.0)) fail("tau_start and tau_end must be > 0");
  if (n_fusion < 1) fail("n_fusion must be >= 1");
  if (!(latency_scale > 0.0)) fail("latency_scale must be > 0");
  if (grad_clip < 0.0) fail("grad_clip must be >= 0");
}

double TrainConfig::tau_at(int epoch) const {
  const int arch_epochs = total_epochs - warmup_epochs;
  if (epoch < warmup_epochs || arch_epochs <= 1) return tau_start;
  const double t = static_cast<double>(epoch - warmup_epochs) / static_cast<double>(arch_epochs - 1);
  return tau_start * std::pow(tau_end / tau_start, t);
}

void RetrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("retrain config: " + msg); };
  if (epochs < 1) fail("epochs must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(lr > 0.0)) fail("lr must be > 0");
  if (momentum < 0.0 || momentum >= 1.0) fail("momentum must lie in [0, 1)");
  if (grad_clip < 0.0) fail("grad_clip must be >= 0");
  if (folds < 2) fail("folds must be >= 2");
  if (max_folds < 0 || max_folds > folds) fail("max_folds must lie in [0, folds]");
  if (latency_reps < 1 || latency_warmup < 0) fail("latency_reps >= 1 and latency_warmup >= 0 required");
}

// ---------------------------------------------------------------------------
// loss

LossTerms hardware_aware_loss(const Supernet& net, const ArchParams& params, const Tensor& x, const LabelVolume& labels,
                              const LatencyTable* table, const TrainConfig& train, double tau,
                              const LatencyNoise& noise) {
  LossTerms terms;
  terms.ce = cross_entropy(network_forward(net, x, params), labels);
  if (train.lambda == 0.0) {
    terms.total = terms.ce;
    return terms;
  }
  if (table == nullptr) throw LookupError("hardware_aware_loss: lambda > 0 needs a latency table");
  NetworkLatencyOptions options;
  options.union_of_edges = train.union_of_edges;
  const NetworkLatency lat = expected_network_latency(params, net.config(), *table, train.n_fusion, tau, noise, options);
  terms.lat = scale(lat.total, train.latency_scale);
  terms.total = add(terms.ce, scale(terms.lat, train.lambda));
  return terms;
}

double expected_latency_seconds(const ArchParams& params, const SearchConfig& cfg, const LatencyTable& table, int n,
                                bool union_of_edges) {
  NoGradGuard guard;
  NetworkLatencyOptions options;
  options.union_of_edges = union_of_edges;
  return expected_network_latency(params, cfg, table, n, 1.0, LatencyNoise::zeros(cfg), options).total.item();
}

// ---------------------------------------------------------------------------
// search

SearchState::SearchState(const SearchConfig& cfg, const TrainConfig& tc)
    : config(cfg), train(tc), net(cfg, tc.seed), params(ArchParams::zeros(cfg)) {
  train.validate();
  for (const auto& p : net.parameters()) momentum.emplace_back(p.numel(), 0.0);
}

void run_search(SearchState& state, const Dataset& dataset_weight, const Dataset& dataset_arch,
                const LatencyTable* table, int until_epoch) {
  require_nonempty(dataset_weight, "weight");
  const TrainConfig& tc = state.train;
  const int end = until_epoch < 0 ? tc.total_epochs : std::min(until_epoch, tc.total_epochs);
  if (end > tc.warmup_epochs) require_nonempty(dataset_arch, "architecture");
  if (tc.lambda > 0.0 && end > tc.warmup_epochs && table == nullptr)
    throw LookupError("search: lambda > 0 needs a latency table");

  const std::vector<Tensor> weights = state.net.parameters();
  const std::vector<Tensor> arch = state.params.tensors();

  for (; state.epoch < end; ++state.epoch) {
    const int epoch = state.epoch;
    const bool warmup = epoch < tc.warmup_epochs;
    const double tau = tc.tau_at(epoch);
    const auto wbatches = batches_of(
        shuffled(dataset_weight.size(), stream_rng(tc.seed, static_cast<std::uint64_t>(epoch), kWeightOrder)),
        tc.batch_size);
    std::vector<std::vector<std::size_t>> abatches;
    if (!warmup)
      abatches = batches_of(
          shuffled(dataset_arch.size(), stream_rng(tc.seed, static_cast<std::uint64_t>(epoch), kArchOrder)),
          tc.batch_size);

    for (std::size_t i = 0; i < wbatches.size(); ++i) {
      // Weight step: architecture parameters are constants here.
      {
        set_trainable(arch, false);
        set_trainable(weights, true);
        auto [x, y] = make_batch(dataset_weight, wbatches[i]);
        const Tensor ce = cross_entropy(network_forward(state.net, x, state.params), y);
        backward(ce);
        clip_gradients(weights, tc.grad_clip);
        sgd_momentum(weights, state.momentum, tc.lr_w, tc.momentum);
        StepRecord rec;
        rec.step = state.step++;
        rec.epoch = epoch;
        rec.ce = ce.item();
        rec.total = rec.ce;
        if (!warmup) rec.tau = tau;
        state.history.push_back(rec);
      }
      if (warmup) continue;

      // Architecture step: plain gradient descent on alpha, beta, gamma.
      set_trainable(weights, false);
      set_trainable(arch, true);
      auto [x, y] = make_batch(dataset_arch, abatches[i % abatches.size()]);
      LatencyNoise noise;
      if (tc.lambda > 0.0) {
        auto rng = stream_rng(tc.seed, state.step, kGumbel);
        noise = LatencyNoise::sample(state.config, rng);
      }
      const LossTerms terms = hardware_aware_loss(state.net, state.params, x, y, table, tc, tau, noise);
      backward(terms.total);
      for (const auto& t : arch) {
        if (!t.has_grad()) continue;
        auto g = t.grad();
        auto w = Tensor(t).mutable_data();
        for (std::size_t j = 0; j < w.size(); ++j) w[j] -= tc.lr_arch * g[j];
      }
      StepRecord rec;
      rec.step = state.step++;
      rec.epoch = epoch;
      rec.arch = true;
      rec.ce = terms.ce.item();
      if (terms.lat.defined()) rec.lat = terms.lat.item();
      rec.total = terms.total.item();
      rec.tau = tau;
      state.history.push_back(rec);
    }
  }
  set_trainable(arch, false);
  set_trainable(weights, true);
}

SearchState search(const Dataset& dataset_weight, const Dataset& dataset_arch, const SearchConfig& cfg,
                   const TrainConfig& train, const LatencyTable* table) {
  SearchState state(cfg, train);
  run_search(state, dataset_weight, dataset_arch, table);
  return state;
}

// ---------------------------------------------------------------------------
// checkpoints

namespace {

constexpr char kCheckpointMagic[8] = {'H', 'W', 'N', 'A', 'S', 'C', 'K', '1'};

json history_to_json(const std::vector<StepRecord>& history) {
  json out = json::array();
  for (const auto& r : history)
    out.push_back({{"step", r.step},
                   {"epoch", r.epoch},
                   {"arch", r.arch},
                   {"ce", r.ce},
                   {"lat", r.lat ? json(*r.lat) : json(nullptr)},
                   {"total", r.total},
                   {"tau", r.tau ? json(*r.tau) : json(nullptr)}});
  return out;
}

std::vector<StepRecord> history_from_json(const json& doc) {
  std::vector<StepRecord> out;
  for (const auto& r : doc) {
    StepRecord rec;
    rec.step = r.at("step").get<std::size_t>();
    rec.epoch = r.at("epoch").get<int>();
    rec.arch = r.at("arch").get<bool>();
    rec.ce = r.at("ce").get<double>();
    if (!r.at("lat").is_null()) rec.lat = r.at("lat").get<double>();
    rec.total = r.at("total").get<double>();
    if (!r.at("tau").is_null()) rec.tau = r.at("tau").get<double>();
    out.push_back(rec);
  }
  return out;
}

void write_bundle(json header, const std::vector<std::pair<std::string, std::vector<double>>>& arrays,
                  const std::vector<Shape>& shapes, const std::filesystem::path& path) {
  json manifest = json::array();
  std::uint64_t offset = 0;
  for (std::size_t i = 0; i < arrays.size(); ++i) {
    manifest.push_back({{"name", arrays[i].first}, {"shape", shapes[i]}, {"offset", offset}});
    offset += 8 * arrays[i].second.size();
  }
  header["tensors"] = manifest;
  const std::string text = header.dump();
  std::vector<char> bytes(kCheckpointMagic, kCheckpointMagic + 8);
  const std::uint64_t len = text.size();
  for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<char>((len >> (8 * i)) & 0xff));
  bytes.insert(bytes.end(), text.begin(), text.end());
  for (const auto& [name, values] : arrays)
    for (double v : values) {
      const auto u = std::bit_cast<std::uint64_t>(v);
      for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
    }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

struct Bundle {
  json header;
  std::map<std::string, std::pair<Shape, std::vector<double>>> tensors;
  std::vector<std::string> order;
};

Bundle read_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0)
    throw FormatError("not a checkpoint: " + path.string(), 0);
  std::uint64_t len = 0;
  for (int i = 0; i < 8; ++i) len |= static_cast<std::uint64_t>(bytes[8 + static_cast<std::size_t>(i)]) << (8 * i);
  if (16 + len > bytes.size()) throw FormatError("truncated checkpoint header in " + path.string(), bytes.size());
  Bundle b;
  try {
    b.header = json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(len));
  } catch (const json::parse_error& ex) {
    throw FormatError(std::string("malformed checkpoint header: ") + ex.what(), 16);
  }
  const std::size_t base = 16 + len;
  for (const auto& t : b.header.at("tensors")) {
    Shape shape = t.at("shape").get<Shape>();
    const std::size_t offset = base + t.at("offset").get<std::size_t>();
    const std::size_t n = shape_numel(shape);
    if (offset + 8 * n > bytes.size()) throw FormatError("truncated checkpoint payload in " + path.string(), bytes.size());
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t u = 0;
      for (int k = 0; k < 8; ++k) u |= static_cast<std::uint64_t>(bytes[offset + 8 * i + static_cast<std::size_t>(k)]) << (8 * k);
      values[i] = std::bit_cast<double>(u);
    }
    b.order.push_back(t.at("name").get<std::string>());
    b.tensors.emplace(b.order.back(), std::make_pair(std::move(shape), std::move(values)));
  }
  return b;
}

void restore(const Bundle& b, const std::string& name, Tensor t) {
  auto it = b.tensors.find(name);
  if (it == b.tensors.end()) throw FormatError("checkpoint lacks tensor '" + name + "'", 0);
  if (it->second.first != t.shape())
    throw FormatError("checkpoint tensor '" + name + "' has shape " + shape_str(it->second.first) + ", expected " +
                          shape_str(t.shape()),
                      0);
  std::copy(it->second.second.begin(), it->second.second.end(), t.mutable_data().begin());
}

}  // namespace

void save_checkpoint(const SearchState& state, const std::filesystem::path& path) {
  json header{{"format", 1},
              {"search_config", json::parse(to_json(state.config))},
              {"train_config", json::parse(to_json(state.train))},
              {"epoch", state.epoch},
              {"step", state.step},
              {"rng", {{"seed", state.train.seed}, {"scheme", "seed_seq(seed, epoch or step, stream)"}}},
              {"history", history_to_json(state.history)}};
  std::vector<std::pair<std::string, std::vector<double>>> arrays;
  std::vector<Shape> shapes;
  auto push = [&](const std::string& name, const Tensor& t) {
    arrays.emplace_back(name, std::vector<double>(t.data().begin(), t.data().end()));
    shapes.push_back(t.shape());
  };
  push("arch.alpha", state.params.alpha);
  push("arch.gamma", state.params.gamma);
  push("arch.beta", state.params.beta);
  const auto named = state.net.named_parameters();
  for (const auto& [name, t] : named) push(name, t);
  for (std::size_t i = 0; i < named.size(); ++i) {
    arrays.emplace_back("momentum." + named[i].first, state.momentum[i]);
    shapes.push_back(named[i].second.shape());
  }
  write_bundle(std::move(header), arrays, shapes, path);
}

SearchState load_checkpoint(const std::filesystem::path& path) {
  const Bundle b = read_bundle(path);
  try {
    const SearchConfig cfg = search_config_from_json(b.header.at("search_config").dump(), "$.search_config");
    const TrainConfig tc = train_config_from_json(b.header.at("train_config").dump(), "$.train_config");
    SearchState state(cfg, tc);
    state.epoch = b.header.at("epoch").get<int>();
    state.step = b.header.at("step").get<std::size_t>();
    state.history = history_from_json(b.header.at("history"));
    restore(b, "arch.alpha", state.params.alpha);
    restore(b, "arch.gamma", state.params.gamma);
    restore(b, "arch.beta", state.params.beta);
    const auto named = state.net.named_parameters();
    for (std::size_t i = 0; i < named.size(); ++i) {
      restore(b, named[i].first, named[i].second);
      const auto& m = b.tensors.at("momentum." + named[i].first).second;
      if (m.size() != state.momentum[i].size()) throw FormatError("momentum size mismatch for " + named[i].first, 0);
      state.momentum[i] = m;
    }
    return state;
  } catch (const json::exception& ex) {
    throw FormatError(std::string("malformed checkpoint header: ") + ex.what(), 16);
  } catch (const std::out_of_range&) {
    throw FormatError("checkpoint lacks a momentum buffer", 0);
  }
}

std::string history_csv(const std::vector<StepRecord>& history) {
  std::ostringstream out;
  out.precision(17);
  out << "step,ce,lat,total,tau,phase\n";
  for (const auto& r : history) {
    out << r.step << ',' << r.ce << ',';
    if (r.lat) out << *r.lat;
    out << ',' << r.total << ',';
    if (r.tau) out << *r.tau;
    out << ',' << (r.arch ? "arch" : "weight") << '\n';
  }
  return out.str();
}

void save_tensors(const std::vector<std::pair<std::string, Tensor>>& tensors, const std::string& header_json,
                  const std::filesystem::path& path) {
  json header = header_json.empty() ? json::object() : json::parse(header_json);
  std::vector<std::pair<std::string, std::vector<double>>> arrays;
  std::vector<Shape> shapes;
  for (const auto& [name, t] : tensors) {
    arrays.emplace_back(name, std::vector<double>(t.data().begin(), t.data().end()));
    shapes.push_back(t.shape());
  }
  write_bundle(std::move(header), arrays, shapes, path);
}

std::vector<std::pair<std::string, Tensor>> load_tensors(const std::filesystem::path& path) {
  Bundle b;
  try {
    b = read_bundle(path);
  } catch (const json::exception& ex) {
    throw FormatError(std::string("malformed tensor manifest: ") + ex.what(), 16);
  }
  std::vector<std::pair<std::string, Tensor>> out;
  for (const auto& name : b.order) {
    const auto& [shape, values] = b.tensors.at(name);
    out.emplace_back(name, Tensor(shape, values));
  }
  return out;
}

void assign_tensors(const std::vector<std::pair<std::string, Tensor>>& dst,
                    const std::vector<std::pair<std::string, Tensor>>& src) {
  std::map<std::string, Tensor> by_name(src.begin(), src.end());
  for (const auto& [name, t] : dst) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("weights lack tensor '" + name + "'", 0);
    if (it->second.shape() != t.shape())
      throw FormatError("tensor '" + name + "' has shape " + shape_str(it->second.shape()) + ", expected " +
                            shape_str(t.shape()),
                        0);
    auto out = Tensor(t).mutable_data();
    std::copy(it->second.data().begin(), it->second.data().end(), out.begin());
  }
}

// ---------------------------------------------------------------------------
// retraining

std::vector<double> train_network(const DiscreteNetwork& net, const Dataset& train, const RetrainConfig& cfg,
                                  std::uint64_t seed) {
  require_nonempty(train, "training");
  const std::vector<Tensor> params = net.parameters();
  std::vector<std::vector<double>> velocity;
  for (const auto& p : params) velocity.emplace_back(p.numel(), 0.0);
  std::vector<double> epoch_loss;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = shuffled(train.size(), stream_rng(seed, static_cast<std::uint64_t>(epoch), kWeightOrder));
    auto aug_rng = stream_rng(seed, static_cast<std::uint64_t>(epoch), kAugment);
    double loss_sum = 0.0;
    for (const auto& batch : batches_of(order, cfg.batch_size)) {
      Tensor x;
      LabelVolume y;
      if (cfg.augment) {
        Dataset local;
        local.num_classes = train.num_classes;
        for (auto i : batch) local.samples.push_back(augment(train.samples[i], aug_rng));
        std::vector<std::size_t> all(local.size());
        std::iota(all.begin(), all.end(), 0);
        std::tie(x, y) = make_batch(local, all);
      } else {
        std::tie(x, y) = make_batch(train, batch);
      }
      for (auto p : params) p.zero_grad();
      const Tensor ce = cross_entropy(net.forward(x), y);
      backward(ce);
      clip_gradients(params, cfg.grad_clip);
      sgd_momentum(params, velocity, cfg.lr, cfg.momentum);
      loss_sum += ce.item() * static_cast<double>(batch.size());
    }
    epoch_loss.push_back(loss_sum / static_cast<double>(train.size()));
  }
  return epoch_loss;
}

std::vector<double> evaluate_dice(const DiscreteNetwork& net, const Dataset& data) {
  require_nonempty(data, "evaluation");
  NoGradGuard guard;
  std::vector<double> dice(static_cast<std::size_t>(data.num_classes - 1), 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::size_t one[] = {i};
    auto [x, y] = make_batch(data, one);
    const LabelVolume pred = argmax_labels(net.forward(x));
    for (int c = 1; c < data.num_classes; ++c) dice[static_cast<std::size_t>(c - 1)] += dice_score(pred, y, c);
  }
  for (auto& d : dice) d /= static_cast<double>(data.size());
  return dice;
}

RetrainResult retrain(const ArchGraph& arch, const Dataset& dataset, const RetrainConfig& cfg) {
  cfg.validate();
  require_nonempty(dataset, "retraining");
  if (dataset.num_classes != arch.config.num_classes)
    throw DataError("dataset has " + std::to_string(dataset.num_classes) + " classes, architecture expects " +
                    std::to_string(arch.config.num_classes));
  const auto folds = kfold(dataset.size(), cfg.folds, cfg.seed);
  const std::size_t run = cfg.max_folds == 0 ? folds.size() : static_cast<std::size_t>(cfg.max_folds);
  RetrainResult result;
  for (std::size_t f = 0; f < run; ++f) {
    std::vector<std::size_t> train_idx;
    for (std::size_t g = 0; g < folds.size(); ++g)
      if (g != f) train_idx.insert(train_idx.end(), folds[g].begin(), folds[g].end());
    std::sort(train_idx.begin(), train_idx.end());
    const Dataset train = subset(dataset, train_idx);
    const Dataset test = subset(dataset, folds[f]);
    const std::uint64_t fold_seed = stream_rng(cfg.seed, f, kInit)();
    DiscreteNetwork net(arch, fold_seed);
    FoldResult fr;
    fr.epoch_loss = train_network(net, train, cfg, fold_seed);
    fr.dice = evaluate_dice(net, test);
    if (f == 0) {
      result.latency = measure_latency(net, cfg.latency_reps, cfg.latency_warmup);
      for (const auto& [name, t] : net.named_parameters()) result.weights.emplace_back(name, t.detach());
    }
    result.folds.push_back(std::move(fr));
  }
  const std::size_t classes = static_cast<std::size_t>(dataset.num_classes - 1);
  for (std::size_t c = 0; c < classes; ++c) {
    std::vector<double> per_fold;
    for (const auto& fr : result.folds) per_fold.push_back(fr.dice[c]);
    result.dice_mean.push_back(mean(per_fold));
    result.dice_std.push_back(stddev(per_fold));
  }
  return result;
}

}  // namespace hwnas
