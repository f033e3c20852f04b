#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hwnas/data.hpp"
#include "hwnas/decoder.hpp"
#include "hwnas/latency.hpp"
#include "hwnas/search_space.hpp"
#include "hwnas/tensor.hpp"

namespace hwnas {

struct TrainConfig {
  int total_epochs = 30;
  int warmup_epochs = 15;  // weight-only epochs before alternation starts
  int batch_size = 2;
  double lr_w = 0.05;
  double momentum = 0.9;
  double lr_arch = 1.0;
  double lambda = 1e-4;
  double tau_start = 5.0;
  double tau_end = 0.5;
  std::uint64_t seed = 0;
  int n_fusion = 1;  // top-n paths in the latency term
  // Unit of LAT inside the loss, in table seconds: 1e3 expresses it in ms.
  double latency_scale = 1e3;
  double grad_clip = 5.0;  // global L2 norm bound per step; 0 disables
  bool union_of_edges = false;

  // Throws ConfigError.
  void validate() const;
  // Temperature used during `epoch` (exponential anneal over the
  // architecture epochs; tau_start during warmup).
  double tau_at(int epoch) const;
};

struct LossTerms {
  Tensor total;
  Tensor ce;
  Tensor lat;  // in latency_scale units; undefined when lambda == 0
};

// total = ce + lambda * lat. The table is not touched when lambda == 0.
LossTerms hardware_aware_loss(const Supernet& net, const ArchParams& params, const Tensor& x, const LabelVolume& labels,
                              const LatencyTable* table, const TrainConfig& train, double tau,
                              const LatencyNoise& noise);

// LAT of the current parameters in seconds: plain softmax probabilities (no
// Gumbel noise, tau = 1) over the top-n paths.
double expected_latency_seconds(const ArchParams& params, const SearchConfig& cfg, const LatencyTable& table, int n,
                                bool union_of_edges = false);

struct StepRecord {
  std::size_t step = 0;
  int epoch = 0;
  bool arch = false;  // architecture step (else weight step)
  double ce = 0.0;
  std::optional<double> lat;  // absent when the latency term was not evaluated
  double total = 0.0;
  std::optional<double> tau;  // absent during warmup
};

struct SearchState {
  SearchConfig config;
  TrainConfig train;
  Supernet net;
  ArchParams params;
  std::vector<std::vector<double>> momentum;  // parallel to net.parameters()
  int epoch = 0;                              // next epoch to run
  std::size_t step = 0;
  std::vector<StepRecord> history;

  SearchState(const SearchConfig& cfg, const TrainConfig& tc);
};

// Runs epochs [state.epoch, until_epoch) (default: to total_epochs). Weight
// steps use dataset_weight, architecture steps dataset_arch; batches follow a
// per-epoch shuffle derived from (seed, epoch), Gumbel draws from (seed, step).
void run_search(SearchState& state, const Dataset& dataset_weight, const Dataset& dataset_arch,
                const LatencyTable* table, int until_epoch = -1);

SearchState search(const Dataset& dataset_weight, const Dataset& dataset_arch, const SearchConfig& cfg,
                   const TrainConfig& train, const LatencyTable* table);

// Binary checkpoint: "HWNASCK1", u64 header length, JSON header (configs,
// epoch, step, rng scheme, history, tensor manifest), then little-endian f64
// arrays at the manifest offsets (relative to the payload start).
void save_checkpoint(const SearchState& state, const std::filesystem::path& path);
SearchState load_checkpoint(const std::filesystem::path& path);

// Per-step loss history as CSV: step,ce,lat,total,tau,phase.
std::string history_csv(const std::vector<StepRecord>& history);

// ---------------------------------------------------------------------------
// retraining

struct RetrainConfig {
  int epochs = 60;
  int batch_size = 2;
  double lr = 0.02;
  double momentum = 0.9;
  double grad_clip = 5.0;
  int folds = 5;
  // Train and score only the first `max_folds` folds (0 = all).
  int max_folds = 0;
  std::uint64_t seed = 0;
  bool augment = true;
  int latency_reps = 20;
  int latency_warmup = 3;

  void validate() const;
};

struct FoldResult {
  std::vector<double> dice;        // per foreground class 1..K-1, mean over held-out volumes
  std::vector<double> epoch_loss;  // mean training CE per epoch
};

struct RetrainResult {
  std::vector<FoldResult> folds;
  std::vector<double> dice_mean;  // per foreground class, over folds
  std::vector<double> dice_std;
  LatencyStats latency;           // single-sample inference of the fold-0 network
  std::vector<std::pair<std::string, Tensor>> weights;  // fold-0 weights
};

// Fresh weights per fold; SGD with momentum on the other folds, Dice on the
// held-out fold.
RetrainResult retrain(const ArchGraph& arch, const Dataset& dataset, const RetrainConfig& cfg);

// Trains one network on `train` for cfg.epochs; returns per-epoch mean CE.
std::vector<double> train_network(const DiscreteNetwork& net, const Dataset& train, const RetrainConfig& cfg,
                                  std::uint64_t seed);

// Mean per-volume Dice for each foreground class.
std::vector<double> evaluate_dice(const DiscreteNetwork& net, const Dataset& data);

// Raw f64 tensor bundle with the checkpoint layout (used for retrained weights).
void save_tensors(const std::vector<std::pair<std::string, Tensor>>& tensors, const std::string& header_json,
                  const std::filesystem::path& path);
// Tensors in manifest order; throws FormatError on a malformed file.
std::vector<std::pair<std::string, Tensor>> load_tensors(const std::filesystem::path& path);
// Copies same-named tensors into `dst`; every destination must be present
// with a matching shape.
void assign_tensors(const std::vector<std::pair<std::string, Tensor>>& dst,
                    const std::vector<std::pair<std::string, Tensor>>& src);

}  // namespace hwnas
