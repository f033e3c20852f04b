#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hwnas/ops.hpp"
#include "hwnas/search_space.hpp"
#include "hwnas/tensor.hpp"

namespace hwnas {

// Kernel families that appear in the lookup table.
enum class LatencyOp : std::uint8_t {
  Conv3d,
  DilatedConv3d,
  SeparableConv3d,
  MaxPool3d,
  Identity,
  Zero,
  Contract,
  Expand,
  NonScale,
  Merge,
  Stem,
  Head,
};

std::string_view to_string(LatencyOp op);
LatencyOp latency_op_from_string(std::string_view name);
LatencyOp latency_op(PrimitiveOp op);

/// Workload key: kernel family, channel counts, the op's *input* spatial
/// extents, and whether the op runs on the partial channel slice.
struct OpSignature {
  LatencyOp op = LatencyOp::Identity;
  std::size_t cin = 0;
  std::size_t cout = 0;
  std::size_t d = 0;
  std::size_t h = 0;
  std::size_t w = 0;
  bool partial = false;

  std::string str() const;
  friend auto operator<=>(const OpSignature&, const OpSignature&) = default;
};

OpSignature primitive_signature(const SearchConfig& cfg, PrimitiveOp op, int scale, bool partial);
OpSignature preprocess_signature(const SearchConfig& cfg, EdgeKind kind, int from_scale);
OpSignature merge_signature(const SearchConfig& cfg, int scale);
OpSignature stem_signature(const SearchConfig& cfg);
OpSignature head_signature(const SearchConfig& cfg);

// Every signature reachable in the supernet of cfg, sorted and unique.
std::vector<OpSignature> required_signatures(const SearchConfig& cfg);

struct LatencyMetadata {
  std::string host;
  int reps = 0;
  int warmup = 0;
  std::string timestamp;
};

/// Measured seconds per OpSignature.
class LatencyTable {
 public:
  LatencyMetadata metadata;

  void set(const OpSignature& sig, double seconds);
  // Throws LookupError naming the signature.
  double lookup(const OpSignature& sig) const;
  bool contains(const OpSignature& sig) const { return entries_.count(sig) != 0; }
  std::size_t size() const { return entries_.size(); }
  const std::map<OpSignature, double>& entries() const { return entries_; }

  // Number of lookup() calls since construction or the last reset.
  std::size_t access_count() const { return accesses_; }
  void reset_access_count() { accesses_ = 0; }

  std::string to_json() const;
  static LatencyTable from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static LatencyTable load(const std::filesystem::path& path);

 private:
  std::map<OpSignature, double> entries_;
  mutable std::size_t accesses_ = 0;
};

// Median wall-clock seconds of `reps` timed runs after `warmup` untimed runs
// on random data, pinned to the current logical processor. Identity and Zero
// are free by definition and return 0 without timing.
double profile_op(const OpSignature& sig, int reps, int warmup);

LatencyTable build_table(const SearchConfig& cfg, int reps, int warmup,
                         const std::function<void(const OpSignature&, double)>& on_entry = {});

// ---------------------------------------------------------------------------
// Gumbel-Softmax

std::vector<double> sample_gumbel(std::size_t n, std::mt19937_64& rng);
// softmax((weights + noise) / tau) over a 1-D weights tensor. The noise is a
// constant of the pass, so gradients flow only through the softmax.
Tensor gumbel_softmax(const Tensor& weights, double tau, std::span<const double> noise);
Tensor gumbel_softmax(const Tensor& weights, double tau, std::mt19937_64& rng);

/// One frozen Gumbel draw per architecture-parameter entry, laid out like
/// ArchParams (alpha [3,E,6], gamma [3,E], beta [L,S,4]). A draw is shared by
/// every use of its parameter within one evaluation.
struct LatencyNoise {
  std::vector<double> alpha;
  std::vector<double> gamma;
  std::vector<double> beta;

  static LatencyNoise zeros(const SearchConfig& cfg);
  static LatencyNoise sample(const SearchConfig& cfg, std::mt19937_64& rng);
};

// Sum_k GS(alpha_edge)_k * F(OP_k) at the full-width signatures of `scale`.
Tensor expected_mixed_op_latency(const Tensor& alpha_edge, const LatencyTable& table, const SearchConfig& cfg,
                                 int scale, double tau, std::span<const double> noise);

// F(preprocess) + F(merge) + sum_j sum_{i<j} GS(gamma_j)_i * E[mixed op (i,j)]
// for the cell on an edge of `kind` leaving `from_scale`.
Tensor expected_cell_latency(const ArchParams& params, const SearchConfig& cfg, EdgeKind kind, int from_scale,
                             const LatencyTable& table, double tau, const LatencyNoise& noise);

// ---------------------------------------------------------------------------
// paths

/// Stem-to-head path through the supernet grid, one edge per layer.
struct PathSpec {
  std::vector<SupernetEdge> steps;
  double log_length = 0.0;  // sum of log p_beta along the path
  double length = 1.0;      // product of p_beta, multiplied in path order

  bool all_skip() const;
};

struct PathSearchResult {
  std::vector<PathSpec> paths;  // descending length, ties by lexicographic edge order
  bool truncated = false;       // fewer than n paths exist
};

// k-best dynamic programme over the layered grid. Only edges with positive
// probability between live vertices are considered.
PathSearchResult top_n_longest_paths(const BetaGrid& probs, int n, bool exclude_all_skip = false);

struct NetworkLatencyOptions {
  // Charge each distinct edge (and stem/head) once across the selected paths
  // instead of once per path.
  bool union_of_edges = false;
};

struct NetworkLatency {
  Tensor total;  // seconds; differentiable w.r.t. alpha, beta and gamma
  std::vector<PathSpec> paths;
};

// Recomputes the top-n paths from the current beta probabilities (treated as
// constants), then sums per path F(stem) + F(head) + sum over steps of
// GS(beta at the step's vertex)[kind] * E[cell latency]. Skip steps add 0.
NetworkLatency expected_network_latency(const ArchParams& params, const SearchConfig& cfg, const LatencyTable& table,
                                        int n, double tau, const LatencyNoise& noise,
                                        const NetworkLatencyOptions& options = {});

}  // namespace hwnas
