#pragma once

// Randomised inputs shared by the unit tests and the acceptance runner.

#include <random>

#include "hwnas/latency.hpp"
#include "hwnas/search_space.hpp"

namespace builders {

// Every signature the config can reach gets a cost in [1e-4, 1e-3) s;
// Identity and Zero stay free.
inline hwnas::LatencyTable random_table(const hwnas::SearchConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(1e-4, 1e-3);
  hwnas::LatencyTable t;
  for (const auto& sig : hwnas::required_signatures(cfg)) {
    const bool free = sig.op == hwnas::LatencyOp::Identity || sig.op == hwnas::LatencyOp::Zero;
    t.set(sig, free ? 0.0 : u(rng));
  }
  return t;
}

inline void randomize(hwnas::ArchParams& p, std::mt19937_64& rng, double spread = 1.0) {
  std::normal_distribution<double> n(0.0, spread);
  for (auto t : p.tensors())
    for (auto& v : t.mutable_data()) v = n(rng);
}

// Softmax probabilities of random beta logits on an L x S grid.
inline hwnas::BetaGrid random_grid(int layers, int scales, std::mt19937_64& rng) {
  hwnas::SearchConfig cfg;
  cfg.layers = layers;
  cfg.scales = scales;
  cfg.nodes = 1;
  cfg.k_partial = 1;
  cfg.input_shape = {8, 8, 8};
  auto p = hwnas::ArchParams::zeros(cfg);
  randomize(p, rng, 1.5);
  return hwnas::beta_grid(p, cfg);
}

}  // namespace builders
