#include <algorithm>
#include <cmath>

#include "hwnas/errors.hpp"
#include "hwnas/latency.hpp"

namespace hwnas {

bool PathSpec::all_skip() const {
  return std::all_of(steps.begin(), steps.end(), [](const SupernetEdge& e) { return e.kind == EdgeKind::Skip; });
}

namespace {

bool better(const PathSpec& a, const PathSpec& b) {
  if (a.log_length != b.log_length) return a.log_length > b.log_length;
  return a.steps < b.steps;
}

}  // namespace

PathSearchResult top_n_longest_paths(const BetaGrid& probs, int n, bool exclude_all_skip) {
  if (n < 1) throw ArgumentError("top_n_longest_paths: n must be >= 1");
  SearchConfig grid;
  grid.layers = probs.layers;
  grid.scales = probs.scales;
  // There is at most one all-skip path (scale 0 throughout), so keeping one
  // extra candidate and dropping it afterwards is exact.
  const std::size_t keep = static_cast<std::size_t>(n) + (exclude_all_skip ? 1 : 0);
  const auto L = static_cast<std::size_t>(probs.layers), S = static_cast<std::size_t>(probs.scales);

  // best[l][s]: up to `keep` best prefixes ending at vertex (l, s).
  std::vector<std::vector<PathSpec>> best((L + 1) * S);
  best[0].push_back(PathSpec{});
  for (int l = 0; l < probs.layers; ++l) {
    for (int s = 0; s < probs.scales; ++s) {
      const auto& prefixes = best[static_cast<std::size_t>(l) * S + static_cast<std::size_t>(s)];
      if (prefixes.empty() || !vertex_live(grid, l, s)) continue;
      for (auto kind : out_kinds(grid, s)) {
        const int t = s + scale_step(kind);
        const double p = probs.at(l, s, kind);
        if (!vertex_live(grid, l + 1, t) || !(p > 0.0)) continue;
        auto& dst = best[static_cast<std::size_t>(l + 1) * S + static_cast<std::size_t>(t)];
        for (const auto& prefix : prefixes) {
          PathSpec next = prefix;
          next.steps.push_back({l, s, kind});
          next.log_length += std::log(p);
          next.length *= p;
          dst.push_back(std::move(next));
        }
      }
    }
    for (int t = 0; t < probs.scales; ++t) {
      auto& cands = best[static_cast<std::size_t>(l + 1) * S + static_cast<std::size_t>(t)];
      std::sort(cands.begin(), cands.end(), better);
      if (cands.size() > keep) cands.resize(keep);
    }
  }

  PathSearchResult result;
  result.paths = best[L * S];
  if (exclude_all_skip)
    std::erase_if(result.paths, [](const PathSpec& p) { return p.all_skip(); });
  if (result.paths.size() > static_cast<std::size_t>(n)) result.paths.resize(static_cast<std::size_t>(n));
  result.truncated = result.paths.size() < static_cast<std::size_t>(n);
  return result;
}

}  // namespace hwnas
