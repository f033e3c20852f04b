#pragma once

// Internal JSON helpers shared by the decoder and checkpoint code.

#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "hwnas/search_space.hpp"

namespace hwnas::detail {

using nlohmann::json;

inline json config_to_json(const SearchConfig& cfg) {
  return json{{"layers", cfg.layers},
              {"scales", cfg.scales},
              {"nodes", cfg.nodes},
              {"base_channels", cfg.base_channels},
              {"k_partial", cfg.k_partial},
              {"num_classes", cfg.num_classes},
              {"in_channels", cfg.in_channels},
              {"input_shape", cfg.input_shape},
              {"n_fusion", cfg.n_fusion}};
}

// Reads `node` (at JSON path `where`) into a SearchConfig. Missing keys keep
// their defaults; unknown keys and wrong types throw Err(message).
template <class Err>
SearchConfig config_from_json(const json& node, const std::string& where, SearchConfig cfg = {}) {
  if (!node.is_object()) throw Err(where + ": expected an object");
  static const std::set<std::string> known = {"layers",      "scales",      "nodes",       "base_channels", "k_partial",
                                              "num_classes", "in_channels", "input_shape", "n_fusion"};
  for (const auto& [key, value] : node.items())
    if (!known.count(key)) throw Err(where + "." + key + ": unknown key");
  auto read_int = [&](const char* key, int& out) {
    if (!node.contains(key)) return;
    const auto& v = node.at(key);
    if (!v.is_number_integer()) throw Err(where + "." + key + ": expected an integer");
    out = v.get<int>();
  };
  read_int("layers", cfg.layers);
  read_int("scales", cfg.scales);
  read_int("nodes", cfg.nodes);
  read_int("base_channels", cfg.base_channels);
  read_int("k_partial", cfg.k_partial);
  read_int("num_classes", cfg.num_classes);
  read_int("in_channels", cfg.in_channels);
  read_int("n_fusion", cfg.n_fusion);
  if (node.contains("input_shape")) {
    const auto& v = node.at("input_shape");
    if (!v.is_array() || v.size() != 3) throw Err(where + ".input_shape: expected [D, H, W]");
    for (std::size_t i = 0; i < 3; ++i) {
      if (!v[i].is_number_integer()) throw Err(where + ".input_shape[" + std::to_string(i) + "]: expected an integer");
      cfg.input_shape[i] = v[i].get<int>();
    }
  }
  return cfg;
}

}  // namespace hwnas::detail
