#include "run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hwnas/config.hpp"
#include "hwnas/errors.hpp"

namespace hwnas::cli {

using nlohmann::json;

namespace {

void check_keys(const json& node, const std::string& where, const std::set<std::string>& keys) {
  if (!node.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : node.items())
    if (!keys.count(key)) throw ConfigError(where + "." + key + ": unknown key");
}

template <class T>
void read(const json& node, const std::string& where, const char* key, T& out) {
  if (!node.contains(key)) return;
  const json& v = node.at(key);
  const std::string at = where + "." + key;
  if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw ConfigError(at + ": expected a string");
  } else if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError(at + ": expected true or false");
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw ConfigError(at + ": expected a number");
  } else {
    if (!v.is_number_integer() || (std::is_unsigned_v<T> && v.get<long long>() < 0))
      throw ConfigError(at + ": expected " + (std::is_unsigned_v<T> ? "a non-negative integer" : "an integer"));
  }
  out = v.get<T>();
}

}  // namespace

std::filesystem::path RunConfig::table_path() const {
  return paths.table.empty() ? out_dir() / "table.json" : std::filesystem::path(paths.table);
}
std::filesystem::path RunConfig::dataset_path() const {
  return paths.dataset.empty() ? out_dir() / "data" / "manifest.json" : std::filesystem::path(paths.dataset);
}
std::filesystem::path RunConfig::checkpoint_path() const {
  return paths.checkpoint.empty() ? out_dir() / "checkpoint.bin" : std::filesystem::path(paths.checkpoint);
}
std::filesystem::path RunConfig::arch_path(int n) const {
  return paths.arch.empty() ? out_dir() / ("arch_n" + std::to_string(n) + ".json") : std::filesystem::path(paths.arch);
}

void RunConfig::validate() const {
  search.validate();
  train.validate();
  retrain.validate();
  if (data.count < 1) throw ConfigError("data.count must be >= 1");
  if (profile.reps < 3 || profile.warmup < 1) throw ConfigError("profile: reps >= 3 and warmup >= 1 required");
  if (bench.reps < 1 || bench.warmup < 0) throw ConfigError("bench: reps >= 1 and warmup >= 0 required");
  if (!(bench.budget_ms > 0.0) || !(bench.budget_fps > 0.0)) throw ConfigError("bench budgets must be > 0");
  if (out.empty()) throw ConfigError("out must not be empty");
}

std::string RunConfig::to_json() const {
  json doc{{"search", json::parse(hwnas::to_json(search))},
           {"train", json::parse(hwnas::to_json(train))},
           {"retrain", json::parse(hwnas::to_json(retrain))},
           {"data",
            {{"count", data.count},
             {"seed", data.seed},
             {"noise", data.synthetic.noise},
             {"radius_min", data.synthetic.radius_min},
             {"radius_max", data.synthetic.radius_max}}},
           {"profile", {{"reps", profile.reps}, {"warmup", profile.warmup}}},
           {"bench",
            {{"reps", bench.reps},
             {"warmup", bench.warmup},
             {"budget_ms", bench.budget_ms},
             {"budget_fps", bench.budget_fps}}},
           {"paths",
            {{"table", paths.table}, {"dataset", paths.dataset}, {"checkpoint", paths.checkpoint}, {"arch", paths.arch}}},
           {"out", out}};
  return doc.dump(2);
}

RunConfig load_run_config(const std::optional<std::string>& path, const Overrides& flags) {
  RunConfig rc;
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("cannot open config file " + *path);
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& ex) {
      throw ConfigError(*path + ": invalid JSON: " + ex.what());
    }
    check_keys(doc, "$", {"search", "train", "retrain", "data", "profile", "bench", "paths", "out"});
    if (doc.contains("search")) rc.search = search_config_from_json(doc["search"].dump(), "$.search");
    if (doc.contains("train")) rc.train = train_config_from_json(doc["train"].dump(), "$.train");
    if (doc.contains("retrain")) rc.retrain = retrain_config_from_json(doc["retrain"].dump(), "$.retrain");
    if (doc.contains("data")) {
      const json& d = doc["data"];
      check_keys(d, "$.data", {"count", "seed", "noise", "radius_min", "radius_max"});
      read(d, "$.data", "count", rc.data.count);
      read(d, "$.data", "seed", rc.data.seed);
      read(d, "$.data", "noise", rc.data.synthetic.noise);
      read(d, "$.data", "radius_min", rc.data.synthetic.radius_min);
      read(d, "$.data", "radius_max", rc.data.synthetic.radius_max);
    }
    if (doc.contains("profile")) {
      const json& p = doc["profile"];
      check_keys(p, "$.profile", {"reps", "warmup"});
      read(p, "$.profile", "reps", rc.profile.reps);
      read(p, "$.profile", "warmup", rc.profile.warmup);
    }
    if (doc.contains("bench")) {
      const json& b = doc["bench"];
      check_keys(b, "$.bench", {"reps", "warmup", "budget_ms", "budget_fps"});
      read(b, "$.bench", "reps", rc.bench.reps);
      read(b, "$.bench", "warmup", rc.bench.warmup);
      read(b, "$.bench", "budget_ms", rc.bench.budget_ms);
      read(b, "$.bench", "budget_fps", rc.bench.budget_fps);
    }
    if (doc.contains("paths")) {
      const json& p = doc["paths"];
      check_keys(p, "$.paths", {"table", "dataset", "checkpoint", "arch"});
      read(p, "$.paths", "table", rc.paths.table);
      read(p, "$.paths", "dataset", rc.paths.dataset);
      read(p, "$.paths", "checkpoint", rc.paths.checkpoint);
      read(p, "$.paths", "arch", rc.paths.arch);
    }
    read(doc, "$", "out", rc.out);
  }
  if (flags.seed) {
    rc.train.seed = *flags.seed;
    rc.retrain.seed = *flags.seed;
    rc.data.seed = *flags.seed;
  }
  if (flags.lambda) rc.train.lambda = *flags.lambda;
  if (flags.n) {
    rc.search.n_fusion = static_cast<int>(*flags.n);
    rc.train.n_fusion = static_cast<int>(*flags.n);
  }
  if (flags.out) rc.out = *flags.out;
  rc.validate();
  return rc;
}

}  // namespace hwnas::cli
