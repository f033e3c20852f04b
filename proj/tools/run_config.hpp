#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "hwnas/data.hpp"
#include "hwnas/search.hpp"
#include "hwnas/search_space.hpp"

namespace hwnas::cli {

struct DataSection {
  std::size_t count = 20;
  std::uint64_t seed = 0;
  SyntheticConfig synthetic;
};

struct ProfileSection {
  int reps = 50;
  int warmup = 10;
};

struct BenchSection {
  int reps = 50;
  int warmup = 5;
  double budget_ms = 50.0;
  double budget_fps = 22.0;
};

struct PathsSection {
  std::string table;       // default <out>/table.json
  std::string dataset;     // default <out>/data/manifest.json
  std::string checkpoint;  // default <out>/checkpoint.bin
  std::string arch;        // default <out>/arch_n<n>.json
};

/// Everything a command may need, from one JSON file plus flag overrides.
struct RunConfig {
  SearchConfig search;
  TrainConfig train;
  RetrainConfig retrain;
  DataSection data;
  ProfileSection profile;
  BenchSection bench;
  PathsSection paths;
  std::string out = "run";

  std::filesystem::path out_dir() const { return out; }
  std::filesystem::path table_path() const;
  std::filesystem::path dataset_path() const;
  std::filesystem::path checkpoint_path() const;
  std::filesystem::path arch_path(int n) const;

  void validate() const;  // ConfigError
  std::string to_json() const;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda;
  std::optional<unsigned> n;
  std::optional<std::string> out;
};

// Reads the config file (if any), applies flag overrides, validates.
RunConfig load_run_config(const std::optional<std::string>& path, const Overrides& flags);

}  // namespace hwnas::cli
