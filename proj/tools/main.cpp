#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"
#include "hwnas/errors.hpp"

using namespace hwnas;
using namespace hwnas::cli;

int main(int argc, char** argv) {
  CLI::App app{"Hardware-aware differentiable architecture search for 3D segmentation"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::string> config_path;
  Overrides flags;
  CommandOptions opt;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--seed", flags.seed, "seed for data, search and retraining");
  app.add_option("--lambda", flags.lambda, "latency weight in the search loss");
  app.add_option("--n", flags.n, "number of fused top paths")->check(CLI::PositiveNumber);
  app.add_option("--out", flags.out, "run directory (default: run)");
  app.add_flag("--json", opt.json, "print only a JSON summary on stdout");

  auto* profile = app.add_subcommand("profile", "profile every supernet operator into a latency table");
  auto* gen = app.add_subcommand("gen-data", "generate the synthetic ellipsoid dataset");
  auto* search = app.add_subcommand("search", "run the hardware-aware architecture search");
  auto* decode = app.add_subcommand("decode", "decode the top-n paths into an architecture file");
  auto* retrain = app.add_subcommand("retrain", "train a decoded architecture from scratch with k-fold Dice");
  auto* eval = app.add_subcommand("eval", "score retrained weights on a dataset");
  auto* bench = app.add_subcommand("bench", "time single-sample inference against latency budgets");
  auto* report = app.add_subcommand("report", "collect loss curves, lambda sweeps and grid renderings");
  for (auto* sub : {decode, retrain, eval, bench}) sub->add_option("--arch", opt.arch, "architecture file");
  eval->add_option("--weights", opt.weights, "retrained weight bundle");
  report->add_option("run_dir", opt.run_dir, "run directory (default: --out)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    const RunConfig rc = load_run_config(config_path, flags);
    if (profile->parsed()) return cmd_profile(rc, opt);
    if (gen->parsed()) return cmd_gen_data(rc, opt);
    if (search->parsed()) return cmd_search(rc, opt);
    if (decode->parsed()) return cmd_decode(rc, opt);
    if (retrain->parsed()) return cmd_retrain(rc, opt);
    if (eval->parsed()) return cmd_eval(rc, opt);
    if (bench->parsed()) return cmd_bench(rc, opt);
    if (report->parsed()) return cmd_report(rc, opt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const LookupError& e) {
    std::cerr << "latency table error: " << e.what() << '\n';
    return kMissingTable;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return kDataError;
  } catch (const DecodeError& e) {
    std::cerr << "decode error: " << e.what() << '\n';
    return kDecodeError;
  } catch (const MissingArtifact& e) {
    std::cerr << "missing artifact: " << e.what() << '\n';
    return kMissingArtifact;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
