#include "hwnas/config.hpp"

#include <functional>
#include <map>

#include "hwnas/errors.hpp"
#include "json_util.hpp"

namespace hwnas {

using detail::json;

namespace {

json parse_object(std::string_view text, const std::string& where) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& ex) {
    throw ConfigError(where + ": invalid JSON: " + ex.what());
  }
  if (!doc.is_object()) throw ConfigError(where + ": expected an object");
  return doc;
}

// Typed field binding: each key maps onto a reader that validates the JSON
// type before assigning.
class Fields {
 public:
  Fields(const json& doc, std::string where) : doc_(doc), where_(std::move(where)) {}

  void integer(const char* key, int& out) {
    bind(key, [&out, this, key](const json& v) {
      if (!v.is_number_integer()) fail(key, "expected an integer");
      out = v.get<int>();
    });
  }
  void unsigned64(const char* key, std::uint64_t& out) {
    bind(key, [&out, this, key](const json& v) {
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
        fail(key, "expected a non-negative integer");
      out = v.get<std::uint64_t>();
    });
  }
  void number(const char* key, double& out) {
    bind(key, [&out, this, key](const json& v) {
      if (!v.is_number()) fail(key, "expected a number");
      out = v.get<double>();
    });
  }
  void boolean(const char* key, bool& out) {
    bind(key, [&out, this, key](const json& v) {
      if (!v.is_boolean()) fail(key, "expected true or false");
      out = v.get<bool>();
    });
  }

  void apply() {
    for (const auto& [key, value] : doc_.items()) {
      auto it = readers_.find(key);
      if (it == readers_.end()) throw ConfigError(where_ + "." + key + ": unknown key");
      it->second(value);
    }
  }

 private:
  template <class F>
  void bind(const char* key, F f) {
    readers_.emplace(key, std::function<void(const json&)>(f));
  }
  [[noreturn]] void fail(const char* key, const std::string& msg) const {
    throw ConfigError(where_ + "." + key + ": " + msg);
  }

  const json& doc_;
  std::string where_;
  std::map<std::string, std::function<void(const json&)>> readers_;
};

}  // namespace

std::string to_json(const SearchConfig& cfg) { return detail::config_to_json(cfg).dump(); }

std::string to_json(const TrainConfig& c) {
  return json{{"total_epochs", c.total_epochs}, {"warmup_epochs", c.warmup_epochs},
              {"batch_size", c.batch_size},     {"lr_w", c.lr_w},
              {"momentum", c.momentum},         {"lr_arch", c.lr_arch},
              {"lambda", c.lambda},             {"tau_start", c.tau_start},
              {"tau_end", c.tau_end},           {"seed", c.seed},
              {"n_fusion", c.n_fusion},         {"latency_scale", c.latency_scale},
              {"grad_clip", c.grad_clip},       {"union_of_edges", c.union_of_edges}}
      .dump();
}

std::string to_json(const RetrainConfig& c) {
  return json{{"epochs", c.epochs},       {"batch_size", c.batch_size},
              {"lr", c.lr},               {"momentum", c.momentum},
              {"grad_clip", c.grad_clip}, {"folds", c.folds},
              {"max_folds", c.max_folds}, {"seed", c.seed},
              {"augment", c.augment},     {"latency_reps", c.latency_reps},
              {"latency_warmup", c.latency_warmup}}
      .dump();
}

SearchConfig search_config_from_json(std::string_view text, const std::string& where) {
  SearchConfig cfg = detail::config_from_json<ConfigError>(parse_object(text, where), where);
  cfg.validate();
  return cfg;
}

TrainConfig train_config_from_json(std::string_view text, const std::string& where) {
  const json doc = parse_object(text, where);
  TrainConfig c;
  Fields f(doc, where);
  f.integer("total_epochs", c.total_epochs);
  f.integer("warmup_epochs", c.warmup_epochs);
  f.integer("batch_size", c.batch_size);
  f.number("lr_w", c.lr_w);
  f.number("momentum", c.momentum);
  f.number("lr_arch", c.lr_arch);
  f.number("lambda", c.lambda);
  f.number("tau_start", c.tau_start);
  f.number("tau_end", c.tau_end);
  f.unsigned64("seed", c.seed);
  f.integer("n_fusion", c.n_fusion);
  f.number("latency_scale", c.latency_scale);
  f.number("grad_clip", c.grad_clip);
  f.boolean("union_of_edges", c.union_of_edges);
  f.apply();
  c.validate();
  return c;
}

RetrainConfig retrain_config_from_json(std::string_view text, const std::string& where) {
  const json doc = parse_object(text, where);
  RetrainConfig c;
  Fields f(doc, where);
  f.integer("epochs", c.epochs);
  f.integer("batch_size", c.batch_size);
  f.number("lr", c.lr);
  f.number("momentum", c.momentum);
  f.number("grad_clip", c.grad_clip);
  f.integer("folds", c.folds);
  f.integer("max_folds", c.max_folds);
  f.unsigned64("seed", c.seed);
  f.boolean("augment", c.augment);
  f.integer("latency_reps", c.latency_reps);
  f.integer("latency_warmup", c.latency_warmup);
  f.apply();
  c.validate();
  return c;
}

}  // namespace hwnas
