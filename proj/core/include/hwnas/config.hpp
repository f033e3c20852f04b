#pragma once

#include <string>
#include <string_view>

#include "hwnas/search.hpp"
#include "hwnas/search_space.hpp"

namespace hwnas {

// JSON objects for the configuration structs. Parsers start from the
// defaults, reject unknown keys and wrong types with a ConfigError naming the
// JSON path (rooted at `where`), then run validate().
std::string to_json(const SearchConfig& cfg);
std::string to_json(const TrainConfig& cfg);
std::string to_json(const RetrainConfig& cfg);

SearchConfig search_config_from_json(std::string_view text, const std::string& where = "$");
TrainConfig train_config_from_json(std::string_view text, const std::string& where = "$");
RetrainConfig retrain_config_from_json(std::string_view text, const std::string& where = "$");

}  // namespace hwnas
