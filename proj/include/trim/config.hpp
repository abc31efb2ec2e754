#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trim/dictionary.hpp"
#include "trim/experiments.hpp"
#include "trim/mlp.hpp"
#include "trim/trim.hpp"

namespace trim {

/// Bad config file, unknown key or unparsable value. The message names the
/// offending `section.key` path.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class OutputFormat { Csv, Json, Both };

struct TrainSection {
  std::vector<std::size_t> hidden_widths = {128, 128};
  OutputHead head = OutputHead::Logit;
  TrainConfig train;
  std::string data;    // samples x features
  std::string labels;  // one column (or row) of targets
};

struct QuerySection {
  std::string transform = "dft1d";  // identity | dft1d | dft2d | dictionary
  std::size_t grid_height = 0;      // dft2d only; width follows from the input
  std::string dictionary;           // dictionary checkpoint for transform = dictionary
  MethodConfig method;
  /// all | none | groups | group:<label> | band:<lo>:<hi>
  std::string mask = "groups";
  std::size_t band_width = 1;
};

struct DictionarySection {
  DictionaryConfig dictionary;
  std::string data;
  std::string model;  // optional, needed when lambda_trim > 0
};

/// Everything a subcommand may read. Sections of the file mirror the members;
/// `[run]` holds seed, out, format and threads.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string out = "trim_out";
  OutputFormat format = OutputFormat::Both;
  std::size_t threads = 0;  // 0 = all cores
  SyntheticConfig benchmark;
  TrainSection train;
  QuerySection query;
  DictionarySection dictionary;

  /// Copies `seed` into every seeded component.
  void propagate_seed();
  nlohmann::json to_json() const;
};

/// Parses INI-style text: `[section]` headers and `key = value` lines, `#` or
/// `;` comments. Values may be quoted and lists may be bracketed, so simple
/// TOML files parse too. Unknown sections or keys throw ConfigError.
RunConfig parse_run_config(const std::string& text, const std::string& origin = "<config>");
RunConfig load_run_config(const std::string& path);

/// One line per key with its default, for --help.
std::string config_reference();

std::string format_name(OutputFormat f);
OutputFormat parse_format(const std::string& s);

}  // namespace trim
