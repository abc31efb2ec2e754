#include "trim/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "trim/error.hpp"

namespace trim {
namespace {

using Json = nlohmann::json;

std::string trim_ws(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string unquote(std::string s) {
  s = trim_ws(s);
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

std::vector<std::string> split_list(const std::string& raw) {
  std::string s = trim_ws(raw);
  if (s.size() >= 2 && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = unquote(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::uint64_t to_u64(const std::string& s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument("expected a non-negative integer, got '" + s + "'");
  }
  return v;
}

std::size_t to_size(const std::string& s) { return static_cast<std::size_t>(to_u64(s)); }

double to_double(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument("expected a number, got '" + s + "'");
  }
  return v;
}

std::vector<std::size_t> to_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(s)) out.push_back(to_size(item));
  return out;
}

std::vector<Method> to_methods(const std::string& s) {
  std::vector<Method> out;
  for (const auto& item : split_list(s)) out.push_back(parse_method(item));
  return out;
}

std::vector<std::string> method_names(const std::vector<Method>& ms) {
  std::vector<std::string> out;
  for (auto m : ms) out.push_back(method_name(m));
  return out;
}

OptimizerKind to_optimizer(const std::string& s) {
  if (s == "adam") return OptimizerKind::Adam;
  if (s == "sgd_momentum" || s == "sgd") return OptimizerKind::SgdMomentum;
  throw std::invalid_argument("expected adam or sgd_momentum, got '" + s + "'");
}

std::string optimizer_name(OptimizerKind k) { return k == OptimizerKind::Adam ? "adam" : "sgd_momentum"; }

OutputHead to_head(const std::string& s) {
  if (s == "identity") return OutputHead::Identity;
  if (s == "logit") return OutputHead::Logit;
  throw std::invalid_argument("expected identity or logit, got '" + s + "'");
}

ShapleyConfig::Mode to_shapley_mode(const std::string& s) {
  if (s == "exact") return ShapleyConfig::Mode::Exact;
  if (s == "sampled") return ShapleyConfig::Mode::Sampled;
  throw std::invalid_argument("expected exact or sampled, got '" + s + "'");
}

DictionaryInit to_init(const std::string& s) {
  if (s == "identity") return DictionaryInit::Identity;
  if (s == "random") return DictionaryInit::Random;
  throw std::invalid_argument("expected identity or random, got '" + s + "'");
}

struct Key {
  std::string path;  // section.key
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<Json(const RunConfig&)> get;
};

// Training hyperparameters appear under both [benchmark] and [train]. `sel`
// is a generic lambda returning the TrainConfig of either section.
template <typename Select>
void add_train_keys(std::vector<Key>& keys, const std::string& section, Select sel) {
  const std::string p = section + ".";
  keys.push_back({p + "optimizer", [sel](RunConfig& c, const std::string& v) { sel(c).optimizer = to_optimizer(v); },
                  [sel](const RunConfig& c) { return Json(optimizer_name(sel(c).optimizer)); }});
  keys.push_back({p + "learning_rate", [sel](RunConfig& c, const std::string& v) { sel(c).learning_rate = to_double(v); },
                  [sel](const RunConfig& c) { return Json(sel(c).learning_rate); }});
  keys.push_back({p + "epochs", [sel](RunConfig& c, const std::string& v) { sel(c).epochs = to_size(v); },
                  [sel](const RunConfig& c) { return Json(sel(c).epochs); }});
  keys.push_back({p + "batch_size", [sel](RunConfig& c, const std::string& v) { sel(c).batch_size = to_size(v); },
                  [sel](const RunConfig& c) { return Json(sel(c).batch_size); }});
  keys.push_back({p + "momentum", [sel](RunConfig& c, const std::string& v) { sel(c).momentum = to_double(v); },
                  [sel](const RunConfig& c) { return Json(sel(c).momentum); }});
  keys.push_back({p + "beta1", [sel](RunConfig& c, const std::string& v) { sel(c).beta1 = to_double(v); },
                  [sel](const RunConfig& c) { return Json(sel(c).beta1); }});
  keys.push_back({p + "beta2", [sel](RunConfig& c, const std::string& v) { sel(c).beta2 = to_double(v); },
                  [sel](const RunConfig& c) { return Json(sel(c).beta2); }});
  keys.push_back({p + "epsilon", [sel](RunConfig& c, const std::string& v) { sel(c).epsilon = to_double(v); },
                  [sel](const RunConfig& c) { return Json(sel(c).epsilon); }});
}

const std::vector<Key>& key_table() {
  static const std::vector<Key> table = [] {
    std::vector<Key> k;
    k.push_back({"run.seed", [](RunConfig& c, const std::string& v) { c.seed = to_u64(v); },
                 [](const RunConfig& c) { return Json(c.seed); }});
    k.push_back({"run.out", [](RunConfig& c, const std::string& v) { c.out = v; },
                 [](const RunConfig& c) { return Json(c.out); }});
    k.push_back({"run.format", [](RunConfig& c, const std::string& v) { c.format = parse_format(v); },
                 [](const RunConfig& c) { return Json(format_name(c.format)); }});
    k.push_back({"run.threads", [](RunConfig& c, const std::string& v) { c.threads = to_size(v); },
                 [](const RunConfig& c) { return Json(c.threads); }});

    k.push_back({"benchmark.d", [](RunConfig& c, const std::string& v) { c.benchmark.d = to_size(v); },
                 [](const RunConfig& c) { return Json(c.benchmark.d); }});
    k.push_back({"benchmark.n_samples", [](RunConfig& c, const std::string& v) { c.benchmark.n_samples = to_size(v); },
                 [](const RunConfig& c) { return Json(c.benchmark.n_samples); }});
    k.push_back({"benchmark.train_fraction",
                 [](RunConfig& c, const std::string& v) { c.benchmark.train_fraction = to_double(v); },
                 [](const RunConfig& c) { return Json(c.benchmark.train_fraction); }});
    k.push_back({"benchmark.n_datasets",
                 [](RunConfig& c, const std::string& v) { c.benchmark.n_datasets = to_size(v); },
                 [](const RunConfig& c) { return Json(c.benchmark.n_datasets); }});
    k.push_back({"benchmark.hidden_widths",
                 [](RunConfig& c, const std::string& v) { c.benchmark.hidden_widths = to_sizes(v); },
                 [](const RunConfig& c) { return Json(c.benchmark.hidden_widths); }});
    k.push_back({"benchmark.methods", [](RunConfig& c, const std::string& v) { c.benchmark.methods = to_methods(v); },
                 [](const RunConfig& c) { return Json(method_names(c.benchmark.methods)); }});
    k.push_back({"benchmark.max_scored_points",
                 [](RunConfig& c, const std::string& v) { c.benchmark.max_scored_points = to_size(v); },
                 [](const RunConfig& c) { return Json(c.benchmark.max_scored_points); }});
    k.push_back({"benchmark.ig_steps", [](RunConfig& c, const std::string& v) { c.benchmark.ig_steps = to_size(v); },
                 [](const RunConfig& c) { return Json(c.benchmark.ig_steps); }});
    k.push_back({"benchmark.shapley_permutations",
                 [](RunConfig& c, const std::string& v) { c.benchmark.shapley_permutations = to_size(v); },
                 [](const RunConfig& c) { return Json(c.benchmark.shapley_permutations); }});
    k.push_back({"benchmark.model_source",
                 [](RunConfig& c, const std::string& v) { c.benchmark.model_source = parse_model_source(v); },
                 [](const RunConfig& c) { return Json(model_source_name(c.benchmark.model_source)); }});
    k.push_back({"benchmark.oracle_directions",
                 [](RunConfig& c, const std::string& v) { c.benchmark.oracle_directions = to_size(v); },
                 [](const RunConfig& c) { return Json(c.benchmark.oracle_directions); }});
    add_train_keys(k, "benchmark", [](auto& c) -> auto& { return c.benchmark.train; });

    k.push_back({"train.hidden_widths", [](RunConfig& c, const std::string& v) { c.train.hidden_widths = to_sizes(v); },
                 [](const RunConfig& c) { return Json(c.train.hidden_widths); }});
    k.push_back({"train.head", [](RunConfig& c, const std::string& v) { c.train.head = to_head(v); },
                 [](const RunConfig& c) { return Json(c.train.head == OutputHead::Logit ? "logit" : "identity"); }});
    k.push_back({"train.data", [](RunConfig& c, const std::string& v) { c.train.data = v; },
                 [](const RunConfig& c) { return Json(c.train.data); }});
    k.push_back({"train.labels", [](RunConfig& c, const std::string& v) { c.train.labels = v; },
                 [](const RunConfig& c) { return Json(c.train.labels); }});
    add_train_keys(k, "train", [](auto& c) -> auto& { return c.train.train; });

    k.push_back({"query.transform", [](RunConfig& c, const std::string& v) { c.query.transform = v; },
                 [](const RunConfig& c) { return Json(c.query.transform); }});
    k.push_back({"query.grid_height", [](RunConfig& c, const std::string& v) { c.query.grid_height = to_size(v); },
                 [](const RunConfig& c) { return Json(c.query.grid_height); }});
    k.push_back({"query.dictionary", [](RunConfig& c, const std::string& v) { c.query.dictionary = v; },
                 [](const RunConfig& c) { return Json(c.query.dictionary); }});
    k.push_back({"query.method", [](RunConfig& c, const std::string& v) { c.query.method.method = parse_method(v); },
                 [](const RunConfig& c) { return Json(method_name(c.query.method.method)); }});
    k.push_back({"query.ig_steps", [](RunConfig& c, const std::string& v) { c.query.method.ig_steps = to_size(v); },
                 [](const RunConfig& c) { return Json(c.query.method.ig_steps); }});
    k.push_back({"query.shapley_mode",
                 [](RunConfig& c, const std::string& v) { c.query.method.shapley.mode = to_shapley_mode(v); },
                 [](const RunConfig& c) {
                   return Json(c.query.method.shapley.mode == ShapleyConfig::Mode::Exact ? "exact" : "sampled");
                 }});
    k.push_back({"query.shapley_permutations",
                 [](RunConfig& c, const std::string& v) { c.query.method.shapley.permutations = to_size(v); },
                 [](const RunConfig& c) { return Json(c.query.method.shapley.permutations); }});
    k.push_back({"query.mask", [](RunConfig& c, const std::string& v) { c.query.mask = v; },
                 [](const RunConfig& c) { return Json(c.query.mask); }});
    k.push_back({"query.band_width", [](RunConfig& c, const std::string& v) { c.query.band_width = to_size(v); },
                 [](const RunConfig& c) { return Json(c.query.band_width); }});

    k.push_back({"dictionary.atoms", [](RunConfig& c, const std::string& v) { c.dictionary.dictionary.atoms = to_size(v); },
                 [](const RunConfig& c) { return Json(c.dictionary.dictionary.atoms); }});
    k.push_back({"dictionary.lambda_sparse",
                 [](RunConfig& c, const std::string& v) { c.dictionary.dictionary.lambda_sparse = to_double(v); },
                 [](const RunConfig& c) { return Json(c.dictionary.dictionary.lambda_sparse); }});
    k.push_back({"dictionary.lambda_recon",
                 [](RunConfig& c, const std::string& v) { c.dictionary.dictionary.lambda_recon = to_double(v); },
                 [](const RunConfig& c) { return Json(c.dictionary.dictionary.lambda_recon); }});
    k.push_back({"dictionary.lambda_trim",
                 [](RunConfig& c, const std::string& v) { c.dictionary.dictionary.lambda_trim = to_double(v); },
                 [](const RunConfig& c) { return Json(c.dictionary.dictionary.lambda_trim); }});
    k.push_back({"dictionary.steps", [](RunConfig& c, const std::string& v) { c.dictionary.dictionary.steps = to_size(v); },
                 [](const RunConfig& c) { return Json(c.dictionary.dictionary.steps); }});
    k.push_back({"dictionary.learning_rate",
                 [](RunConfig& c, const std::string& v) { c.dictionary.dictionary.learning_rate = to_double(v); },
                 [](const RunConfig& c) { return Json(c.dictionary.dictionary.learning_rate); }});
    k.push_back({"dictionary.init", [](RunConfig& c, const std::string& v) { c.dictionary.dictionary.init = to_init(v); },
                 [](const RunConfig& c) {
                   return Json(c.dictionary.dictionary.init == DictionaryInit::Identity ? "identity" : "random");
                 }});
    k.push_back({"dictionary.data", [](RunConfig& c, const std::string& v) { c.dictionary.data = v; },
                 [](const RunConfig& c) { return Json(c.dictionary.data); }});
    k.push_back({"dictionary.model", [](RunConfig& c, const std::string& v) { c.dictionary.model = v; },
                 [](const RunConfig& c) { return Json(c.dictionary.model); }});
    return k;
  }();
  return table;
}

const Key* find_key(const std::string& path) {
  for (const auto& k : key_table()) {
    if (path == k.path) return &k;
  }
  return nullptr;
}

}  // namespace

std::string format_name(OutputFormat f) {
  switch (f) {
    case OutputFormat::Csv: return "csv";
    case OutputFormat::Json: return "json";
    case OutputFormat::Both: return "both";
  }
  return "both";
}

OutputFormat parse_format(const std::string& s) {
  if (s == "csv") return OutputFormat::Csv;
  if (s == "json") return OutputFormat::Json;
  if (s == "both") return OutputFormat::Both;
  throw std::invalid_argument("expected csv, json or both, got '" + s + "'");
}

void RunConfig::propagate_seed() {
  benchmark.master_seed = seed;
  train.train.seed = seed;
  query.method.shapley.seed = seed;
}

nlohmann::json RunConfig::to_json() const {
  Json j = Json::object();
  for (const auto& k : key_table()) {
    const std::string& path = k.path;
    const auto dot = path.find('.');
    j[path.substr(0, dot)][path.substr(dot + 1)] = k.get(*this);
  }
  return j;
}

RunConfig parse_run_config(const std::string& text, const std::string& origin) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(origin + ": line " + std::to_string(e.line()) + ": " + e.message());
  }
  RunConfig cfg;
  for (const auto& [section, body] : tree) {
    if (!body.data().empty()) throw ConfigError(origin + ": key '" + section + "' must sit inside a [section]");
    if (section != "run" && section != "benchmark" && section != "train" && section != "query" &&
        section != "dictionary") {
      throw ConfigError(origin + ": unknown section '[" + section + "]'");
    }
    for (const auto& [key, node] : body) {
      const std::string path = section + "." + key;
      const Key* k = find_key(path);
      if (!k) throw ConfigError(origin + ": unknown key '" + path + "'");
      try {
        k->set(cfg, unquote(node.data()));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(origin + ": " + path + ": " + e.what());
      }
    }
  }
  cfg.propagate_seed();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path);
}

std::string config_reference() {
  const RunConfig defaults;
  std::ostringstream out;
  std::string current;
  for (const auto& k : key_table()) {
    const std::string& path = k.path;
    const auto dot = path.find('.');
    const std::string section = path.substr(0, dot);
    if (section != current) {
      out << (current.empty() ? "" : "\n") << "[" << section << "]\n";
      current = section;
    }
    out << "  " << path.substr(dot + 1) << " = " << k.get(defaults).dump() << "\n";
  }
  return out.str();
}

}  // namespace trim
