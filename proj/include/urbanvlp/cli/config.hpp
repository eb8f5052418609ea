#pragma once

#include <charconv>
#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <sstream>
#include <string>

#include "urbanvlp/io/encoding.hpp"
#include "urbanvlp/pipeline/model.hpp"
#include "urbanvlp/pipeline/pretrain.hpp"

namespace urbanvlp::cli {

/// Flat key -> value settings. Later sources override earlier ones.
using Settings = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace detail

/// INI-style text: "key = value" lines, '#' or ';' comments, blank lines.
/// Section headers are accepted and ignored (keys are global).
inline Settings parse_settings(std::istream& in, const std::string& source = "config") {
  Settings out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[' && t.back() == ']') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw UsageError(source + " line " + std::to_string(n) + ": expected key = value");
    std::string key = detail::trim(std::string_view(t).substr(0, eq));
    std::string value = detail::trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) throw UsageError(source + " line " + std::to_string(n) + ": empty key");
    out[key] = value;
  }
  return out;
}

inline Settings load_settings(const std::filesystem::path& path) {
  std::istringstream in(io::read_file(path));
  return parse_settings(in, path.string());
}

namespace detail {

inline std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw UsageError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

inline std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw UsageError(key + ": expected an unsigned integer, got '" + v + "'");
  return out;
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used == v.size()) return out;
  } catch (const std::exception&) {
  }
  throw UsageError(key + ": expected a number, got '" + v + "'");
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw UsageError(key + ": expected a boolean, got '" + v + "'");
}

}  // namespace detail

/// Objects a command exposes to settings; null members reject their keys.
struct ConfigTargets {
  GeneratorConfig* generator = nullptr;
  ModelConfig* model = nullptr;
  TrainConfig* train = nullptr;
};

/// Applies every key to its target. Unknown keys and keys whose target the
/// command does not use are usage errors.
inline void apply_settings(const Settings& settings, const ConfigTargets& t) {
  using Setter = std::function<void(const std::string&, const std::string&)>;
  auto gen = [&](auto f) -> Setter {
    return [&t, f](const std::string& k, const std::string& v) {
      if (!t.generator) throw UsageError("setting '" + k + "' does not apply to this command");
      f(*t.generator, k, v);
    };
  };
  auto model = [&](auto f) -> Setter {
    return [&t, f](const std::string& k, const std::string& v) {
      if (!t.model) throw UsageError("setting '" + k + "' does not apply to this command");
      f(*t.model, k, v);
    };
  };
  auto train = [&](auto f) -> Setter {
    return [&t, f](const std::string& k, const std::string& v) {
      if (!t.train) throw UsageError("setting '" + k + "' does not apply to this command");
      f(*t.train, k, v);
    };
  };
  using detail::to_bool, detail::to_double, detail::to_size, detail::to_u64;
  using G = GeneratorConfig;
  using M = ModelConfig;
  using T = TrainConfig;
  const std::map<std::string, Setter> table{
      // data generation
      {"city", gen([](G& g, auto&, auto& v) { g.city = v; })},
      {"regions", gen([](G& g, auto& k, auto& v) { g.regions = to_size(k, v); })},
      {"max_street_views", gen([](G& g, auto& k, auto& v) { g.max_street_views = to_size(k, v); })},
      {"indicators", gen([](G& g, auto& k, auto& v) { g.indicators = to_size(k, v); })},
      {"latent_dim", gen([](G& g, auto& k, auto& v) { g.latent_dim = to_size(k, v); })},
      {"noise", gen([](G& g, auto& k, auto& v) { g.noise = to_double(k, v); })},
      {"street_view_jitter", gen([](G& g, auto& k, auto& v) { g.street_view_jitter = to_double(k, v); })},
      {"satellite_grid", gen([](G& g, auto& k, auto& v) { g.satellite_grid = to_size(k, v); })},
      {"signal_cells", gen([](G& g, auto& k, auto& v) { g.signal_cells = to_size(k, v); })},
      {"nuisance", gen([](G& g, auto& k, auto& v) { g.nuisance = to_double(k, v); })},
      {"caption_bytes", gen([](G& g, auto& k, auto& v) { g.caption_bytes = to_size(k, v); })},
      {"map_seed", gen([](G& g, auto& k, auto& v) { g.map_seed = to_u64(k, v); })},
      {"cell_degrees", gen([](G& g, auto& k, auto& v) { g.cell_degrees = to_double(k, v); })},
      {"image_size",
       [&](const std::string& k, const std::string& v) {
         if (!t.generator && !t.model) throw UsageError("setting '" + k + "' does not apply to this command");
         const std::size_t n = detail::to_size(k, v);
         if (t.generator) t.generator->image_size = n;
         if (t.model) t.model->vision.height = t.model->vision.width = n;
       }},
      // model shape
      {"fusion", model([](M& m, auto&, auto& v) { m.fusion = parse_fusion_mode(v); })},
      {"temperature", model([](M& m, auto& k, auto& v) { m.temperature = to_double(k, v); })},
      {"learn_temperature", model([](M& m, auto& k, auto& v) { m.learn_temperature = to_bool(k, v); })},
      {"dim", model([](M& m, auto& k, auto& v) { m.vision.dim = m.text.dim = m.location.dim = to_size(k, v); })},
      {"layers", model([](M& m, auto& k, auto& v) { m.vision.layers = m.text.layers = to_size(k, v); })},
      {"heads", model([](M& m, auto& k, auto& v) { m.vision.heads = m.text.heads = to_size(k, v); })},
      {"ff_hidden", model([](M& m, auto& k, auto& v) { m.vision.ff_hidden = m.text.ff_hidden = to_size(k, v); })},
      {"patch", model([](M& m, auto& k, auto& v) { m.vision.patch = to_size(k, v); })},
      {"aggregator_hidden", model([](M& m, auto& k, auto& v) { m.aggregator_hidden = to_size(k, v); })},
      {"street_view_slots", model([](M& m, auto& k, auto& v) { m.street_view_slots = to_size(k, v); })},
      // optimization
      {"learning_rate", train([](T& c, auto& k, auto& v) { c.learning_rate = to_double(k, v); })},
      {"batch_size", train([](T& c, auto& k, auto& v) { c.batch_size = to_size(k, v); })},
      {"alpha", train([](T& c, auto& k, auto& v) { c.alpha = to_double(k, v); })},
      {"beta", train([](T& c, auto& k, auto& v) { c.beta = to_double(k, v); })},
      {"pretrain_epochs", train([](T& c, auto& k, auto& v) { c.pretrain_epochs = to_size(k, v); })},
      {"max_steps", train([](T& c, auto& k, auto& v) { c.max_steps = to_size(k, v); })},
      {"probe_epochs", train([](T& c, auto& k, auto& v) { c.probe_epochs = to_size(k, v); })},
      {"probe_patience", train([](T& c, auto& k, auto& v) { c.probe_patience = to_size(k, v); })},
      {"probe_learning_rate", train([](T& c, auto& k, auto& v) { c.probe_learning_rate = to_double(k, v); })},
      {"probe_batch_size", train([](T& c, auto& k, auto& v) { c.probe_batch_size = to_size(k, v); })},
      {"probe_hidden", train([](T& c, auto& k, auto& v) { c.probe_hidden = to_size(k, v); })},
      {"probe_weight_decay", train([](T& c, auto& k, auto& v) { c.probe_weight_decay = to_double(k, v); })},
      {"street_view_cap", train([](T& c, auto& k, auto& v) { c.street_view_cap = to_size(k, v); })},
      {"local_batch_cap", train([](T& c, auto& k, auto& v) { c.local_batch_cap = to_size(k, v); })},
      {"augment", train([](T& c, auto& k, auto& v) { c.augment = to_bool(k, v); })},
  };
  for (const auto& [key, value] : settings) {
    auto it = table.find(key);
    if (it == table.end()) throw UsageError("unknown setting '" + key + "'");
    it->second(key, value);
  }
}

}  // namespace urbanvlp::cli
