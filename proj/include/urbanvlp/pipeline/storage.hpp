#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "urbanvlp/io/encoding.hpp"
#include "urbanvlp/io/png.hpp"
#include "urbanvlp/pipeline/pretrain.hpp"

namespace urbanvlp {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kDatasetManifest = "dataset.json";
inline constexpr const char* kTargetsFile = "targets.csv";

// ---- tensors ---------------------------------------------------------------

/// Shape plus base64 of the raw little-endian doubles, so values round-trip bit-exactly.
inline json tensor_to_json(const Tensor& t) {
  std::vector<std::uint8_t> bytes(t.size() * sizeof(double));
  if (!bytes.empty()) std::memcpy(bytes.data(), t.data().data(), bytes.size());
  return {{"shape", t.shape()}, {"data", io::base64_encode(bytes)}};
}

inline Tensor tensor_from_json(const json& j) {
  Tensor t(j.at("shape").get<Shape>());
  const auto bytes = io::base64_decode(j.at("data").get<std::string>());
  if (bytes.size() != t.size() * sizeof(double)) {
    throw DataError("tensor payload of " + std::to_string(bytes.size()) + " bytes does not match shape " +
                    shape_string(t.shape()));
  }
  if (!bytes.empty()) std::memcpy(t.data().data(), bytes.data(), bytes.size());
  return t;
}

// ---- configs ---------------------------------------------------------------

inline json to_json(const ModelConfig& c) {
  const auto& v = c.vision;
  const auto& t = c.text;
  const auto& l = c.location;
  return {{"vision",
           {{"height", v.height}, {"width", v.width}, {"channels", v.channels}, {"patch", v.patch}, {"dim", v.dim},
            {"layers", v.layers}, {"heads", v.heads}, {"ff_hidden", v.ff_hidden}, {"pixel_mean", v.pixel_mean},
            {"pixel_std", v.pixel_std}}},
          {"text",
           {{"vocab", t.vocab}, {"max_length", t.max_length}, {"dim", t.dim}, {"layers", t.layers}, {"heads", t.heads},
            {"ff_hidden", t.ff_hidden}}},
          {"location",
           {{"frequencies", l.frequencies}, {"hidden", l.hidden}, {"dim", l.dim}, {"scales", l.scales},
            {"seed", l.seed}}},
          {"fusion", to_string(c.fusion)},
          {"aggregator_hidden", c.aggregator_hidden},
          {"street_view_slots", c.street_view_slots},
          {"temperature", c.temperature},
          {"learn_temperature", c.learn_temperature},
          {"seed", c.seed}};
}

inline ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  const auto& v = j.at("vision");
  c.vision.height = v.at("height");
  c.vision.width = v.at("width");
  c.vision.channels = v.at("channels");
  c.vision.patch = v.at("patch");
  c.vision.dim = v.at("dim");
  c.vision.layers = v.at("layers");
  c.vision.heads = v.at("heads");
  c.vision.ff_hidden = v.at("ff_hidden");
  c.vision.pixel_mean = v.at("pixel_mean");
  c.vision.pixel_std = v.at("pixel_std");
  const auto& t = j.at("text");
  c.text.vocab = t.at("vocab");
  c.text.max_length = t.at("max_length");
  c.text.dim = t.at("dim");
  c.text.layers = t.at("layers");
  c.text.heads = t.at("heads");
  c.text.ff_hidden = t.at("ff_hidden");
  const auto& l = j.at("location");
  c.location.frequencies = l.at("frequencies");
  c.location.hidden = l.at("hidden");
  c.location.dim = l.at("dim");
  c.location.scales = l.at("scales").get<std::array<double, 3>>();
  c.location.seed = l.at("seed");
  c.fusion = parse_fusion_mode(j.at("fusion").get<std::string>());
  c.aggregator_hidden = j.at("aggregator_hidden");
  c.street_view_slots = j.at("street_view_slots");
  c.temperature = j.at("temperature");
  c.learn_temperature = j.at("learn_temperature");
  c.seed = j.at("seed");
  return c;
}

inline json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"alpha", c.alpha},
          {"beta", c.beta},
          {"pretrain_epochs", c.pretrain_epochs},
          {"max_steps", c.max_steps},
          {"probe_epochs", c.probe_epochs},
          {"probe_patience", c.probe_patience},
          {"probe_learning_rate", c.probe_learning_rate},
          {"probe_batch_size", c.probe_batch_size},
          {"probe_hidden", c.probe_hidden},
          {"probe_weight_decay", c.probe_weight_decay},
          {"street_view_cap", c.street_view_cap},
          {"local_batch_cap", c.local_batch_cap},
          {"augment", c.augment},
          {"seed", c.seed}};
}

inline TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.learning_rate = j.at("learning_rate");
  c.batch_size = j.at("batch_size");
  c.alpha = j.at("alpha");
  c.beta = j.at("beta");
  c.pretrain_epochs = j.at("pretrain_epochs");
  c.max_steps = j.at("max_steps");
  c.probe_epochs = j.at("probe_epochs");
  c.probe_patience = j.at("probe_patience");
  c.probe_learning_rate = j.at("probe_learning_rate");
  c.probe_batch_size = j.at("probe_batch_size");
  c.probe_hidden = j.at("probe_hidden");
  c.probe_weight_decay = j.at("probe_weight_decay");
  c.street_view_cap = j.at("street_view_cap");
  c.local_batch_cap = j.at("local_batch_cap");
  c.augment = j.at("augment");
  c.seed = j.at("seed");
  return c;
}

// ---- datasets --------------------------------------------------------------

namespace detail {

inline std::string view_stem(std::size_t s) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "sv_%02zu", s);
  return buf;
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace detail

/// Layout: dataset.json (city, split seed, indicators, region list with
/// coordinates), regions/<id>/{satellite,sv_NN}.{png,txt}, and targets.csv
/// with one (region_id, indicator_name, value) row per present value.
inline void save_dataset(const Dataset& ds, const fs::path& dir) {
  fs::create_directories(dir / "regions");
  json manifest{{"city", ds.city}, {"split_seed", ds.split_seed}, {"indicators", json::array()},
                {"regions", json::array()}};
  for (const auto& ind : ds.indicators) manifest["indicators"].push_back({{"name", ind.name}, {"log", ind.log_transform}});
  if (ds.generator) {
    const auto& g = *ds.generator;
    manifest["generator"] = {{"seed", g.seed},           {"map_seed", g.map_seed},
                             {"noise", g.noise},         {"latent_dim", g.latent_dim},
                             {"r2_ceiling", g.r2_ceiling}};
  }
  std::ostringstream targets;
  targets << "region_id,indicator_name,value\n";
  for (const auto& r : ds.regions) {
    const fs::path rdir = dir / "regions" / r.id;
    fs::create_directories(rdir);
    io::write_png(rdir / "satellite.png", r.satellite);
    io::write_file(rdir / "satellite.txt", r.satellite_text);
    json views = json::array();
    for (std::size_t s = 0; s < r.street_views.size(); ++s) {
      const auto& sv = r.street_views[s];
      io::write_png(rdir / (detail::view_stem(s) + ".png"), sv.image);
      io::write_file(rdir / (detail::view_stem(s) + ".txt"), sv.text);
      views.push_back({{"lat", sv.lat}, {"lon", sv.lon}});
    }
    json entry{{"id", r.id}, {"lat", r.lat}, {"lon", r.lon}, {"street_views", views}};
    if (!r.latent.empty()) entry["latent"] = r.latent;
    manifest["regions"].push_back(entry);
    for (std::size_t k = 0; k < ds.indicators.size(); ++k)
      if (r.present[k]) targets << r.id << ',' << ds.indicators[k].name << ',' << detail::format_double(r.targets[k]) << '\n';
  }
  io::write_file(dir / kTargetsFile, targets.str());
  io::write_file(dir / kDatasetManifest, manifest.dump(2) + "\n");
}

inline Dataset load_dataset(const fs::path& dir) {
  const fs::path mpath = dir / kDatasetManifest;
  if (!fs::exists(mpath)) throw DataError("no " + std::string(kDatasetManifest) + " in " + dir.string());
  json m;
  try {
    m = json::parse(io::read_file(mpath));
  } catch (const json::exception& e) {
    throw DataError(mpath.string() + ": " + e.what());
  }
  Dataset ds;
  try {
    ds.city = m.at("city").get<std::string>();
    ds.split_seed = m.at("split_seed").get<std::uint64_t>();
    for (const auto& i : m.at("indicators")) ds.indicators.push_back({i.at("name"), i.at("log")});
    if (m.contains("generator")) {
      const auto& g = m["generator"];
      ds.generator = GeneratorInfo{g.at("seed"), g.at("map_seed"), g.at("noise"), g.at("latent_dim"),
                                   g.at("r2_ceiling").get<std::vector<double>>()};
    }
    for (const auto& e : m.at("regions")) {
      RegionSample r;
      r.id = e.at("id").get<std::string>();
      r.lat = e.at("lat");
      r.lon = e.at("lon");
      validate_coordinates(r.lat, r.lon);
      const fs::path rdir = dir / "regions" / r.id;
      r.satellite = io::read_png(rdir / "satellite.png");
      r.satellite_text = io::read_file(rdir / "satellite.txt");
      const auto& views = e.at("street_views");
      for (std::size_t s = 0; s < views.size(); ++s) {
        StreetView sv;
        sv.lat = views[s].at("lat");
        sv.lon = views[s].at("lon");
        validate_coordinates(sv.lat, sv.lon);
        sv.image = io::read_png(rdir / (detail::view_stem(s) + ".png"));
        sv.text = io::read_file(rdir / (detail::view_stem(s) + ".txt"));
        r.street_views.push_back(std::move(sv));
      }
      if (e.contains("latent")) r.latent = e["latent"].get<std::vector<double>>();
      r.targets.assign(ds.indicators.size(), 0.0);
      r.present.assign(ds.indicators.size(), false);
      ds.regions.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw DataError(mpath.string() + ": " + e.what());
  }

  std::map<std::string, std::size_t> region_index, indicator_index;
  for (std::size_t i = 0; i < ds.regions.size(); ++i) {
    if (!region_index.emplace(ds.regions[i].id, i).second) throw DataError("duplicate region id " + ds.regions[i].id);
  }
  for (std::size_t k = 0; k < ds.indicators.size(); ++k) indicator_index[ds.indicators[k].name] = k;
  std::istringstream in(io::read_file(dir / kTargetsFile));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (++n == 1 || line.empty()) continue;
    const auto c1 = line.find(','), c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) throw DataError("targets.csv line " + std::to_string(n) + ": expected 3 fields");
    const auto r = region_index.find(line.substr(0, c1));
    const auto k = indicator_index.find(line.substr(c1 + 1, c2 - c1 - 1));
    if (r == region_index.end() || k == indicator_index.end()) {
      throw DataError("targets.csv line " + std::to_string(n) + ": unknown region or indicator");
    }
    double v = 0.0;
    try {
      std::size_t used = 0;
      const std::string field = line.substr(c2 + 1);
      v = std::stod(field, &used);
      if (used != field.size()) throw std::invalid_argument(field);
    } catch (const std::exception&) {
      throw DataError("targets.csv line " + std::to_string(n) + ": bad value");
    }
    ds.regions[r->second].targets[k->second] = v;
    ds.regions[r->second].present[k->second] = true;
  }
  return ds;
}

/// Copy of `ds` restricted to the named indicators, in the given order.
inline Dataset select_indicators(const Dataset& ds, const std::vector<std::string>& names) {
  if (names.empty()) return ds;
  std::vector<std::size_t> cols;
  for (const auto& name : names) {
    auto it = std::find_if(ds.indicators.begin(), ds.indicators.end(), [&](const Indicator& i) { return i.name == name; });
    if (it == ds.indicators.end()) throw DataError("dataset has no indicator '" + name + "'");
    cols.push_back(static_cast<std::size_t>(it - ds.indicators.begin()));
  }
  Dataset out = ds;
  out.indicators.clear();
  for (std::size_t k : cols) out.indicators.push_back(ds.indicators[k]);
  if (out.generator) {
    out.generator->r2_ceiling.clear();
    for (std::size_t k : cols) out.generator->r2_ceiling.push_back(ds.generator->r2_ceiling.at(k));
  }
  for (std::size_t i = 0; i < ds.regions.size(); ++i) {
    auto& r = out.regions[i];
    r.targets.clear();
    r.present.clear();
    for (std::size_t k : cols) {
      r.targets.push_back(ds.regions[i].targets[k]);
      r.present.push_back(ds.regions[i].present[k]);
    }
  }
  return out;
}

// ---- checkpoints -----------------------------------------------------------

struct Checkpoint {
  std::string city;
  ModelConfig model_config;
  TrainConfig train_config;
  std::size_t step = 0;
  json parameters;  // name -> tensor
  json optimizer;   // adam steps and moments, empty if not saved
  std::string rng_state;
  std::vector<StepLog> losses;
};

inline json to_json(const StepLog& l) {
  return {l.step, l.epoch, l.total, l.global, l.local, l.temperature};
}

/// Everything needed to continue pretraining bit-identically.
inline json checkpoint_json(UrbanVlpModel& model, const std::string& city, Pretrainer& trainer) {
  json params = json::object();
  model.visit_all([&](const std::string& name, Tensor& t) { params[name] = tensor_to_json(t); });
  json first = json::array(), second = json::array();
  for (const auto& t : trainer.optimizer().first_moments()) first.push_back(tensor_to_json(t));
  for (const auto& t : trainer.optimizer().second_moments()) second.push_back(tensor_to_json(t));
  json losses = json::array();
  for (const auto& l : trainer.losses()) losses.push_back(to_json(l));
  return {{"format", "urbanvlp-checkpoint-1"},
          {"city", city},
          {"model_config", to_json(model.config)},
          {"train_config", to_json(trainer.config())},
          {"step", trainer.step()},
          {"parameters", params},
          {"optimizer", {{"steps", trainer.optimizer().steps()}, {"first", first}, {"second", second}}},
          {"rng_state", trainer.rng().state()},
          {"losses", losses}};
}

inline void save_checkpoint(const fs::path& path, UrbanVlpModel& model, const std::string& city, Pretrainer& trainer) {
  io::write_file(path, checkpoint_json(model, city, trainer).dump() + "\n");
}

inline Checkpoint read_checkpoint(const fs::path& path) {
  Checkpoint c;
  try {
    const json j = json::parse(io::read_file(path));
    if (j.value("format", "") != "urbanvlp-checkpoint-1") throw DataError(path.string() + " is not a checkpoint");
    c.city = j.at("city").get<std::string>();
    c.model_config = model_config_from_json(j.at("model_config"));
    c.train_config = train_config_from_json(j.at("train_config"));
    c.step = j.at("step");
    c.parameters = j.at("parameters");
    c.optimizer = j.value("optimizer", json());
    c.rng_state = j.value("rng_state", "");
    for (const auto& l : j.at("losses"))
      c.losses.push_back({l.at(0), l.at(1), l.at(2), l.at(3), l.at(4), l.at(5)});
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return c;
}

/// Model with the checkpoint's configuration and parameter values.
inline UrbanVlpModel restore_model(const Checkpoint& c) {
  UrbanVlpModel m = UrbanVlpModel::init(c.model_config);
  m.visit_all([&](const std::string& name, Tensor& t) {
    if (!c.parameters.contains(name)) throw DataError("checkpoint lacks parameter " + name);
    Tensor v = tensor_from_json(c.parameters[name]);
    if (v.shape() != t.shape()) {
      throw DataError("checkpoint parameter " + name + " has shape " + shape_string(v.shape()) + ", model expects " +
                      shape_string(t.shape()));
    }
    t = std::move(v);
  });
  return m;
}

/// Puts optimizer moments, RNG state, step counter and loss history back
/// into a trainer built over the restored model.
inline void restore_trainer(const Checkpoint& c, Pretrainer& trainer) {
  if (c.optimizer.is_null()) throw DataError("checkpoint has no optimizer state to resume from");
  auto& adam = trainer.optimizer();
  const auto& first = c.optimizer.at("first");
  const auto& second = c.optimizer.at("second");
  if (first.size() != adam.first_moments().size() || second.size() != adam.second_moments().size()) {
    throw DataError("checkpoint optimizer state does not match the model");
  }
  for (std::size_t i = 0; i < first.size(); ++i) {
    adam.first_moments()[i] = tensor_from_json(first[i]);
    adam.second_moments()[i] = tensor_from_json(second[i]);
  }
  adam.set_steps(c.optimizer.at("steps").get<long long>());
  trainer.rng().set_state(c.rng_state);
  trainer.set_step(c.step);
  trainer.losses() = c.losses;
}

}  // namespace urbanvlp
