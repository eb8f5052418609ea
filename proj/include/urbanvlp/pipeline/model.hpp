#pragma once

#include <cstring>
#include <string>
#include <vector>

#include "urbanvlp/alignment/fusion.hpp"
#include "urbanvlp/alignment/losses.hpp"
#include "urbanvlp/encoders/image_encoder.hpp"
#include "urbanvlp/encoders/location_encoder.hpp"
#include "urbanvlp/encoders/text_encoder.hpp"
#include "urbanvlp/pipeline/dataset.hpp"

namespace urbanvlp {

struct ModelConfig {
  VitConfig vision;
  TextConfig text;
  LocationConfig location;
  FusionMode fusion = FusionMode::kAddition;
  std::size_t aggregator_hidden = 64;
  /// Padded street-view slot count m.
  std::size_t street_view_slots = 25;
  double temperature = 0.07;
  bool learn_temperature = false;
  std::uint64_t seed = 0;

  void validate() const {
    vision.validate();
    if (text.dim != vision.dim || location.dim != vision.dim) {
      throw DimensionError("image, text and location embedding widths must match");
    }
    if (street_view_slots < 1) throw UsageError("street_view_slots must be at least 1");
    if (!(temperature > 0.0)) throw UsageError("temperature must be positive");
  }
};

/// Satellite and street-view images share one image encoder.
struct UrbanVlpModel {
  ModelConfig config;
  ImageEncoderParams image;
  TextEncoderParams text;
  LocationEncoderParams location;
  MlpParams aggr_street_view;
  MlpParams aggr_location;
  FusionParams fusion;
  Tensor log_temperature;  // scalar

  static UrbanVlpModel init(const ModelConfig& cfg) {
    cfg.validate();
    UrbanVlpModel m;
    m.config = cfg;
    Rng img_rng(derive_seed(cfg.seed, "image_encoder"));
    m.image = ImageEncoderParams::init(cfg.vision, img_rng);
    Rng txt_rng(derive_seed(cfg.seed, "text_encoder"));
    m.text = TextEncoderParams::init(cfg.text, txt_rng);
    m.location = LocationEncoderParams::init(cfg.location);
    const std::size_t d = cfg.vision.dim;
    Rng agg_rng(derive_seed(cfg.seed, "aggregators"));
    m.aggr_street_view = MlpParams::init(d, cfg.aggregator_hidden, d, agg_rng);
    m.aggr_location = MlpParams::init(d, cfg.aggregator_hidden, d, agg_rng);
    Rng fuse_rng(derive_seed(cfg.seed, "fusion"));
    m.fusion = FusionParams::init(cfg.fusion, d, fuse_rng);
    m.log_temperature = Tensor::scalar(std::log(cfg.temperature));
    return m;
  }

  std::size_t dim() const { return config.vision.dim; }

  /// Trainable parameters, in a fixed order.
  template <class F>
  void visit_trainable(F&& f) {
    image.visit("image", f);
    text.visit("text", f);
    aggr_street_view.visit("aggr_street_view", f);
    aggr_location.visit("aggr_location", f);
    fusion.visit("fusion", f);
    if (config.learn_temperature) f("log_temperature", log_temperature);
  }

  /// Encoder parameters (everything the probe stage must leave untouched).
  template <class F>
  void visit_all(F&& f) {
    visit_trainable(f);
    location.visit("location", f);
    if (!config.learn_temperature) f("log_temperature", log_temperature);
  }

  std::vector<Tensor*> trainable_parameters() {
    std::vector<Tensor*> out;
    visit_trainable([&](const std::string&, Tensor& t) { out.push_back(&t); });
    return out;
  }

  Temperature temperature(Tape& tape) const {
    Temperature t;
    t.fixed = config.temperature;
    if (config.learn_temperature) t.log_tau = tape.parameter(log_temperature);
    return t;
  }
};

/// FNV-1a over the bit patterns of every encoder parameter, as 16 hex digits.
inline std::string parameter_checksum(UrbanVlpModel& model) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ull;
    }
  };
  model.visit_all([&](const std::string& name, Tensor& t) {
    mix(name.data(), name.size());
    mix(t.data().data(), t.size() * sizeof(double));
  });
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Per-region quantities of the forward pass.
struct RegionForward {
  Var satellite;              // z_I_st [d]
  Var street_view_aggregate;  // Aggr(z_I_sv) [d]
  Var location_aggregate;     // Aggr(z_L) [d]
  Var fused;                  // z_g_st [d]
  std::vector<Var> street_view_tokens;  // per used view [N x d]
  std::vector<std::size_t> used_views;  // indices into region.street_views
};

/// Street views beyond `cap` (and beyond the slot count) are ignored. Slots
/// without a view are zero rows with a false mask entry.
inline RegionForward forward_region(Tape& tape, const UrbanVlpModel& model, const RegionSample& region,
                                    std::size_t cap, bool keep_tokens = true) {
  const std::size_t d = model.dim();
  const std::size_t slots = model.config.street_view_slots;
  RegionForward out;
  out.satellite = encode_image(tape, model.image, region.satellite).global;
  const std::size_t used = std::min({cap, slots, region.street_views.size()});
  std::vector<Var> sv_rows, loc_rows;
  std::vector<bool> mask(slots, false);
  for (std::size_t s = 0; s < used; ++s) {
    const auto& view = region.street_views[s];
    Encoded e = encode_image(tape, model.image, view.image);
    sv_rows.push_back(e.global);
    loc_rows.push_back(encode_location(tape, model.location, view.lat, view.lon));
    if (keep_tokens) out.street_view_tokens.push_back(e.tokens);
    out.used_views.push_back(s);
    mask[s] = true;
  }
  if (used < slots) {
    Var pad = tape.constant(Tensor::zeros({slots - used, d}));
    sv_rows.push_back(pad);
    loc_rows.push_back(pad);
  }
  out.street_view_aggregate = aggregate(tape, model.aggr_street_view, ops::concat_rows(sv_rows), mask);
  out.location_aggregate = aggregate(tape, model.aggr_location, ops::concat_rows(loc_rows), mask);
  out.fused = fuse(tape, model.fusion, out.satellite, out.street_view_aggregate, out.location_aggregate);
  return out;
}

inline Encoded encode_caption(Tape& tape, const TextEncoderParams& params, const std::string& text) {
  return encode_text(tape, params, tokenize(text, params.config.max_length));
}

struct LossTerms {
  Var global;  // L_CG
  Var local;   // L_CL (zero constant when fewer than two pairs exist)
  Var total;
  std::size_t local_pairs = 0;
};

struct ObjectiveConfig {
  double alpha = 0.5;
  double beta = 0.5;
  std::size_t street_view_cap = 25;
  std::size_t local_batch_cap = 32;
};

/// Eq. 9 objective over a batch of regions. Street-view/text pairs from all
/// regions form the local batch; when more than `local_batch_cap` exist, a
/// uniform sample without replacement is drawn from `rng`.
inline LossTerms batch_objective(Tape& tape, const UrbanVlpModel& model, const std::vector<const RegionSample*>& batch,
                                 const ObjectiveConfig& cfg, Rng& rng) {
  std::vector<Var> fused, sat_text;
  struct Pair {
    const RegionSample* region;
    std::size_t view;
    Var tokens;
  };
  std::vector<Pair> pairs;
  for (const RegionSample* r : batch) {
    RegionForward f = forward_region(tape, model, *r, cfg.street_view_cap, cfg.beta > 0.0);
    fused.push_back(f.fused);
    sat_text.push_back(encode_caption(tape, model.text, r->satellite_text).global);
    for (std::size_t i = 0; i < f.street_view_tokens.size(); ++i)
      pairs.push_back({r, f.used_views[i], f.street_view_tokens[i]});
  }
  Temperature tau = model.temperature(tape);
  LossTerms out;
  out.global = global_contrastive_loss(ops::l2_normalize_rows(ops::concat_rows(fused)),
                                       ops::l2_normalize_rows(ops::concat_rows(sat_text)), tau);
  if (pairs.size() > cfg.local_batch_cap) {
    for (std::size_t i = 0; i < cfg.local_batch_cap; ++i) std::swap(pairs[i], pairs[rng.index(i, pairs.size() - 1)]);
    pairs.resize(cfg.local_batch_cap);
  }
  if (cfg.beta > 0.0 && pairs.size() >= 2) {
    std::vector<Var> visual, text;
    for (const auto& p : pairs) {
      visual.push_back(ops::l2_normalize_rows(p.tokens));
      text.push_back(ops::l2_normalize_rows(
          encode_caption(tape, model.text, p.region->street_views[p.view].text).tokens));
    }
    out.local = local_contrastive_loss(visual, text, tau);
    out.local_pairs = pairs.size();
  } else {
    out.local = tape.constant(Tensor::scalar(0.0));
  }
  out.total = total_loss(out.global, out.local, cfg.alpha, cfg.beta);
  return out;
}

}  // namespace urbanvlp
