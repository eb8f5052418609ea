#pragma once

// Shared by the unit suites and the acceptance binary.

#include <functional>

#include "urbanvlp/numerics/grad_check.hpp"
#include "urbanvlp/pipeline/dataset.hpp"
#include "urbanvlp/pipeline/model.hpp"

namespace urbanvlp::fixtures {

inline Tensor random_tensor(Shape shape, std::uint64_t seed, double stddev = 1.0) {
  Rng rng(seed);
  return rng.normal_tensor(std::move(shape), stddev);
}

/// Scalar probe: sum(out * w) for fixed random w so every output element
/// contributes a distinct weight.
inline Var weighted_sum(Tape& tape, Var out, std::uint64_t seed) {
  return ops::sum(ops::mul(out, tape.constant(random_tensor(out.shape(), seed))));
}

using OpReport = std::function<void(const char* op, const GradCheckReport&)>;

/// Central-difference check of every differentiable op on random small
/// shapes drawn from `seed`.
inline void sweep_op_gradients(std::uint64_t seed, const OpReport& report) {
  Rng shape_rng(derive_seed(seed, "shapes"));
  const std::size_t m = shape_rng.index(1, 4), n = shape_rng.index(2, 5), k = shape_rng.index(1, 4);
  auto check = [&](const char* name, const MultiLoss& f, std::vector<Tensor> xs) {
    report(name, grad_check(f, std::move(xs)));
  };
  auto ws = [&](Tape& t, Var v) { return weighted_sum(t, v, seed + 100); };
  check("matmul", [&](Tape& t, auto& v) { return ws(t, ops::matmul(v[0], v[1])); },
        {random_tensor({m, n}, seed), random_tensor({n, k}, seed + 1)});
  check("transpose", [&](Tape& t, auto& v) { return ws(t, ops::transpose(v[0])); }, {random_tensor({m, n}, seed)});
  check("add", [&](Tape& t, auto& v) { return ws(t, ops::add(v[0], v[1])); },
        {random_tensor({m, n}, seed), random_tensor({m, n}, seed + 2)});
  check("add_row_broadcast", [&](Tape& t, auto& v) { return ws(t, ops::add_row_broadcast(v[0], v[1])); },
        {random_tensor({m, n}, seed), random_tensor({n}, seed + 3)});
  check("scale", [&](Tape& t, auto& v) { return ws(t, ops::scale(v[0], -1.7)); }, {random_tensor({m, n}, seed)});
  check("scale_by", [&](Tape& t, auto& v) { return ws(t, ops::scale_by(v[0], v[1])); },
        {random_tensor({m, n}, seed), random_tensor({}, seed + 4)});
  check("negate", [&](Tape& t, auto& v) { return ws(t, ops::negate(v[0])); }, {random_tensor({m, n}, seed)});
  check("gelu", [&](Tape& t, auto& v) { return ws(t, ops::gelu(v[0])); }, {random_tensor({m, n}, seed)});
  check("exp", [&](Tape& t, auto& v) { return ws(t, ops::exp(v[0])); }, {random_tensor({m, n}, seed, 0.5)});
  {
    Tensor pos = random_tensor({m, n}, seed);
    for (auto& v : pos.data()) v = 0.5 + std::abs(v);
    check("log", [&](Tape& t, auto& v) { return ws(t, ops::log(v[0])); }, {pos});
  }
  check("mean_axis0", [&](Tape& t, auto& v) { return ws(t, ops::mean_axis(v[0], 0)); }, {random_tensor({m, n}, seed)});
  check("mean_axis1", [&](Tape& t, auto& v) { return ws(t, ops::mean_axis(v[0], 1)); }, {random_tensor({m, n}, seed)});
  check("max_axis", [&](Tape& t, auto& v) { return ws(t, ops::max_axis_with_indices(v[0]).values); },
        {random_tensor({m, n}, seed)});
  check("softmax_rows", [&](Tape& t, auto& v) { return ws(t, ops::softmax_rows(v[0])); }, {random_tensor({m, n}, seed)});
  check("log_softmax_rows", [&](Tape& t, auto& v) { return ws(t, ops::log_softmax_rows(v[0])); },
        {random_tensor({m, n}, seed)});
  check("layer_norm", [&](Tape& t, auto& v) { return ws(t, ops::layer_norm(v[0], v[1], v[2])); },
        {random_tensor({m, n}, seed), random_tensor({n}, seed + 5), random_tensor({n}, seed + 6)});
  check("l2_normalize_rows", [&](Tape& t, auto& v) { return ws(t, ops::l2_normalize_rows(v[0])); },
        {random_tensor({m, n}, seed)});
  check("concat_last_axis", [&](Tape& t, auto& v) { return ws(t, ops::concat_last_axis({v[0], v[1]})); },
        {random_tensor({m, n}, seed), random_tensor({m, k}, seed + 7)});
  check("concat_rows", [&](Tape& t, auto& v) { return ws(t, ops::concat_rows({v[0], v[1]})); },
        {random_tensor({n}, seed), random_tensor({m, n}, seed + 8)});
  check("embedding_lookup",
        [&](Tape& t, auto& v) {
          const std::vector<int> ids{0, 2, 0, 1};
          return ws(t, ops::embedding_lookup(v[0], ids));
        },
        {random_tensor({3, n}, seed)});
  check("select_rows", [&](Tape& t, auto& v) { return ws(t, ops::select_rows(v[0], {m - 1, 0})); },
        {random_tensor({m, n}, seed)});
  check("slice_cols", [&](Tape& t, auto& v) { return ws(t, ops::slice_cols(v[0], 1, n - 1)); },
        {random_tensor({m, n}, seed)});
  check("pick", [&](Tape& t, auto& v) {
    std::vector<std::size_t> cols(m);
    for (std::size_t i = 0; i < m; ++i) cols[i] = i % n;
    return ws(t, ops::pick(v[0], cols));
  }, {random_tensor({m, n}, seed)});
  check("masked_mean_rows", [&](Tape& t, auto& v) {
    std::vector<bool> mask(m + 1, true);
    mask[0] = false;
    return ws(t, ops::masked_mean_rows(v[0], mask));
  }, {random_tensor({m + 1, n}, seed)});
  check("stack_scalars", [&](Tape& t, auto& v) {
    return ws(t, ops::stack_scalars({ops::sum(v[0]), ops::mean(v[0]), ops::dot(v[1], v[1]), ops::sum(v[1])}, 2, 2));
  }, {random_tensor({m, n}, seed), random_tensor({k}, seed + 9)});
}

inline ModelConfig toy_model(std::uint64_t seed, FusionMode fusion, bool learn_temperature) {
  ModelConfig mc;
  mc.seed = seed;
  mc.vision.height = mc.vision.width = 8;
  mc.vision.patch = 4;
  mc.vision.dim = mc.text.dim = mc.location.dim = 8;
  mc.vision.layers = mc.text.layers = 1;
  mc.vision.heads = mc.text.heads = 2;
  mc.vision.ff_hidden = mc.text.ff_hidden = 12;
  mc.text.max_length = 12;
  mc.location.frequencies = 4;
  mc.location.hidden = 8;
  mc.aggregator_hidden = 6;
  mc.street_view_slots = 3;
  mc.fusion = fusion;
  mc.learn_temperature = learn_temperature;
  return mc;
}

/// Two regions with two street views each, pixel values in [0, 1].
inline std::vector<RegionSample> toy_regions(std::uint64_t seed) {
  Rng rng(derive_seed(seed, "toy_regions"));
  auto image = [&] {
    Tensor t({8, 8, 3});
    for (auto& v : t.data()) v = rng.uniform(0.0, 1.0);
    return t;
  };
  const char* captions[] = {"road sky", "tree car", "facade 4", "grass 12", "person", "sky 9"};
  std::vector<RegionSample> out(2);
  for (std::size_t i = 0; i < 2; ++i) {
    auto& r = out[i];
    r.id = "t" + std::to_string(i);
    r.lat = 39.9 + 0.01 * static_cast<double>(i);
    r.lon = 116.3;
    r.satellite = image();
    r.satellite_text = captions[3 * i];
    for (std::size_t s = 0; s < 2; ++s) {
      StreetView sv;
      sv.image = image();
      sv.lat = r.lat + rng.uniform(0.0, 0.01);
      sv.lon = r.lon + rng.uniform(0.0, 0.01);
      sv.text = captions[3 * i + 1 + s];
      r.street_views.push_back(std::move(sv));
    }
  }
  return out;
}

/// The full training objective on two toy regions, checked on every
/// trainable parameter. Fusion cycles with the seed; odd seeds also learn
/// the temperature.
inline GradCheckReport objective_gradient_check(std::uint64_t seed, std::size_t* local_pairs = nullptr) {
  const FusionMode modes[] = {FusionMode::kAddition, FusionMode::kConcat, FusionMode::kFeedForward};
  UrbanVlpModel model = UrbanVlpModel::init(toy_model(seed, modes[seed % 3], seed % 2 == 1));
  const auto regions = toy_regions(seed);
  std::vector<const RegionSample*> batch{&regions[0], &regions[1]};
  ObjectiveConfig oc;
  auto objective = [&](Tape& t) {
    Rng rng(0);
    LossTerms terms = batch_objective(t, model, batch, oc, rng);
    if (local_pairs) *local_pairs = terms.local_pairs;
    return terms.total;
  };
  return grad_check_parameters(objective, model.trainable_parameters());
}

/// 16x16 inputs, one narrow layer per encoder. Fast enough for end-to-end runs.
inline ModelConfig small_model(std::uint64_t seed) {
  ModelConfig mc;
  mc.seed = seed;
  mc.vision.height = mc.vision.width = 16;
  mc.vision.patch = 8;
  mc.vision.dim = mc.text.dim = mc.location.dim = 16;
  mc.vision.layers = mc.text.layers = 1;
  mc.vision.heads = mc.text.heads = 2;
  mc.vision.ff_hidden = mc.text.ff_hidden = 24;
  mc.aggregator_hidden = 16;
  mc.street_view_slots = 4;
  return mc;
}

inline GeneratorConfig small_city(std::uint64_t seed, std::size_t regions) {
  GeneratorConfig g;
  g.seed = seed;
  g.regions = regions;
  g.image_size = 16;
  return g;
}

}  // namespace urbanvlp::fixtures
