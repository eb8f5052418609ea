#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "urbanvlp/numerics/adam.hpp"
#include "urbanvlp/pipeline/model.hpp"

namespace urbanvlp {

struct TrainConfig {
  double learning_rate = 2e-3;
  std::size_t batch_size = 8;
  double alpha = 0.5;
  double beta = 0.5;
  std::size_t pretrain_epochs = 10;
  /// Hard step limit for pretraining; 0 means epochs decide.
  std::size_t max_steps = 0;
  std::size_t probe_epochs = 100;
  std::size_t probe_patience = 10;
  double probe_learning_rate = 2e-3;
  std::size_t probe_batch_size = 16;
  std::size_t probe_hidden = 32;
  double probe_weight_decay = 0.0;
  std::size_t street_view_cap = 25;
  std::size_t local_batch_cap = 32;
  bool augment = false;
  std::uint64_t seed = 0;
  /// Workers for per-region feature extraction; does not affect results.
  std::size_t threads = 1;

  void validate() const {
    if (!(learning_rate > 0.0) || !(probe_learning_rate > 0.0)) throw UsageError("learning rates must be positive");
    if (batch_size < 2) throw UsageError("pretraining batch size must be at least 2");
    if (probe_batch_size < 1) throw UsageError("probe batch size must be at least 1");
    if (pretrain_epochs < 1 || probe_epochs < 1) throw UsageError("epoch counts must be at least 1");
    if (alpha < 0.0 || beta < 0.0) throw UsageError("loss weights must be non-negative");
  }

  ObjectiveConfig objective() const { return {alpha, beta, street_view_cap, local_batch_cap}; }
};

struct StepLog {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double total = 0.0;
  double global = 0.0;
  double local = 0.0;
  double temperature = 0.0;
};

/// Region batches for one epoch: a seeded shuffle cut into `batch_size`
/// chunks; a trailing chunk of one region is merged into the previous chunk.
inline std::vector<std::vector<std::size_t>> epoch_batches(const std::vector<std::size_t>& regions,
                                                           std::size_t batch_size, std::uint64_t seed,
                                                           std::size_t epoch) {
  std::vector<std::size_t> order = regions;
  Rng rng(derive_seed(seed, "shuffle", epoch));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(0, i - 1)]);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    const std::size_t end = std::min(order.size(), i + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  if (out.size() > 1 && out.back().size() == 1) {
    out[out.size() - 2].push_back(out.back().front());
    out.pop_back();
  }
  return out;
}

namespace detail {

inline RegionSample augmented(const RegionSample& r, Rng& rng) {
  RegionSample out = r;
  out.satellite = random_crop_resize(r.satellite, 0.8, rng);
  if (rng.uniform() < 0.5) out.satellite = horizontal_flip(out.satellite);
  for (auto& sv : out.street_views) sv.image = random_crop_resize(sv.image, 0.8, rng);
  return out;
}

}  // namespace detail

/// Stage-1 optimizer state. Everything needed to resume bit-identically is
/// public so that checkpoints can persist it.
class Pretrainer {
 public:
  Pretrainer(UrbanVlpModel& model, const Dataset& data, std::vector<std::size_t> train, TrainConfig cfg)
      : model_(model), data_(data), train_(std::move(train)), cfg_(cfg),
        adam_(model.trainable_parameters(), AdamConfig{cfg.learning_rate}),
        rng_(derive_seed(cfg.seed, "pretrain")) {
    cfg_.validate();
    if (train_.size() < 2) throw DataError("pretraining needs at least 2 training regions");
    batches_per_epoch_ = epoch_batches(train_, cfg_.batch_size, cfg_.seed, 0).size();
  }

  std::size_t total_steps() const {
    const std::size_t by_epochs = cfg_.pretrain_epochs * batches_per_epoch_;
    return cfg_.max_steps > 0 ? std::min(cfg_.max_steps, by_epochs) : by_epochs;
  }
  std::size_t step() const { return step_; }
  bool done() const { return step_ >= total_steps(); }

  /// One optimizer step. Throws NumericalError naming the step on a
  /// non-finite loss.
  StepLog run_step() {
    const std::size_t epoch = step_ / batches_per_epoch_;
    const auto batches = epoch_batches(train_, cfg_.batch_size, cfg_.seed, epoch);
    const auto& ids = batches[step_ % batches_per_epoch_];
    std::vector<RegionSample> aug;
    std::vector<const RegionSample*> batch;
    if (cfg_.augment) {
      Rng arng(derive_seed(cfg_.seed, "augment", step_));
      for (std::size_t i : ids) aug.push_back(detail::augmented(data_.regions[i], arng));
      for (const auto& r : aug) batch.push_back(&r);
    } else {
      for (std::size_t i : ids) batch.push_back(&data_.regions[i]);
    }
    Tape tape;
    LossTerms loss = batch_objective(tape, model_, batch, cfg_.objective(), rng_);
    StepLog log{step_, epoch, loss.total.value().item(), loss.global.value().item(), loss.local.value().item(),
                model_.temperature(tape).value()};
    if (!std::isfinite(log.total)) {
      throw NumericalError("non-finite pretraining loss at step " + std::to_string(step_));
    }
    tape.backward(loss.total);
    adam_.step(tape);
    ++step_;
    losses_.push_back(log);
    return log;
  }

  /// Runs to completion (or `until` steps); `on_step` sees every log entry.
  void run(std::size_t until = 0, const std::function<void(const StepLog&)>& on_step = {}) {
    const std::size_t stop = until > 0 ? std::min(until, total_steps()) : total_steps();
    while (step_ < stop) {
      StepLog log = run_step();
      if (on_step) on_step(log);
    }
  }

  const std::vector<StepLog>& losses() const { return losses_; }
  std::vector<StepLog>& losses() { return losses_; }
  Adam& optimizer() { return adam_; }
  Rng& rng() { return rng_; }
  void set_step(std::size_t s) { step_ = s; }
  const TrainConfig& config() const { return cfg_; }

 private:
  UrbanVlpModel& model_;
  const Dataset& data_;
  std::vector<std::size_t> train_;
  TrainConfig cfg_;
  Adam adam_;
  Rng rng_;
  std::size_t step_ = 0;
  std::size_t batches_per_epoch_ = 1;
  std::vector<StepLog> losses_;
};

/// Loss of the objective on a fixed region set, without gradients and without
/// local-batch subsampling.
inline LossTerms evaluate_objective(const UrbanVlpModel& model, const Dataset& data,
                                    const std::vector<std::size_t>& regions, const TrainConfig& cfg,
                                    Tape& tape) {
  tape.set_grad_enabled(false);
  std::vector<const RegionSample*> batch;
  for (std::size_t i : regions) batch.push_back(&data.regions[i]);
  ObjectiveConfig oc = cfg.objective();
  oc.local_batch_cap = static_cast<std::size_t>(-1);
  Rng unused(0);
  return batch_objective(tape, model, batch, oc, unused);
}

/// Fraction of regions whose fused embedding ranks its own satellite text
/// first among the texts of `regions` (ties count against).
inline double image_to_text_top1(const UrbanVlpModel& model, const Dataset& data,
                                 const std::vector<std::size_t>& regions, std::size_t street_view_cap) {
  Tape tape;
  tape.set_grad_enabled(false);
  std::vector<Var> img, txt;
  for (std::size_t i : regions) {
    img.push_back(forward_region(tape, model, data.regions[i], street_view_cap, false).fused);
    txt.push_back(encode_caption(tape, model.text, data.regions[i].satellite_text).global);
  }
  const Tensor s = ops::matmul(ops::l2_normalize_rows(ops::concat_rows(img)),
                               ops::transpose(ops::l2_normalize_rows(ops::concat_rows(txt))))
                       .value();
  const std::size_t n = regions.size();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    bool best = true;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && s(i, j) >= s(i, i)) best = false;
    hits += best ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace urbanvlp
