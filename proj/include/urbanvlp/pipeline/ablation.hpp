#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "urbanvlp/pipeline/probe.hpp"
#include "urbanvlp/pipeline/reports.hpp"

namespace urbanvlp {

/// One configuration of an ablation sweep. `label` is unique within a sweep
/// and safe to use as a directory name.
struct AblationRun {
  std::string knob;   // "fusion", "loss_weights" or "street_view_cap"
  std::string label;
  ModelConfig model;
  TrainConfig train;
};

namespace detail {
inline std::string short_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}
}  // namespace detail

inline std::vector<AblationRun> fusion_sweep(const ModelConfig& model, const TrainConfig& train,
                                             const std::vector<FusionMode>& modes) {
  std::vector<AblationRun> out;
  for (FusionMode m : modes) {
    AblationRun r{"fusion", "fusion-" + to_string(m), model, train};
    r.model.fusion = m;
    out.push_back(r);
  }
  return out;
}

inline std::vector<AblationRun> loss_weight_sweep(const ModelConfig& model, const TrainConfig& train,
                                                  const std::vector<std::pair<double, double>>& weights) {
  std::vector<AblationRun> out;
  for (auto [a, b] : weights) {
    AblationRun r{"loss_weights", "alpha" + detail::short_number(a) + "-beta" + detail::short_number(b), model, train};
    r.train.alpha = a;
    r.train.beta = b;
    r.train.validate();
    out.push_back(r);
  }
  return out;
}

/// The cap limits street views in both pretraining and feature extraction.
inline std::vector<AblationRun> street_view_cap_sweep(const ModelConfig& model, const TrainConfig& train,
                                                      const std::vector<std::size_t>& caps) {
  std::vector<AblationRun> out;
  for (std::size_t c : caps) {
    AblationRun r{"street_view_cap", "cap-" + std::to_string(c), model, train};
    r.train.street_view_cap = c;
    out.push_back(r);
  }
  return out;
}

struct AblationResult {
  AblationRun run;
  ProbeReport report;
  std::vector<StepLog> losses;
};

/// Pretrains a fresh model on the train split of `data`, then probes it.
inline AblationResult run_ablation(const AblationRun& run, const Dataset& data) {
  UrbanVlpModel model = UrbanVlpModel::init(run.model);
  const Split split = split_dataset(data.regions.size(), data.split_seed);
  Pretrainer trainer(model, data, split.train, run.train);
  trainer.run();
  AblationResult res{run, finetune(model, data.city, data, run.train, run.label), trainer.losses()};
  return res;
}

inline json to_json(const AblationResult& r) {
  json j = to_json(r.report);
  j["ablation"] = {{"knob", r.run.knob},
                   {"label", r.run.label},
                   {"fusion", to_string(r.run.model.fusion)},
                   {"alpha", r.run.train.alpha},
                   {"beta", r.run.train.beta},
                   {"street_view_cap", r.run.train.street_view_cap},
                   {"final_loss", r.losses.empty() ? json(nullptr) : json(r.losses.back().total)}};
  return j;
}

}  // namespace urbanvlp
