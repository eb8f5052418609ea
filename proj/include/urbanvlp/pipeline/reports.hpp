#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "urbanvlp/pipeline/probe.hpp"
#include "urbanvlp/pipeline/storage.hpp"

namespace urbanvlp {

inline json to_json(const Metrics& m) {
  return {{"r2", m.r2 ? json(*m.r2) : json(nullptr)}, {"rmse", m.rmse}, {"mae", m.mae}, {"count", m.count}};
}

inline json to_json(const ProbeReport& r) {
  json inds = json::array();
  for (const auto& i : r.indicators) {
    inds.push_back({{"name", i.name},
                    {"transformed", to_json(i.transformed)},
                    {"raw", to_json(i.raw)},
                    {"r2_ceiling", i.r2_ceiling ? json(*i.r2_ceiling) : json(nullptr)}});
  }
  json j{{"source_city", r.source_city},
         {"target_city", r.target_city},
         {"checkpoint_id", r.checkpoint_id},
         {"split_seed", r.split_seed},
         {"split_counts", {{"train", r.train_count}, {"val", r.val_count}, {"test", r.test_count}}},
         {"self_transfer", r.self_transfer},
         {"metric_spaces",
          {{"transformed", "natural log where flagged, then standardized with train-split statistics"},
           {"raw", "original indicator units (probe output mapped back through the inverse transform)"}}},
         {"indicators", inds},
         {"probe_training",
          {{"best_epoch", r.training.best_epoch},
           {"stopped_early", r.training.stopped_early},
           {"epochs_run", r.training.train_loss.size()}}},
         {"encoder_checksum_before", r.encoder_checksum_before},
         {"encoder_checksum_after", r.encoder_checksum_after}};
  if (!r.warning.empty()) j["warning"] = r.warning;
  return j;
}

namespace detail {
inline std::string r2_cell(const std::optional<double>& r2) { return r2 ? format_double(*r2) : "NA"; }
}  // namespace detail

/// One row per indicator and metric space; an undefined R^2 is written "NA".
inline void write_metrics_csv(std::ostream& out, const ProbeReport& r, const std::string& label = "") {
  out << (label.empty() ? "" : "label,") << "source_city,target_city,indicator,space,r2,rmse,mae,count\n";
  for (const auto& i : r.indicators) {
    for (const auto& [space, m] : {std::pair{"transformed", &i.transformed}, std::pair{"raw", &i.raw}}) {
      if (!label.empty()) out << label << ',';
      out << r.source_city << ',' << r.target_city << ',' << i.name << ',' << space << ','
          << detail::r2_cell(m->r2) << ',' << detail::format_double(m->rmse) << ','
          << detail::format_double(m->mae) << ',' << m->count << '\n';
    }
  }
}

inline void write_losses_csv(std::ostream& out, const std::vector<StepLog>& losses) {
  out << "step,epoch,total,global,local,temperature\n";
  for (const auto& l : losses) {
    out << l.step << ',' << l.epoch << ',' << detail::format_double(l.total) << ','
        << detail::format_double(l.global) << ',' << detail::format_double(l.local) << ','
        << detail::format_double(l.temperature) << '\n';
  }
}

/// Mean transformed-space R^2 over indicators with a defined value.
inline std::optional<double> mean_r2(const ProbeReport& r) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& i : r.indicators)
    if (i.transformed.r2) {
      s += *i.transformed.r2;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return s / static_cast<double>(n);
}

/// Source x target matrix of R^2 values (rows: encoder city, columns: probe city).
struct TransferMatrix {
  std::vector<std::string> sources, targets;
  std::vector<std::string> indicators;
  /// r2[s][t][k]
  std::vector<std::vector<std::vector<std::optional<double>>>> r2;

  std::optional<double> mean(std::size_t s, std::size_t t) const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& v : r2[s][t])
      if (v) {
        sum += *v;
        ++n;
      }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  }

  /// Long format: source,target,indicator,r2 with indicator "mean" rows.
  void write_csv(std::ostream& out) const {
    out << "source,target,indicator,r2\n";
    for (std::size_t s = 0; s < sources.size(); ++s)
      for (std::size_t t = 0; t < targets.size(); ++t) {
        for (std::size_t k = 0; k < r2[s][t].size(); ++k)
          out << sources[s] << ',' << targets[t] << ',' << indicators[k] << ',' << detail::r2_cell(r2[s][t][k]) << '\n';
        out << sources[s] << ',' << targets[t] << ",mean," << detail::r2_cell(mean(s, t)) << '\n';
      }
  }
};

}  // namespace urbanvlp
