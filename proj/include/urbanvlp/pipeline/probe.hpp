#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "urbanvlp/numerics/adam.hpp"
#include "urbanvlp/numerics/parallel.hpp"
#include "urbanvlp/pipeline/pretrain.hpp"

namespace urbanvlp {

/// Frozen region features for the probe.
struct RegionFeatures {
  Tensor satellite;    // e_st [d]
  Tensor street_view;  // e_sv [d]
  Tensor location;     // e_p [d]

  /// [e_st, e_sv, e_p] as one row.
  std::vector<double> concatenated() const {
    std::vector<double> out(satellite.data());
    out.insert(out.end(), street_view.data().begin(), street_view.data().end());
    out.insert(out.end(), location.data().begin(), location.data().end());
    return out;
  }
};

/// Pre-normalization satellite global and the two masked aggregations, with
/// gradients disabled.
inline RegionFeatures extract_features(const UrbanVlpModel& model, const RegionSample& region,
                                       std::size_t street_view_cap) {
  Tape tape;
  tape.set_grad_enabled(false);
  RegionForward f = forward_region(tape, model, region, street_view_cap, false);
  return {f.satellite.value(), f.street_view_aggregate.value(), f.location_aggregate.value()};
}

inline Tensor fused_embedding(const UrbanVlpModel& model, const RegionSample& region, std::size_t street_view_cap) {
  Tape tape;
  tape.set_grad_enabled(false);
  return forward_region(tape, model, region, street_view_cap, false).fused.value();
}

/// Feature matrix [regions x 3d] in dataset order.
inline Tensor feature_matrix(const UrbanVlpModel& model, const Dataset& data, std::size_t street_view_cap,
                             std::size_t threads = 1) {
  const std::size_t width = 3 * model.dim();
  Tensor out(Shape{data.regions.size(), width});
  parallel_for(data.regions.size(), threads, [&](std::size_t i) {
    const auto row = extract_features(model, data.regions[i], street_view_cap).concatenated();
    std::copy(row.begin(), row.end(), out.data().begin() + static_cast<std::ptrdiff_t>(i * width));
  });
  return out;
}

/// Optional log, then per-indicator standardization fitted on the train split.
struct IndicatorTransform {
  std::vector<bool> log_flags;
  std::vector<double> mean;
  std::vector<double> stddev;

  static double pre(double v, bool log_flag, const std::string& name) {
    if (!log_flag) return v;
    if (!(v > 0.0)) throw DataError("indicator " + name + " has nonpositive value " + std::to_string(v) + " under log");
    return std::log(v);
  }

  static IndicatorTransform fit(const Dataset& data, const std::vector<std::size_t>& train) {
    IndicatorTransform t;
    for (std::size_t k = 0; k < data.indicator_count(); ++k) {
      const auto& ind = data.indicators[k];
      t.log_flags.push_back(ind.log_transform);
      double sum = 0.0, sq = 0.0;
      std::size_t n = 0;
      for (std::size_t i : train) {
        if (!data.regions[i].present[k]) continue;
        const double v = pre(data.regions[i].targets[k], ind.log_transform, ind.name);
        sum += v;
        sq += v * v;
        ++n;
      }
      if (n == 0) throw DataError("indicator " + ind.name + " has no training values");
      const double mu = sum / static_cast<double>(n);
      const double var = std::max(0.0, sq / static_cast<double>(n) - mu * mu);
      t.mean.push_back(mu);
      t.stddev.push_back(var > 0.0 ? std::sqrt(var) : 1.0);
    }
    return t;
  }

  double forward(std::size_t k, double raw) const {
    return (pre(raw, log_flags[k], "#" + std::to_string(k)) - mean[k]) / stddev[k];
  }
  double inverse(std::size_t k, double z) const {
    const double v = z * stddev[k] + mean[k];
    return log_flags[k] ? std::exp(v) : v;
  }
};

/// Transformed targets and presence mask for a fixed region list.
struct TargetTable {
  std::vector<std::size_t> regions;
  Tensor values;  // [n x K]
  Tensor mask;    // [n x K], 1 where present
};

inline TargetTable target_table(const Dataset& data, const std::vector<std::size_t>& regions,
                                const IndicatorTransform& t) {
  const std::size_t kk = data.indicator_count();
  TargetTable out{regions, Tensor(Shape{std::max<std::size_t>(1, regions.size()), kk}),
                  Tensor(Shape{std::max<std::size_t>(1, regions.size()), kk})};
  for (std::size_t r = 0; r < regions.size(); ++r)
    for (std::size_t k = 0; k < kk; ++k)
      if (data.regions[regions[r]].present[k]) {
        out.values(r, k) = t.forward(k, data.regions[regions[r]].targets[k]);
        out.mask(r, k) = 1.0;
      }
  return out;
}

/// y = x W_lin + b + gelu(x W_in + b_in) W_out, on standardized features.
/// The linear path and the output layer start at zero.
struct ProbeParams {
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;
  Tensor linear_weight, linear_bias;
  Tensor hidden_weight, hidden_bias;
  Tensor out_weight;

  static ProbeParams init(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng) {
    ProbeParams p;
    p.feature_mean.assign(in, 0.0);
    p.feature_scale.assign(in, 1.0);
    p.linear_weight = Tensor::zeros({in, out});
    p.linear_bias = Tensor::zeros({out});
    p.hidden_weight = rng.normal_tensor({in, hidden}, 1.0 / std::sqrt(static_cast<double>(in)));
    p.hidden_bias = Tensor::zeros({hidden});
    p.out_weight = Tensor::zeros({hidden, out});
    return p;
  }

  std::vector<Tensor*> parameters() {
    return {&linear_weight, &linear_bias, &hidden_weight, &hidden_bias, &out_weight};
  }

  Tensor standardize(const Tensor& x) const {
    Tensor out = x;
    const std::size_t n = x.rows(), d = x.cols();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) out[i * d + j] = (x[i * d + j] - feature_mean[j]) / feature_scale[j];
    return out;
  }
};

inline Var probe_forward(Tape& tape, const ProbeParams& p, Var x_std) {
  Var lin = ops::add_row_broadcast(ops::matmul(x_std, tape.parameter(p.linear_weight)), tape.parameter(p.linear_bias));
  Var hid = ops::gelu(
      ops::add_row_broadcast(ops::matmul(x_std, tape.parameter(p.hidden_weight)), tape.parameter(p.hidden_bias)));
  return ops::add(lin, ops::matmul(hid, tape.parameter(p.out_weight)));
}

inline Tensor probe_predict(const ProbeParams& p, const Tensor& features) {
  Tape tape;
  tape.set_grad_enabled(false);
  return probe_forward(tape, p, tape.constant(p.standardize(features))).value();
}

/// Mean squared error over present entries.
inline Var masked_mse(Tape& tape, Var pred, const Tensor& target, const Tensor& mask) {
  double count = 0.0;
  for (double m : mask.data()) count += m;
  if (count == 0.0) throw DataError("no target values present");
  Var diff = ops::mul(ops::sub(pred, tape.constant(target)), tape.constant(mask));
  return ops::scale(ops::sum(ops::mul(diff, diff)), 1.0 / count);
}

inline double masked_mse_value(const Tensor& pred, const Tensor& target, const Tensor& mask) {
  double s = 0.0, n = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = (pred[i] - target[i]) * mask[i];
    s += d * d;
    n += mask[i];
  }
  if (n == 0.0) throw DataError("no target values present");
  return s / n;
}

struct ProbeTrainLog {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

inline Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& rows) {
  const std::size_t d = x.cols();
  Tensor out(Shape{std::max<std::size_t>(1, rows.size()), d});
  for (std::size_t r = 0; r < rows.size(); ++r)
    std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(rows[r] * d), d,
                out.data().begin() + static_cast<std::ptrdiff_t>(r * d));
  return out;
}

/// Adam on masked MSE for up to `probe_epochs` epochs; stops after
/// `probe_patience` epochs without validation improvement and restores the
/// best parameters.
inline ProbeParams train_probe(const Tensor& train_x, const TargetTable& train_y, const Tensor& val_x,
                               const TargetTable& val_y, const TrainConfig& cfg, ProbeTrainLog* log = nullptr) {
  if (train_y.regions.empty()) throw DataError("probe training split is empty");
  if (val_y.regions.empty()) throw DataError("probe validation split is empty");
  const std::size_t n = train_y.regions.size(), d = train_x.cols(), k = train_y.values.cols();
  Rng rng(derive_seed(cfg.seed, "probe"));
  ProbeParams p = ProbeParams::init(d, cfg.probe_hidden, k, rng);
  for (std::size_t j = 0; j < d; ++j) {
    double s = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s += train_x(i, j);
      sq += train_x(i, j) * train_x(i, j);
    }
    const double mu = s / static_cast<double>(n);
    const double var = sq / static_cast<double>(n) - mu * mu;
    p.feature_mean[j] = mu;
    p.feature_scale[j] = var > 1e-12 ? std::sqrt(var) : 1.0;
  }
  const Tensor xs = p.standardize(train_x);
  const Tensor vx = p.standardize(val_x);
  Adam adam(p.parameters(), AdamConfig{cfg.probe_learning_rate});
  ProbeParams best = p;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  ProbeTrainLog local_log;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < cfg.probe_epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.index(0, i - 1)]);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < n; b += cfg.probe_batch_size) {
      std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(b),
                                    order.begin() + static_cast<std::ptrdiff_t>(std::min(n, b + cfg.probe_batch_size)));
      const Tensor by = gather_rows(train_y.values, rows), bm = gather_rows(train_y.mask, rows);
      double present = 0.0;
      for (double m : bm.data()) present += m;
      if (present == 0.0) continue;
      Tape tape;
      Var loss = masked_mse(tape, probe_forward(tape, p, tape.constant(gather_rows(xs, rows))), by, bm);
      if (cfg.probe_weight_decay > 0.0) {
        Var reg = ops::add(ops::dot(tape.parameter(p.linear_weight), tape.parameter(p.linear_weight)),
                           ops::dot(tape.parameter(p.out_weight), tape.parameter(p.out_weight)));
        loss = ops::add(loss, ops::scale(reg, cfg.probe_weight_decay));
      }
      if (!std::isfinite(loss.value().item())) {
        throw NumericalError("non-finite probe loss in epoch " + std::to_string(epoch));
      }
      epoch_loss += loss.value().item() * static_cast<double>(rows.size());
      tape.backward(loss);
      adam.step(tape);
    }
    Tape vt;
    vt.set_grad_enabled(false);
    const double val = masked_mse_value(probe_forward(vt, p, vt.constant(vx)).value(), val_y.values, val_y.mask);
    local_log.train_loss.push_back(epoch_loss / static_cast<double>(n));
    local_log.val_loss.push_back(val);
    if (val < best_val) {
      best_val = val;
      best = p;
      local_log.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.probe_patience) {
      local_log.stopped_early = true;
      break;
    }
  }
  if (log) *log = std::move(local_log);
  return best;
}

struct Metrics {
  std::optional<double> r2;  // absent when the targets have zero variance
  double rmse = 0.0;
  double mae = 0.0;
  std::size_t count = 0;
};

inline Metrics evaluate(const std::vector<double>& predictions, const std::vector<double>& targets) {
  if (predictions.size() != targets.size()) throw DimensionError("evaluate: prediction and target counts differ");
  if (targets.size() < 2) throw DataError("evaluate needs at least 2 values");
  const auto n = static_cast<double>(targets.size());
  double mean = 0.0;
  for (double y : targets) mean += y;
  mean /= n;
  double ss_res = 0.0, ss_tot = 0.0, abs_sum = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double e = targets[i] - predictions[i];
    ss_res += e * e;
    abs_sum += std::abs(e);
    ss_tot += (targets[i] - mean) * (targets[i] - mean);
  }
  Metrics m;
  m.count = targets.size();
  if (ss_tot > 0.0) m.r2 = 1.0 - ss_res / ss_tot;
  m.rmse = std::sqrt(ss_res / n);
  m.mae = abs_sum / n;
  return m;
}

struct IndicatorReport {
  std::string name;
  Metrics transformed;  // log (where flagged) + standardized
  Metrics raw;
  std::optional<double> r2_ceiling;
};

struct ProbeReport {
  std::string source_city;
  std::string target_city;
  std::string checkpoint_id;
  std::uint64_t split_seed = 0;
  std::size_t train_count = 0, val_count = 0, test_count = 0;
  bool self_transfer = true;
  std::string warning;
  std::vector<IndicatorReport> indicators;
  ProbeTrainLog training;
  std::string encoder_checksum_before, encoder_checksum_after;
};

/// Stage 2 on `target` with the frozen encoders of `model`.
inline ProbeReport finetune(UrbanVlpModel& model, const std::string& source_city, const Dataset& target,
                            const TrainConfig& cfg, const std::string& checkpoint_id = "") {
  ProbeReport rep;
  rep.source_city = source_city;
  rep.target_city = target.city;
  rep.checkpoint_id = checkpoint_id;
  rep.split_seed = target.split_seed;
  rep.self_transfer = source_city == target.city;
  rep.encoder_checksum_before = parameter_checksum(model);

  const Split split = split_dataset(target.regions.size(), target.split_seed);
  rep.train_count = split.train.size();
  rep.val_count = split.val.size();
  rep.test_count = split.test.size();
  const Tensor features = feature_matrix(model, target, cfg.street_view_cap, cfg.threads);
  const IndicatorTransform transform = IndicatorTransform::fit(target, split.train);
  const TargetTable ty = target_table(target, split.train, transform);
  const TargetTable vy = target_table(target, split.val, transform);
  const TargetTable sy = target_table(target, split.test, transform);
  ProbeParams probe =
      train_probe(gather_rows(features, split.train), ty, gather_rows(features, split.val), vy, cfg, &rep.training);
  const Tensor pred = probe_predict(probe, gather_rows(features, split.test));

  for (std::size_t k = 0; k < target.indicator_count(); ++k) {
    std::vector<double> p_t, y_t, p_r, y_r;
    for (std::size_t r = 0; r < split.test.size(); ++r) {
      if (sy.mask(r, k) == 0.0) continue;
      p_t.push_back(pred(r, k));
      y_t.push_back(sy.values(r, k));
      p_r.push_back(transform.inverse(k, pred(r, k)));
      y_r.push_back(target.regions[split.test[r]].targets[k]);
    }
    IndicatorReport ir;
    ir.name = target.indicators[k].name;
    ir.transformed = evaluate(p_t, y_t);
    ir.raw = evaluate(p_r, y_r);
    if (target.generator) ir.r2_ceiling = target.generator->r2_ceiling.at(k);
    rep.indicators.push_back(ir);
  }
  rep.encoder_checksum_after = parameter_checksum(model);
  return rep;
}

/// Source encoders frozen, probe trained and tested on the target city.
/// Self-transfer is allowed and flagged.
inline ProbeReport transfer_evaluate(UrbanVlpModel& source, const std::string& source_city, const Dataset& target,
                                     const TrainConfig& cfg, const std::string& checkpoint_id = "") {
  ProbeReport rep = finetune(source, source_city, target, cfg, checkpoint_id);
  if (rep.self_transfer) rep.warning = "source and target city labels are both '" + target.city + "'";
  return rep;
}

}  // namespace urbanvlp
