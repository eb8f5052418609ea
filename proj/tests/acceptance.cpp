// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only if
// every criterion passes. `acceptance 2 7` runs a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "urbanvlp/cli/commands.hpp"
#include "fixtures.hpp"

using namespace urbanvlp;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

/// Accumulates failures; the first few are kept for the report line.
class Verdict {
 public:
  void require(bool ok, const std::string& what) {
    if (ok) return;
    if (failures_++ < 3) notes_ += (notes_.empty() ? "" : "; ") + what;
  }
  Outcome done(const std::string& summary) const {
    if (failures_ == 0) return {true, summary};
    return {false, std::to_string(failures_) + " failure(s): " + notes_ + " | " + summary};
  }

 private:
  std::size_t failures_ = 0;
  std::string notes_;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Tensor unit_rows(std::size_t m, std::size_t d, Rng& rng) {
  Tensor x = rng.normal_tensor({m, d}, 1.0);
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += x(i, j) * x(i, j);
    for (std::size_t j = 0; j < d; ++j) x(i, j) /= std::sqrt(s);
  }
  return x;
}

Tensor row_block(const Tensor& x, std::size_t i) {
  const std::size_t d = x.cols();
  return Tensor(Shape{1, d}, std::vector<double>(x.data().begin() + static_cast<std::ptrdiff_t>(i * d),
                                                 x.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * d)));
}

// ---- 1 ----------------------------------------------------------------------

Outcome gradient_suite() {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t checks = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    fixtures::sweep_op_gradients(seed, [&](const char* op, const GradCheckReport& r) {
      ++checks;
      worst = std::max(worst, r.max_rel_error);
      v.require(r.passed, std::string(op) + " seed " + std::to_string(seed));
    });
    std::size_t pairs = 0;
    const GradCheckReport r = fixtures::objective_gradient_check(seed, &pairs);
    ++checks;
    worst = std::max(worst, r.max_rel_error);
    v.require(r.passed, "objective seed " + std::to_string(seed));
    v.require(pairs == 4, "objective seed " + std::to_string(seed) + " did not exercise the local loss");
  }
  const double secs = seconds_since(t0);
  v.require(secs < 120.0, "took " + fmt("%.1f s", secs));
  return v.done(std::to_string(checks) + " checks over 20 seeds, max rel err " + fmt("%.2e", worst) + ", " +
                fmt("%.1f s", secs));
}

// ---- 2 ----------------------------------------------------------------------

Outcome loss_oracles() {
  Verdict v;
  double worst_uniform = 0.0;
  for (std::size_t n : {2u, 4u, 8u}) {
    Rng rng(n);
    const Tensor a = unit_rows(1, 5, rng), b = unit_rows(1, 5, rng);
    Tensor img({n, 5}), txt({n, 5});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < 5; ++j) {
        img(i, j) = a(0, j);
        txt(i, j) = b(0, j);
      }
    for (double tau : {1.0, 0.07}) {
      Tape t;
      const double l = global_contrastive_loss(t.constant(img), t.constant(txt), {tau, std::nullopt}).value().item();
      const double err = std::abs(l - std::log(static_cast<double>(n)));
      worst_uniform = std::max(worst_uniform, err);
      v.require(err <= 1e-12, "uniform N=" + std::to_string(n));
    }
  }
  Tape t;
  Var eye = t.constant(Tensor::matrix({{1, 0}, {0, 1}}));
  const double identity = global_contrastive_loss(eye, eye, {1.0, std::nullopt}).value().item();
  v.require(std::abs(identity - 0.31326) <= 1e-4, "identity case " + fmt("%.6f", identity));

  double worst_single = 0.0;
  Rng rng(6);
  for (std::size_t b : {2u, 3u, 5u}) {
    const Tensor img = unit_rows(b, 4, rng), txt = unit_rows(b, 4, rng);
    Tape tt;
    std::vector<Var> vis, tex;
    for (std::size_t i = 0; i < b; ++i) {
      vis.push_back(tt.constant(row_block(img, i)));
      tex.push_back(tt.constant(row_block(txt, i)));
    }
    const Temperature tau{0.07, std::nullopt};
    const double local = local_contrastive_loss(vis, tex, tau).value().item();
    const double global = global_contrastive_loss(tt.constant(img), tt.constant(txt), tau).value().item();
    worst_single = std::max(worst_single, std::abs(local - global));
    v.require(std::abs(local - global) <= 1e-12, "singleton B=" + std::to_string(b));
  }
  return v.done("uniform err " + fmt("%.1e", worst_uniform) + ", identity " + fmt("%.5f", identity) +
                ", singleton err " + fmt("%.1e", worst_single));
}

// ---- 3 ----------------------------------------------------------------------

Outcome sim_oracle() {
  Verdict v;
  Rng rng(2024);
  for (int inst = 0; inst < 50; ++inst) {
    const std::size_t l1 = rng.index(1, 6), l2 = rng.index(1, 6), d = rng.index(2, 8);
    const Tensor a = unit_rows(l1, d, rng), b = unit_rows(l2, d, rng);
    auto dot = [&](std::size_t i, std::size_t j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += a(i, k) * b(j, k);
      return s;
    };
    double v2t = 0.0, t2v = 0.0;
    for (std::size_t i = 0; i < l1; ++i) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < l2; ++j) best = std::max(best, dot(i, j));
      v2t += best;
    }
    for (std::size_t j = 0; j < l2; ++j) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < l1; ++i) best = std::max(best, dot(i, j));
      t2v += best;
    }
    v2t *= 1.0 / static_cast<double>(l1);
    t2v *= 1.0 / static_cast<double>(l2);
    Tape t;
    const auto sim = token_similarity(t.constant(a), t.constant(b));
    v.require(sim.v2t.value().item() == v2t && sim.t2v.value().item() == t2v, "instance " + std::to_string(inst));
  }
  return v.done("50 instances, exact equality");
}

// ---- 4 ----------------------------------------------------------------------

CaptionRecord with_score(double p) {
  CaptionRecord r;
  r.image_id = "img";
  r.perception_score = p;
  return r;
}

Outcome calibration() {
  Verdict v;
  SegmentationRatio a, b, c, d;
  a[0] = 1.0;
  b[1] = 1.0;
  c[category::kRoad] = 0.3;
  c[category::kSky] = 0.25;
  d[category::kRoad] = 0.25;
  d[category::kSky] = 0.3;
  v.require(std::abs(cycle_score(a, b) - 11.0 / 13.0) <= 1e-10, "cycle 11/13");
  v.require(std::abs(cycle_score(c, d) - (1.0 - 0.1 / 13.0)) <= 1e-10, "cycle 0.99231");

  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const double x = rng.uniform(), y = rng.uniform();
    v.require(perception_score(x, y) == (x + y) / 2.0, "perception mean");
  }
  const auto split = calibrate_dataset({with_score(0.59), with_score(0.6), with_score(0.61)}, 0.6);
  v.require(split.dropped.size() == 1 && split.dropped[0].perception_score == 0.59 && split.kept.size() == 2,
            "threshold 0.6 boundary");
  std::vector<CaptionRecord> many;
  for (int i = 0; i < 300; ++i) many.push_back(with_score(rng.uniform()));
  const auto once = calibrate_dataset(many, 0.6);
  const auto twice = calibrate_dataset(once.kept, 0.6);
  v.require(twice.dropped.empty() && twice.kept.size() == once.kept.size(), "idempotence");

  GeneratorConfig g;
  g.seed = 5;
  g.regions = 500;
  const Dataset ds = generate_synthetic_city(g);
  const UrbanVlpModel model = UrbanVlpModel::init(ModelConfig{});
  auto run = [&] {
    ModelAdapters ad = mock_adapters(7, 32, 32, 30);
    const ClipEncoders enc{&model.image, &model.text, 1.0};
    std::vector<CaptionRecord> recs;
    for (const auto& r : ds.regions)
      for (std::size_t s = 0; s < r.street_views.size() && recs.size() < 1000; ++s) {
        const auto& sv = r.street_views[s];
        recs.push_back(caption_and_score(r.id + "/" + std::to_string(s), sv.image, ds.city, sv.lat, sv.lon, ad, enc));
      }
    const CalibrationResult res = calibrate_dataset(recs);
    std::ostringstream os;
    write_records_jsonl(os, res.kept);
    write_records_jsonl(os, res.dropped);
    write_records_jsonl(os, res.errors);
    return std::make_pair(recs.size(), os.str());
  };
  const auto t0 = std::chrono::steady_clock::now();
  const auto first = run();
  const double secs = seconds_since(t0);
  const auto second = run();
  v.require(first.first == 1000, "only " + std::to_string(first.first) + " records");
  v.require(first.second == second.second, "mock calibration not deterministic");
  v.require(secs < 30.0, "1000 records took " + fmt("%.1f s", secs));
  return v.done("hand cases exact, 1000 mock records in " + fmt("%.1f s", secs) + ", rerun identical");
}

// ---- 5 ----------------------------------------------------------------------

Outcome overfit_and_retrieve() {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  GeneratorConfig g;
  g.regions = 10;  // the generator minimum; training uses 8 of them
  g.max_street_views = 3;
  const Dataset ds = generate_synthetic_city(g);
  UrbanVlpModel model = UrbanVlpModel::init(ModelConfig{});
  TrainConfig tc;
  tc.batch_size = 8;
  tc.pretrain_epochs = 200;
  tc.max_steps = 200;
  const std::vector<std::size_t> ids{0, 1, 2, 3, 4, 5, 6, 7};
  Pretrainer p(model, ds, ids, tc);
  p.run();
  Tape t;
  const double loss = evaluate_objective(model, ds, ids, tc, t).total.value().item();
  const double top1 = image_to_text_top1(model, ds, ids, tc.street_view_cap);
  const double secs = seconds_since(t0);
  v.require(p.step() <= 200, "too many steps");
  v.require(loss < 0.1, "loss " + fmt("%.4f", loss));
  v.require(top1 == 1.0, "top-1 " + fmt("%.3f", top1));
  v.require(secs < 300.0, "took " + fmt("%.1f s", secs));
  return v.done(std::to_string(p.step()) + " steps, loss " + fmt("%.4f", loss) + ", top-1 " +
                std::to_string(static_cast<int>(std::lround(top1 * 8))) + "/8, " + fmt("%.1f s", secs));
}

// ---- 6 ----------------------------------------------------------------------

Outcome planted_probe_recovery() {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  GeneratorConfig g;
  g.regions = 600;
  const Dataset clean = generate_synthetic_city(g);
  g.noise = 0.3;
  const Dataset noisy = generate_synthetic_city(g);
  UrbanVlpModel model = UrbanVlpModel::init(ModelConfig{});
  TrainConfig tc;
  tc.pretrain_epochs = 2;
  Pretrainer(model, clean, split_dataset(clean.regions.size(), clean.split_seed).train, tc).run();

  std::string summary;
  const ProbeReport c = finetune(model, clean.city, clean, tc);
  double worst_clean = 1.0;
  for (const auto& i : c.indicators) {
    worst_clean = std::min(worst_clean, i.transformed.r2.value_or(-1.0));
    v.require(i.transformed.r2 && *i.transformed.r2 > 0.9, i.name + " noiseless R2 " + fmt("%.3f", *i.transformed.r2));
  }
  const ProbeReport n = finetune(model, noisy.city, noisy, tc);
  double worst_gap = 0.0;
  for (const auto& i : n.indicators) {
    const double gap = std::abs(i.transformed.r2.value_or(-1.0) - *i.r2_ceiling);
    worst_gap = std::max(worst_gap, gap);
    v.require(gap <= 0.1, i.name + " noisy R2 " + fmt("%.3f", *i.transformed.r2) + " vs ceiling " +
                              fmt("%.3f", *i.r2_ceiling));
  }
  const double secs = seconds_since(t0);
  v.require(secs < 300.0, "took " + fmt("%.1f s", secs));
  return v.done("noiseless min R2 " + fmt("%.3f", worst_clean) + ", noisy max |R2 - ceiling| " +
                fmt("%.3f", worst_gap) + " (ceiling " + fmt("%.3f", *n.indicators[0].r2_ceiling) + "), " +
                fmt("%.1f s", secs));
}

// ---- 7 ----------------------------------------------------------------------

Outcome metric_identities() {
  Verdict v;
  const Metrics m = evaluate({1, 2, 4}, {1, 2, 3});
  v.require(m.r2 && std::abs(*m.r2 - 0.5) <= 1e-6, "R2");
  v.require(std::abs(m.rmse - 0.5774) <= 1e-4 && std::abs(m.rmse - 1.0 / std::sqrt(3.0)) <= 1e-6, "RMSE");
  v.require(std::abs(m.mae - 1.0 / 3.0) <= 1e-6, "MAE");
  Rng rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = rng.index(2, 40);
    std::vector<double> y(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = rng.normal();
      p[i] = rng.normal();
    }
    const Metrics r = evaluate(p, y);
    v.require(r.mae <= r.rmse, "MAE > RMSE on trial " + std::to_string(trial));
  }
  return v.done("hand case R2 " + fmt("%.6f", *m.r2) + " RMSE " + fmt("%.6f", m.rmse) + " MAE " + fmt("%.6f", m.mae) +
                "; MAE <= RMSE on 1000 vectors");
}

// ---- 8 ----------------------------------------------------------------------

Outcome structural_invariants() {
  Verdict v;
  // Aggregation: permutation and masked padding.
  {
    Rng rng(17);
    const MlpParams params = MlpParams::init(4, 6, 4, rng);
    const Tensor slots = rng.normal_tensor({3, 4}, 1.0);
    auto run = [&](const Tensor& x, const std::vector<bool>& mask) {
      Tape t;
      t.set_grad_enabled(false);
      return aggregate(t, params, t.constant(x), mask).value();
    };
    const Tensor base = run(slots, {true, true, true});
    Tensor perm({3, 4}), padded(Shape{5, 4}, 9.0);
    const std::size_t order[] = {2, 0, 1};
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 4; ++j) {
        perm(i, j) = slots(order[i], j);
        padded(i, j) = slots(i, j);
      }
    v.require(run(perm, {true, true, true}).data() == base.data(), "aggregation permutation");
    v.require(run(padded, {true, true, true, false, false}).data() == base.data(), "aggregation padding");
  }
  // Frozen location encoder.
  {
    UrbanVlpModel model = UrbanVlpModel::init(fixtures::toy_model(3, FusionMode::kAddition, false));
    const auto regions = fixtures::toy_regions(3);
    std::vector<const RegionSample*> batch{&regions[0], &regions[1]};
    Tape t;
    Rng rng(0);
    t.backward(batch_objective(t, model, batch, ObjectiveConfig{}, rng).total);
    double total = 0.0;
    model.location.visit("location", [&](const std::string&, Tensor& p) {
      const Tensor g = t.grad(p);
      for (double x : g.data()) total += std::abs(x);
    });
    v.require(total == 0.0, "location gradient " + fmt("%.3e", total));
  }
  // Probe stage and end-to-end determinism through the command layer.
  using namespace urbanvlp::cli;
  const fs::path root = fs::temp_directory_path() / "urbanvlp_acceptance_c8";
  cli::Settings model_settings{{"image_size", "16"}, {"dim", "16"},  {"layers", "1"},
                               {"heads", "2"},       {"patch", "8"}, {"street_view_slots", "4"}};
  std::vector<json> outputs[2];
  std::string checksums;
  for (int run = 0; run < 2; ++run) {
    const fs::path base = root / std::to_string(run);
    fs::remove_all(base);
    auto opts = [&](const std::string& name, cli::Settings s) {
      CommonOptions o;
      o.out = base / name;
      o.seed = 11;
      o.quiet = true;
      o.threads = run == 0 ? 1 : 2;
      o.overrides = std::move(s);
      return o;
    };
    gen_data(opts("data", {{"regions", "30"}, {"image_size", "16"}}));
    cli::Settings pre = model_settings;
    pre["max_steps"] = "4";
    pretrain(opts("pretrain", pre), {base / "data", {}, 0});
    const ProbeReport rep = finetune(opts("finetune", {{"probe_epochs", "10"}}),
                                     {base / "data", base / "pretrain" / kCheckpointFile, {}});
    v.require(rep.encoder_checksum_before == rep.encoder_checksum_after, "probe changed encoder checksum");
    checksums = rep.encoder_checksum_after;
    CalibrateOptions cal;
    cal.data = base / "data";
    calibrate(opts("calibrate", model_settings), cal);
    export_embeddings(opts("export", {}), {base / "data", base / "pretrain" / kCheckpointFile, true});
    for (const char* stage : {"data", "pretrain", "finetune", "calibrate", "export"})
      outputs[run].push_back(json::parse(io::read_file(base / stage / kManifestFile)).at("outputs"));
  }
  std::size_t files = 0;
  for (std::size_t i = 0; i < outputs[0].size(); ++i) {
    files += outputs[0][i].size();
    v.require(outputs[0][i] == outputs[1][i], "stage " + std::to_string(i) + " outputs differ between runs");
  }
  fs::remove_all(root);
  return v.done("aggregation bit-exact, location grad 0, encoder checksum " + checksums + " unchanged, " +
                std::to_string(files) + " output files byte-identical across two runs");
}

// ---- 9 ----------------------------------------------------------------------

Outcome transfer_harness() {
  // Independent planted maps. Satellite signal confined to 4 of 16 cells and
  // one street view per region make the learned features city-specific; the
  // decision averages the matrix over repetitions before comparing.
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  constexpr std::size_t kReps = 5;
  double mean[2][2] = {{0, 0}, {0, 0}};
  std::string per_rep;
  for (std::uint64_t rep = 0; rep < kReps; ++rep) {
    std::vector<Dataset> cities;
    std::vector<UrbanVlpModel> models;
    for (std::size_t c = 0; c < 2; ++c) {
      GeneratorConfig g;
      g.seed = derive_seed(rep, "city", c);
      g.city = c == 0 ? "A" : "B";
      g.regions = 400;
      g.signal_cells = 4;
      g.max_street_views = 1;
      cities.push_back(generate_synthetic_city(g));
    }
    TrainConfig tc;
    tc.pretrain_epochs = 3;
    tc.seed = rep;
    for (std::size_t c = 0; c < 2; ++c) {
      ModelConfig mc;
      mc.seed = rep;
      models.push_back(UrbanVlpModel::init(mc));
      Pretrainer(models[c], cities[c], split_dataset(cities[c].regions.size(), cities[c].split_seed).train, tc).run();
    }
    per_rep += (rep ? " " : "") + std::string("[");
    for (std::size_t s = 0; s < 2; ++s)
      for (std::size_t t = 0; t < 2; ++t) {
        const auto r2 = mean_r2(transfer_evaluate(models[s], cities[s].city, cities[t], tc));
        v.require(r2.has_value(), "undefined R2");
        mean[s][t] += r2.value_or(0.0) / kReps;
        per_rep += fmt("%.2f", r2.value_or(0.0)) + (s + t < 2 ? "," : "]");
      }
  }
  for (std::size_t t = 0; t < 2; ++t) {
    const std::size_t s = 1 - t;
    v.require(mean[t][t] > mean[s][t], "column " + std::to_string(t) + ": diagonal " + fmt("%.3f", mean[t][t]) +
                                           " <= off-diagonal " + fmt("%.3f", mean[s][t]));
  }
  const double secs = seconds_since(t0);
  return v.done("mean over " + std::to_string(kReps) + " reps [[" + fmt("%.3f", mean[0][0]) + "," +
                fmt("%.3f", mean[0][1]) + "],[" + fmt("%.3f", mean[1][0]) + "," + fmt("%.3f", mean[1][1]) +
                "]], per rep " + per_rep + ", " + fmt("%.1f s", secs));
}

// ---- 10 ---------------------------------------------------------------------

Outcome ablation_knobs() {
  using namespace urbanvlp::cli;
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path root = fs::temp_directory_path() / "urbanvlp_acceptance_c10";
  fs::remove_all(root);
  CommonOptions gen;
  gen.out = root / "data";
  gen.quiet = true;
  gen.overrides = {{"regions", "40"}, {"image_size", "16"}};
  gen_data(gen);

  CommonOptions o;
  o.out = root / "sweep";
  o.quiet = true;
  o.overrides = {{"image_size", "16"}, {"dim", "16"}, {"layers", "1"}, {"heads", "2"}, {"patch", "8"},
                 {"max_steps", "6"},   {"probe_epochs", "20"}};
  const auto results = sweep(o, {root / "data", {"addition", "concat", "feedforward"}, {"1:0", "0:1", "0.25:0.75"},
                                 {1, 2}});
  v.require(results.size() == 8, std::to_string(results.size()) + " runs");
  std::set<std::string> labels, reports;
  std::set<std::string> knobs;
  for (const auto& r : results) {
    labels.insert(r.run.label);
    knobs.insert(r.run.knob);
    const fs::path dir = root / "sweep" / r.run.label;
    v.require(fs::exists(dir / kReportFile) && fs::exists(dir / kMetricsFile), r.run.label + " missing files");
    const json rep = json::parse(io::read_file(dir / kReportFile));
    v.require(rep.dump().find(r.run.label) != std::string::npos, r.run.label + " report is unlabeled");
    v.require(rep.at("indicators").size() == 3, r.run.label + " report incomplete");
    // Distinct beyond the label: compare the metrics themselves.
    reports.insert(rep.at("indicators").dump());
  }
  v.require(labels.size() == results.size(), "duplicate labels");
  v.require(reports.size() == results.size(), "some runs produced identical metrics");
  v.require(knobs.size() == 3, "not every knob exercised");
  fs::remove_all(root);
  std::string joined;
  for (const auto& l : labels) joined += (joined.empty() ? "" : ",") + l;
  return v.done(std::to_string(results.size()) + " runs (" + joined + "), " + fmt("%.1f s", seconds_since(t0)));
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient suite", gradient_suite},
      {"loss oracles", loss_oracles},
      {"token similarity oracle", sim_oracle},
      {"calibration", calibration},
      {"overfit and retrieve", overfit_and_retrieve},
      {"planted probe recovery", planted_probe_recovery},
      {"metric identities", metric_identities},
      {"structural invariants", structural_invariants},
      {"transfer harness", transfer_harness},
      {"ablation knobs", ablation_knobs},
  };
  std::vector<bool> selected(criteria.size(), argc == 1);
  for (int i = 1; i < argc; ++i) {
    const int k = std::atoi(argv[i]);
    if (k < 1 || k > static_cast<int>(criteria.size())) {
      std::fprintf(stderr, "usage: %s [criterion numbers 1-%zu]\n", argv[0], criteria.size());
      return 2;
    }
    selected[static_cast<std::size_t>(k - 1)] = true;
  }
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected[i]) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
