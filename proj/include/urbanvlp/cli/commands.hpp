#pragma once

#include <algorithm>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

// Eigen must precede httplib: <resolv.h> defines a `_res` macro that
// collides with Eigen parameter names.
#include "urbanvlp/pipeline/pca.hpp"
#include "urbanvlp/calibration/calibrate.hpp"
#include "urbanvlp/calibration/http_adapters.hpp"
#include "urbanvlp/cli/config.hpp"
#include "urbanvlp/cli/manifest.hpp"
#include "urbanvlp/pipeline/ablation.hpp"
#include "urbanvlp/pipeline/reports.hpp"
#include "urbanvlp/pipeline/storage.hpp"

namespace urbanvlp::cli {

inline constexpr const char* kCheckpointFile = "checkpoint.json";
inline constexpr const char* kLossesFile = "losses.csv";
inline constexpr const char* kMetricsFile = "metrics.csv";
inline constexpr const char* kReportFile = "report.json";
inline constexpr const char* kRecordsFile = "records.jsonl";
inline constexpr const char* kHistogramFile = "histogram.csv";
inline constexpr const char* kEmbeddingsFile = "embeddings.csv";

/// Options shared by every command.
struct CommonOptions {
  fs::path out;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  bool force = false;
  bool quiet = false;
  fs::path config;     // optional settings file
  Settings overrides;  // command-line settings, applied after the file

  Settings settings() const {
    Settings s = config.empty() ? Settings{} : load_settings(config);
    for (const auto& [k, v] : overrides) s[k] = v;
    return s;
  }
  std::ostream& log() const {
    static std::ostream null(nullptr);
    return quiet ? null : std::cerr;
  }
};

namespace detail {

inline void require_path(const fs::path& p, const std::string& flag) {
  if (p.empty()) throw UsageError(flag + " is required");
  if (!fs::exists(p)) throw DataError(flag + " " + p.string() + " does not exist");
}

/// Refuses outputs that would overwrite an input directory.
inline void check_output_apart(const fs::path& out, const fs::path& input) {
  if (input.empty() || !fs::exists(input) || !fs::exists(out)) return;
  const auto o = fs::weakly_canonical(out), i = fs::weakly_canonical(input);
  const auto rel = fs::relative(i, o);
  if (o == i || (!rel.empty() && *rel.begin() != "..")) {
    throw UsageError("--out " + out.string() + " would overwrite input " + input.string());
  }
}

inline void write_text(const fs::path& path, const std::function<void(std::ostream&)>& fill) {
  std::ostringstream os;
  fill(os);
  io::write_file(path, os.str());
}

inline json resolved_config(const GeneratorConfig* g, const ModelConfig* m, const TrainConfig* t) {
  json j = json::object();
  if (g) {
    j["generator"] = {{"seed", g->seed},
                      {"map_seed", g->map_seed ? json(*g->map_seed) : json(nullptr)},
                      {"city", g->city},
                      {"regions", g->regions},
                      {"max_street_views", g->max_street_views},
                      {"indicators", g->indicators},
                      {"latent_dim", g->latent_dim},
                      {"noise", g->noise},
                      {"street_view_jitter", g->street_view_jitter},
                      {"satellite_grid", g->satellite_grid},
                      {"signal_cells", g->signal_cells},
                      {"nuisance", g->nuisance},
                      {"image_size", g->image_size},
                      {"caption_bytes", g->caption_bytes},
                      {"cell_degrees", g->cell_degrees}};
  }
  if (m) j["model"] = to_json(*m);
  if (t) j["train"] = to_json(*t);
  return j;
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ','))
    if (!(item = trim(item)).empty()) out.push_back(item);
  return out;
}

}  // namespace detail

// ---- gen-data --------------------------------------------------------------

inline void gen_data(const CommonOptions& opt) {
  GeneratorConfig g;
  g.seed = opt.seed;
  apply_settings(opt.settings(), {&g, nullptr, nullptr});
  g.validate();
  prepare_output_dir(opt.out, opt.force);
  RunManifest manifest("gen-data", opt.seed);
  manifest.set_config(detail::resolved_config(&g, nullptr, nullptr));
  opt.log() << "generating " << g.regions << " regions for '" << g.city << "'\n";
  const Dataset ds = generate_synthetic_city(g, opt.threads);
  save_dataset(ds, opt.out);
  manifest.set_summary({{"regions", ds.regions.size()}, {"r2_ceiling", ds.generator->r2_ceiling}});
  manifest.write(opt.out);
}

// ---- calibrate -------------------------------------------------------------

struct CalibrateOptions {
  fs::path data;
  fs::path checkpoint;  // optional CLIP encoders; a seeded fresh model otherwise
  double threshold = kDefaultPerceptionThreshold;
  std::string adapters = "mock";
  std::string image_to_text_url;  // http mode, e.g. http://127.0.0.1:8080/describe
  std::string text_to_image_url;
  double timeout_seconds = 30.0;
  int retries = 2;
  double hallucination_rate = 0.2;  // mock mode
  bool existing_captions = false;   // score the dataset's captions instead of generating new ones
  bool satellite = false;           // also score satellite captions
};

namespace detail {

inline HttpEndpoint parse_endpoint(const std::string& url, const CalibrateOptions& o, const std::string& flag) {
  if (url.empty()) throw UsageError(flag + " is required with --adapters http");
  const auto scheme = url.find("://");
  const auto slash = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (scheme == std::string::npos || slash == std::string::npos) {
    throw UsageError(flag + " must look like http://host:port/path, got '" + url + "'");
  }
  return {url.substr(0, slash), url.substr(slash), o.timeout_seconds, o.retries};
}

}  // namespace detail

inline CalibrationResult calibrate(const CommonOptions& opt, const CalibrateOptions& c) {
  detail::require_path(c.data, "--data");
  detail::check_output_apart(opt.out, c.data);
  ModelConfig mc;
  mc.seed = opt.seed;
  apply_settings(opt.settings(), {nullptr, &mc, nullptr});
  if (!(c.threshold >= 0.0)) throw UsageError("--threshold must be non-negative");
  const Dataset ds = load_dataset(c.data);
  if (!c.checkpoint.empty()) detail::require_path(c.checkpoint, "--checkpoint");
  const UrbanVlpModel model =
      c.checkpoint.empty() ? UrbanVlpModel::init(mc) : restore_model(read_checkpoint(c.checkpoint));

  const std::size_t img = ds.regions.empty() || ds.regions[0].street_views.empty()
                              ? model.config.vision.height
                              : ds.regions[0].street_views[0].image.dim(0);
  const std::size_t caption_bytes = model.text.config.max_length - 2;
  ModelAdapters adapters;
  if (c.adapters == "mock") {
    adapters = mock_adapters(opt.seed, img, img, caption_bytes, c.hallucination_rate);
  } else if (c.adapters == "http") {
    adapters = {std::make_shared<HttpImageToText>(detail::parse_endpoint(c.image_to_text_url, c, "--image-to-text-url")),
                std::make_shared<HttpTextToImage>(detail::parse_endpoint(c.text_to_image_url, c, "--text-to-image-url"),
                                                  img, img),
                std::make_shared<MockSegmenter>()};
  } else {
    throw UsageError("--adapters must be mock or http, got '" + c.adapters + "'");
  }
  const ClipEncoders encoders{&model.image, &model.text, 1.0};
  prepare_output_dir(opt.out, opt.force);

  RunManifest manifest("calibrate", opt.seed);
  json cfg = detail::resolved_config(nullptr, &model.config, nullptr);
  cfg["calibration"] = {{"threshold", c.threshold},
                        {"adapters", c.adapters},
                        {"existing_captions", c.existing_captions},
                        {"satellite", c.satellite},
                        {"hallucination_rate", c.hallucination_rate}};
  manifest.set_config(cfg);
  manifest.add_input("data", c.data);
  if (!c.checkpoint.empty()) manifest.add_input("checkpoint", c.checkpoint);

  struct Job {
    std::string id;
    const Tensor* image;
    const std::string* text;
    double lat, lon;
  };
  std::vector<Job> jobs;
  for (const auto& r : ds.regions) {
    if (c.satellite) jobs.push_back({r.id + "/satellite", &r.satellite, &r.satellite_text, r.lat, r.lon});
    for (std::size_t s = 0; s < r.street_views.size(); ++s) {
      const auto& sv = r.street_views[s];
      jobs.push_back({r.id + "/" + urbanvlp::detail::view_stem(s), &sv.image, &sv.text, sv.lat, sv.lon});
    }
  }
  // Adapters are pure per call (mock) or stateless clients (http).
  std::vector<CaptionRecord> records(jobs.size());
  parallel_for(jobs.size(), opt.threads, [&](std::size_t i) {
    const Job& j = jobs[i];
    records[i] = c.existing_captions ? score_caption(j.id, *j.image, *j.text, "", adapters, encoders)
                                     : caption_and_score(j.id, *j.image, ds.city, j.lat, j.lon, adapters, encoders);
  });
  opt.log() << "scored " << records.size() << " captions\n";
  CalibrationResult result = calibrate_dataset(records, c.threshold);

  // All records in input order, with their final status.
  std::vector<CaptionRecord> ordered;
  {
    std::map<std::string, CaptionStatus> status;
    for (const auto* part : {&result.kept, &result.dropped, &result.errors})
      for (const auto& r : *part) status[r.image_id] = r.status;
    for (auto r : records) {
      r.status = status.at(r.image_id);
      ordered.push_back(std::move(r));
    }
  }
  detail::write_text(opt.out / kRecordsFile, [&](std::ostream& os) { write_records_jsonl(os, ordered); });
  detail::write_text(opt.out / kHistogramFile, [&](std::ostream& os) { result.histogram.write_csv(os); });
  manifest.set_summary({{"kept", result.kept.size()}, {"dropped", result.dropped.size()}, {"errors", result.errors.size()}});
  manifest.write(opt.out);
  return result;
}

// ---- pretrain --------------------------------------------------------------

struct PretrainOptions {
  fs::path data;
  fs::path resume;  // checkpoint to continue from
  std::size_t checkpoint_every = 0;
};

namespace detail {

inline void write_checkpoint_files(const fs::path& out, UrbanVlpModel& model, const std::string& city,
                                   Pretrainer& trainer) {
  save_checkpoint(out / kCheckpointFile, model, city, trainer);
  write_text(out / kLossesFile, [&](std::ostream& os) { write_losses_csv(os, trainer.losses()); });
}

}  // namespace detail

inline std::vector<StepLog> pretrain(const CommonOptions& opt, const PretrainOptions& p) {
  detail::require_path(p.data, "--data");
  detail::check_output_apart(opt.out, p.data);
  const Dataset ds = load_dataset(p.data);
  ModelConfig mc;
  TrainConfig tc;
  std::optional<Checkpoint> ckpt;
  if (!p.resume.empty()) {
    detail::require_path(p.resume, "--resume");
    ckpt = read_checkpoint(p.resume);
    mc = ckpt->model_config;
    tc = ckpt->train_config;
    if (ckpt->city != ds.city) throw DataError("checkpoint city '" + ckpt->city + "' differs from dataset city '" + ds.city + "'");
  } else {
    mc.seed = tc.seed = opt.seed;
  }
  const Settings settings = opt.settings();
  if (ckpt) {
    // Only the run length may change on resume.
    for (const auto& [k, v] : settings)
      if (k != "max_steps" && k != "pretrain_epochs") throw UsageError("setting '" + k + "' cannot change when resuming");
  }
  apply_settings(settings, {nullptr, &mc, &tc});
  tc.threads = opt.threads;
  tc.validate();
  prepare_output_dir(opt.out, opt.force);

  UrbanVlpModel model = ckpt ? restore_model(*ckpt) : UrbanVlpModel::init(mc);
  const Split split = split_dataset(ds.regions.size(), ds.split_seed);
  Pretrainer trainer(model, ds, split.train, tc);
  if (ckpt) restore_trainer(*ckpt, trainer);

  RunManifest manifest("pretrain", opt.seed);
  manifest.set_config(detail::resolved_config(nullptr, &mc, &tc));
  manifest.add_input("data", p.data);
  if (ckpt) manifest.add_input("resume", p.resume);

  opt.log() << "pretraining " << trainer.total_steps() << " steps on " << split.train.size() << " regions\n";
  trainer.run(0, [&](const StepLog& l) {
    if (l.step % 10 == 0) opt.log() << "step " << l.step << " loss " << l.total << '\n';
    if (p.checkpoint_every > 0 && (l.step + 1) % p.checkpoint_every == 0) {
      detail::write_checkpoint_files(opt.out, model, ds.city, trainer);
    }
  });
  detail::write_checkpoint_files(opt.out, model, ds.city, trainer);
  const auto& losses = trainer.losses();
  if (!losses.empty()) {
    manifest.set_summary({{"steps", trainer.step()}, {"final_total", losses.back().total},
                          {"final_global", losses.back().global}, {"final_local", losses.back().local}});
  }
  manifest.write(opt.out);
  return losses;
}

// ---- finetune --------------------------------------------------------------

struct FinetuneOptions {
  fs::path data;
  fs::path checkpoint;
  std::vector<std::string> indicators;  // empty: all
};

namespace detail {

struct LoadedCheckpoint {
  Checkpoint checkpoint;
  UrbanVlpModel model;
  std::string id;  // content hash of the file
};

inline LoadedCheckpoint load_model(const fs::path& path) {
  Checkpoint c = read_checkpoint(path);
  UrbanVlpModel m = restore_model(c);
  return {std::move(c), std::move(m), io::content_hash(path)};
}

}  // namespace detail

inline ProbeReport finetune(const CommonOptions& opt, const FinetuneOptions& f) {
  detail::require_path(f.data, "--data");
  detail::require_path(f.checkpoint, "--checkpoint");
  detail::check_output_apart(opt.out, f.data);
  const Dataset ds = select_indicators(load_dataset(f.data), f.indicators);
  auto loaded = detail::load_model(f.checkpoint);
  TrainConfig tc = loaded.checkpoint.train_config;
  tc.seed = opt.seed;
  apply_settings(opt.settings(), {nullptr, nullptr, &tc});
  tc.threads = opt.threads;
  tc.validate();
  prepare_output_dir(opt.out, opt.force);
  RunManifest manifest("finetune", opt.seed);
  manifest.set_config(detail::resolved_config(nullptr, &loaded.model.config, &tc));
  manifest.add_input("data", f.data);
  manifest.add_input("checkpoint", f.checkpoint);

  ProbeReport rep = urbanvlp::finetune(loaded.model, loaded.checkpoint.city, ds, tc, loaded.id);
  if (rep.encoder_checksum_before != rep.encoder_checksum_after) {
    throw NumericalError("encoder parameters changed during probing");
  }
  detail::write_text(opt.out / kReportFile, [&](std::ostream& os) { os << to_json(rep).dump(2) << '\n'; });
  detail::write_text(opt.out / kMetricsFile, [&](std::ostream& os) { write_metrics_csv(os, rep); });
  manifest.set_summary({{"mean_r2", mean_r2(rep) ? json(*mean_r2(rep)) : json(nullptr)}});
  manifest.write(opt.out);
  return rep;
}

// ---- transfer --------------------------------------------------------------

struct TransferOptions {
  fs::path checkpoints;  // directory of checkpoint files (or run directories holding checkpoint.json)
  fs::path datasets;     // directory of dataset directories
};

namespace detail {

inline std::vector<fs::path> sorted_entries(const fs::path& dir, const std::function<bool(const fs::path&)>& keep) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (keep(e.path())) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

inline TransferMatrix transfer(const CommonOptions& opt, const TransferOptions& t) {
  detail::require_path(t.checkpoints, "--checkpoints");
  detail::require_path(t.datasets, "--datasets");
  detail::check_output_apart(opt.out, t.checkpoints);
  detail::check_output_apart(opt.out, t.datasets);
  std::vector<fs::path> ckpt_files;
  for (const auto& p : detail::sorted_entries(t.checkpoints, [](const fs::path&) { return true; })) {
    if (fs::is_regular_file(p) && p.extension() == ".json") ckpt_files.push_back(p);
    if (fs::is_directory(p) && fs::exists(p / kCheckpointFile)) ckpt_files.push_back(p / kCheckpointFile);
  }
  const auto data_dirs = detail::sorted_entries(
      t.datasets, [](const fs::path& p) { return fs::is_directory(p) && fs::exists(p / kDatasetManifest); });
  if (ckpt_files.empty()) throw DataError("no checkpoints found in " + t.checkpoints.string());
  if (data_dirs.empty()) throw DataError("no datasets found in " + t.datasets.string());

  TrainConfig tc;
  tc.seed = opt.seed;
  {
    // Probe settings start from the first checkpoint's training config.
    tc = read_checkpoint(ckpt_files.front()).train_config;
    tc.seed = opt.seed;
  }
  apply_settings(opt.settings(), {nullptr, nullptr, &tc});
  tc.threads = opt.threads;
  tc.validate();
  prepare_output_dir(opt.out, opt.force);
  RunManifest manifest("transfer", opt.seed);
  manifest.set_config(detail::resolved_config(nullptr, nullptr, &tc));
  manifest.add_input("checkpoints", t.checkpoints);
  manifest.add_input("datasets", t.datasets);

  std::vector<Dataset> targets;
  for (const auto& d : data_dirs) targets.push_back(load_dataset(d));
  TransferMatrix matrix;
  for (const auto& d : targets) matrix.targets.push_back(d.city);
  for (const auto& ind : targets.front().indicators) matrix.indicators.push_back(ind.name);
  json reports = json::array();
  for (const auto& cf : ckpt_files) {
    auto loaded = detail::load_model(cf);
    matrix.sources.push_back(loaded.checkpoint.city);
    auto& row = matrix.r2.emplace_back();
    for (const auto& target : targets) {
      opt.log() << "probing " << target.city << " with encoders from " << loaded.checkpoint.city << '\n';
      ProbeReport rep = transfer_evaluate(loaded.model, loaded.checkpoint.city, target, tc, loaded.id);
      auto& cell = row.emplace_back();
      for (const auto& i : rep.indicators) cell.push_back(i.transformed.r2);
      reports.push_back(to_json(rep));
    }
  }
  detail::write_text(opt.out / kMetricsFile, [&](std::ostream& os) { matrix.write_csv(os); });
  detail::write_text(opt.out / kReportFile, [&](std::ostream& os) { os << reports.dump(2) << '\n'; });
  manifest.write(opt.out);
  return matrix;
}

// ---- export-embeddings -----------------------------------------------------

struct ExportOptions {
  fs::path data;
  fs::path checkpoint;
  bool pca = false;
};

/// Returns the PCA warning, if any.
inline std::string export_embeddings(const CommonOptions& opt, const ExportOptions& e) {
  detail::require_path(e.data, "--data");
  detail::require_path(e.checkpoint, "--checkpoint");
  detail::check_output_apart(opt.out, e.data);
  const Dataset ds = load_dataset(e.data);
  auto loaded = detail::load_model(e.checkpoint);
  TrainConfig tc = loaded.checkpoint.train_config;
  apply_settings(opt.settings(), {nullptr, nullptr, &tc});
  prepare_output_dir(opt.out, opt.force);
  RunManifest manifest("export-embeddings", opt.seed);
  json cfg = detail::resolved_config(nullptr, &loaded.model.config, &tc);
  cfg["pca"] = e.pca;
  manifest.set_config(cfg);
  manifest.add_input("data", e.data);
  manifest.add_input("checkpoint", e.checkpoint);

  const std::size_t n = ds.regions.size(), d = loaded.model.dim();
  Tensor emb(Shape{n, d});
  parallel_for(n, opt.threads, [&](std::size_t i) {
    const Tensor z = fused_embedding(loaded.model, ds.regions[i], tc.street_view_cap);
    std::copy(z.data().begin(), z.data().end(), emb.data().begin() + static_cast<std::ptrdiff_t>(i * d));
  });
  std::vector<std::string> columns;
  std::string warning;
  if (e.pca) {
    PcaResult p = pca_project(emb, 2);
    emb = p.projection;
    warning = p.warning;
    columns = {"x", "y"};
    columns.resize(emb.cols());
    manifest.set_summary({{"eigenvalues", p.eigenvalues}, {"warning", p.warning}});
  } else {
    for (std::size_t j = 0; j < d; ++j) columns.push_back("e" + std::to_string(j));
  }
  detail::write_text(opt.out / kEmbeddingsFile, [&](std::ostream& os) {
    os << "region_id";
    for (const auto& c : columns) os << ',' << c;
    for (const auto& ind : ds.indicators) os << ",y_" << ind.name;
    os << '\n';
    for (std::size_t i = 0; i < n; ++i) {
      os << ds.regions[i].id;
      for (std::size_t j = 0; j < columns.size(); ++j) os << ',' << urbanvlp::detail::format_double(emb(i, j));
      for (std::size_t k = 0; k < ds.indicators.size(); ++k) {
        os << ',';
        if (ds.regions[i].present[k]) os << urbanvlp::detail::format_double(ds.regions[i].targets[k]);
      }
      os << '\n';
    }
  });
  if (!warning.empty()) opt.log() << "warning: " << warning << '\n';
  manifest.write(opt.out);
  return warning;
}

// ---- sweep -----------------------------------------------------------------

struct SweepOptions {
  fs::path data;
  std::vector<std::string> fusion;   // fusion modes
  std::vector<std::string> weights;  // "alpha:beta"
  std::vector<std::size_t> caps;     // street-view caps
};

inline std::vector<AblationResult> sweep(const CommonOptions& opt, const SweepOptions& s) {
  detail::require_path(s.data, "--data");
  detail::check_output_apart(opt.out, s.data);
  const Dataset ds = load_dataset(s.data);
  ModelConfig mc;
  TrainConfig tc;
  mc.seed = tc.seed = opt.seed;
  apply_settings(opt.settings(), {nullptr, &mc, &tc});
  tc.threads = opt.threads;
  tc.validate();

  std::vector<AblationRun> runs;
  std::vector<FusionMode> modes;
  for (const auto& f : s.fusion) modes.push_back(parse_fusion_mode(f));
  for (auto& r : fusion_sweep(mc, tc, modes)) runs.push_back(r);
  std::vector<std::pair<double, double>> weights;
  for (const auto& w : s.weights) {
    const auto colon = w.find(':');
    if (colon == std::string::npos) throw UsageError("--weights entries look like alpha:beta, got '" + w + "'");
    weights.emplace_back(detail::to_double("alpha", w.substr(0, colon)), detail::to_double("beta", w.substr(colon + 1)));
  }
  for (auto& r : loss_weight_sweep(mc, tc, weights)) runs.push_back(r);
  for (auto& r : street_view_cap_sweep(mc, tc, s.caps)) runs.push_back(r);
  if (runs.empty()) throw UsageError("sweep needs at least one of --fusion, --weights, --caps");
  for (std::size_t i = 0; i < runs.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (runs[i].label == runs[j].label) throw UsageError("duplicate sweep entry " + runs[i].label);

  prepare_output_dir(opt.out, opt.force);
  RunManifest manifest("sweep", opt.seed);
  json cfg = detail::resolved_config(nullptr, &mc, &tc);
  cfg["runs"] = json::array();
  for (const auto& r : runs) cfg["runs"].push_back(r.label);
  manifest.set_config(cfg);
  manifest.add_input("data", s.data);

  std::vector<AblationResult> results;
  std::ostringstream all_metrics;
  json all = json::array();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    opt.log() << "sweep " << runs[i].label << '\n';
    results.push_back(run_ablation(runs[i], ds));
    const auto& res = results.back();
    const fs::path dir = opt.out / res.run.label;
    fs::create_directories(dir);
    detail::write_text(dir / kReportFile, [&](std::ostream& os) { os << to_json(res).dump(2) << '\n'; });
    detail::write_text(dir / kMetricsFile, [&](std::ostream& os) { write_metrics_csv(os, res.report, res.run.label); });
    detail::write_text(dir / kLossesFile, [&](std::ostream& os) { write_losses_csv(os, res.losses); });
    std::ostringstream m;
    write_metrics_csv(m, res.report, res.run.label);
    std::string body = m.str();
    if (i > 0) body = body.substr(body.find('\n') + 1);
    all_metrics << body;
    all.push_back(to_json(res));
  }
  io::write_file(opt.out / kMetricsFile, all_metrics.str());
  io::write_file(opt.out / kReportFile, all.dump(2) + "\n");
  manifest.write(opt.out);
  return results;
}

}  // namespace urbanvlp::cli
