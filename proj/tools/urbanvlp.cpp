// urbanvlp: data generation, caption calibration, pretraining, probing,
// transfer matrices, embedding export and ablation sweeps.

#include <iostream>

#include "CLI11.hpp"
#include "urbanvlp/cli/commands.hpp"

namespace {

using namespace urbanvlp;
using namespace urbanvlp::cli;

/// Flags every subcommand accepts.
void add_common(CLI::App* app, CommonOptions& opt, std::vector<std::string>& sets) {
  app->add_option("--out", opt.out, "Output directory")->required();
  app->add_option("--seed", opt.seed, "Run seed; every subsystem seed derives from it");
  app->add_option("--threads", opt.threads, "Workers for per-region work (results do not depend on it)")
      ->check(CLI::PositiveNumber);
  app->add_flag("--force", opt.force, "Replace a non-empty output directory");
  app->add_flag("--quiet", opt.quiet, "No progress output");
  app->add_option("--config", opt.config, "Settings file (key = value lines)")->check(CLI::ExistingFile);
  app->add_option("--set", sets, "Setting override key=value (repeatable, wins over --config)");
}

void collect_sets(const std::vector<std::string>& sets, CommonOptions& opt) {
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + s + "'");
    opt.overrides[s.substr(0, eq)] = s.substr(eq + 1);
  }
}

int run(int argc, char** argv) {
  CLI::App app{"Multi-granularity urban vision-language pretraining and indicator probing"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "urbanvlp 0.1.0");

  CommonOptions opt;
  std::vector<std::string> sets;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic city with planted indicator structure");
  add_common(gen, opt, sets);
  std::optional<std::size_t> regions;
  std::optional<std::string> city;
  gen->add_option("--regions", regions, "Region count (>= 10)");
  gen->add_option("--city", city, "City label");

  CalibrateOptions cal;
  auto* calib = app.add_subcommand("calibrate", "Caption street views and score them with PerceptionScore");
  add_common(calib, opt, sets);
  calib->add_option("--data", cal.data, "Dataset directory")->required();
  calib->add_option("--threshold", cal.threshold, "Captions scoring below this are dropped");
  calib->add_option("--adapters", cal.adapters, "mock or http")->check(CLI::IsMember({"mock", "http"}));
  calib->add_option("--checkpoint", cal.checkpoint, "Encoders used for CLIPScore");
  calib->add_option("--image-to-text-url", cal.image_to_text_url, "Captioning endpoint (http adapters)");
  calib->add_option("--text-to-image-url", cal.text_to_image_url, "Image generation endpoint (http adapters)");
  calib->add_option("--timeout", cal.timeout_seconds, "HTTP timeout in seconds");
  calib->add_option("--retries", cal.retries, "HTTP retries per request");
  calib->add_option("--hallucination-rate", cal.hallucination_rate, "Mock captioner defect rate");
  calib->add_flag("--existing", cal.existing_captions, "Score the dataset's own captions");
  calib->add_flag("--satellite", cal.satellite, "Also caption and score satellite images");

  PretrainOptions pre;
  auto* pretrain_cmd = app.add_subcommand("pretrain", "Stage 1: contrastive pretraining on the train split");
  add_common(pretrain_cmd, opt, sets);
  pretrain_cmd->add_option("--data", pre.data, "Dataset directory")->required();
  pretrain_cmd->add_option("--resume", pre.resume, "Checkpoint to continue from");
  pretrain_cmd->add_option("--checkpoint-every", pre.checkpoint_every, "Also write the checkpoint every N steps");

  FinetuneOptions fin;
  std::string indicator_list;
  auto* finetune_cmd = app.add_subcommand("finetune", "Stage 2: probe frozen encoders on indicator targets");
  add_common(finetune_cmd, opt, sets);
  finetune_cmd->add_option("--data", fin.data, "Dataset directory")->required();
  finetune_cmd->add_option("--checkpoint", fin.checkpoint, "Pretrained checkpoint")->required();
  finetune_cmd->add_option("--indicators", indicator_list, "Comma-separated indicator names (default: all)");

  TransferOptions tr;
  auto* transfer_cmd = app.add_subcommand("transfer", "Source x target R^2 matrix over cities");
  add_common(transfer_cmd, opt, sets);
  transfer_cmd->add_option("--checkpoints", tr.checkpoints, "Directory of checkpoints")->required();
  transfer_cmd->add_option("--datasets", tr.datasets, "Directory of dataset directories")->required();

  ExportOptions ex;
  auto* export_cmd = app.add_subcommand("export-embeddings", "Write fused region embeddings");
  add_common(export_cmd, opt, sets);
  export_cmd->add_option("--data", ex.data, "Dataset directory")->required();
  export_cmd->add_option("--checkpoint", ex.checkpoint, "Pretrained checkpoint")->required();
  export_cmd->add_flag("--pca", ex.pca, "Project to two principal axes");

  SweepOptions sw;
  std::string fusion_list, weight_list, cap_list;
  auto* sweep_cmd = app.add_subcommand("sweep", "Ablations: fusion mode, loss weights, street-view cap");
  add_common(sweep_cmd, opt, sets);
  sweep_cmd->add_option("--data", sw.data, "Dataset directory")->required();
  sweep_cmd->add_option("--fusion", fusion_list, "Comma-separated fusion modes (addition,concat,feedforward)");
  sweep_cmd->add_option("--weights", weight_list, "Comma-separated alpha:beta pairs");
  sweep_cmd->add_option("--caps", cap_list, "Comma-separated street-view caps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  collect_sets(sets, opt);
  if (gen->parsed()) {
    if (regions) opt.overrides["regions"] = std::to_string(*regions);
    if (city) opt.overrides["city"] = *city;
    gen_data(opt);
  } else if (calib->parsed()) {
    const auto res = calibrate(opt, cal);
    opt.log() << "kept " << res.kept.size() << ", dropped " << res.dropped.size() << ", errors "
              << res.errors.size() << '\n';
  } else if (pretrain_cmd->parsed()) {
    pretrain(opt, pre);
  } else if (finetune_cmd->parsed()) {
    fin.indicators = cli::detail::split_list(indicator_list);
    const auto rep = finetune(opt, fin);
    for (const auto& i : rep.indicators)
      opt.log() << i.name << " R2 " << (i.transformed.r2 ? std::to_string(*i.transformed.r2) : "NA") << '\n';
  } else if (transfer_cmd->parsed()) {
    transfer(opt, tr);
  } else if (export_cmd->parsed()) {
    export_embeddings(opt, ex);
  } else if (sweep_cmd->parsed()) {
    sw.fusion = cli::detail::split_list(fusion_list);
    sw.weights = cli::detail::split_list(weight_list);
    for (const auto& c : cli::detail::split_list(cap_list)) sw.caps.push_back(cli::detail::to_size("--caps", c));
    sweep(opt, sw);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const urbanvlp::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const urbanvlp::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  }
}
