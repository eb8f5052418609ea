#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include "urbanvlp/cli/commands.hpp"

using namespace urbanvlp;
using namespace urbanvlp::cli;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "urbanvlp_cli_tests";

fs::path fresh(const std::string& name) {
  const fs::path p = kRoot / name;
  fs::remove_all(p);
  return p;
}

/// A model small enough for 16x16 images and sub-second runs.
Settings small_settings() {
  return {{"image_size", "16"}, {"dim", "16"},           {"layers", "1"},
          {"heads", "2"},       {"ff_hidden", "24"},     {"patch", "8"},
          {"aggregator_hidden", "16"}, {"street_view_slots", "4"}};
}

CommonOptions options(const fs::path& out, Settings overrides = {}, std::uint64_t seed = 0) {
  CommonOptions o;
  o.out = out;
  o.seed = seed;
  o.quiet = true;
  o.overrides = std::move(overrides);
  return o;
}

fs::path make_dataset(const std::string& name, std::size_t regions = 20, std::uint64_t seed = 0,
                      const std::string& city = "synthetic") {
  const fs::path out = fresh(name);
  gen_data(options(out, {{"regions", std::to_string(regions)}, {"image_size", "16"}, {"city", city}}, seed));
  return out;
}

fs::path make_checkpoint(const std::string& name, const fs::path& data, std::size_t threads = 1) {
  const fs::path out = fresh(name);
  Settings s = small_settings();
  s["max_steps"] = "3";
  CommonOptions o = options(out, s);
  o.threads = threads;
  pretrain(o, {data, {}, 0});
  return out;
}

json manifest_outputs(const fs::path& dir) { return json::parse(io::read_file(dir / kManifestFile)).at("outputs"); }

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(URBANVLP_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

// ---- settings -------------------------------------------------------------

TEST(Settings, ParsesKeyValueLines) {
  std::istringstream in("# comment\n[model]\ndim = 16\n; other\n  fusion=concat  \n\n");
  const Settings s = parse_settings(in);
  EXPECT_EQ(s.size(), 2u);
  EXPECT_EQ(s.at("dim"), "16");
  EXPECT_EQ(s.at("fusion"), "concat");
}

TEST(Settings, MalformedLinesAreUsageErrors) {
  std::istringstream no_eq("dim 16\n");
  EXPECT_THROW(parse_settings(no_eq), UsageError);
  std::istringstream no_key(" = 3\n");
  EXPECT_THROW(parse_settings(no_key), UsageError);
}

TEST(Settings, UnknownMisplacedAndBadValues) {
  ModelConfig mc;
  TrainConfig tc;
  GeneratorConfig g;
  EXPECT_THROW(apply_settings({{"no_such_key", "1"}}, {&g, &mc, &tc}), UsageError);
  EXPECT_THROW(apply_settings({{"regions", "10"}}, {nullptr, &mc, &tc}), UsageError);
  EXPECT_THROW(apply_settings({{"dim", "many"}}, {nullptr, &mc, nullptr}), UsageError);
  EXPECT_THROW(apply_settings({{"learning_rate", "1e-3x"}}, {nullptr, nullptr, &tc}), UsageError);
  EXPECT_THROW(apply_settings({{"fusion", "blend"}}, {nullptr, &mc, nullptr}), UsageError);
  apply_settings({{"fusion", "feedforward"}, {"alpha", "0.25"}, {"augment", "true"}}, {nullptr, &mc, &tc});
  EXPECT_EQ(mc.fusion, FusionMode::kFeedForward);
  EXPECT_EQ(tc.alpha, 0.25);
  EXPECT_TRUE(tc.augment);
}

TEST(Settings, OverridesWinOverFile) {
  const fs::path dir = fresh("settings");
  fs::create_directories(dir);
  io::write_file(dir / "run.ini", "regions = 30\ncity = fromfile\n");
  CommonOptions o = options(dir / "out", {{"regions", "12"}});
  o.config = dir / "run.ini";
  const Settings s = o.settings();
  EXPECT_EQ(s.at("regions"), "12");
  EXPECT_EQ(s.at("city"), "fromfile");
}

// ---- commands in process --------------------------------------------------

TEST(Commands, GenDataWritesManifestAndRefusesToOverwrite) {
  const fs::path out = make_dataset("gen", 15);
  EXPECT_TRUE(fs::exists(out / kManifestFile));
  EXPECT_EQ(load_dataset(out).regions.size(), 15u);
  EXPECT_THROW(gen_data(options(out, {{"regions", "15"}, {"image_size", "16"}})), UsageError);
  CommonOptions forced = options(out, {{"regions", "11"}, {"image_size", "16"}});
  forced.force = true;
  gen_data(forced);
  EXPECT_EQ(load_dataset(out).regions.size(), 11u);
}

TEST(Commands, PretrainFinetuneExportSweep) {
  const fs::path data = make_dataset("chain_data");
  const fs::path ck = make_checkpoint("chain_ck", data);
  EXPECT_EQ(line_count(ck / kLossesFile), 4u);  // header + 3 steps

  const fs::path fin = fresh("chain_fin");
  Settings probe{{"probe_epochs", "5"}};
  const ProbeReport rep = finetune(options(fin, probe), {data, ck / kCheckpointFile, {"gdp", "carbon"}});
  ASSERT_EQ(rep.indicators.size(), 2u);
  EXPECT_EQ(rep.indicators[0].name, "gdp");
  EXPECT_EQ(rep.encoder_checksum_before, rep.encoder_checksum_after);
  EXPECT_EQ(line_count(fin / kMetricsFile), 5u);  // header + 2 indicators x 2 spaces

  const fs::path emb = fresh("chain_emb");
  EXPECT_TRUE(export_embeddings(options(emb), {data, ck / kCheckpointFile, true}).empty());
  EXPECT_EQ(line_count(emb / kEmbeddingsFile), 21u);

  const fs::path sw = fresh("chain_sweep");
  Settings s = small_settings();
  s["max_steps"] = "2";
  s["probe_epochs"] = "3";
  const auto results = sweep(options(sw, s), {data, {"addition", "concat"}, {"1:0"}, {1}});
  ASSERT_EQ(results.size(), 4u);
  for (const auto& r : results) EXPECT_TRUE(fs::exists(sw / r.run.label / kReportFile)) << r.run.label;
}

TEST(Commands, UnknownIndicatorIsDataError) {
  const fs::path data = make_dataset("ind_data");
  const fs::path ck = make_checkpoint("ind_ck", data);
  EXPECT_THROW(finetune(options(fresh("ind_fin")), {data, ck / kCheckpointFile, {"rainfall"}}), DataError);
}

TEST(Commands, OutputMayNotOverwriteInput) {
  const fs::path data = make_dataset("apart_data");
  CommonOptions o = options(data);
  o.force = true;
  EXPECT_THROW(pretrain(o, {data, {}, 0}), UsageError);
  EXPECT_TRUE(fs::exists(data / kDatasetManifest));
}

TEST(Commands, ResumeContinuesToTheSameCheckpoint) {
  const fs::path data = make_dataset("resume_data");
  Settings s = small_settings();
  s["max_steps"] = "4";
  const fs::path straight = fresh("resume_straight");
  pretrain(options(straight, s), {data, {}, 0});

  s["max_steps"] = "2";
  const fs::path half = fresh("resume_half");
  pretrain(options(half, s), {data, {}, 0});
  const fs::path rest = fresh("resume_rest");
  pretrain(options(rest, {{"max_steps", "4"}}), {data, half / kCheckpointFile, 0});
  EXPECT_EQ(io::read_file(rest / kCheckpointFile), io::read_file(straight / kCheckpointFile));

  // Only run length may change on resume.
  EXPECT_THROW(pretrain(options(fresh("resume_bad"), {{"dim", "8"}}), {data, half / kCheckpointFile, 0}), UsageError);
}

TEST(Commands, CalibrateThresholds) {
  const fs::path data = make_dataset("cal_data", 12);
  const Settings s = small_settings();
  std::size_t total = 0;
  for (double threshold : {0.0, 0.6, 1.01}) {
    const fs::path out = fresh("cal_" + std::to_string(threshold));
    CalibrateOptions c;
    c.data = data;
    c.threshold = threshold;
    const CalibrationResult r = calibrate(options(out, s), c);
    const std::size_t n = r.kept.size() + r.dropped.size() + r.errors.size();
    if (total == 0) total = n;
    EXPECT_EQ(n, total);
    EXPECT_EQ(line_count(out / kRecordsFile), n);
    if (threshold == 0.0) {
      EXPECT_TRUE(r.dropped.empty());
    }
    if (threshold > 1.0) {
      EXPECT_TRUE(r.kept.empty());
    }
    for (const auto& k : r.kept) EXPECT_GE(k.perception_score, threshold);
    for (const auto& d : r.dropped) EXPECT_LT(d.perception_score, threshold);
  }
  EXPECT_GT(total, 12u);
  CalibrateOptions bad;
  bad.data = data;
  bad.threshold = -0.1;
  EXPECT_THROW(calibrate(options(fresh("cal_bad"), s), bad), UsageError);
}

TEST(Commands, TransferBuildsLabeledMatrix) {
  const fs::path datasets = fresh("tr_datasets");
  const fs::path checkpoints = fresh("tr_checkpoints");
  for (const std::string city : {"A", "B"}) {
    const fs::path d = make_dataset("tr_tmp_" + city, 20, city == "A" ? 1 : 2, city);
    fs::create_directories(datasets);
    fs::rename(d, datasets / city);
    const fs::path ck = make_checkpoint("tr_ck_" + city, datasets / city);
    fs::create_directories(checkpoints);
    fs::rename(ck, checkpoints / city);
  }
  const fs::path out = fresh("tr_out");
  const TransferMatrix m = transfer(options(out, {{"probe_epochs", "3"}}), {checkpoints, datasets});
  EXPECT_EQ(m.sources, (std::vector<std::string>{"A", "B"}));
  EXPECT_EQ(m.targets, (std::vector<std::string>{"A", "B"}));
  EXPECT_TRUE(fs::exists(out / kMetricsFile));
  EXPECT_EQ(json::parse(io::read_file(out / kReportFile)).size(), 4u);
}

// ---- determinism ----------------------------------------------------------

TEST(Determinism, SameSeedEndToEndRunsAreByteIdentical) {
  std::vector<json> outputs[2];
  for (int run = 0; run < 2; ++run) {
    const std::string tag = std::to_string(run);
    const std::size_t threads = run == 0 ? 1 : 3;  // worker count must not matter
    const fs::path data = fresh("det_data_" + tag);
    CommonOptions g = options(data, {{"regions", "20"}, {"image_size", "16"}}, 5);
    g.threads = threads;
    gen_data(g);
    const fs::path ck = make_checkpoint("det_ck_" + tag, data, threads);
    const fs::path fin = fresh("det_fin_" + tag);
    CommonOptions f = options(fin, {{"probe_epochs", "5"}});
    f.threads = threads;
    finetune(f, {data, ck / kCheckpointFile, {}});
    const fs::path cal = fresh("det_cal_" + tag);
    CalibrateOptions c;
    c.data = data;
    CommonOptions co = options(cal, small_settings());
    co.threads = threads;
    calibrate(co, c);
    for (const auto& dir : {data, ck, fin, cal}) outputs[run].push_back(manifest_outputs(dir));
  }
  ASSERT_EQ(outputs[0].size(), outputs[1].size());
  for (std::size_t i = 0; i < outputs[0].size(); ++i) EXPECT_EQ(outputs[0][i], outputs[1][i]) << "stage " << i;
}

// ---- the binary -----------------------------------------------------------

TEST(Binary, ExitCodes) {
  const fs::path data = make_dataset("bin_data");
  const std::string d = data.string();
  const std::string model = " --set image_size=16 --set dim=16 --set layers=1 --set heads=2 --set ff_hidden=24"
                            " --set patch=8 --set aggregator_hidden=16 --set street_view_slots=4";
  EXPECT_EQ(run_cli("--version"), 0);
  EXPECT_EQ(run_cli(""), 1);
  EXPECT_EQ(run_cli("pretrain --data " + d), 1);  // --out missing
  EXPECT_EQ(run_cli("pretrain --out " + fresh("bin_a").string() + " --data " + d + " --set bogus=1"), 1);
  EXPECT_EQ(run_cli("pretrain --out " + fresh("bin_b").string() + " --data " + d + " --set noequals"), 1);
  EXPECT_EQ(run_cli("gen-data --out " + fresh("bin_c").string() + " --regions 5"), 2);
  EXPECT_EQ(run_cli("pretrain --out " + fresh("bin_d").string() + " --data " + (kRoot / "missing").string()), 2);
  EXPECT_EQ(run_cli("pretrain --out " + fresh("bin_e").string() + " --data " + d + model + " --set max_steps=2"), 0);
  // A learning rate this large overflows the parameters within a few steps.
  EXPECT_EQ(run_cli("pretrain --out " + fresh("bin_f").string() + " --data " + d + model +
                    " --set max_steps=6 --set learning_rate=1e200"),
            3);
  EXPECT_EQ(run_cli("pretrain --out " + (kRoot / "bin_e").string() + " --data " + d + model), 1);  // not empty
}
