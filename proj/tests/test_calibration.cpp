#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <sstream>
#include <thread>

#include "urbanvlp/calibration/calibrate.hpp"
#include "urbanvlp/calibration/http_adapters.hpp"
#include "urbanvlp/pipeline/model.hpp"

using namespace urbanvlp;

namespace {

SegmentationRatio road_sky(double road, double sky) {
  SegmentationRatio r;
  r[category::kRoad] = road;
  r[category::kSky] = sky;
  return r;
}

CaptionRecord scored(double p) {
  CaptionRecord r;
  r.image_id = "img";
  r.perception_score = p;
  return r;
}

/// Regenerates the scene it was given with Road and Sky exchanged.
class SwapRoadSky final : public TextToImage {
 public:
  explicit SwapRoadSky(SegmentationRatio original) : seg_(original) {}
  Tensor render(const std::string&) override {
    SegmentationRatio s = seg_;
    std::swap(s[category::kRoad], s[category::kSky]);
    Rng rng(0);
    return render_segmented_scene(s, 20, 20, 0, rng);
  }

 private:
  SegmentationRatio seg_;
};

class IdentityTextToImage final : public TextToImage {
 public:
  explicit IdentityTextToImage(Tensor image) : image_(std::move(image)) {}
  Tensor render(const std::string&) override { return image_; }

 private:
  Tensor image_;
};

class FailingTextToImage final : public TextToImage {
 public:
  Tensor render(const std::string&) override { throw AdapterError("backend offline"); }
};

struct Encoders {
  UrbanVlpModel model = UrbanVlpModel::init(ModelConfig{});
  ClipEncoders clip() const { return {&model.image, &model.text, 1.0}; }
};

}  // namespace

TEST(CycleScore, HandCases) {
  SegmentationRatio a, b;
  a[0] = 1.0;
  b[1] = 1.0;
  EXPECT_NEAR(cycle_score(a, b), 11.0 / 13.0, 1e-10);
  EXPECT_NEAR(cycle_score(a, b), 0.8462, 1e-4);
  EXPECT_NEAR(cycle_score(road_sky(0.3, 0.25), road_sky(0.25, 0.3)), 1.0 - 0.1 / 13.0, 1e-10);
  EXPECT_NEAR(cycle_score(road_sky(0.3, 0.25), road_sky(0.25, 0.3)), 0.99231, 1e-5);
  EXPECT_EQ(cycle_score(a, a), 1.0);
}

TEST(CycleScore, SymmetryAndBounds) {
  Rng rng(3);
  auto random_ratio = [&] {
    SegmentationRatio r;
    double left = 1.0;
    for (std::size_t c = 0; c < kCategoryCount; ++c) {
      r[c] = rng.uniform(0.0, left);
      left -= r[c];
    }
    return r;
  };
  for (int i = 0; i < 200; ++i) {
    auto a = random_ratio(), b = random_ratio(), c = random_ratio();
    EXPECT_EQ(cycle_score(a, b), cycle_score(b, a));
    EXPECT_GE(cycle_score(a, b), 0.0);
    EXPECT_LE(cycle_score(a, b), 1.0);
    EXPECT_LE(std::abs(cycle_score(a, b) - cycle_score(a, c)), segmentation_mae(b, c) + 1e-15);
  }
}

TEST(ClipScore, ClampedCosine) {
  Tensor x = Tensor::vector({1, 2, 3});
  EXPECT_NEAR(clip_score(x, x), 1.0, 1e-15);
  EXPECT_EQ(clip_score(Tensor::vector({1, 0}), Tensor::vector({0, 1})), 0.0);
  EXPECT_EQ(clip_score(Tensor::vector({1, 0}), Tensor::vector({-1, 0})), 0.0);
  EXPECT_NEAR(clip_score(Tensor::vector({1, 0}), Tensor::vector({1, 1})), std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(clip_score(Tensor::vector({1, 0}), Tensor::vector({1, 1}), 2.5), 1.0, 1e-15);
  EXPECT_THROW(clip_score(Tensor::vector({0, 0}), x), DimensionError);
  EXPECT_THROW(clip_score(Tensor::vector({0, 0}), Tensor::vector({1, 0})), NumericalError);
}

TEST(PerceptionScore, ExactMean) {
  EXPECT_EQ(perception_score(0.7, 0.9), (0.7 + 0.9) / 2.0);
  EXPECT_NEAR(perception_score(0.7, 0.9), 0.8, 1e-15);
}

TEST(Prompt, TemplateAndRendering) {
  const std::string p = build_prompt("Beijing", 39.9042, 116.4074, road_sky(0.3, 0.25));
  EXPECT_EQ(p,
            "Analyze the street-view panoramic image in Beijing in a comprehensive and detailed manner. The "
            "coordinate of the street-view image is 116.4074, 39.9042. The segmentation ratio of the street-view "
            "image is Road: 0.300, Sky: 0.250.");
  EXPECT_EQ(p, build_prompt("Beijing", 39.9042, 116.4074, road_sky(0.3, 0.25)));
  const std::string empty = build_prompt("Beijing", 39.9042, 116.4074, SegmentationRatio{});
  EXPECT_NE(empty.find("street-view image is ."), std::string::npos);
  SegmentationRatio tiny = road_sky(0.3, 0.0009);
  EXPECT_EQ(build_prompt("X", 0, 0, tiny).find("Sky"), std::string::npos);
  EXPECT_THROW(build_prompt("X", 95.0, 0.0, tiny), DataError);
}

TEST(Segmentation, RenderedScenesReadBack) {
  Rng rng(1);
  const auto seg = road_sky(0.3, 0.25);
  Tensor img = render_segmented_scene(seg, 20, 20, 2, rng);
  EXPECT_EQ(palette_segment(img), seg);
  EXPECT_EQ(parse_caption(format_caption(seg, 40)), seg);
}

TEST(PerceptionPipeline, IdentityRegenerationGivesUnitCycle) {
  Encoders enc;
  Rng rng(2);
  Tensor img = render_segmented_scene(road_sky(0.5, 0.2), 32, 32, 2, rng);
  ModelAdapters ad{nullptr, std::make_shared<IdentityTextToImage>(img), std::make_shared<MockSegmenter>()};
  auto rec = score_caption("a", img, "road .50 sky .20", "prompt", ad, enc.clip());
  EXPECT_EQ(rec.cycle_score, 1.0);
  EXPECT_EQ(rec.perception_score, (rec.clip_score + 1.0) / 2.0);
  EXPECT_GE(rec.clip_score, 0.0);
  EXPECT_LE(rec.clip_score, 1.0);
}

TEST(PerceptionPipeline, SwappedRoadAndSky) {
  Encoders enc;
  Rng rng(0);
  const auto seg = road_sky(0.3, 0.25);
  Tensor img = render_segmented_scene(seg, 20, 20, 0, rng);
  ModelAdapters ad{nullptr, std::make_shared<SwapRoadSky>(seg), std::make_shared<MockSegmenter>()};
  auto rec = score_caption("a", img, "road .30 sky .25", "", ad, enc.clip());
  EXPECT_NEAR(rec.cycle_score, 1.0 - 0.1 / 13.0, 1e-10);
}

TEST(PerceptionPipeline, AdapterFailureIsAnErrorRecord) {
  Encoders enc;
  Rng rng(0);
  Tensor img = render_segmented_scene(road_sky(0.3, 0.25), 32, 32, 0, rng);
  ModelAdapters ad{nullptr, std::make_shared<FailingTextToImage>(), std::make_shared<MockSegmenter>()};
  auto rec = score_caption("a", img, "road .30", "", ad, enc.clip());
  EXPECT_EQ(rec.status, CaptionStatus::kError);
  EXPECT_NE(rec.error.find("backend offline"), std::string::npos);
  auto res = calibrate_dataset({rec});
  EXPECT_EQ(res.errors.size(), 1u);
  EXPECT_TRUE(res.kept.empty());
  EXPECT_TRUE(res.dropped.empty());
}

TEST(Threshold, StrictLowerBoundary) {
  auto res = calibrate_dataset({scored(0.59), scored(0.6), scored(0.61)});
  EXPECT_EQ(res.dropped.size(), 1u);
  EXPECT_EQ(res.kept.size(), 2u);
  EXPECT_EQ(res.dropped[0].perception_score, 0.59);
  EXPECT_EQ(res.kept[0].status, CaptionStatus::kKept);
  EXPECT_EQ(res.dropped[0].status, CaptionStatus::kDropped);
  EXPECT_EQ(res.histogram.total(), 3u);
}

TEST(Threshold, ZeroKeepsEverythingAndEmptyIsEmpty) {
  EXPECT_EQ(calibrate_dataset({scored(0.0), scored(0.3)}, 0.0).kept.size(), 2u);
  auto empty = calibrate_dataset({});
  EXPECT_TRUE(empty.kept.empty());
  EXPECT_TRUE(empty.dropped.empty());
  EXPECT_EQ(empty.histogram.total(), 0u);
}

TEST(Threshold, Idempotent) {
  Rng rng(4);
  std::vector<CaptionRecord> recs;
  for (int i = 0; i < 300; ++i) recs.push_back(scored(rng.uniform()));
  auto once = calibrate_dataset(recs);
  auto twice = calibrate_dataset(once.kept);
  EXPECT_TRUE(twice.dropped.empty());
  EXPECT_EQ(twice.kept.size(), once.kept.size());
}

TEST(Histogram, Binning) {
  ScoreHistogram h;
  h.add(0.0);
  h.add(0.049);
  h.add(0.05);
  h.add(1.0);
  EXPECT_EQ(h.counts[0], 2u);
  EXPECT_EQ(h.counts[1], 1u);
  EXPECT_EQ(h.counts[19], 1u);
}

TEST(Records, JsonlRoundTrip) {
  CaptionRecord r = scored(0.75);
  r.text = "road .30 \"quoted\"";
  r.prompt = "p";
  r.clip_score = 0.5;
  r.cycle_score = 1.0;
  r.status = CaptionStatus::kKept;
  std::stringstream ss;
  write_records_jsonl(ss, {r, r});
  auto back = read_records_jsonl(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].text, r.text);
  EXPECT_EQ(back[0].perception_score, 0.75);
  EXPECT_EQ(back[1].status, CaptionStatus::kKept);
  std::stringstream bad("{\"image_id\": 1}\n");
  EXPECT_THROW(read_records_jsonl(bad), DataError);
}

namespace {

std::vector<CaptionRecord> mock_run(const Dataset& ds, const UrbanVlpModel& model, std::size_t limit) {
  ModelAdapters ad = mock_adapters(7, 32, 32, 30);
  ClipEncoders enc{&model.image, &model.text, 1.0};
  std::vector<CaptionRecord> out;
  for (const auto& r : ds.regions)
    for (std::size_t s = 0; s < r.street_views.size() && out.size() < limit; ++s) {
      const auto& v = r.street_views[s];
      out.push_back(caption_and_score(r.id + "/" + std::to_string(s), v.image, ds.city, v.lat, v.lon, ad, enc));
    }
  return out;
}

}  // namespace

TEST(MockCalibration, ThousandRecordsDeterministicAndFast) {
  GeneratorConfig g;
  g.seed = 5;
  g.regions = 500;
  Dataset ds = generate_synthetic_city(g);
  UrbanVlpModel model = UrbanVlpModel::init(ModelConfig{});
  const auto t0 = std::chrono::steady_clock::now();
  auto a = calibrate_dataset(mock_run(ds, model, 1000));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(secs, 30.0);
  EXPECT_EQ(a.kept.size() + a.dropped.size() + a.errors.size(), 1000u);
  EXPECT_TRUE(a.errors.empty());
  auto b = calibrate_dataset(mock_run(ds, model, 1000));
  std::stringstream sa, sb;
  write_records_jsonl(sa, a.kept);
  write_records_jsonl(sa, a.dropped);
  write_records_jsonl(sb, b.kept);
  write_records_jsonl(sb, b.dropped);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(a.histogram.counts, b.histogram.counts);
}

TEST(MockAdapters, HallucinationChangesCaption) {
  Rng rng(0);
  Tensor img = render_segmented_scene(road_sky(0.4, 0.2), 32, 32, 2, rng);
  MockImageToText honest(1, 30, 0.0), liar(1, 30, 1.0);
  EXPECT_EQ(honest.describe(img, ""), format_caption(palette_segment(img), 30));
  EXPECT_NE(liar.describe(img, ""), honest.describe(img, ""));
  EXPECT_EQ(liar.describe(img, ""), liar.describe(img, ""));
}

// Local server standing in for hosted models.
class HttpAdapters : public ::testing::Test {
 protected:
  void SetUp() override {
    server.Post("/describe", [this](const httplib::Request& req, httplib::Response& res) {
      auto body = nlohmann::json::parse(req.body);
      Tensor img = io::decode_png(io::base64_decode(body["image"].get<std::string>()), 3);
      last_prompt = body["prompt"].get<std::string>();
      res.set_content(nlohmann::json{{"text", format_caption(palette_segment(img), 30)}}.dump(), "application/json");
    });
    server.Post("/render", [](const httplib::Request& req, httplib::Response& res) {
      auto body = nlohmann::json::parse(req.body);
      Rng rng(0);
      Tensor img = render_segmented_scene(parse_caption(body["text"].get<std::string>()), 32, 32, 0, rng);
      res.set_content(nlohmann::json{{"image", io::base64_encode(io::encode_png(img))}}.dump(), "application/json");
    });
    server.Post("/flaky", [this](const httplib::Request&, httplib::Response& res) {
      if (flaky_calls++ < 2) {
        res.status = 503;
        return;
      }
      res.set_content(R"({"text": "sky .50"})", "application/json");
    });
    server.Post("/broken", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("not json", "text/plain");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  void TearDown() override {
    server.stop();
    thread.join();
  }
  HttpEndpoint endpoint(const std::string& path, int retries = 0) {
    return {"http://127.0.0.1:" + std::to_string(port), path, 5.0, retries};
  }

  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::string last_prompt;
  std::atomic<int> flaky_calls{0};
};

TEST_F(HttpAdapters, RoundTripThroughServer) {
  Rng rng(0);
  const auto seg = road_sky(0.5, 0.25);
  Tensor img = render_segmented_scene(seg, 32, 32, 0, rng);
  HttpImageToText i2t(endpoint("/describe"));
  EXPECT_EQ(i2t.describe(img, "hello"), format_caption(seg, 30));
  EXPECT_EQ(last_prompt, "hello");
  HttpTextToImage t2i(endpoint("/render"), 32, 32);
  EXPECT_EQ(palette_segment(t2i.render("road .50 sky .25")), seg);

  Encoders enc;
  ModelAdapters ad{std::make_shared<HttpImageToText>(endpoint("/describe")),
                   std::make_shared<HttpTextToImage>(endpoint("/render"), 32, 32), std::make_shared<MockSegmenter>()};
  auto rec = caption_and_score("x", img, "Beijing", 39.9, 116.4, ad, enc.clip());
  EXPECT_NE(rec.status, CaptionStatus::kError) << rec.error;
  EXPECT_EQ(rec.cycle_score, 1.0);
}

TEST_F(HttpAdapters, RetriesThenSucceeds) {
  HttpImageToText i2t(endpoint("/flaky", 2));
  Tensor img(Shape{4, 4, 3}, 0.5);
  EXPECT_EQ(i2t.describe(img, ""), "sky .50");
  EXPECT_EQ(flaky_calls.load(), 3);
}

TEST_F(HttpAdapters, FailuresSurfaceAsAdapterErrors) {
  Tensor img(Shape{4, 4, 3}, 0.5);
  EXPECT_THROW(HttpImageToText(endpoint("/flaky", 0)).describe(img, ""), AdapterError);
  EXPECT_THROW(HttpImageToText(endpoint("/broken")).describe(img, ""), AdapterError);
  EXPECT_THROW(HttpImageToText(endpoint("/missing")).describe(img, ""), AdapterError);
  HttpEndpoint dead{"http://127.0.0.1:1", "/x", 0.5, 0};
  EXPECT_THROW(HttpTextToImage(dead, 32, 32).render("sky .5"), AdapterError);
}
