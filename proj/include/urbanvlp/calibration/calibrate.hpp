#pragma once

#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "urbanvlp/calibration/adapters.hpp"
#include "urbanvlp/calibration/scores.hpp"
#include "urbanvlp/encoders/image_encoder.hpp"
#include "urbanvlp/encoders/text_encoder.hpp"

namespace urbanvlp {

enum class CaptionStatus { kKept, kDropped, kError, kUnscored };

inline std::string to_string(CaptionStatus s) {
  switch (s) {
    case CaptionStatus::kKept: return "kept";
    case CaptionStatus::kDropped: return "dropped";
    case CaptionStatus::kError: return "error";
    case CaptionStatus::kUnscored: return "unscored";
  }
  return "unscored";
}

inline CaptionStatus parse_caption_status(const std::string& s) {
  if (s == "kept") return CaptionStatus::kKept;
  if (s == "dropped") return CaptionStatus::kDropped;
  if (s == "error") return CaptionStatus::kError;
  if (s == "unscored") return CaptionStatus::kUnscored;
  throw DataError("unknown caption status '" + s + "'");
}

struct CaptionRecord {
  std::string image_id;
  std::string text;
  std::string prompt;
  double clip_score = 0.0;
  double cycle_score = 0.0;
  double perception_score = 0.0;
  CaptionStatus status = CaptionStatus::kUnscored;
  std::string error;
};

/// Embedding models used for CLIPScore.
struct ClipEncoders {
  const ImageEncoderParams* image = nullptr;
  const TextEncoderParams* text = nullptr;
  double rescale = 1.0;
};

/// Global embeddings of an image/text pair, each l2-normalized. Text longer
/// than the encoder context is truncated.
inline std::pair<Tensor, Tensor> clip_embeddings(const ClipEncoders& enc, const Tensor& image, const std::string& text) {
  Tape tape;
  tape.set_grad_enabled(false);
  Tensor img = image;
  const auto& vc = enc.image->config;
  if (img.shape() != Shape{vc.height, vc.width, vc.channels}) img = center_crop_resize(img, vc.height, vc.width);
  Var zi = ops::l2_normalize_rows(encode_image(tape, *enc.image, img).global);
  const std::size_t limit = enc.text->config.max_length - 2;
  const auto ids = tokenize(std::string_view(text).substr(0, limit), enc.text->config.max_length);
  Var zt = ops::l2_normalize_rows(encode_text(tape, *enc.text, ids).global);
  return {zi.value(), zt.value()};
}

/// Scores one caption: I' = text_to_image(text); CLIPScore on the encoders,
/// CycleScore on segmentations of I and I', PerceptionScore as their mean.
/// Adapter or numerical failures produce an error record.
inline CaptionRecord score_caption(std::string image_id, const Tensor& image, std::string text, std::string prompt,
                                   ModelAdapters& adapters, const ClipEncoders& encoders) {
  CaptionRecord rec;
  rec.image_id = std::move(image_id);
  rec.text = std::move(text);
  rec.prompt = std::move(prompt);
  try {
    const Tensor regenerated = adapters.text_to_image->render(rec.text);
    auto [zi, zt] = clip_embeddings(encoders, image, rec.text);
    rec.clip_score = clip_score(zi, zt, encoders.rescale);
    rec.cycle_score = cycle_score(adapters.segmenter->segment(image), adapters.segmenter->segment(regenerated));
    rec.perception_score = perception_score(rec.clip_score, rec.cycle_score);
  } catch (const std::exception& e) {
    rec.status = CaptionStatus::kError;
    rec.error = e.what();
  }
  return rec;
}

/// Prompt, caption and score for one image.
inline CaptionRecord caption_and_score(std::string image_id, const Tensor& image, std::string_view city, double lat,
                                       double lon, ModelAdapters& adapters, const ClipEncoders& encoders) {
  std::string prompt;
  std::string text;
  try {
    prompt = build_prompt(city, lat, lon, adapters.segmenter->segment(image));
    text = adapters.image_to_text->describe(image, prompt);
  } catch (const std::exception& e) {
    CaptionRecord rec;
    rec.image_id = std::move(image_id);
    rec.prompt = std::move(prompt);
    rec.status = CaptionStatus::kError;
    rec.error = e.what();
    return rec;
  }
  return score_caption(std::move(image_id), image, std::move(text), std::move(prompt), adapters, encoders);
}

/// Fixed-width histogram over [0, 1]; a score of exactly 1 lands in the last bin.
struct ScoreHistogram {
  std::vector<std::size_t> counts;

  explicit ScoreHistogram(std::size_t bins = 20) : counts(bins, 0) {}

  void add(double score) {
    const auto bins = counts.size();
    auto b = static_cast<std::size_t>(std::clamp(score, 0.0, 1.0) * static_cast<double>(bins));
    ++counts[std::min(b, bins - 1)];
  }
  std::size_t total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

  void write_csv(std::ostream& out) const {
    out << "bin_lo,bin_hi,count\n";
    const double w = 1.0 / static_cast<double>(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) out << i * w << ',' << (i + 1) * w << ',' << counts[i] << '\n';
  }
};

struct CalibrationResult {
  std::vector<CaptionRecord> kept;
  std::vector<CaptionRecord> dropped;
  std::vector<CaptionRecord> errors;
  ScoreHistogram histogram;
};

inline constexpr double kDefaultPerceptionThreshold = 0.6;

/// Partitions scored records: dropped iff PerceptionScore < threshold.
inline CalibrationResult calibrate_dataset(std::vector<CaptionRecord> records,
                                           double threshold = kDefaultPerceptionThreshold) {
  CalibrationResult out;
  for (auto& r : records) {
    if (r.status == CaptionStatus::kError) {
      out.errors.push_back(std::move(r));
      continue;
    }
    out.histogram.add(r.perception_score);
    if (r.perception_score < threshold) {
      r.status = CaptionStatus::kDropped;
      out.dropped.push_back(std::move(r));
    } else {
      r.status = CaptionStatus::kKept;
      out.kept.push_back(std::move(r));
    }
  }
  return out;
}

inline nlohmann::json to_json(const CaptionRecord& r) {
  nlohmann::json j{{"image_id", r.image_id},
                   {"text", r.text},
                   {"prompt", r.prompt},
                   {"clip_score", r.clip_score},
                   {"cycle_score", r.cycle_score},
                   {"perception_score", r.perception_score},
                   {"status", to_string(r.status)}};
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

inline CaptionRecord caption_record_from_json(const nlohmann::json& j) {
  CaptionRecord r;
  r.image_id = j.at("image_id").get<std::string>();
  r.text = j.at("text").get<std::string>();
  r.prompt = j.at("prompt").get<std::string>();
  r.clip_score = j.at("clip_score").get<double>();
  r.cycle_score = j.at("cycle_score").get<double>();
  r.perception_score = j.at("perception_score").get<double>();
  r.status = parse_caption_status(j.at("status").get<std::string>());
  if (j.contains("error")) r.error = j["error"].get<std::string>();
  return r;
}

/// One JSON object per line.
inline void write_records_jsonl(std::ostream& out, const std::vector<CaptionRecord>& records) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

inline std::vector<CaptionRecord> read_records_jsonl(std::istream& in) {
  std::vector<CaptionRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(caption_record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("records line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace urbanvlp
