#pragma once

#include <memory>
#include <string>

#include "urbanvlp/calibration/segmentation.hpp"
#include "urbanvlp/io/png.hpp"

namespace urbanvlp {

/// Failure inside an external-model adapter. Calibration records these as
/// error records instead of dropping the caption.
class AdapterError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ImageToText {
 public:
  virtual ~ImageToText() = default;
  virtual std::string describe(const Tensor& image, const std::string& prompt) = 0;
};

class TextToImage {
 public:
  virtual ~TextToImage() = default;
  virtual Tensor render(const std::string& text) = 0;
};

class Segmenter {
 public:
  virtual ~Segmenter() = default;
  virtual SegmentationRatio segment(const Tensor& image) = 0;
};

struct ModelAdapters {
  std::shared_ptr<ImageToText> image_to_text;
  std::shared_ptr<TextToImage> text_to_image;
  std::shared_ptr<Segmenter> segmenter;
};

namespace detail {

inline std::uint64_t hash_image(const Tensor& image) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (double v : image.data()) {
    h ^= static_cast<std::uint64_t>(std::llround(v * 255.0)) + 0x9e3779b97f4a7c15ull;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace detail

/// Reads fractions back from palette-rendered scenes.
class MockSegmenter final : public Segmenter {
 public:
  SegmentationRatio segment(const Tensor& image) override { return palette_segment(image); }
};

/// Captions an image from its segmentation. With probability
/// `hallucination_rate` (keyed on seed and image content) the two leading
/// fractions are swapped and a minor category is overstated.
class MockImageToText final : public ImageToText {
 public:
  MockImageToText(std::uint64_t seed, std::size_t max_bytes, double hallucination_rate = 0.2)
      : seed_(seed), max_bytes_(max_bytes), hallucination_rate_(hallucination_rate) {}

  std::string describe(const Tensor& image, const std::string& /*prompt*/) override {
    SegmentationRatio seg = palette_segment(image);
    Rng rng(splitmix64(seed_ ^ detail::hash_image(image)));
    if (rng.uniform() < hallucination_rate_) {
      const auto order = dominant_categories(seg);
      std::swap(seg[order[0]], seg[order[1]]);
      const std::size_t extra = order[kCategoryCount - 1 - rng.index(0, 3)];
      seg[extra] = std::min(1.0, seg[extra] + 0.3);
    }
    return format_caption(seg, max_bytes_);
  }

 private:
  std::uint64_t seed_;
  std::size_t max_bytes_;
  double hallucination_rate_;
};

/// Renders the fractions named in a caption, perturbed by N(0, noise^2)
/// keyed on (seed, text).
class MockTextToImage final : public TextToImage {
 public:
  MockTextToImage(std::uint64_t seed, std::size_t height, std::size_t width, double noise = 0.01)
      : seed_(seed), height_(height), width_(width), noise_(noise) {}

  Tensor render(const std::string& text) override {
    SegmentationRatio seg = parse_caption(text);
    Rng rng(splitmix64(seed_ ^ fnv1a64(text)));
    for (auto& f : seg.fractions)
      if (f > 0.0) f = std::clamp(f + rng.normal(0.0, noise_), 0.0, 1.0);
    return render_segmented_scene(seg, height_, width_, 2, rng);
  }

 private:
  std::uint64_t seed_;
  std::size_t height_, width_;
  double noise_;
};

inline ModelAdapters mock_adapters(std::uint64_t seed, std::size_t height, std::size_t width,
                                   std::size_t caption_bytes, double hallucination_rate = 0.2) {
  return {std::make_shared<MockImageToText>(derive_seed(seed, "image_to_text"), caption_bytes, hallucination_rate),
          std::make_shared<MockTextToImage>(derive_seed(seed, "text_to_image"), height, width),
          std::make_shared<MockSegmenter>()};
}

}  // namespace urbanvlp
