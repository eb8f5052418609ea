#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "urbanvlp/numerics/random.hpp"

namespace urbanvlp {

inline constexpr std::size_t kCategoryCount = 13;

/// Street-view element groups, in the canonical order used everywhere.
inline constexpr std::array<std::string_view, kCategoryCount> kCategoryNames{
    "Person", "Bike", "Heavy Vehicle", "Light Vehicle", "Facade", "Window & Opening", "Road",
    "Sidewalk", "Street Furniture", "Greenery-Tree", "Greenery-Grass & Shrubs", "Sky", "Nature"};

/// One-word codes used inside short captions.
inline constexpr std::array<std::string_view, kCategoryCount> kCategoryCodes{
    "person", "bike", "truck", "car", "facade", "window", "road",
    "walk", "furniture", "tree", "grass", "sky", "nature"};

namespace category {
inline constexpr std::size_t kFacade = 4;
inline constexpr std::size_t kRoad = 6;
inline constexpr std::size_t kSky = 11;
}  // namespace category

/// Area fraction per category. Fractions need not sum to one: the remainder
/// is unlabeled area.
struct SegmentationRatio {
  std::array<double, kCategoryCount> fractions{};

  double& operator[](std::size_t c) { return fractions[c]; }
  double operator[](std::size_t c) const { return fractions[c]; }

  double total() const { return std::accumulate(fractions.begin(), fractions.end(), 0.0); }

  void validate() const {
    for (std::size_t c = 0; c < kCategoryCount; ++c) {
      if (!(fractions[c] >= 0.0 && fractions[c] <= 1.0)) {
        throw DataError("segmentation fraction for " + std::string(kCategoryNames[c]) + " outside [0, 1]");
      }
    }
    if (total() > 1.0 + 1e-9) throw DataError("segmentation fractions sum above 1");
  }

  friend bool operator==(const SegmentationRatio&, const SegmentationRatio&) = default;
};

/// Mean absolute difference over the 13 categories.
inline double segmentation_mae(const SegmentationRatio& a, const SegmentationRatio& b) {
  double s = 0.0;
  for (std::size_t c = 0; c < kCategoryCount; ++c) s += std::abs(a[c] - b[c]);
  return s / static_cast<double>(kCategoryCount);
}

/// Fixed colors for the 13 categories plus unlabeled (last). Every pair
/// differs by at least 127/255 in some channel.
inline constexpr std::array<std::array<int, 3>, kCategoryCount + 1> kPalette{{
    {255, 0, 0}, {0, 255, 0}, {0, 0, 255}, {255, 255, 0}, {255, 0, 255}, {0, 255, 255},
    {128, 128, 128}, {255, 128, 0}, {128, 0, 255}, {0, 128, 0}, {128, 255, 128},
    {128, 200, 255}, {128, 64, 0}, {0, 0, 0}}};

inline constexpr std::size_t kUnlabeled = kCategoryCount;

/// Vertical stacking order for rendered scenes: sky on top, ground last.
inline constexpr std::array<std::size_t, kCategoryCount + 1> kRenderOrder{
    11, 12, 9, 4, 5, 10, 8, 0, 1, 3, 2, 7, 6, kUnlabeled};

/// Pixel counts per class (categories then unlabeled) by largest remainder.
inline std::array<std::size_t, kCategoryCount + 1> allocate_pixels(const SegmentationRatio& ratio,
                                                                     std::size_t pixels) {
  std::array<double, kCategoryCount + 1> share{};
  double used = 0.0;
  for (std::size_t c = 0; c < kCategoryCount; ++c) {
    share[c] = std::clamp(ratio[c], 0.0, 1.0);
    used += share[c];
  }
  if (used > 1.0)
    for (std::size_t c = 0; c < kCategoryCount; ++c) share[c] /= used;
  share[kUnlabeled] = std::max(0.0, 1.0 - std::min(used, 1.0));
  std::array<std::size_t, kCategoryCount + 1> counts{};
  std::array<double, kCategoryCount + 1> rem{};
  std::size_t assigned = 0;
  for (std::size_t c = 0; c <= kCategoryCount; ++c) {
    const double exact = share[c] * static_cast<double>(pixels);
    counts[c] = static_cast<std::size_t>(std::floor(exact));
    rem[c] = exact - static_cast<double>(counts[c]);
    assigned += counts[c];
  }
  std::array<std::size_t, kCategoryCount + 1> order{};
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t i = 0; assigned < pixels; ++i, ++assigned) ++counts[order[i % order.size()]];
  return counts;
}

/// Renders a scene whose palette segmentation reproduces `ratio` up to pixel
/// quantization. Classes fill the raster in kRenderOrder; a uniform texture of
/// +-`texture` (in 8-bit steps) is added and values snap to the k/255 grid.
inline Tensor render_segmented_scene(const SegmentationRatio& ratio, std::size_t height, std::size_t width,
                                     int texture, Rng& rng) {
  const std::size_t pixels = height * width;
  const auto counts = allocate_pixels(ratio, pixels);
  Tensor image(Shape{height, width, 3});
  std::size_t p = 0;
  for (std::size_t cls : kRenderOrder) {
    for (std::size_t k = 0; k < counts[cls]; ++k, ++p) {
      for (std::size_t ch = 0; ch < 3; ++ch) {
        int v = kPalette[cls][ch];
        if (texture > 0) v += static_cast<int>(rng.index(0, 2 * static_cast<std::size_t>(texture))) - texture;
        image[p * 3 + ch] = std::clamp(v, 0, 255) / 255.0;
      }
    }
  }
  return image;
}

/// Nearest-palette-color pixel classification.
inline SegmentationRatio palette_segment(const Tensor& image) {
  if (image.rank() != 3 || image.dim(2) != 3) {
    throw DimensionError("segmenter expects an RGB image, got " + shape_string(image.shape()));
  }
  const std::size_t pixels = image.dim(0) * image.dim(1);
  std::array<std::size_t, kCategoryCount + 1> counts{};
  for (std::size_t p = 0; p < pixels; ++p) {
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::size_t c = 0; c <= kCategoryCount; ++c) {
      double d = 0.0;
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const double diff = image[p * 3 + ch] * 255.0 - kPalette[c][ch];
        d += diff * diff;
      }
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    ++counts[best];
  }
  SegmentationRatio r;
  for (std::size_t c = 0; c < kCategoryCount; ++c) r[c] = static_cast<double>(counts[c]) / static_cast<double>(pixels);
  return r;
}

/// Categories ordered by decreasing fraction (ties by category index).
inline std::vector<std::size_t> dominant_categories(const SegmentationRatio& r) {
  std::vector<std::size_t> order(kCategoryCount);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return r[a] > r[b]; });
  return order;
}

inline std::string format_fraction_short(double v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.2f", std::clamp(v, 0.0, 1.0));
  std::string s = buf;
  if (s.rfind("0.", 0) == 0) s.erase(0, 1);
  return s;
}

/// "road .31 sky .25 facade .12": dominant categories with fraction >= 0.005,
/// as many as fit in `max_bytes`, after an optional prefix.
inline std::string format_caption(const SegmentationRatio& r, std::size_t max_bytes, std::string_view prefix = "") {
  std::string out(prefix);
  for (std::size_t c : dominant_categories(r)) {
    if (r[c] < 0.005) break;
    std::string item = std::string(kCategoryCodes[c]) + " " + format_fraction_short(r[c]);
    const std::size_t need = out.empty() ? item.size() : out.size() + 1 + item.size();
    if (need > max_bytes) break;
    if (!out.empty()) out += ' ';
    out += item;
  }
  return out;
}

/// Reads "code value" pairs from a caption; unknown words are skipped and
/// unmentioned categories are zero.
inline SegmentationRatio parse_caption(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::vector<std::string> words;
  for (std::string w; in >> w;) words.push_back(w);
  SegmentationRatio r;
  for (std::size_t i = 0; i + 1 < words.size(); ++i) {
    auto it = std::find(kCategoryCodes.begin(), kCategoryCodes.end(), words[i]);
    if (it == kCategoryCodes.end()) continue;
    try {
      std::size_t used = 0;
      const double v = std::stod(words[i + 1], &used);
      if (used == words[i + 1].size()) r[static_cast<std::size_t>(it - kCategoryCodes.begin())] = std::clamp(v, 0.0, 1.0);
    } catch (const std::exception&) {
    }
  }
  return r;
}

}  // namespace urbanvlp
