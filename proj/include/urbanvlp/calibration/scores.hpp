#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <string_view>

#include "urbanvlp/calibration/segmentation.hpp"
#include "urbanvlp/encoders/location_encoder.hpp"

namespace urbanvlp {

/// Street-view description prompt with the city, "lon, lat" at 4 decimals and
/// "Name: fraction" pairs at 3 decimals (fractions below 0.001 omitted).
inline std::string build_prompt(std::string_view city, double lat, double lon, const SegmentationRatio& seg) {
  validate_coordinates(lat, lon);
  char coord[64];
  std::snprintf(coord, sizeof coord, "%.4f, %.4f", lon, lat);
  std::string segments;
  for (std::size_t c = 0; c < kCategoryCount; ++c) {
    if (seg[c] < 0.001) continue;
    char frac[32];
    std::snprintf(frac, sizeof frac, "%.3f", seg[c]);
    if (!segments.empty()) segments += ", ";
    segments += std::string(kCategoryNames[c]) + ": " + frac;
  }
  return "Analyze the street-view panoramic image in " + std::string(city) +
         " in a comprehensive and detailed manner. The coordinate of the street-view image is " + coord +
         ". The segmentation ratio of the street-view image is " + segments + ".";
}

/// Cosine similarity, scaled by `rescale` and clamped to [0, 1].
inline double clip_score(const Tensor& z_image, const Tensor& z_text, double rescale = 1.0) {
  if (z_image.size() != z_text.size()) throw DimensionError("clip_score: embedding sizes differ");
  double dot = 0.0, ni = 0.0, nt = 0.0;
  for (std::size_t i = 0; i < z_image.size(); ++i) {
    dot += z_image[i] * z_text[i];
    ni += z_image[i] * z_image[i];
    nt += z_text[i] * z_text[i];
  }
  if (ni == 0.0 || nt == 0.0) throw NumericalError("clip_score: zero embedding");
  const double cosine = dot / (std::sqrt(ni) * std::sqrt(nt));
  return std::clamp(rescale * cosine, 0.0, 1.0);
}

/// 1 - MAE over the 13 category fractions.
inline double cycle_score(const SegmentationRatio& original, const SegmentationRatio& regenerated) {
  return 1.0 - segmentation_mae(original, regenerated);
}

inline double perception_score(double clip, double cycle) { return (clip + cycle) / 2.0; }

}  // namespace urbanvlp
