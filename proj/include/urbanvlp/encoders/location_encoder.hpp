#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "urbanvlp/encoders/transformer.hpp"

namespace urbanvlp {

struct LocationConfig {
  std::size_t frequencies = 16;  // per scale
  std::size_t hidden = 64;
  std::size_t dim = 32;
  std::array<double, 3> scales{1.0, 16.0, 256.0};
  std::uint64_t seed = 0x6e0c11b5ull;
};

/// Frozen coordinate encoder: multi-scale random Fourier features of
/// equirectangular-normalized (lat, lon), then one hidden layer. Parameters
/// are drawn from a fixed seed and are never trained.
struct LocationEncoderParams {
  LocationConfig config;
  Tensor projection;  // [2 x F] with F = frequencies * scales
  MlpParams head;
  static constexpr bool frozen = true;

  static LocationEncoderParams init(const LocationConfig& cfg) {
    Rng rng(cfg.seed);
    LocationEncoderParams p;
    p.config = cfg;
    const std::size_t f = cfg.frequencies * cfg.scales.size();
    p.projection = Tensor(Shape{2, f});
    for (std::size_t s = 0; s < cfg.scales.size(); ++s)
      for (std::size_t k = 0; k < cfg.frequencies; ++k)
        for (std::size_t r = 0; r < 2; ++r)
          p.projection(r, s * cfg.frequencies + k) = rng.normal() * cfg.scales[s];
    p.head = MlpParams::init(2 * f, cfg.hidden, cfg.dim, rng);
    return p;
  }

  std::size_t feature_count() const { return 2 * projection.dim(1); }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".projection", projection);
    head.visit(prefix + ".head", f);
  }
};

inline void validate_coordinates(double lat, double lon) {
  if (!(lat >= -90.0 && lat <= 90.0) || !(lon >= -180.0 && lon <= 180.0)) {
    throw DataError("coordinate out of range: lat " + std::to_string(lat) + ", lon " + std::to_string(lon));
  }
}

/// [sin(2 pi x B), cos(2 pi x B)] for x = (lat / 90, lon / 180).
inline Tensor fourier_features(const LocationEncoderParams& p, double lat, double lon) {
  validate_coordinates(lat, lon);
  const std::size_t f = p.projection.dim(1);
  const double x0 = lat / 90.0, x1 = lon / 180.0;
  Tensor out(Shape{1, 2 * f});
  for (std::size_t k = 0; k < f; ++k) {
    const double phase = 2.0 * std::numbers::pi * (x0 * p.projection(0, k) + x1 * p.projection(1, k));
    out(0, k) = std::sin(phase);
    out(0, f + k) = std::cos(phase);
  }
  return out;
}

/// z_L for one coordinate; all parameters enter the tape as constants.
inline Var encode_location(Tape& tape, const LocationEncoderParams& p, double lat, double lon) {
  Var feats = tape.constant(fourier_features(p, lat, lon));
  const auto& h = p.head;
  Var hidden = ops::gelu(ops::add_row_broadcast(ops::matmul(feats, tape.frozen(h.fc1.weight)),
                                                tape.frozen(h.fc1.bias)));
  Var out = ops::add_row_broadcast(ops::matmul(hidden, tape.frozen(h.fc2.weight)), tape.frozen(h.fc2.bias));
  return ops::row(out, 0);
}

}  // namespace urbanvlp
