#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "urbanvlp/calibration/segmentation.hpp"
#include "urbanvlp/encoders/location_encoder.hpp"
#include "urbanvlp/encoders/text_encoder.hpp"
#include "urbanvlp/numerics/parallel.hpp"

namespace urbanvlp {

struct StreetView {
  Tensor image;  // [H x W x 3]
  double lat = 0.0;
  double lon = 0.0;
  std::string text;
};

struct RegionSample {
  std::string id;
  double lat = 0.0;  // cell center
  double lon = 0.0;
  Tensor satellite;  // [H x W x 3]
  std::string satellite_text;
  std::vector<StreetView> street_views;
  std::vector<double> targets;  // raw indicator values, K entries
  std::vector<bool> present;    // per-indicator availability
  std::vector<double> latent;   // generator factors; empty for external data
};

struct Indicator {
  std::string name;
  bool log_transform = false;
};

/// Planted-structure facts the generator knows about its own output.
struct GeneratorInfo {
  std::uint64_t seed = 0;
  std::uint64_t map_seed = 0;
  double noise = 0.0;
  std::size_t latent_dim = 0;
  /// Best achievable R^2 per indicator in transformed space: 1 - sigma^2 / Var(Y).
  std::vector<double> r2_ceiling;
};

struct Dataset {
  std::string city;
  std::vector<Indicator> indicators;
  std::vector<RegionSample> regions;
  std::uint64_t split_seed = 0;
  std::optional<GeneratorInfo> generator;

  std::size_t indicator_count() const { return indicators.size(); }
};

/// Region indices per split.
struct Split {
  std::vector<std::size_t> train, val, test;
};

/// Uniform random 7:1:2 partition; val and test sizes are rounded, train takes
/// the remainder.
inline Split split_dataset(std::size_t region_count, std::uint64_t seed) {
  if (region_count < 10) {
    throw DataError("split needs at least 10 regions, got " + std::to_string(region_count));
  }
  std::vector<std::size_t> order(region_count);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "split"));
  for (std::size_t i = region_count; i > 1; --i) std::swap(order[i - 1], order[rng.index(0, i - 1)]);
  const auto n = static_cast<double>(region_count);
  const auto n_val = static_cast<std::size_t>(std::lround(0.1 * n));
  const auto n_test = static_cast<std::size_t>(std::lround(0.2 * n));
  Split s;
  s.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  s.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test),
               order.begin() + static_cast<std::ptrdiff_t>(n_test + n_val));
  s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test + n_val), order.end());
  for (auto* part : {&s.train, &s.val, &s.test}) std::sort(part->begin(), part->end());
  return s;
}

inline const std::vector<std::string>& default_indicator_names() {
  static const std::vector<std::string> names{"carbon", "population", "gdp", "night_light", "house_price", "poi"};
  return names;
}

struct GeneratorConfig {
  std::uint64_t seed = 0;
  /// Seed of the city's planted map (rendering basis, category and indicator
  /// matrices). Cities generated with the same map seed share structure.
  std::optional<std::uint64_t> map_seed;
  std::string city = "synthetic";
  std::size_t regions = 100;
  std::size_t max_street_views = 4;
  std::size_t indicators = 3;
  std::size_t latent_dim = 3;
  double noise = 0.0;            // sigma of the indicator noise
  double street_view_jitter = 0.3;  // per-view perturbation of the factors
  /// Satellite tiles are split into grid x grid cells; the factors are
  /// visible in `signal_cells` of them (chosen per map) and the rest show
  /// region-specific distractor land cover scaled by `nuisance`.
  std::size_t satellite_grid = 4;
  std::size_t signal_cells = 16;
  double nuisance = 1.0;
  std::size_t image_size = 32;
  std::size_t caption_bytes = 30;
  double origin_lat = 39.90;
  double origin_lon = 116.30;
  double cell_degrees = 0.01;

  void validate() const {
    if (regions < 10) throw DataError("generator needs at least 10 regions, got " + std::to_string(regions));
    if (max_street_views < 1) throw DataError("max_street_views must be at least 1");
    if (indicators < 1) throw DataError("indicator count must be at least 1");
    if (latent_dim < 1) throw DataError("latent_dim must be at least 1");
    if (noise < 0.0) throw DataError("indicator noise must be non-negative");
    if (image_size < 1) throw DataError("image_size must be positive");
    if (satellite_grid < 1 || image_size % satellite_grid != 0) {
      throw DataError("satellite_grid must divide image_size");
    }
    if (signal_cells < 1 || signal_cells > satellite_grid * satellite_grid) {
      throw DataError("signal_cells must be between 1 and satellite_grid^2");
    }
  }
};

/// Structure shared by every region of a generated city.
struct PlantedMap {
  std::size_t latent_dim = 0;
  std::size_t image_size = 0;
  std::vector<Tensor> basis;      // latent_dim smooth patterns [H x W x 3]
  Tensor category_logits;         // [13 x r]
  std::vector<double> category_bias;
  Tensor indicator_map;           // [K x r], unit-norm rows
  std::size_t grid = 1;
  std::vector<bool> signal_cell;  // grid x grid, row-major

  std::uint64_t seed = 0;
};

namespace detail {

/// Sum of a few low-frequency plane waves with random channel mixing plus a
/// constant per-channel tint, scaled to unit RMS.
inline Tensor smooth_pattern(std::size_t size, Rng& rng, std::size_t waves, const std::array<double, 3>& tint) {
  Tensor out(Shape{size, size, 3});
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = tint[i % 3];
  for (std::size_t w = 0; w < waves; ++w) {
    const auto fy = static_cast<double>(rng.index(0, 2));
    const auto fx = static_cast<double>(rng.index(fy == 0.0 ? 1 : 0, 2));
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double amp = rng.normal();
    const std::array<double, 3> mix{rng.normal(), rng.normal(), rng.normal()};
    const auto n = static_cast<double>(size);
    for (std::size_t y = 0; y < size; ++y)
      for (std::size_t x = 0; x < size; ++x) {
        const double v = amp * std::cos(2.0 * std::numbers::pi * (fy * y / n + fx * x / n) + phase);
        for (std::size_t c = 0; c < 3; ++c) out[(y * size + x) * 3 + c] += mix[c] * v;
      }
  }
  double ss = 0.0;
  for (double v : out.data()) ss += v * v;
  const double rms = std::sqrt(ss / static_cast<double>(out.size()));
  if (rms > 0.0)
    for (auto& v : out.data()) v /= rms;
  return out;
}

inline double quantize_unit(double v) { return static_cast<double>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)) / 255.0; }

}  // namespace detail

inline PlantedMap make_planted_map(std::uint64_t map_seed, std::size_t latent_dim, std::size_t indicators,
                                   std::size_t image_size, std::size_t grid = 1, std::size_t signal_cells = 1) {
  PlantedMap m;
  m.seed = map_seed;
  m.latent_dim = latent_dim;
  m.image_size = image_size;
  m.grid = grid;
  {
    Rng cell_rng(derive_seed(map_seed, "signal_cells"));
    std::vector<std::size_t> cells(grid * grid);
    std::iota(cells.begin(), cells.end(), 0);
    for (std::size_t i = cells.size(); i > 1; --i) std::swap(cells[i - 1], cells[cell_rng.index(0, i - 1)]);
    m.signal_cell.assign(grid * grid, false);
    for (std::size_t i = 0; i < std::min(signal_cells, cells.size()); ++i) m.signal_cell[cells[i]] = true;
  }
  Rng basis_rng(derive_seed(map_seed, "satellite_basis"));
  // Tints of the first three factors are orthogonal so that mean color alone
  // separates them.
  std::vector<std::array<double, 3>> tints(latent_dim);
  for (std::size_t k = 0; k < latent_dim; ++k) {
    auto& t = tints[k];
    for (auto& v : t) v = basis_rng.normal();
    for (std::size_t j = 0; j < std::min<std::size_t>(k, 3); ++j) {
      const double proj = t[0] * tints[j][0] + t[1] * tints[j][1] + t[2] * tints[j][2];
      for (std::size_t c = 0; c < 3; ++c) t[c] -= proj * tints[j][c];
    }
    const double norm = std::sqrt(t[0] * t[0] + t[1] * t[1] + t[2] * t[2]);
    for (auto& v : t) v /= norm;
  }
  for (std::size_t k = 0; k < latent_dim; ++k) {
    std::array<double, 3> scaled = tints[k];
    for (auto& v : scaled) v *= 1.5 * std::sqrt(3.0);
    m.basis.push_back(detail::smooth_pattern(image_size, basis_rng, 3, scaled));
  }
  Rng cat_rng(derive_seed(map_seed, "category_logits"));
  m.category_logits = cat_rng.normal_tensor({kCategoryCount, latent_dim}, 1.0);
  m.category_bias.resize(kCategoryCount);
  for (auto& b : m.category_bias) b = cat_rng.normal(0.0, 0.5);
  Rng ind_rng(derive_seed(map_seed, "indicator_map"));
  m.indicator_map = ind_rng.normal_tensor({indicators, latent_dim}, 1.0);
  for (std::size_t k = 0; k < indicators; ++k) {
    double ss = 0.0;
    for (std::size_t j = 0; j < latent_dim; ++j) ss += m.indicator_map(k, j) * m.indicator_map(k, j);
    for (std::size_t j = 0; j < latent_dim; ++j) m.indicator_map(k, j) /= std::sqrt(ss);
  }
  return m;
}

/// softmax(B u + c) over the 13 categories.
inline SegmentationRatio planted_fractions(const PlantedMap& m, const std::vector<double>& u) {
  std::array<double, kCategoryCount> logits{};
  for (std::size_t c = 0; c < kCategoryCount; ++c) {
    logits[c] = m.category_bias[c];
    for (std::size_t j = 0; j < m.latent_dim; ++j) logits[c] += m.category_logits(c, j) * u[j];
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (auto& l : logits) z += (l = std::exp(l - mx));
  SegmentationRatio r;
  for (std::size_t c = 0; c < kCategoryCount; ++c) r[c] = logits[c] / z;
  return r;
}

/// 0.5 + 0.12 sum_k w_k basis_k / sqrt(r) with w = u inside signal cells and
/// w = nuisance * v (a region-specific distractor draw) elsewhere, plus pixel
/// texture, on the 8-bit grid.
inline Tensor render_satellite(const PlantedMap& m, const std::vector<double>& u, double nuisance, Rng& rng) {
  const std::size_t n = m.image_size;
  const std::size_t cell = n / m.grid;
  std::vector<double> v(m.latent_dim);
  for (auto& x : v) x = nuisance * rng.normal();
  Tensor out(Shape{n, n, 3});
  const double norm = 1.0 / std::sqrt(static_cast<double>(m.latent_dim));
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) {
      const auto& w = m.signal_cell[(y / cell) * m.grid + x / cell] ? u : v;
      for (std::size_t c = 0; c < 3; ++c) {
        const std::size_t i = (y * n + x) * 3 + c;
        double s = 0.0;
        for (std::size_t k = 0; k < m.latent_dim; ++k) s += w[k] * m.basis[k][i];
        out[i] = detail::quantize_unit(0.5 + 0.12 * s * norm + rng.uniform(-0.01, 0.01));
      }
    }
  return out;
}

/// Synthetic city with a planted linear indicator model Y = A u + eps.
/// Regions draw from their own derived streams, so `threads` does not change
/// the output.
inline Dataset generate_synthetic_city(const GeneratorConfig& cfg, std::size_t threads = 1) {
  cfg.validate();
  const auto& names = default_indicator_names();
  const std::uint64_t map_seed = cfg.map_seed.value_or(derive_seed(cfg.seed, "map"));
  const PlantedMap map = make_planted_map(map_seed, cfg.latent_dim, cfg.indicators, cfg.image_size, cfg.satellite_grid,
                                          cfg.signal_cells);

  Dataset ds;
  ds.city = cfg.city;
  ds.split_seed = derive_seed(cfg.seed, "split_seed");
  for (std::size_t k = 0; k < cfg.indicators; ++k) {
    Indicator ind;
    ind.name = k < names.size() ? names[k] : "indicator_" + std::to_string(k);
    ind.log_transform = ind.name != "night_light";
    ds.indicators.push_back(ind);
  }
  GeneratorInfo info;
  info.seed = cfg.seed;
  info.map_seed = map_seed;
  info.noise = cfg.noise;
  info.latent_dim = cfg.latent_dim;
  for (std::size_t k = 0; k < cfg.indicators; ++k) {
    double signal = 0.0;
    for (std::size_t j = 0; j < cfg.latent_dim; ++j) signal += map.indicator_map(k, j) * map.indicator_map(k, j);
    const double var = signal + cfg.noise * cfg.noise;
    info.r2_ceiling.push_back(1.0 - cfg.noise * cfg.noise / var);
  }
  ds.generator = info;

  const auto grid_cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(cfg.regions))));
  ds.regions.resize(cfg.regions);
  parallel_for(cfg.regions, threads, [&](std::size_t i) {
    Rng rng(derive_seed(cfg.seed, "region", i));
    RegionSample& r = ds.regions[i];
    char id[32];
    std::snprintf(id, sizeof id, "r%04zu", i);
    r.id = id;
    const double lat0 = cfg.origin_lat + static_cast<double>(i / grid_cols) * cfg.cell_degrees;
    const double lon0 = cfg.origin_lon + static_cast<double>(i % grid_cols) * cfg.cell_degrees;
    r.lat = lat0 + cfg.cell_degrees / 2.0;
    r.lon = lon0 + cfg.cell_degrees / 2.0;
    validate_coordinates(r.lat, r.lon);

    r.latent.resize(cfg.latent_dim);
    for (auto& v : r.latent) v = rng.normal();

    r.satellite = render_satellite(map, r.latent, cfg.nuisance, rng);
    r.satellite_text = format_caption(planted_fractions(map, r.latent), cfg.caption_bytes);

    const std::size_t views = rng.index(1, cfg.max_street_views);
    for (std::size_t s = 0; s < views; ++s) {
      std::vector<double> u = r.latent;
      for (auto& v : u) v += rng.normal(0.0, cfg.street_view_jitter);
      const SegmentationRatio frac = planted_fractions(map, u);
      StreetView sv;
      sv.lat = lat0 + rng.uniform(0.0, cfg.cell_degrees);
      sv.lon = lon0 + rng.uniform(0.0, cfg.cell_degrees);
      sv.image = render_segmented_scene(frac, cfg.image_size, cfg.image_size, 3, rng);
      sv.text = format_caption(frac, cfg.caption_bytes);
      r.street_views.push_back(std::move(sv));
    }

    for (std::size_t k = 0; k < cfg.indicators; ++k) {
      double y = rng.normal(0.0, 1.0) * cfg.noise;
      for (std::size_t j = 0; j < cfg.latent_dim; ++j) y += map.indicator_map(k, j) * r.latent[j];
      r.targets.push_back(ds.indicators[k].log_transform ? std::exp(y) : y);
      r.present.push_back(true);
    }
  });
  return ds;
}

/// Raw indicator column k over the given regions; missing entries skipped.
inline std::vector<double> indicator_column(const Dataset& ds, std::size_t k, const std::vector<std::size_t>& rows) {
  std::vector<double> out;
  for (std::size_t i : rows)
    if (ds.regions[i].present[k]) out.push_back(ds.regions[i].targets[k]);
  return out;
}

}  // namespace urbanvlp
