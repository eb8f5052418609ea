#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "urbanvlp/encoders/transformer.hpp"

namespace urbanvlp {

struct VitConfig {
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t channels = 3;
  std::size_t patch = 8;
  std::size_t dim = 32;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t ff_hidden = 64;
  /// Pixels enter as (x - pixel_mean) / pixel_std.
  double pixel_mean = 0.5;
  double pixel_std = 0.25;

  std::size_t patch_count() const { return (height / patch) * (width / patch); }
  std::size_t patch_size() const { return patch * patch * channels; }

  void validate() const {
    if (patch == 0 || height % patch != 0 || width % patch != 0) {
      throw DimensionError("patch size " + std::to_string(patch) + " must divide image " +
                           std::to_string(height) + "x" + std::to_string(width));
    }
    if (!(pixel_std > 0.0)) throw UsageError("pixel_std must be positive");
    if (heads == 0 || dim % heads != 0) {
      throw DimensionError("embed dim " + std::to_string(dim) + " not divisible by " +
                           std::to_string(heads) + " heads");
    }
  }
};

/// Splits image[H x W x C] into row-major patches, each flattened row-major
/// (y, x, channel) into a row of the result [N x P*P*C].
inline Tensor patchify(const Tensor& image, std::size_t patch) {
  if (image.rank() != 3) throw DimensionError("patchify expects [H x W x C], got " + shape_string(image.shape()));
  const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  if (patch == 0 || h % patch != 0 || w % patch != 0) {
    throw DimensionError("patch size " + std::to_string(patch) + " must divide image " +
                         shape_string(image.shape()));
  }
  const std::size_t gh = h / patch, gw = w / patch, len = patch * patch * c;
  Tensor out(Shape{gh * gw, len});
  for (std::size_t py = 0; py < gh; ++py)
    for (std::size_t px = 0; px < gw; ++px) {
      const std::size_t k = py * gw + px;
      std::size_t o = 0;
      for (std::size_t y = 0; y < patch; ++y)
        for (std::size_t x = 0; x < patch; ++x)
          for (std::size_t ch = 0; ch < c; ++ch)
            out(k, o++) = image[((py * patch + y) * w + px * patch + x) * c + ch];
    }
  return out;
}

/// Inverse of patchify.
inline Tensor unpatchify(const Tensor& patches, std::size_t h, std::size_t w, std::size_t c,
                         std::size_t patch) {
  const std::size_t gw = w / patch;
  if (patches.rank() != 2 || patches.dim(0) != (h / patch) * gw || patches.dim(1) != patch * patch * c) {
    throw DimensionError("unpatchify: patch matrix " + shape_string(patches.shape()) +
                         " does not fit image");
  }
  Tensor image(Shape{h, w, c});
  for (std::size_t k = 0; k < patches.dim(0); ++k) {
    const std::size_t py = k / gw, px = k % gw;
    std::size_t o = 0;
    for (std::size_t y = 0; y < patch; ++y)
      for (std::size_t x = 0; x < patch; ++x)
        for (std::size_t ch = 0; ch < c; ++ch)
          image[((py * patch + y) * w + px * patch + x) * c + ch] = patches(k, o++);
  }
  return image;
}

/// Center-crops to the target aspect ratio, then resizes bilinearly.
inline Tensor center_crop_resize(const Tensor& image, std::size_t out_h, std::size_t out_w) {
  if (image.rank() != 3) throw DimensionError("center_crop_resize expects [H x W x C]");
  const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  const double target = static_cast<double>(out_w) / static_cast<double>(out_h);
  double crop_w = static_cast<double>(w), crop_h = static_cast<double>(h);
  if (crop_w / crop_h > target) crop_w = crop_h * target;
  else crop_h = crop_w / target;
  const double x0 = (static_cast<double>(w) - crop_w) / 2.0;
  const double y0 = (static_cast<double>(h) - crop_h) / 2.0;
  Tensor out(Shape{out_h, out_w, c});
  auto at = [&](std::size_t y, std::size_t x, std::size_t ch) { return image[(y * w + x) * c + ch]; };
  for (std::size_t oy = 0; oy < out_h; ++oy)
    for (std::size_t ox = 0; ox < out_w; ++ox) {
      const double sy = std::clamp(y0 + (oy + 0.5) * crop_h / out_h - 0.5, 0.0, static_cast<double>(h - 1));
      const double sx = std::clamp(x0 + (ox + 0.5) * crop_w / out_w - 0.5, 0.0, static_cast<double>(w - 1));
      const auto y_lo = static_cast<std::size_t>(std::floor(sy));
      const auto x_lo = static_cast<std::size_t>(std::floor(sx));
      const std::size_t y_hi = std::min(y_lo + 1, h - 1), x_hi = std::min(x_lo + 1, w - 1);
      const double fy = sy - static_cast<double>(y_lo), fx = sx - static_cast<double>(x_lo);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double top = at(y_lo, x_lo, ch) * (1 - fx) + at(y_lo, x_hi, ch) * fx;
        const double bot = at(y_hi, x_lo, ch) * (1 - fx) + at(y_hi, x_hi, ch) * fx;
        out[(oy * out_w + ox) * c + ch] = top * (1 - fy) + bot * fy;
      }
    }
  return out;
}

inline Tensor horizontal_flip(const Tensor& image) {
  const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  Tensor out(image.shape());
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t ch = 0; ch < c; ++ch)
        out[(y * w + x) * c + ch] = image[(y * w + (w - 1 - x)) * c + ch];
  return out;
}

/// Random square crop covering `min_scale`..1 of the short side, resized back.
inline Tensor random_crop_resize(const Tensor& image, double min_scale, Rng& rng) {
  const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  const double s = rng.uniform(min_scale, 1.0);
  const auto side = std::max<std::size_t>(1, static_cast<std::size_t>(std::min(h, w) * s));
  const std::size_t y0 = rng.index(0, h - side), x0 = rng.index(0, w - side);
  Tensor crop(Shape{side, side, c});
  for (std::size_t y = 0; y < side; ++y)
    for (std::size_t x = 0; x < side; ++x)
      for (std::size_t ch = 0; ch < c; ++ch)
        crop[(y * side + x) * c + ch] = image[((y0 + y) * w + x0 + x) * c + ch];
  return center_crop_resize(crop, h, w);
}

struct ImageEncoderParams {
  VitConfig config;
  Tensor patch_proj;   // [P*P*C x d]
  Tensor patch_bias;   // [d]
  Tensor cls_token;    // [d]
  Tensor pos_embed;    // [(N + 1) x d]
  std::vector<BlockParams> blocks;
  LayerNormParams final_ln;

  static ImageEncoderParams init(const VitConfig& cfg, Rng& rng) {
    cfg.validate();
    ImageEncoderParams p;
    p.config = cfg;
    p.patch_proj = rng.normal_tensor({cfg.patch_size(), cfg.dim},
                                     1.0 / std::sqrt(static_cast<double>(cfg.patch_size())));
    p.patch_bias = rng.normal_tensor({cfg.dim}, 1.0);
    p.cls_token = rng.normal_tensor({cfg.dim}, 0.02);
    p.pos_embed = rng.normal_tensor({cfg.patch_count() + 1, cfg.dim}, 0.02);
    for (std::size_t l = 0; l < cfg.layers; ++l)
      p.blocks.push_back(BlockParams::init(cfg.dim, cfg.heads, cfg.ff_hidden, rng));
    p.final_ln = LayerNormParams::init(cfg.dim);
    return p;
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".patch_proj", patch_proj);
    f(prefix + ".patch_bias", patch_bias);
    f(prefix + ".cls_token", cls_token);
    f(prefix + ".pos_embed", pos_embed);
    for (std::size_t l = 0; l < blocks.size(); ++l) blocks[l].visit(prefix + ".block" + std::to_string(l), f);
    final_ln.visit(prefix + ".final_ln", f);
  }
};

/// Class-token ViT. The global embedding is final-layer position 0; tokens are
/// the remaining N patch positions.
inline Encoded encode_image(Tape& tape, const ImageEncoderParams& p, const Tensor& image) {
  const VitConfig& cfg = p.config;
  if (image.shape() != Shape{cfg.height, cfg.width, cfg.channels}) {
    throw DimensionError("encode_image: image " + shape_string(image.shape()) + " does not match config " +
                         shape_string({cfg.height, cfg.width, cfg.channels}));
  }
  Tensor flat = patchify(image, cfg.patch);
  for (auto& v : flat.data()) v = (v - cfg.pixel_mean) / cfg.pixel_std;
  Var patches = tape.constant(std::move(flat));
  Var embedded = ops::add_row_broadcast(ops::matmul(patches, tape.parameter(p.patch_proj)), tape.parameter(p.patch_bias));
  Var seq = ops::concat_rows({tape.parameter(p.cls_token), embedded});
  Var z = ops::add(seq, tape.parameter(p.pos_embed));
  for (const auto& block : p.blocks) z = encoder_block(tape, block, z);
  z = layer_norm(tape, p.final_ln, z);
  std::vector<std::size_t> rest(cfg.patch_count());
  for (std::size_t i = 0; i < rest.size(); ++i) rest[i] = i + 1;
  return {ops::row(z, 0), ops::select_rows(z, std::move(rest))};
}

}  // namespace urbanvlp
