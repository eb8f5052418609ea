#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "urbanvlp/numerics/ops.hpp"
#include "urbanvlp/numerics/random.hpp"

namespace urbanvlp {

/// Affine map x W + b.
struct LinearParams {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out]

  static LinearParams init(std::size_t in, std::size_t out, Rng& rng) {
    return {rng.normal_tensor({in, out}, 1.0 / std::sqrt(static_cast<double>(in))),
            Tensor::zeros({out})};
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".weight", weight);
    f(prefix + ".bias", bias);
  }
};

inline Var linear(Tape& tape, const LinearParams& p, Var x) {
  return ops::add_row_broadcast(ops::matmul(x, tape.parameter(p.weight)), tape.parameter(p.bias));
}

struct LayerNormParams {
  Tensor gain;
  Tensor bias;

  static LayerNormParams init(std::size_t d) { return {Tensor({d}, 1.0), Tensor::zeros({d})}; }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".gain", gain);
    f(prefix + ".bias", bias);
  }
};

inline constexpr double kLayerNormEps = 1e-5;

inline Var layer_norm(Tape& tape, const LayerNormParams& p, Var x) {
  return ops::layer_norm(x, tape.parameter(p.gain), tape.parameter(p.bias), kLayerNormEps);
}

/// Two-layer feed-forward: linear -> GELU -> linear.
struct MlpParams {
  LinearParams fc1;
  LinearParams fc2;

  static MlpParams init(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng) {
    return {LinearParams::init(in, hidden, rng), LinearParams::init(hidden, out, rng)};
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    fc1.visit(prefix + ".fc1", f);
    fc2.visit(prefix + ".fc2", f);
  }
};

inline Var mlp(Tape& tape, const MlpParams& p, Var x) {
  return linear(tape, p.fc2, ops::gelu(linear(tape, p.fc1, x)));
}

struct AttentionParams {
  std::size_t heads = 1;
  LinearParams query, key, value, out;

  static AttentionParams init(std::size_t d, std::size_t heads, Rng& rng) {
    if (heads == 0 || d % heads != 0) {
      throw DimensionError("attention: width " + std::to_string(d) +
                           " is not divisible by head count " + std::to_string(heads));
    }
    return {heads, LinearParams::init(d, d, rng), LinearParams::init(d, d, rng),
            LinearParams::init(d, d, rng), LinearParams::init(d, d, rng)};
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    query.visit(prefix + ".query", f);
    key.visit(prefix + ".key", f);
    value.visit(prefix + ".value", f);
    out.visit(prefix + ".out", f);
  }
};

/// Bidirectional multi-head scaled dot-product self-attention over x[s x d].
/// Keys whose `key_mask` entry is false receive zero attention weight.
inline Var multi_head_attention(Tape& tape, const AttentionParams& p, Var x,
                                const std::optional<std::vector<bool>>& key_mask = std::nullopt) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2) throw DimensionError("attention expects [s x d], got " + shape_string(xv.shape()));
  const std::size_t s = xv.dim(0), d = xv.dim(1);
  if (p.heads == 0 || d % p.heads != 0) {
    throw DimensionError("attention: width " + std::to_string(d) +
                         " is not divisible by head count " + std::to_string(p.heads));
  }
  const std::size_t dh = d / p.heads;
  Var q = linear(tape, p.query, x);
  Var k = linear(tape, p.key, x);
  Var v = linear(tape, p.value, x);

  std::optional<Var> mask_bias;
  if (key_mask) {
    if (key_mask->size() != s) throw DimensionError("attention: key mask length mismatch");
    Tensor bias(Shape{s, s});
    for (std::size_t i = 0; i < s; ++i)
      for (std::size_t j = 0; j < s; ++j)
        if (!(*key_mask)[j]) bias(i, j) = -1e300;
    mask_bias = tape.constant(std::move(bias));
  }

  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> heads;
  heads.reserve(p.heads);
  for (std::size_t h = 0; h < p.heads; ++h) {
    Var qh = ops::slice_cols(q, h * dh, dh);
    Var kh = ops::slice_cols(k, h * dh, dh);
    Var vh = ops::slice_cols(v, h * dh, dh);
    Var scores = ops::scale(ops::matmul(qh, ops::transpose(kh)), inv_sqrt);
    if (mask_bias) scores = ops::add(scores, *mask_bias);
    heads.push_back(ops::matmul(ops::softmax_rows(scores), vh));
  }
  Var merged = p.heads == 1 ? heads.front() : ops::concat_last_axis(heads);
  return linear(tape, p.out, merged);
}

/// Pre-LN encoder block: x + MSA(LN(x)), then x + FF(LN(x)).
struct BlockParams {
  LayerNormParams ln_attn;
  AttentionParams attn;
  LayerNormParams ln_ff;
  MlpParams ff;

  static BlockParams init(std::size_t d, std::size_t heads, std::size_t ff_hidden, Rng& rng) {
    return {LayerNormParams::init(d), AttentionParams::init(d, heads, rng), LayerNormParams::init(d),
            MlpParams::init(d, ff_hidden, d, rng)};
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    ln_attn.visit(prefix + ".ln_attn", f);
    attn.visit(prefix + ".attn", f);
    ln_ff.visit(prefix + ".ln_ff", f);
    ff.visit(prefix + ".ff", f);
  }
};

inline Var encoder_block(Tape& tape, const BlockParams& p, Var x,
                         const std::optional<std::vector<bool>>& key_mask = std::nullopt) {
  Var h = ops::add(x, multi_head_attention(tape, p.attn, layer_norm(tape, p.ln_attn, x), key_mask));
  return ops::add(h, mlp(tape, p.ff, layer_norm(tape, p.ln_ff, h)));
}

/// Encoder output: one global embedding plus per-position tokens.
struct Encoded {
  Var global;  // [d]
  Var tokens;  // [n x d]
};

}  // namespace urbanvlp
