#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "urbanvlp/encoders/transformer.hpp"

namespace urbanvlp {

/// Byte-level vocabulary. Bytes 0..2 are control characters that never occur
/// in captions, so their ids are reused for the special tokens.
namespace tokens {
inline constexpr int kPad = 0;
inline constexpr int kSos = 1;
inline constexpr int kEos = 2;
inline constexpr std::size_t kVocabSize = 256;
}  // namespace tokens

struct TextConfig {
  std::size_t vocab = tokens::kVocabSize;
  std::size_t max_length = 32;
  std::size_t dim = 32;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t ff_hidden = 64;
};

/// [SOS] bytes... [EOS]; special-valued bytes are mapped to a space.
/// Throws if the bracketed sequence exceeds `max_length`.
inline std::vector<int> tokenize(std::string_view text, std::size_t max_length) {
  if (text.size() + 2 > max_length) {
    throw DataError("text of " + std::to_string(text.size()) + " bytes exceeds token limit " +
                    std::to_string(max_length) + " (including [SOS]/[EOS])");
  }
  std::vector<int> ids;
  ids.reserve(text.size() + 2);
  ids.push_back(tokens::kSos);
  for (unsigned char ch : text) ids.push_back(ch <= tokens::kEos ? int{' '} : int{ch});
  ids.push_back(tokens::kEos);
  return ids;
}

/// tokenize() followed by [PAD] up to `max_length`.
inline std::vector<int> tokenize_padded(std::string_view text, std::size_t max_length) {
  auto ids = tokenize(text, max_length);
  ids.resize(max_length, tokens::kPad);
  return ids;
}

inline std::string detokenize(std::span<const int> ids) {
  std::string out;
  for (int id : ids)
    if (id > tokens::kEos) out.push_back(static_cast<char>(id));
  return out;
}

/// Position of the single [EOS]; validates the [SOS] ... [EOS] [PAD]* layout.
inline std::size_t validate_token_sequence(std::span<const int> ids, std::size_t max_length) {
  if (ids.size() > max_length) {
    throw DataError("token sequence of length " + std::to_string(ids.size()) + " exceeds maximum " +
                    std::to_string(max_length));
  }
  if (ids.empty() || ids[0] != tokens::kSos) throw DataError("token sequence must begin with [SOS]");
  const auto eos_count = std::count(ids.begin(), ids.end(), tokens::kEos);
  if (eos_count == 0) throw DataError("token sequence has no [EOS]");
  if (eos_count > 1) throw DataError("token sequence has more than one [EOS]");
  const auto eos = static_cast<std::size_t>(std::find(ids.begin(), ids.end(), tokens::kEos) - ids.begin());
  for (std::size_t i = 1; i < eos; ++i)
    if (ids[i] == tokens::kPad || ids[i] == tokens::kSos) throw DataError("special token inside text body");
  for (std::size_t i = eos + 1; i < ids.size(); ++i)
    if (ids[i] != tokens::kPad) throw DataError("only [PAD] may follow [EOS]");
  return eos;
}

struct TextEncoderParams {
  TextConfig config;
  Tensor token_embed;  // [V x d]
  Tensor pos_embed;    // [max_length x d]
  std::vector<BlockParams> blocks;
  LayerNormParams final_ln;

  static TextEncoderParams init(const TextConfig& cfg, Rng& rng) {
    if (cfg.heads == 0 || cfg.dim % cfg.heads != 0) {
      throw DimensionError("text dim " + std::to_string(cfg.dim) + " not divisible by heads");
    }
    TextEncoderParams p;
    p.config = cfg;
    p.token_embed = rng.normal_tensor({cfg.vocab, cfg.dim}, 0.5);
    p.pos_embed = rng.normal_tensor({cfg.max_length, cfg.dim}, 0.02);
    for (std::size_t l = 0; l < cfg.layers; ++l)
      p.blocks.push_back(BlockParams::init(cfg.dim, cfg.heads, cfg.ff_hidden, rng));
    p.final_ln = LayerNormParams::init(cfg.dim);
    return p;
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".token_embed", token_embed);
    f(prefix + ".pos_embed", pos_embed);
    for (std::size_t l = 0; l < blocks.size(); ++l) blocks[l].visit(prefix + ".block" + std::to_string(l), f);
    final_ln.visit(prefix + ".final_ln", f);
  }
};

/// Transformer text encoder. The global embedding is the final-layer
/// activation at [EOS]; tokens are all non-pad positions. [PAD] keys are
/// masked out of attention.
inline Encoded encode_text(Tape& tape, const TextEncoderParams& p, std::span<const int> ids) {
  const std::size_t eos = validate_token_sequence(ids, p.config.max_length);
  const std::size_t len = ids.size();
  Var emb = ops::embedding_lookup(tape.parameter(p.token_embed), ids);
  std::vector<std::size_t> positions(len);
  for (std::size_t i = 0; i < len; ++i) positions[i] = i;
  Var pos = ops::select_rows(tape.parameter(p.pos_embed), positions);
  Var z = ops::add(emb, pos);
  std::optional<std::vector<bool>> mask;
  if (len > eos + 1) {
    mask = std::vector<bool>(len, true);
    for (std::size_t i = eos + 1; i < len; ++i) (*mask)[i] = false;
  }
  for (const auto& block : p.blocks) z = encoder_block(tape, block, z, mask);
  z = layer_norm(tape, p.final_ln, z);
  std::vector<std::size_t> keep(eos + 1);
  for (std::size_t i = 0; i <= eos; ++i) keep[i] = i;
  return {ops::row(z, eos), ops::select_rows(z, std::move(keep))};
}

}  // namespace urbanvlp
