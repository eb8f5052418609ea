#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "urbanvlp/encoders/transformer.hpp"

namespace urbanvlp {

/// Aggr: a shared per-slot feed-forward transform followed by a masked mean
/// over the valid slots. A region with no valid slot aggregates to zeros.
inline Var aggregate(Tape& tape, const MlpParams& params, Var features, const std::vector<bool>& mask) {
  const Tensor& fv = features.value();
  if (fv.rank() != 2) throw DimensionError("aggregate expects [m x d], got " + shape_string(fv.shape()));
  if (mask.size() != fv.dim(0)) {
    throw DimensionError("aggregate: mask length " + std::to_string(mask.size()) + " for " +
                         std::to_string(fv.dim(0)) + " slots");
  }
  if (params.fc1.weight.dim(0) != fv.dim(1)) {
    throw DimensionError("aggregate: slot width " + std::to_string(fv.dim(1)) + " does not match transform input " +
                         std::to_string(params.fc1.weight.dim(0)));
  }
  return ops::masked_mean_rows(mlp(tape, params, features), mask);
}

enum class FusionMode { kAddition, kConcat, kFeedForward };

inline std::string to_string(FusionMode m) {
  switch (m) {
    case FusionMode::kAddition: return "addition";
    case FusionMode::kConcat: return "concat";
    case FusionMode::kFeedForward: return "feedforward";
  }
  return "addition";
}

inline FusionMode parse_fusion_mode(std::string_view s) {
  if (s == "addition" || s == "add") return FusionMode::kAddition;
  if (s == "concat") return FusionMode::kConcat;
  if (s == "feedforward" || s == "feed-forward" || s == "ffn") return FusionMode::kFeedForward;
  throw UsageError("unknown fusion mode '" + std::string(s) + "' (addition|concat|feedforward)");
}

/// Parameters for the non-additive fusion variants. Only the set matching the
/// configured mode is trained.
struct FusionParams {
  FusionMode mode = FusionMode::kAddition;
  LinearParams concat_proj;  // [3d x d]
  MlpParams feed_forward;    // 3d -> hidden -> d

  static FusionParams init(FusionMode mode, std::size_t d, Rng& rng) {
    FusionParams p;
    p.mode = mode;
    p.concat_proj = LinearParams::init(3 * d, d, rng);
    p.feed_forward = MlpParams::init(3 * d, 2 * d, d, rng);
    return p;
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    if (mode == FusionMode::kConcat) concat_proj.visit(prefix + ".concat_proj", f);
    if (mode == FusionMode::kFeedForward) feed_forward.visit(prefix + ".feed_forward", f);
  }
};

/// f(z_sat, Aggr(sv), Aggr(loc)).
inline Var fuse(Tape& tape, const FusionParams& p, Var z_sat, Var aggr_sv, Var aggr_loc) {
  const Shape& s = z_sat.shape();
  if (s.size() != 1 || aggr_sv.shape() != s || aggr_loc.shape() != s) {
    throw DimensionError("fuse: dimension mismatch " + shape_string(s) + ", " + shape_string(aggr_sv.shape()) +
                         ", " + shape_string(aggr_loc.shape()));
  }
  switch (p.mode) {
    case FusionMode::kAddition:
      return ops::add(ops::add(z_sat, aggr_sv), aggr_loc);
    case FusionMode::kConcat: {
      Var cat = ops::reshape(ops::concat_last_axis({z_sat, aggr_sv, aggr_loc}), {1, 3 * s[0]});
      return ops::row(linear(tape, p.concat_proj, cat), 0);
    }
    case FusionMode::kFeedForward: {
      Var cat = ops::reshape(ops::concat_last_axis({z_sat, aggr_sv, aggr_loc}), {1, 3 * s[0]});
      return ops::row(mlp(tape, p.feed_forward, cat), 0);
    }
  }
  throw UsageError("unhandled fusion mode");
}

}  // namespace urbanvlp
