#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "urbanvlp/numerics/ops.hpp"

namespace urbanvlp {

/// Contrastive temperature: fixed, or learnable as a log-temperature leaf.
struct Temperature {
  double fixed = 0.07;
  std::optional<Var> log_tau;

  double value() const { return log_tau ? std::exp(log_tau->value().item()) : fixed; }
};

namespace detail {

inline Var divide_by_temperature(Var logits, const Temperature& t) {
  if (t.log_tau) return ops::scale_by(logits, ops::exp(ops::negate(*t.log_tau)));
  if (!(t.fixed > 0.0)) throw UsageError("temperature must be positive, got " + std::to_string(t.fixed));
  return ops::scale(logits, 1.0 / t.fixed);
}

inline void require_unit_rows(const Tensor& x, const char* what) {
  const std::size_t m = x.rows(), n = x.cols();
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += x[i * n + j] * x[i * n + j];
    if (std::abs(std::sqrt(s) - 1.0) > 1e-9) {
      throw DataError(std::string(what) + ": row " + std::to_string(i) + " is not unit-norm");
    }
  }
}

}  // namespace detail

/// Mean over both directions of -log softmax at the matched index:
///   0.5 * ( mean_i -log softmax_j(a2b[i, j])[i] + mean_i -log softmax_j(b2a[i, j])[i] ).
inline Var symmetric_info_nce(Var a2b_logits, Var b2a_logits) {
  const std::size_t n = a2b_logits.value().dim(0);
  std::vector<std::size_t> diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = i;
  Var fwd = ops::mean(ops::pick(ops::log_softmax_rows(a2b_logits), diag));
  Var bwd = ops::mean(ops::pick(ops::log_softmax_rows(b2a_logits), diag));
  return ops::scale(ops::add(fwd, bwd), -0.5);
}

/// L_CG over N fused region embeddings and N satellite-text embeddings, both
/// row-normalized. S = I T^T; image->text uses rows of S / tau and text->image
/// its columns.
inline Var global_contrastive_loss(Var image, Var text, const Temperature& tau) {
  const Tensor& iv = image.value();
  const Tensor& tv = text.value();
  if (iv.rank() != 2 || iv.shape() != tv.shape()) {
    throw DimensionError("global_contrastive_loss: shapes " + shape_string(iv.shape()) + " and " +
                         shape_string(tv.shape()) + " must be equal [N x d]");
  }
  if (iv.dim(0) < 2) throw DataError("global_contrastive_loss needs a batch of at least 2");
  detail::require_unit_rows(iv, "image embeddings");
  detail::require_unit_rows(tv, "text embeddings");
  Var logits = detail::divide_by_temperature(ops::matmul(image, ops::transpose(text)), tau);
  return symmetric_info_nce(logits, ops::transpose(logits));
}

struct TokenSimilarity {
  Var v2t;  // (1/l1) sum_k1 max_k2 <v_k1, t_k2>
  Var t2v;  // (1/l2) sum_k2 max_k1 <t_k2, v_k1>
};

/// Token-level maximum similarity between unit-norm token sets v[l1 x d] and
/// t[l2 x d], in both directions.
inline TokenSimilarity token_similarity(Var v, Var t) {
  const Tensor& vv = v.value();
  const Tensor& tv = t.value();
  if (vv.rank() != 2 || tv.rank() != 2 || vv.dim(1) != tv.dim(1)) {
    throw DimensionError("token_similarity: incompatible token sets " + shape_string(vv.shape()) + " and " +
                         shape_string(tv.shape()));
  }
  Var s = ops::matmul(v, ops::transpose(t));
  Var v2t = ops::mean(ops::max_axis_with_indices(s).values);
  Var t2v = ops::mean(ops::max_axis_with_indices(ops::transpose(s)).values);
  return {v2t, t2v};
}

/// L_CL: symmetric InfoNCE over SIM scores for B paired token sets.
inline Var local_contrastive_loss(const std::vector<Var>& visual, const std::vector<Var>& text,
                                  const Temperature& tau) {
  const std::size_t b = visual.size();
  if (text.size() != b) throw DimensionError("local_contrastive_loss: unpaired token sets");
  if (b < 2) throw DataError("local_contrastive_loss needs a batch of at least 2");
  std::vector<Var> v2t(b * b), t2v(b * b);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < b; ++j) {
      auto sim = token_similarity(visual[i], text[j]);
      v2t[i * b + j] = sim.v2t;  // SIM(v_i, t_j)
      t2v[j * b + i] = sim.t2v;  // SIM(t_j, v_i)
    }
  Var a = detail::divide_by_temperature(ops::stack_scalars(v2t, b, b), tau);
  Var c = detail::divide_by_temperature(ops::stack_scalars(t2v, b, b), tau);
  return symmetric_info_nce(a, c);
}

/// alpha * L_CG + beta * L_CL.
inline Var total_loss(Var l_cg, Var l_cl, double alpha = 0.5, double beta = 0.5) {
  if (alpha < 0.0 || beta < 0.0) throw UsageError("loss weights must be non-negative");
  return ops::add(ops::scale(l_cg, alpha), ops::scale(l_cl, beta));
}

}  // namespace urbanvlp
