#pragma once

// Differentiable operations over Tape-recorded values. Matrices are rank-2;
// where noted, a rank-1 vector is accepted and treated as a single row.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "urbanvlp/numerics/tape.hpp"

namespace urbanvlp::ops {

namespace detail {

inline void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + " expects a matrix, got " + shape_string(t.shape()));
  }
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
}

/// Rows and row length, accepting vectors as one row.
inline std::pair<std::size_t, std::size_t> as_rows(const Tensor& t, const char* op) {
  if (t.rank() == 1) return {1, t.dim(0)};
  if (t.rank() == 2) return {t.dim(0), t.dim(1)};
  throw DimensionError(std::string(op) + " expects a vector or matrix, got " +
                       shape_string(t.shape()));
}

inline void accumulate(Tensor* dst, const std::vector<double>& src) {
  if (!dst) return;
  for (std::size_t i = 0; i < src.size(); ++i) (*dst)[i] += src[i];
}

}  // namespace detail

inline Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  detail::require_rank2(av, "matmul");
  detail::require_rank2(bv, "matmul");
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  if (bv.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions disagree, " + shape_string(av.shape()) +
                         " x " + shape_string(bv.shape()));
  }
  Tensor out(Shape{m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av(i, p);
      for (std::size_t j = 0; j < n; ++j) out(i, j) += aip * bv(p, j);
    }
  }
  return a.tape->record(std::move(out), {a, b}, [m, k, n](const BackwardContext& ctx) {
    const Tensor& g = ctx.grad();
    const Tensor& x = ctx.input(0);
    const Tensor& y = ctx.input(1);
    if (Tensor* ga = ctx.input_grad(0)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += g(i, j) * y(p, j);
          (*ga)(i, p) += s;
        }
    }
    if (Tensor* gb = ctx.input_grad(1)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double xip = x(i, p);
          for (std::size_t j = 0; j < n; ++j) (*gb)(p, j) += xip * g(i, j);
        }
    }
  });
}

inline Var transpose(Var a) {
  const Tensor& av = a.value();
  detail::require_rank2(av, "transpose");
  const std::size_t m = av.dim(0), n = av.dim(1);
  Tensor out(Shape{n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out(j, i) = av(i, j);
  return a.tape->record(std::move(out), {a}, [m, n](const BackwardContext& ctx) {
    if (Tensor* ga = ctx.input_grad(0))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) (*ga)(i, j) += ctx.grad()(j, i);
  });
}

inline Var add(Var a, Var b) {
  detail::require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return a.tape->record(std::move(out), {a, b}, [](const BackwardContext& ctx) {
    detail::accumulate(ctx.input_grad(0), ctx.grad().data());
    detail::accumulate(ctx.input_grad(1), ctx.grad().data());
  });
}

inline Var sub(Var a, Var b) {
  detail::require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return a.tape->record(std::move(out), {a, b}, [](const BackwardContext& ctx) {
    detail::accumulate(ctx.input_grad(0), ctx.grad().data());
    if (Tensor* gb = ctx.input_grad(1))
      for (std::size_t i = 0; i < gb->size(); ++i) (*gb)[i] -= ctx.grad()[i];
  });
}

/// Element-wise product.
inline Var mul(Var a, Var b) {
  detail::require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return a.tape->record(std::move(out), {a, b}, [](const BackwardContext& ctx) {
    const Tensor& g = ctx.grad();
    if (Tensor* ga = ctx.input_grad(0))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * ctx.input(1)[i];
    if (Tensor* gb = ctx.input_grad(1))
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * ctx.input(0)[i];
  });
}

/// x[m x n] + b[n], broadcasting b over rows.
inline Var add_row_broadcast(Var x, Var b) {
  const Tensor& xv = x.value();
  const Tensor& bv = b.value();
  auto [m, n] = detail::as_rows(xv, "add_row_broadcast");
  if (bv.rank() != 1 || bv.dim(0) != n) {
    throw DimensionError("add_row_broadcast: bias " + shape_string(bv.shape()) +
                         " does not match rows of " + shape_string(xv.shape()));
  }
  Tensor out = xv;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bv[j];
  return x.tape->record(std::move(out), {x, b}, [m, n](const BackwardContext& ctx) {
    detail::accumulate(ctx.input_grad(0), ctx.grad().data());
    if (Tensor* gb = ctx.input_grad(1))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) (*gb)[j] += ctx.grad()[i * n + j];
  });
}

inline Var scale(Var x, double c) {
  Tensor out = x.value();
  for (auto& v : out.data()) v *= c;
  return x.tape->record(std::move(out), {x}, [c](const BackwardContext& ctx) {
    if (Tensor* gx = ctx.input_grad(0))
      for (std::size_t i = 0; i < gx->size(); ++i) (*gx)[i] += c * ctx.grad()[i];
  });
}

/// x * s for a scalar-valued s.
inline Var scale_by(Var x, Var s) {
  if (s.value().size() != 1) throw DimensionError("scale_by expects a scalar factor");
  const double c = s.value()[0];
  Tensor out = x.value();
  for (auto& v : out.data()) v *= c;
  return x.tape->record(std::move(out), {x, s}, [c](const BackwardContext& ctx) {
    const Tensor& g = ctx.grad();
    if (Tensor* gx = ctx.input_grad(0))
      for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += c * g[i];
    if (Tensor* gs = ctx.input_grad(1)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * ctx.input(0)[i];
      (*gs)[0] += acc;
    }
  });
}

inline Var negate(Var x) { return scale(x, -1.0); }

inline Var exp(Var x) {
  Tensor out = x.value();
  for (auto& v : out.data()) v = std::exp(v);
  return x.tape->record(std::move(out), {x}, [](const BackwardContext& ctx) {
    if (Tensor* gx = ctx.input_grad(0))
      for (std::size_t i = 0; i < gx->size(); ++i) (*gx)[i] += ctx.grad()[i] * ctx.output()[i];
  });
}

inline Var log(Var x) {
  Tensor out = x.value();
  for (auto& v : out.data()) {
    if (!(v > 0.0)) throw NumericalError("log of non-positive value");
    v = std::log(v);
  }
  return x.tape->record(std::move(out), {x}, [](const BackwardContext& ctx) {
    if (Tensor* gx = ctx.input_grad(0))
      for (std::size_t i = 0; i < gx->size(); ++i) (*gx)[i] += ctx.grad()[i] / ctx.input(0)[i];
  });
}

/// Exact (erf-based) GELU.
inline Var gelu(Var x) {
  Tensor out = x.value();
  for (auto& v : out.data()) v = 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2));
  return x.tape->record(std::move(out), {x}, [](const BackwardContext& ctx) {
    if (Tensor* gx = ctx.input_grad(0)) {
      const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
      for (std::size_t i = 0; i < gx->size(); ++i) {
        const double v = ctx.input(0)[i];
        const double cdf = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
        const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
        (*gx)[i] += ctx.grad()[i] * (cdf + v * pdf);
      }
    }
  });
}

inline Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return x.tape->record(Tensor::scalar(s), {x}, [](const BackwardContext& ctx) {
    if (Tensor* gx = ctx.input_grad(0))
      for (auto& v : gx->data()) v += ctx.grad()[0];
  });
}

inline Var mean(Var x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

/// Mean of a matrix along an axis: axis 0 gives per-column means [n],
/// axis 1 per-row means [m].
inline Var mean_axis(Var x, std::size_t axis) {
  const Tensor& xv = x.value();
  detail::require_rank2(xv, "mean_axis");
  const std::size_t m = xv.dim(0), n = xv.dim(1);
  if (axis > 1) throw DimensionError("mean_axis: axis must be 0 or 1");
  Tensor out(Shape{axis == 0 ? n : m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[axis == 0 ? j : i] += xv(i, j);
  const double denom = static_cast<double>(axis == 0 ? m : n);
  for (auto& v : out.data()) v /= denom;
  return x.tape->record(std::move(out), {x}, [m, n, axis, denom](const BackwardContext& ctx) {
    if (Tensor* gx = ctx.input_grad(0))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) (*gx)(i, j) += ctx.grad()[axis == 0 ? j : i] / denom;
  });
}

struct MaxResult {
  Var values;
  std::vector<std::size_t> indices;
};

/// Maximum along the last axis. Ties resolve to the lowest index and the
/// gradient flows only to the selected entry.
inline MaxResult max_axis_with_indices(Var x) {
  const Tensor& xv = x.value();
  auto [m, n] = detail::as_rows(xv, "max_axis_with_indices");
  std::vector<std::size_t> idx(m);
  Tensor out = xv.rank() == 1 ? Tensor::scalar(0.0) : Tensor(Shape{m});
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < n; ++j)
      if (xv[i * n + j] > xv[i * n + best]) best = j;
    idx[i] = best;
    out[i] = xv[i * n + best];
  }
  Var values = x.tape->record(std::move(out), {x}, [idx, n](const BackwardContext& ctx) {
    if (Tensor* gx = ctx.input_grad(0))
      for (std::size_t i = 0; i < idx.size(); ++i) (*gx)[i * n + idx[i]] += ctx.grad()[i];
  });
  return {values, std::move(idx)};
}

/// Row-wise softmax with max subtraction.
inline Var softmax_rows(Var x) {
  const Tensor& xv = x.value();
  auto [m, n] = detail::as_rows(xv, "softmax_rows");
  Tensor out = xv;
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data().data() + i * n;
    const double mx = *std::max_element(row, row + n);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      row[j] = std::exp(row[j] - mx);
      s += row[j];
    }
    for (std::size_t j = 0; j < n; ++j) row[j] /= s;
  }
  return x.tape->record(std::move(out), {x}, [m, n](const BackwardContext& ctx) {
    Tensor* gx = ctx.input_grad(0);
    if (!gx) return;
    const Tensor& y = ctx.output();
    const Tensor& g = ctx.grad();
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * y[i * n + j];
      for (std::size_t j = 0; j < n; ++j) (*gx)[i * n + j] += y[i * n + j] * (g[i * n + j] - dot);
    }
  });
}

/// Row-wise log-softmax, stable for large logits.
inline Var log_softmax_rows(Var x) {
  const Tensor& xv = x.value();
  auto [m, n] = detail::as_rows(xv, "log_softmax_rows");
  Tensor out = xv;
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data().data() + i * n;
    const double mx = *std::max_element(row, row + n);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += std::exp(row[j] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < n; ++j) row[j] -= lse;
  }
  return x.tape->record(std::move(out), {x}, [m, n](const BackwardContext& ctx) {
    Tensor* gx = ctx.input_grad(0);
    if (!gx) return;
    const Tensor& y = ctx.output();
    const Tensor& g = ctx.grad();
    for (std::size_t i = 0; i < m; ++i) {
      double gs = 0.0;
      for (std::size_t j = 0; j < n; ++j) gs += g[i * n + j];
      for (std::size_t j = 0; j < n; ++j)
        (*gx)[i * n + j] += g[i * n + j] - std::exp(y[i * n + j]) * gs;
    }
  });
}

/// Normalizes over the last axis, then applies gain and bias.
inline Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5) {
  const Tensor& xv = x.value();
  auto [m, d] = detail::as_rows(xv, "layer_norm");
  if (gain.value().shape() != Shape{d} || bias.value().shape() != Shape{d}) {
    throw DimensionError("layer_norm: gain/bias must have shape [" + std::to_string(d) + "]");
  }
  Tensor out = xv;
  std::vector<double> xhat(xv.size());
  std::vector<double> inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = xv.data().data() + i * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[i * d + j] = (row[j] - mu) * inv_std[i];
      out[i * d + j] = xhat[i * d + j] * gain.value()[j] + bias.value()[j];
    }
  }
  return x.tape->record(
      std::move(out), {x, gain, bias},
      [m, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](const BackwardContext& ctx) {
        const Tensor& g = ctx.grad();
        const Tensor& gamma = ctx.input(1);
        if (Tensor* gg = ctx.input_grad(1))
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < d; ++j) (*gg)[j] += g[i * d + j] * xhat[i * d + j];
        if (Tensor* gb = ctx.input_grad(2))
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < d; ++j) (*gb)[j] += g[i * d + j];
        if (Tensor* gx = ctx.input_grad(0)) {
          const double dd = static_cast<double>(d);
          for (std::size_t i = 0; i < m; ++i) {
            double mean_g = 0.0, mean_gx = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
              const double gh = g[i * d + j] * gamma[j];
              mean_g += gh;
              mean_gx += gh * xhat[i * d + j];
            }
            mean_g /= dd;
            mean_gx /= dd;
            for (std::size_t j = 0; j < d; ++j) {
              const double gh = g[i * d + j] * gamma[j];
              (*gx)[i * d + j] += inv_std[i] * (gh - mean_g - xhat[i * d + j] * mean_gx);
            }
          }
        }
      });
}

/// Scales each row to unit Euclidean norm. A zero row is a numerical error.
inline Var l2_normalize_rows(Var x) {
  const Tensor& xv = x.value();
  auto [m, n] = detail::as_rows(xv, "l2_normalize_rows");
  Tensor out = xv;
  std::vector<double> norms(m);
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += xv[i * n + j] * xv[i * n + j];
    norms[i] = std::sqrt(s);
    if (!(norms[i] > 0.0)) throw NumericalError("l2_normalize_rows: zero-norm row " + std::to_string(i));
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= norms[i];
  }
  return x.tape->record(std::move(out), {x}, [m, n, norms = std::move(norms)](const BackwardContext& ctx) {
    Tensor* gx = ctx.input_grad(0);
    if (!gx) return;
    const Tensor& y = ctx.output();
    const Tensor& g = ctx.grad();
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += y[i * n + j] * g[i * n + j];
      for (std::size_t j = 0; j < n; ++j)
        (*gx)[i * n + j] += (g[i * n + j] - y[i * n + j] * dot) / norms[i];
    }
  });
}

/// Concatenates along the last axis. All parts must share the row count.
inline Var concat_last_axis(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_last_axis: no inputs");
  const Tensor& first = parts.front().value();
  const bool vec = first.rank() == 1;
  auto [m, n0] = detail::as_rows(first, "concat_last_axis");
  (void)n0;
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Tensor& t = p.value();
    auto [pm, pn] = detail::as_rows(t, "concat_last_axis");
    if (pm != m || (t.rank() == 1) != vec) {
      throw DimensionError("concat_last_axis: row mismatch " + shape_string(first.shape()) +
                           " vs " + shape_string(t.shape()));
    }
    widths.push_back(pn);
    total += pn;
  }
  Tensor out(vec ? Shape{total} : Shape{m, total});
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& t = parts[k].value();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < widths[k]; ++j) out[i * total + off + j] = t[i * widths[k] + j];
    off += widths[k];
  }
  return parts.front().tape->record(std::move(out), parts,
                                    [m, total, widths](const BackwardContext& ctx) {
    std::size_t o = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      if (Tensor* gk = ctx.input_grad(k))
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < widths[k]; ++j)
            (*gk)[i * widths[k] + j] += ctx.grad()[i * total + o + j];
      o += widths[k];
    }
  });
}

/// Stacks rows: vectors become single rows, matrices contribute all rows.
inline Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t n = parts.front().value().cols();
  std::size_t total = 0;
  std::vector<std::size_t> counts;
  for (const auto& p : parts) {
    auto [pm, pn] = detail::as_rows(p.value(), "concat_rows");
    if (pn != n) {
      throw DimensionError("concat_rows: width mismatch " + shape_string(parts.front().shape()) +
                           " vs " + shape_string(p.shape()));
    }
    counts.push_back(pm);
    total += pm;
  }
  std::vector<double> vals;
  vals.reserve(total * n);
  for (const auto& p : parts) vals.insert(vals.end(), p.value().data().begin(), p.value().data().end());
  return parts.front().tape->record(Tensor(Shape{total, n}, std::move(vals)), parts,
                                    [counts, n](const BackwardContext& ctx) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
      const std::size_t len = counts[k] * n;
      if (Tensor* gk = ctx.input_grad(k))
        for (std::size_t i = 0; i < len; ++i) (*gk)[i] += ctx.grad()[off + i];
      off += len;
    }
  });
}

/// Gathers rows of table[V x d] for each id.
inline Var embedding_lookup(Var table, std::span<const int> ids) {
  const Tensor& tv = table.value();
  detail::require_rank2(tv, "embedding_lookup");
  const std::size_t vocab = tv.dim(0), d = tv.dim(1);
  if (ids.empty()) throw DimensionError("embedding_lookup: empty id sequence");
  std::vector<int> idv(ids.begin(), ids.end());
  Tensor out(Shape{idv.size(), d});
  for (std::size_t i = 0; i < idv.size(); ++i) {
    if (idv[i] < 0 || static_cast<std::size_t>(idv[i]) >= vocab) {
      throw DimensionError("embedding_lookup: id " + std::to_string(idv[i]) +
                           " outside vocabulary of " + std::to_string(vocab));
    }
    std::copy_n(tv.data().begin() + idv[i] * d, d, out.data().begin() + i * d);
  }
  return table.tape->record(std::move(out), {table}, [idv, d](const BackwardContext& ctx) {
    if (Tensor* gt = ctx.input_grad(0))
      for (std::size_t i = 0; i < idv.size(); ++i)
        for (std::size_t j = 0; j < d; ++j) (*gt)[idv[i] * d + j] += ctx.grad()[i * d + j];
  });
}

/// Selected rows of a matrix, as a matrix [k x n].
inline Var select_rows(Var x, std::vector<std::size_t> rows) {
  const Tensor& xv = x.value();
  detail::require_rank2(xv, "select_rows");
  const std::size_t m = xv.dim(0), n = xv.dim(1);
  if (rows.empty()) throw DimensionError("select_rows: empty selection");
  Tensor out(Shape{rows.size(), n});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= m) throw DimensionError("select_rows: row index out of range");
    std::copy_n(xv.data().begin() + rows[i] * n, n, out.data().begin() + i * n);
  }
  return x.tape->record(std::move(out), {x}, [rows = std::move(rows), n](const BackwardContext& ctx) {
    if (Tensor* gx = ctx.input_grad(0))
      for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < n; ++j) (*gx)[rows[i] * n + j] += ctx.grad()[i * n + j];
  });
}

/// Row i of a matrix as a vector [n].
inline Var row(Var x, std::size_t i) {
  Var r = select_rows(x, {i});
  const std::size_t n = r.value().dim(1);
  Tensor out = r.value().reshaped(Shape{n});
  return x.tape->record(std::move(out), {r}, [](const BackwardContext& ctx) {
    detail::accumulate(ctx.input_grad(0), ctx.grad().data());
  });
}

inline Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return x.tape->record(std::move(out), {x}, [](const BackwardContext& ctx) {
    detail::accumulate(ctx.input_grad(0), ctx.grad().data());
  });
}

/// Columns [start, start + len) of a matrix.
inline Var slice_cols(Var x, std::size_t start, std::size_t len) {
  const Tensor& xv = x.value();
  detail::require_rank2(xv, "slice_cols");
  const std::size_t m = xv.dim(0), n = xv.dim(1);
  if (len == 0 || start + len > n) throw DimensionError("slice_cols: range out of bounds");
  Tensor out(Shape{m, len});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < len; ++j) out(i, j) = xv(i, start + j);
  return x.tape->record(std::move(out), {x}, [m, n, start, len](const BackwardContext& ctx) {
    if (Tensor* gx = ctx.input_grad(0))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < len; ++j) (*gx)[i * n + start + j] += ctx.grad()(i, j);
  });
}

/// out[i] = x[i, cols[i]].
inline Var pick(Var x, std::vector<std::size_t> cols) {
  const Tensor& xv = x.value();
  detail::require_rank2(xv, "pick");
  const std::size_t m = xv.dim(0), n = xv.dim(1);
  if (cols.size() != m) throw DimensionError("pick: one column index per row required");
  Tensor out(Shape{m});
  for (std::size_t i = 0; i < m; ++i) {
    if (cols[i] >= n) throw DimensionError("pick: column index out of range");
    out[i] = xv(i, cols[i]);
  }
  return x.tape->record(std::move(out), {x}, [cols = std::move(cols), n](const BackwardContext& ctx) {
    if (Tensor* gx = ctx.input_grad(0))
      for (std::size_t i = 0; i < cols.size(); ++i) (*gx)[i * n + cols[i]] += ctx.grad()[i];
  });
}

/// Assembles scalar values into a [rows x cols] matrix, row-major.
inline Var stack_scalars(const std::vector<Var>& scalars, std::size_t rows, std::size_t cols) {
  if (scalars.size() != rows * cols || scalars.empty()) {
    throw DimensionError("stack_scalars: expected " + std::to_string(rows * cols) + " scalars");
  }
  Tensor out(Shape{rows, cols});
  for (std::size_t i = 0; i < scalars.size(); ++i) out[i] = scalars[i].value().item();
  return scalars.front().tape->record(std::move(out), scalars, [](const BackwardContext& ctx) {
    for (std::size_t i = 0; i < ctx.grad().size(); ++i)
      if (Tensor* gi = ctx.input_grad(i)) (*gi)[0] += ctx.grad()[i];
  });
}

/// Mean over rows whose mask entry is true. Each column is summed in sorted
/// order so the result does not depend on row order. No valid row gives zeros.
inline Var masked_mean_rows(Var x, const std::vector<bool>& mask) {
  const Tensor& xv = x.value();
  detail::require_rank2(xv, "masked_mean_rows");
  const std::size_t m = xv.dim(0), n = xv.dim(1);
  if (mask.size() != m) {
    throw DimensionError("masked_mean_rows: mask of length " + std::to_string(mask.size()) +
                         " for " + std::to_string(m) + " rows");
  }
  std::vector<std::size_t> valid;
  for (std::size_t i = 0; i < m; ++i)
    if (mask[i]) valid.push_back(i);
  Tensor out(Shape{n});
  if (!valid.empty()) {
    std::vector<double> col(valid.size());
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < valid.size(); ++k) col[k] = xv(valid[k], j);
      std::sort(col.begin(), col.end());
      double s = 0.0;
      for (double v : col) s += v;
      out[j] = s / static_cast<double>(valid.size());
    }
  }
  return x.tape->record(std::move(out), {x}, [valid, n](const BackwardContext& ctx) {
    Tensor* gx = ctx.input_grad(0);
    if (!gx || valid.empty()) return;
    const double w = 1.0 / static_cast<double>(valid.size());
    for (auto i : valid)
      for (std::size_t j = 0; j < n; ++j) (*gx)[i * n + j] += w * ctx.grad()[j];
  });
}

/// Dot product of two equal-length vectors, as a scalar.
inline Var dot(Var a, Var b) { return sum(mul(a, b)); }

}  // namespace urbanvlp::ops
