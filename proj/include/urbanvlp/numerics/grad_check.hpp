#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "urbanvlp/numerics/tape.hpp"

namespace urbanvlp {

struct GradCheckReport {
  bool passed = true;
  double max_rel_error = 0.0;
  /// Relative error per element, concatenated over all inputs.
  std::vector<double> rel_errors;
  std::size_t worst_input = 0;
  std::size_t worst_element = 0;
};

/// |a - n| / max(|a|, |n|, floor). The floor keeps near-zero gradients from
/// turning round-off into large relative errors.
inline double relative_error(double analytic, double numeric, double floor = 1e-3) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

using MultiLoss = std::function<Var(Tape&, const std::vector<Var>&)>;

/// Compares reverse-mode gradients of a scalar function against central
/// differences for every element of every input.
inline GradCheckReport grad_check(const MultiLoss& f, std::vector<Tensor> inputs,
                                  double step = 1e-5, double tolerance = 1e-4) {
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& x : inputs) vars.push_back(tape.variable(x));
    Var loss = f(tape, vars);
    tape.backward(loss);
    for (const auto& v : vars) analytic.push_back(tape.grad(v));
  }
  auto eval = [&](const std::vector<Tensor>& xs) {
    Tape tape;
    tape.set_grad_enabled(false);
    std::vector<Var> vars;
    for (const auto& x : xs) vars.push_back(tape.constant(x));
    return f(tape, vars).value().item();
  };
  GradCheckReport report;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double orig = inputs[k][i];
      inputs[k][i] = orig + step;
      const double fp = eval(inputs);
      inputs[k][i] = orig - step;
      const double fm = eval(inputs);
      inputs[k][i] = orig;
      const double numeric = (fp - fm) / (2.0 * step);
      const double err = relative_error(analytic[k][i], numeric);
      report.rel_errors.push_back(err);
      if (err > report.max_rel_error || !std::isfinite(err)) {
        report.max_rel_error = err;
        report.worst_input = k;
        report.worst_element = i;
      }
    }
  }
  report.passed = std::isfinite(report.max_rel_error) && report.max_rel_error < tolerance;
  return report;
}

/// Single-input convenience form.
inline GradCheckReport grad_check(const std::function<Var(Tape&, Var)>& f, const Tensor& x,
                                  double step = 1e-5, double tolerance = 1e-4) {
  return grad_check([&](Tape& t, const std::vector<Var>& v) { return f(t, v[0]); },
                    std::vector<Tensor>{x}, step, tolerance);
}

/// Central-difference check over parameter tensors that `f` binds with
/// Tape::parameter. Parameters are perturbed in place and restored.
inline GradCheckReport grad_check_parameters(const std::function<Var(Tape&)>& f, const std::vector<Tensor*>& params,
                                             double step = 1e-5, double tolerance = 1e-4) {
  std::vector<Tensor> analytic;
  {
    Tape tape;
    Var loss = f(tape);
    tape.backward(loss);
    for (const Tensor* p : params) analytic.push_back(tape.grad(*p));
  }
  auto eval = [&] {
    Tape tape;
    tape.set_grad_enabled(false);
    return f(tape).value().item();
  };
  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double orig = p[i];
      p[i] = orig + step;
      const double fp = eval();
      p[i] = orig - step;
      const double fm = eval();
      p[i] = orig;
      const double err = relative_error(analytic[k][i], (fp - fm) / (2.0 * step));
      report.rel_errors.push_back(err);
      if (err > report.max_rel_error || !std::isfinite(err)) {
        report.max_rel_error = err;
        report.worst_input = k;
        report.worst_element = i;
      }
    }
  }
  report.passed = std::isfinite(report.max_rel_error) && report.max_rel_error < tolerance;
  return report;
}

}  // namespace urbanvlp
