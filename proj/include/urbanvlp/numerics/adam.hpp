#pragma once

#include <cmath>
#include <vector>

#include "urbanvlp/numerics/tape.hpp"

namespace urbanvlp {

struct AdamConfig {
  double learning_rate = 2e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam over a fixed list of parameter tensors. Moment buffers are indexed in
/// the order the parameters were registered.
class Adam {
 public:
  Adam(std::vector<Tensor*> params, AdamConfig config) : params_(std::move(params)), config_(config) {
    for (auto* p : params_) {
      m_.push_back(Tensor::zeros(p->shape()));
      v_.push_back(Tensor::zeros(p->shape()));
    }
  }

  /// Applies one update from the gradients held on `tape`.
  void step(const Tape& tape) {
    ++t_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      if (!tape.is_bound(*params_[k])) continue;
      const Tensor g = tape.grad(*params_[k]);
      Tensor& p = *params_[k];
      for (std::size_t i = 0; i < p.size(); ++i) {
        m_[k][i] = config_.beta1 * m_[k][i] + (1.0 - config_.beta1) * g[i];
        v_[k][i] = config_.beta2 * v_[k][i] + (1.0 - config_.beta2) * g[i] * g[i];
        const double mhat = m_[k][i] / bc1;
        const double vhat = v_[k][i] / bc2;
        p[i] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.eps);
      }
    }
  }

  long long steps() const noexcept { return t_; }
  const AdamConfig& config() const noexcept { return config_; }
  std::vector<Tensor>& first_moments() noexcept { return m_; }
  std::vector<Tensor>& second_moments() noexcept { return v_; }
  const std::vector<Tensor>& first_moments() const noexcept { return m_; }
  const std::vector<Tensor>& second_moments() const noexcept { return v_; }
  void set_steps(long long t) noexcept { t_ = t; }

 private:
  std::vector<Tensor*> params_;
  AdamConfig config_;
  std::vector<Tensor> m_, v_;
  long long t_ = 0;
};

}  // namespace urbanvlp
