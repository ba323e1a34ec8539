#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "vle2/nn.hpp"
#include "vle2/tensor.hpp"

namespace vle2 {

struct OptimizerState {
  int64_t step = 0;
  double peak_lr = 1e-3;
  int64_t warmup_steps = 500;
  int64_t total_steps = 5000;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-8;
  double weight_decay = 0.001;
};

/// Linear ramp 0 -> peak over warmup_steps, then linear decay peak -> 0 at
/// total_steps.
inline double lr_at_step(int64_t step, const OptimizerState& st) {
  if (st.warmup_steps >= st.total_steps)
    throw std::invalid_argument("lr_at_step: warmup_steps must be < total_steps");
  if (step < st.warmup_steps)
    return st.peak_lr * static_cast<double>(step) / static_cast<double>(st.warmup_steps);
  return st.peak_lr * static_cast<double>(st.total_steps - step) /
         static_cast<double>(st.total_steps - st.warmup_steps);
}

template <class S>
class AdamWT {
 public:
  OptimizerState state;

  explicit AdamWT(OptimizerState st = {}) : state(st) {}

  // Decoupled weight decay; bias-corrected moments; lr from the schedule at
  // the pre-increment step.
  void step(const std::vector<ParamT<S>*>& params) {
    if (m_.empty()) {
      for (auto* p : params) {
        m_.emplace_back(p->value.shape);
        v_.emplace_back(p->value.shape);
      }
    }
    if (m_.size() != params.size())
      throw std::runtime_error("adamw_step: parameter set changed between steps");
    const double lr = lr_at_step(state.step, state);
    const double t = static_cast<double>(state.step + 1);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);
    for (size_t pi = 0; pi < params.size(); ++pi) {
      ParamT<S>& p = *params[pi];
      if (p.grad.shape != p.value.shape)
        throw std::runtime_error("adamw_step: grad/param shape mismatch for " + p.name);
      require_finite(p.grad, "adamw_step gradient");
      TensorT<S>& m = m_[pi];
      TensorT<S>& v = v_[pi];
#pragma omp parallel for schedule(static)
      for (long long i = 0; i < static_cast<long long>(p.value.numel()); ++i) {
        const double g = static_cast<double>(p.grad.data[i]);
        const double mi = state.beta1 * static_cast<double>(m.data[i]) + (1.0 - state.beta1) * g;
        const double vi =
            state.beta2 * static_cast<double>(v.data[i]) + (1.0 - state.beta2) * g * g;
        m.data[i] = static_cast<S>(mi);
        v.data[i] = static_cast<S>(vi);
        const double mhat = mi / bc1;
        const double vhat = vi / bc2;
        double x = static_cast<double>(p.value.data[i]);
        x -= lr * (mhat / (std::sqrt(vhat) + state.eps) + state.weight_decay * x);
        p.value.data[i] = static_cast<S>(x);
      }
    }
    ++state.step;
  }

 private:
  std::vector<TensorT<S>> m_, v_;
};

using AdamW = AdamWT<float>;

}  // namespace vle2
