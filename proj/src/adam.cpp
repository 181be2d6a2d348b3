#include "mob/adam.hpp"

#include <cmath>

#include "mob/errors.hpp"

namespace mob::nd {

void AdamState::insert(std::size_t pos, std::size_t count) {
  m.insert(m.begin() + pos, count, 0.0);
  v.insert(v.begin() + pos, count, 0.0);
}

void adam_step(AdamState& state, std::span<double> params,
               std::span<const double> grads, const std::string& name) {
  std::size_t n = params.size();
  if (grads.size() != n)
    throw ContractError("adam_step: gradient shape mismatch for " + name);
  if (state.m.size() != n) {
    if (state.t != 0)
      throw ContractError("adam_step: moment shape mismatch for " + name);
    state.m.assign(n, 0.0);
    state.v.assign(n, 0.0);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(grads[i]))
      throw ContractError("adam_step: non-finite gradient in " + name);
  }
  state.t += 1;
  double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < n; ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
    state.v[i] =
        state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
    double mhat = state.m[i] / bc1;
    double vhat = state.v[i] / bc2;
    params[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

}  // namespace mob::nd
