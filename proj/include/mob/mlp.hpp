#ifndef MOB_MLP_HPP
#define MOB_MLP_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "mob/rng.hpp"
#include "mob/tensor.hpp"

namespace mob::nd {

// Fully-connected network with tanh hidden activations and identity output.
// Parameters are stored flat, layer by layer as [W | b] with W row-major
// (out x in). The flat layout keeps optimizer state, checkpoints and autodiff
// grad sinks simple.
struct Mlp {
  std::vector<int> widths;      // {in, hidden..., out}; at least {in, out}
  std::vector<double> params;   // sum over layers of (out*in + out)

  int layer_count() const { return static_cast<int>(widths.size()) - 1; }
  int in_dim() const { return widths.front(); }
  int out_dim() const { return widths.back(); }
  std::size_t param_count() const { return params.size(); }

  // Offset of layer l's [W | b] block in `params`.
  std::size_t layer_offset(int l) const;
  std::size_t layer_size(int l) const {
    return static_cast<std::size_t>(widths[l + 1]) * widths[l] + widths[l + 1];
  }
  const double* layer(int l) const { return params.data() + layer_offset(l); }
  double* layer(int l) { return params.data() + layer_offset(l); }
};

// Weights ~ N(0, (gain/sqrt(fan_in))^2), biases ~ N(0, bias_std^2).
Mlp mlp_init(std::vector<int> widths, Rng& rng, double gain = 1.0,
             double bias_std = 0.0);

// Gradient of a scalar function u . f(x) through the network: grads for every
// parameter (same flat layout as Mlp::params) plus the input gradient.
struct MlpGrad {
  std::vector<double> params;
  std::vector<double> input;
};

std::vector<double> mlp_forward(const Mlp& net, std::span<const double> x);
Tensor mlp_forward(const Mlp& net, const Tensor& x);

// Reverse-mode vector-Jacobian product. `upstream` has the output width.
MlpGrad mlp_backward(const Mlp& net, std::span<const double> x,
                     std::span<const double> upstream);

// Scratch buffers reused across batched calls.
struct MlpWork {
  std::vector<std::vector<double>> acts;   // acts[l]: n x widths[l]
  std::vector<double> delta, delta_prev;
};

// Batched forward: X is n rows of in_dim, Y gets n rows of out_dim.
void mlp_forward_batch(const Mlp& net, std::span<const double> X, int n,
                       std::vector<double>& Y, MlpWork& work);

// Mean Gaussian negative log-likelihood of a 2-head net (mu, raw sigma) on a
// batch of scalar targets, with sigma = softplus(raw) + sigma_floor.
// Accumulates d(mean nll)/d(params) into `grad` (not zeroed here).
double gauss_nll_batch(const Mlp& net, std::span<const double> xs,
                       std::span<const double> ys, double sigma_floor,
                       std::vector<double>& grad, MlpWork& work);

// Same loss without gradients.
double gauss_nll_value(const Mlp& net, std::span<const double> xs,
                       std::span<const double> ys, double sigma_floor,
                       MlpWork& work);

// Rescales grad to the given L2 norm when it exceeds it; returns the
// original norm. Gaussian NLL gradients blow up when a sigma head collapses,
// and plain SGD inner loops need this clamp to stay finite.
double clip_grad_norm(std::span<double> grad, double max_norm);

inline double softplus(double x) {
  return x > 30.0 ? x : std::log1p(std::exp(x));
}
inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace mob::nd

#endif
