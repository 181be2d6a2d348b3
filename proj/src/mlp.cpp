#include "mob/mlp.hpp"

#include <cmath>

#include "mob/errors.hpp"

namespace mob::nd {

std::size_t Mlp::layer_offset(int l) const {
  std::size_t off = 0;
  for (int k = 0; k < l; ++k) off += layer_size(k);
  return off;
}

Mlp mlp_init(std::vector<int> widths, Rng& rng, double gain, double bias_std) {
  if (widths.size() < 2) throw ContractError("mlp_init: need at least 2 widths");
  Mlp net;
  net.widths = std::move(widths);
  std::size_t total = 0;
  for (int l = 0; l < net.layer_count(); ++l) total += net.layer_size(l);
  net.params.resize(total);
  std::size_t p = 0;
  for (int l = 0; l < net.layer_count(); ++l) {
    int in = net.widths[l], out = net.widths[l + 1];
    double wstd = gain / std::sqrt(static_cast<double>(in));
    for (int i = 0; i < out * in; ++i) net.params[p++] = rng.normal(0.0, wstd);
    for (int i = 0; i < out; ++i)
      net.params[p++] = bias_std > 0.0 ? rng.normal(0.0, bias_std) : 0.0;
  }
  return net;
}

std::vector<double> mlp_forward(const Mlp& net, std::span<const double> x) {
  if (static_cast<int>(x.size()) != net.in_dim())
    throw ContractError("mlp_forward: input width mismatch");
  std::vector<double> cur(x.begin(), x.end()), next;
  for (int l = 0; l < net.layer_count(); ++l) {
    int in = net.widths[l], out = net.widths[l + 1];
    const double* W = net.layer(l);
    const double* b = W + static_cast<std::size_t>(out) * in;
    next.assign(out, 0.0);
    for (int o = 0; o < out; ++o) {
      const double* row = W + static_cast<std::size_t>(o) * in;
      double s = b[o];
      for (int k = 0; k < in; ++k) s += row[k] * cur[k];
      next[o] = (l + 1 < net.layer_count()) ? std::tanh(s) : s;
    }
    cur.swap(next);
  }
  return cur;
}

Tensor mlp_forward(const Mlp& net, const Tensor& x) {
  return Tensor::vec(mlp_forward(net, std::span<const double>(x.data)));
}

MlpGrad mlp_backward(const Mlp& net, std::span<const double> x,
                     std::span<const double> upstream) {
  if (static_cast<int>(x.size()) != net.in_dim())
    throw ContractError("mlp_backward: input width mismatch");
  if (static_cast<int>(upstream.size()) != net.out_dim())
    throw ContractError("mlp_backward: upstream width mismatch");

  int L = net.layer_count();
  // Forward pass keeping post-activation values per layer.
  std::vector<std::vector<double>> acts(L + 1);
  acts[0].assign(x.begin(), x.end());
  for (int l = 0; l < L; ++l) {
    int in = net.widths[l], out = net.widths[l + 1];
    const double* W = net.layer(l);
    const double* b = W + static_cast<std::size_t>(out) * in;
    acts[l + 1].assign(out, 0.0);
    for (int o = 0; o < out; ++o) {
      const double* row = W + static_cast<std::size_t>(o) * in;
      double s = b[o];
      for (int k = 0; k < in; ++k) s += row[k] * acts[l][k];
      acts[l + 1][o] = (l + 1 < L) ? std::tanh(s) : s;
    }
  }

  MlpGrad g;
  g.params.assign(net.param_count(), 0.0);
  std::vector<double> delta(upstream.begin(), upstream.end()), delta_prev;
  for (int l = L - 1; l >= 0; --l) {
    int in = net.widths[l], out = net.widths[l + 1];
    const double* W = net.layer(l);
    double* gW = g.params.data() + net.layer_offset(l);
    double* gb = gW + static_cast<std::size_t>(out) * in;
    for (int o = 0; o < out; ++o) {
      double* grow = gW + static_cast<std::size_t>(o) * in;
      for (int k = 0; k < in; ++k) grow[k] += delta[o] * acts[l][k];
      gb[o] += delta[o];
    }
    delta_prev.assign(in, 0.0);
    for (int o = 0; o < out; ++o) {
      const double* row = W + static_cast<std::size_t>(o) * in;
      for (int k = 0; k < in; ++k) delta_prev[k] += delta[o] * row[k];
    }
    if (l > 0) {
      for (int k = 0; k < in; ++k)
        delta_prev[k] *= 1.0 - acts[l][k] * acts[l][k];
    }
    delta.swap(delta_prev);
  }
  g.input = std::move(delta);
  return g;
}

void mlp_forward_batch(const Mlp& net, std::span<const double> X, int n,
                       std::vector<double>& Y, MlpWork& work) {
  int L = net.layer_count();
  work.acts.resize(L + 1);
  work.acts[0].assign(X.begin(), X.end());
  for (int l = 0; l < L; ++l) {
    int in = net.widths[l], out = net.widths[l + 1];
    const double* W = net.layer(l);
    const double* b = W + static_cast<std::size_t>(out) * in;
    auto& src = work.acts[l];
    auto& dst = work.acts[l + 1];
    dst.assign(static_cast<std::size_t>(n) * out, 0.0);
    for (int i = 0; i < n; ++i) {
      const double* xi = src.data() + static_cast<std::size_t>(i) * in;
      double* yi = dst.data() + static_cast<std::size_t>(i) * out;
      for (int o = 0; o < out; ++o) {
        const double* row = W + static_cast<std::size_t>(o) * in;
        double s = b[o];
        for (int k = 0; k < in; ++k) s += row[k] * xi[k];
        yi[o] = (l + 1 < L) ? std::tanh(s) : s;
      }
    }
  }
  Y = work.acts[L];
}

namespace {

// Shared backward for the batched Gaussian NLL: work.acts holds the forward
// pass, `delta` the per-point upstream (n x out). Accumulates into grad.
void batch_backward(const Mlp& net, int n, std::vector<double>& grad,
                    MlpWork& work) {
  int L = net.layer_count();
  for (int l = L - 1; l >= 0; --l) {
    int in = net.widths[l], out = net.widths[l + 1];
    const double* W = net.layer(l);
    double* gW = grad.data() + net.layer_offset(l);
    double* gb = gW + static_cast<std::size_t>(out) * in;
    auto& below = work.acts[l];
    for (int i = 0; i < n; ++i) {
      const double* xi = below.data() + static_cast<std::size_t>(i) * in;
      const double* di = work.delta.data() + static_cast<std::size_t>(i) * out;
      for (int o = 0; o < out; ++o) {
        if (di[o] == 0.0) continue;
        double* grow = gW + static_cast<std::size_t>(o) * in;
        double d = di[o];
        for (int k = 0; k < in; ++k) grow[k] += d * xi[k];
        gb[o] += d;
      }
    }
    if (l == 0) break;
    work.delta_prev.assign(static_cast<std::size_t>(n) * in, 0.0);
    for (int i = 0; i < n; ++i) {
      const double* di = work.delta.data() + static_cast<std::size_t>(i) * out;
      const double* ai = below.data() + static_cast<std::size_t>(i) * in;
      double* dp = work.delta_prev.data() + static_cast<std::size_t>(i) * in;
      for (int o = 0; o < out; ++o) {
        const double* row = W + static_cast<std::size_t>(o) * in;
        double d = di[o];
        if (d == 0.0) continue;
        for (int k = 0; k < in; ++k) dp[k] += d * row[k];
      }
      for (int k = 0; k < in; ++k) dp[k] *= 1.0 - ai[k] * ai[k];
    }
    work.delta.swap(work.delta_prev);
  }
}

}  // namespace

double gauss_nll_batch(const Mlp& net, std::span<const double> xs,
                       std::span<const double> ys, double sigma_floor,
                       std::vector<double>& grad, MlpWork& work) {
  int n = static_cast<int>(ys.size());
  if (n == 0) throw ContractError("gauss_nll_batch: empty batch");
  std::vector<double> Y;
  mlp_forward_batch(net, xs, n, Y, work);
  constexpr double kHalfLog2Pi = 0.9189385332046727;
  double total = 0.0;
  work.delta.assign(static_cast<std::size_t>(n) * 2, 0.0);
  double inv_n = 1.0 / n;
  for (int i = 0; i < n; ++i) {
    double mu = Y[2 * i], raw = Y[2 * i + 1];
    double sig = softplus(raw) + sigma_floor;
    double r = ys[i] - mu;
    total += std::log(sig) + 0.5 * r * r / (sig * sig) + kHalfLog2Pi;
    double dmu = -r / (sig * sig);
    double dsig = 1.0 / sig - r * r / (sig * sig * sig);
    work.delta[2 * i] = dmu * inv_n;
    work.delta[2 * i + 1] = dsig * logistic(raw) * inv_n;
  }
  batch_backward(net, n, grad, work);
  return total * inv_n;
}

double clip_grad_norm(std::span<double> grad, double max_norm) {
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    double scale = max_norm / norm;
    for (double& g : grad) g *= scale;
  }
  return norm;
}

double gauss_nll_value(const Mlp& net, std::span<const double> xs,
                       std::span<const double> ys, double sigma_floor,
                       MlpWork& work) {
  int n = static_cast<int>(ys.size());
  if (n == 0) throw ContractError("gauss_nll_value: empty batch");
  std::vector<double> Y;
  mlp_forward_batch(net, xs, n, Y, work);
  constexpr double kHalfLog2Pi = 0.9189385332046727;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    double mu = Y[2 * i], raw = Y[2 * i + 1];
    double sig = softplus(raw) + sigma_floor;
    double r = ys[i] - mu;
    total += std::log(sig) + 0.5 * r * r / (sig * sig) + kHalfLog2Pi;
  }
  return total / n;
}

}  // namespace mob::nd
