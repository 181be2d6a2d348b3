#include "mob/basis.hpp"

#include <algorithm>
#include <cmath>

#include "mob/adam.hpp"
#include "mob/errors.hpp"
#include "mob/gaussian.hpp"

namespace mob::basis {

void EnsembleBasis::heads(double x, std::vector<double>& mu,
                          std::vector<double>& sigma) const {
  int m = ensemble_size();
  mu.resize(m);
  sigma.resize(m);
  for (int j = 0; j < m; ++j) {
    auto out = mlp_forward(members[j], std::span<const double>(&x, 1));
    mu[j] = out[0];
    sigma[j] = nd::softplus(out[1]) + sigma_floor;
  }
}

EnsemblePrior train_ensemble_prior(const domains::OfflinePartition& part,
                                   const MamlConfig& cfg, std::uint64_t seed) {
  if (part.segmented.size() < 2)
    throw ContractError(
        "train_ensemble_prior: need at least 2 segmented tasks");

  std::vector<int> widths;
  widths.push_back(1);
  for (int h : cfg.hidden) widths.push_back(h);
  widths.push_back(2);

  // Flatten the per-task sample sets once.
  struct TaskData {
    std::vector<double> xs, ys;
  };
  std::vector<TaskData> tasks;
  for (const auto& [id, samples] : part.segmented) {
    TaskData td;
    for (auto [x, y] : samples) {
      td.xs.push_back(x);
      td.ys.push_back(y);
    }
    tasks.push_back(std::move(td));
  }

  EnsemblePrior prior;
  prior.inner_lr = cfg.inner_lr;
  prior.inner_steps = cfg.inner_steps;
  prior.sigma_floor = cfg.sigma_floor;
  prior.clip_norm = cfg.clip_norm;

  nd::MlpWork work;
  for (int j = 0; j < cfg.ensemble_size; ++j) {
    nd::Rng init_rng = nd::Rng::from(seed, 100 + static_cast<std::uint64_t>(j));
    nd::Rng batch_rng = nd::Rng::from(seed, 200 + static_cast<std::uint64_t>(j));
    nd::Mlp net = nd::mlp_init(widths, init_rng, cfg.init_gain,
                               cfg.init_bias_std);
    nd::AdamState outer(cfg.outer_lr, net.param_count());
    std::vector<double> outer_grad(net.param_count());
    std::vector<double> sx(cfg.meta_batch), sy(cfg.meta_batch);
    std::vector<double> qx(cfg.meta_batch), qy(cfg.meta_batch);
    std::vector<double> inner_grad(net.param_count());
    nd::Mlp adapted = net;

    for (int iter = 0; iter < cfg.meta_iterations; ++iter) {
      std::fill(outer_grad.begin(), outer_grad.end(), 0.0);
      for (const auto& task : tasks) {
        for (int k = 0; k < cfg.meta_batch; ++k) {
          std::size_t i = batch_rng.below(task.xs.size());
          sx[k] = task.xs[i];
          sy[k] = task.ys[i];
          i = batch_rng.below(task.xs.size());
          qx[k] = task.xs[i];
          qy[k] = task.ys[i];
        }
        adapted.params = net.params;
        for (int s = 0; s < cfg.inner_steps; ++s) {
          std::fill(inner_grad.begin(), inner_grad.end(), 0.0);
          gauss_nll_batch(adapted, sx, sy, cfg.sigma_floor, inner_grad, work);
          nd::clip_grad_norm(inner_grad, cfg.clip_norm);
          for (std::size_t p = 0; p < adapted.params.size(); ++p)
            adapted.params[p] -= cfg.inner_lr * inner_grad[p];
        }
        // First-order MAML: query gradient at the adapted parameters
        // applied to theta* directly.
        gauss_nll_batch(adapted, qx, qy, cfg.sigma_floor, outer_grad, work);
      }
      double scale = 1.0 / static_cast<double>(tasks.size());
      for (auto& g : outer_grad) g *= scale;
      nd::clip_grad_norm(outer_grad, cfg.clip_norm);
      adam_step(outer, net.params, outer_grad,
                "meta_prior.member" + std::to_string(j));
    }
    prior.members.push_back(std::move(net));
  }
  return prior;
}

EnsembleBasis adapt_basis(const EnsemblePrior& prior,
                          std::span<const double> xs,
                          std::span<const double> ys, int steps, int minibatch,
                          std::uint64_t batch_seed, bool bootstrap) {
  if (xs.empty() || xs.size() != ys.size())
    throw ContractError("adapt_basis: empty or mismatched data");
  if (steps < 0) steps = prior.inner_steps;

  EnsembleBasis out;
  out.sigma_floor = prior.sigma_floor;
  nd::MlpWork work;
  for (int j = 0; j < prior.ensemble_size(); ++j) {
    nd::Mlp net = prior.members[j];
    std::vector<double> grad(net.param_count());
    nd::Rng rng = nd::Rng::from(batch_seed, static_cast<std::uint64_t>(j));
    std::vector<double> mx, my;
    std::span<const double> dx = xs, dy = ys;
    if (bootstrap) {
      nd::Rng boot = nd::Rng::from(batch_seed, 1000 + static_cast<std::uint64_t>(j));
      mx.resize(xs.size());
      my.resize(ys.size());
      for (std::size_t k = 0; k < xs.size(); ++k) {
        std::size_t i = boot.below(xs.size());
        mx[k] = xs[i];
        my[k] = ys[i];
      }
      dx = mx;
      dy = my;
    }
    std::vector<double> bx, by;
    for (int s = 0; s < steps; ++s) {
      std::fill(grad.begin(), grad.end(), 0.0);
      if (minibatch > 0 && static_cast<std::size_t>(minibatch) < dx.size()) {
        bx.resize(minibatch);
        by.resize(minibatch);
        for (int k = 0; k < minibatch; ++k) {
          std::size_t i = rng.below(dx.size());
          bx[k] = dx[i];
          by[k] = dy[i];
        }
        gauss_nll_batch(net, bx, by, prior.sigma_floor, grad, work);
      } else {
        gauss_nll_batch(net, dx, dy, prior.sigma_floor, grad, work);
      }
      nd::clip_grad_norm(grad, prior.clip_norm);
      for (std::size_t p = 0; p < net.params.size(); ++p)
        net.params[p] -= prior.inner_lr * grad[p];
    }
    out.members.push_back(std::move(net));
  }
  return out;
}

EnsembleBasis adapt_basis(const EnsemblePrior& prior,
                          std::span<const std::pair<double, double>> data,
                          int steps, int minibatch, std::uint64_t batch_seed,
                          bool bootstrap) {
  std::vector<double> xs, ys;
  xs.reserve(data.size());
  ys.reserve(data.size());
  for (auto [x, y] : data) {
    xs.push_back(x);
    ys.push_back(y);
  }
  return adapt_basis(prior, xs, ys, steps, minibatch, batch_seed, bootstrap);
}

double basis_log_likelihood(const EnsembleBasis& b, double x, double y) {
  int m = b.ensemble_size();
  std::vector<double> lls(m);
  std::vector<double> mu, sigma;
  b.heads(x, mu, sigma);
  for (int j = 0; j < m; ++j)
    lls[j] = nd::gaussian_log_pdf(y, mu[j], sigma[j]);
  return nd::log_sum_exp(lls) - std::log(static_cast<double>(m));
}

void validate_simplex(std::span<const double> weights) {
  double sum = 0.0;
  for (double w : weights) {
    if (w < -1e-6) throw ContractError("weights: negative entry");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-6)
    throw ContractError("weights: do not sum to 1");
}

double mixture_log_likelihood(std::span<const EnsembleBasis> bases,
                              std::span<const double> weights, double x,
                              double y) {
  if (bases.size() != weights.size())
    throw ContractError("mixture_log_likelihood: weight count mismatch");
  validate_simplex(weights);
  std::vector<double> terms;
  terms.reserve(bases.size());
  for (std::size_t i = 0; i < bases.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    terms.push_back(std::log(weights[i]) + basis_log_likelihood(bases[i], x, y));
  }
  if (terms.empty())
    throw ContractError("mixture_log_likelihood: all weights zero");
  return nd::log_sum_exp(terms);
}

double mixture_point_estimate(std::span<const EnsembleBasis> bases,
                              std::span<const double> weights, double x) {
  if (bases.size() != weights.size())
    throw ContractError("mixture_point_estimate: weight count mismatch");
  validate_simplex(weights);
  double est = 0.0;
  std::vector<double> mu, sigma;
  for (std::size_t i = 0; i < bases.size(); ++i) {
    bases[i].heads(x, mu, sigma);
    double sum_mu = 0.0;
    for (double m : mu) sum_mu += m;
    est += weights[i] * sum_mu / static_cast<double>(mu.size());
  }
  return est;
}

GaussianMixturePrediction mixture_predict(std::span<const EnsembleBasis> bases,
                                          std::span<const double> weights,
                                          double x) {
  validate_simplex(weights);
  GaussianMixturePrediction pred;
  pred.weights.assign(weights.begin(), weights.end());
  pred.mu.resize(bases.size());
  pred.sigma.resize(bases.size());
  for (std::size_t i = 0; i < bases.size(); ++i) {
    bases[i].heads(x, pred.mu[i], pred.sigma[i]);
    double sum_mu = 0.0;
    for (double m : pred.mu[i]) sum_mu += m;
    pred.point += weights[i] * sum_mu / static_cast<double>(pred.mu[i].size());
  }
  return pred;
}

double basis_mean_nll(const EnsembleBasis& b, std::span<const double> xs,
                      std::span<const double> ys) {
  if (xs.empty()) throw ContractError("basis_mean_nll: empty data");
  double total = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    total -= basis_log_likelihood(b, xs[i], ys[i]);
  return total / static_cast<double>(xs.size());
}

}  // namespace mob::basis
