#include "mob/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "mob/errors.hpp"
#include "mob/gaussian.hpp"

namespace mob::baselines {

namespace {

// One SGD adaptation pass from `start` on the given samples.
nd::Mlp adapt_net(const nd::Mlp& start,
                  const std::deque<std::pair<double, double>>& data, int steps,
                  double lr, double sigma_floor, double clip_norm,
                  nd::MlpWork& work) {
  nd::Mlp net = start;
  std::vector<double> xs, ys;
  xs.reserve(data.size());
  ys.reserve(data.size());
  for (auto [x, y] : data) {
    xs.push_back(x);
    ys.push_back(y);
  }
  std::vector<double> grad(net.param_count());
  for (int s = 0; s < steps; ++s) {
    std::fill(grad.begin(), grad.end(), 0.0);
    gauss_nll_batch(net, xs, ys, sigma_floor, grad, work);
    nd::clip_grad_norm(grad, clip_norm);
    for (std::size_t p = 0; p < net.params.size(); ++p)
      net.params[p] -= lr * grad[p];
  }
  return net;
}

}  // namespace

double net_predict(const nd::Mlp& net, double x) {
  return mlp_forward(net, std::span<const double>(&x, 1))[0];
}

double net_log_likelihood(const nd::Mlp& net, double x, double y,
                          double sigma_floor) {
  auto out = mlp_forward(net, std::span<const double>(&x, 1));
  double sigma = nd::softplus(out[1]) + sigma_floor;
  return nd::gaussian_log_pdf(y, out[0], sigma);
}

KShot::KShot(const basis::EnsemblePrior& prior, const BaselineConfig& cfg)
    : prior_(prior), cfg_(cfg), adapted_(prior.members.front()) {}

double KShot::predict(double x) {
  if (dirty_) {
    if (buffer_.empty()) {
      adapted_ = prior_.members.front();
    } else {
      adapted_ = adapt_net(prior_.members.front(), buffer_,
                           cfg_.kshot_adapt_steps, prior_.inner_lr,
                           cfg_.sigma_floor, cfg_.clip_norm, work_);
    }
    dirty_ = false;
  }
  return net_predict(adapted_, x);
}

void KShot::observe(double x, double y) {
  buffer_.emplace_back(x, y);
  while (static_cast<int>(buffer_.size()) > cfg_.kshot_k) buffer_.pop_front();
  dirty_ = true;
}

Continuous::Continuous(const basis::EnsemblePrior& prior,
                       const BaselineConfig& cfg)
    : cfg_(cfg),
      net_(prior.members.front()),
      adam_(cfg.continuous_lr, prior.members.front().param_count()) {}

double Continuous::predict(double x) { return net_predict(net_, x); }

void Continuous::observe(double x, double y) {
  std::vector<double> grad(net_.param_count(), 0.0);
  gauss_nll_batch(net_, std::span<const double>(&x, 1),
                  std::span<const double>(&y, 1), cfg_.sigma_floor, grad,
                  work_);
  nd::clip_grad_norm(grad, cfg_.clip_norm);
  try {
    adam_step(adam_, net_.params, grad, "continuous");
  } catch (const ContractError&) {
    ++skipped_;
  }
}

MoleLite::MoleLite(const basis::EnsemblePrior& prior,
                   const BaselineConfig& cfg)
    : prior_(prior), cfg_(cfg) {
  models_.push_back(prior.members.front());
  adam_.emplace_back(cfg.mole_lr, models_.front().param_count());
  resp_.assign(1, 1.0);
}

double MoleLite::predict(double x) {
  double y = 0.0;
  for (std::size_t m = 0; m < models_.size(); ++m)
    y += resp_[m] * net_predict(models_[m], x);
  return y;
}

void MoleLite::refit_candidate(long step) {
  if (recent_.empty()) return;
  if (has_candidate_ && step - last_refit_ < cfg_.mole_candidate_period) return;
  if (has_candidate_) {
    scoring_candidate_ = candidate_;
    has_scoring_ = true;
  }
  candidate_ =
      adapt_net(prior_.members.front(), recent_, cfg_.mole_candidate_steps,
                cfg_.mole_candidate_lr, cfg_.sigma_floor, cfg_.clip_norm,
                work_);
  has_candidate_ = true;
  last_refit_ = step;
}

void MoleLite::observe(double x, double y) {
  refit_candidate(step_);

  // Cold start: the initial model is the raw prior, so for the first window
  // every candidate beats it legitimately. Instead of spawning, the first
  // model is re-instantiated from the prior on the first observations.
  bool warming = step_ < cfg_.mole_recent_window;
  if (step_ == cfg_.mole_recent_window && models_.size() == 1 &&
      has_candidate_) {
    models_[0] = candidate_;
    adam_[0] = nd::AdamState(cfg_.mole_lr, models_[0].param_count());
  }

  // Joint likelihood over a short trailing window; single-point likelihoods
  // are too noisy to hold the spawn counter across consecutive steps.
  std::vector<std::pair<double, double>> probe;
  int extra = std::min<int>(cfg_.mole_resp_window - 1,
                            static_cast<int>(recent_.size()));
  for (int i = extra; i > 0; --i)
    probe.push_back(recent_[recent_.size() - i]);
  probe.emplace_back(x, y);
  auto joint_ll = [&](const nd::Mlp& net) {
    double total = 0.0;
    for (auto [px, py] : probe)
      total += net_log_likelihood(net, px, py, cfg_.sigma_floor);
    return total;
  };

  // Posterior responsibilities over (models, new-model hypothesis).
  std::vector<double> log_post(models_.size());
  for (std::size_t m = 0; m < models_.size(); ++m)
    log_post[m] = std::log(std::max(resp_[m], 1e-12)) +
                  std::log1p(-cfg_.mole_innovation) + joint_ll(models_[m]);
  // The scoring candidate predates the probe window, so its likelihood is
  // out-of-sample; the fresh candidate would grade its own training data.
  // A candidate pinned at the start of a spawn run keeps one bad refit
  // (e.g. on a window straddling the switch) from resetting the counter.
  double ll_scoring = -std::numeric_limits<double>::infinity();
  double ll_pinned = -std::numeric_limits<double>::infinity();
  if (has_scoring_) ll_scoring = joint_ll(scoring_candidate_);
  if (has_pinned_) ll_pinned = joint_ll(pinned_);
  double log_new = -std::numeric_limits<double>::infinity();
  if (has_scoring_ || has_pinned_)
    log_new =
        std::log(cfg_.mole_innovation) + std::max(ll_scoring, ll_pinned);
  std::vector<double> all(log_post);
  all.push_back(log_new);
  double lse = nd::log_sum_exp(all);
  double new_resp = std::exp(log_new - lse);
  last_innovation_ = new_resp;
#ifdef MOB_MOLE_TRACE
  std::fprintf(stderr, "step %ld probe %zu model_ll %.1f scoring_ll %.1f innov %.3f run %d\n",
               step_, probe.size(), log_post[0], log_new, new_resp, innovation_run_);
#endif

  if (new_resp > cfg_.mole_spawn_threshold && !warming) {
    if (innovation_run_ == 0 && has_scoring_) {
      pinned_ = scoring_candidate_;
      has_pinned_ = true;
    }
    ++innovation_run_;
  } else {
    innovation_run_ = 0;
    has_pinned_ = false;
  }

  if (innovation_run_ >= cfg_.mole_spawn_consecutive && has_candidate_) {
    // promote whichever candidate explains the probe best
    nd::Mlp spawned = candidate_;
    if (has_pinned_ && ll_pinned > ll_scoring && ll_pinned > joint_ll(candidate_))
      spawned = pinned_;
    models_.push_back(std::move(spawned));
    adam_.emplace_back(cfg_.mole_lr, models_.back().param_count());
    resp_.assign(models_.size(), 0.0);
    resp_.back() = 1.0;  // the new model takes over
    innovation_run_ = 0;
    has_pinned_ = false;
  } else {
    // renormalize over the existing models
    double total = 0.0;
    for (std::size_t m = 0; m < models_.size(); ++m) {
      resp_[m] = std::exp(log_post[m] - lse);
      total += resp_[m];
    }
    if (total <= 1e-300) {
      resp_.assign(models_.size(), 1.0 / models_.size());
    } else {
      for (auto& r : resp_) r /= total;
    }
  }

  // responsibility-weighted gradient step per model
  for (std::size_t m = 0; m < models_.size(); ++m) {
    if (resp_[m] < 1e-4) continue;
    std::vector<double> grad(models_[m].param_count(), 0.0);
    gauss_nll_batch(models_[m], std::span<const double>(&x, 1),
                    std::span<const double>(&y, 1), cfg_.sigma_floor, grad,
                    work_);
    for (auto& g : grad) g *= resp_[m];
    nd::clip_grad_norm(grad, cfg_.clip_norm);
    try {
      adam_step(adam_[m], models_[m].params, grad, "mole.model");
    } catch (const ContractError&) {
      // skip the update, keep streaming
    }
  }

  recent_.emplace_back(x, y);
  while (static_cast<int>(recent_.size()) > cfg_.mole_recent_window)
    recent_.pop_front();
  step_ += 1;
}

}  // namespace mob::baselines
