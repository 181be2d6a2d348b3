#include "mob/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mob/errors.hpp"
#include "mob/eval_access.hpp"
#include "mob/graph.hpp"

namespace mob::engine {

namespace {

// Gradient accumulators matching the model's parameter layout. The mixing
// buffer tracks head growth with the same insert positions the net uses, so
// gradients accumulated before an instantiation stay aligned.
struct GradBuffers {
  std::vector<std::vector<double>> basis;
  std::vector<double> mixing, prior, inference;

  void reset(const MoBModel& m) {
    basis.resize(m.bases.size() * m.cfg.ensemble_size);
    std::size_t k = 0;
    for (const auto& b : m.bases)
      for (const auto& member : b.members)
        basis[k++].assign(member.param_count(), 0.0);
    mixing.assign(m.mixing.net.param_count(), 0.0);
    prior.assign(m.prior_net.net.param_count(), 0.0);
    inference.assign(m.inference.net.param_count(), 0.0);
  }

  // After add_basis(): new member slots and one more mixing logit row.
  void grow(const MoBModel& m) {
    const auto& b = m.bases.back();
    for (const auto& member : b.members)
      basis.emplace_back(member.param_count(), 0.0);
    const nd::Mlp& net = m.mixing.net;
    int last = net.layer_count() - 1;
    int in = net.widths[last];
    int out = net.widths[last + 1];          // already grown
    std::size_t w_end = net.layer_offset(last) +
                        static_cast<std::size_t>(out - 1) * in;
    mixing.insert(mixing.begin() + w_end, in, 0.0);
    mixing.push_back(0.0);
  }
};

latent::ElboSinks sinks_of(GradBuffers& g) {
  return latent::ElboSinks{&g.basis, &g.mixing, &g.prior, &g.inference};
}

void add_basis(MoBModel& m, basis::EnsembleBasis&& b) {
  m.bases.push_back(std::move(b));
  for (const auto& member : m.bases.back().members)
    m.basis_adam.emplace_back(
        m.basis_adam.empty() ? m.cfg.learning_rate : m.basis_adam.front().lr,
        member.param_count());
  latent::grow_mixing_head(m.mixing, m.cfg.grow_logit_scale, m.rng,
                           &m.mixing_adam);
}

// One alternating optimizer step: even counters update the basis members,
// odd counters update (mixing, prior, inference).
void apply_update(MoBModel& m, GradBuffers& g) {
  bool basis_turn = (m.update_counter % 2 == 0);
  if (basis_turn) {
    std::size_t k = 0;
    for (std::size_t i = 0; i < m.bases.size(); ++i)
      for (auto& member : m.bases[i].members) {
        nd::clip_grad_norm(g.basis[k], m.cfg.grad_clip);
        adam_step(m.basis_adam[k], member.params, g.basis[k],
                  "bases[" + std::to_string(i) + "]");
        ++k;
      }
  } else {
    nd::clip_grad_norm(g.mixing, m.cfg.grad_clip);
    adam_step(m.mixing_adam, m.mixing.net.params, g.mixing, "mixing");
    nd::clip_grad_norm(g.prior, m.cfg.grad_clip);
    adam_step(m.prior_adam, m.prior_net.net.params, g.prior, "prior");
    nd::clip_grad_norm(g.inference, m.cfg.grad_clip);
    adam_step(m.inference_adam, m.inference.net.params, g.inference,
              "inference");
  }
  m.update_counter += 1;
}

OddsEventRow event_row(long step, const odds::OddsDetector::StepResult& r) {
  OddsEventRow row;
  row.step = step;
  row.score_min = r.verdict.score_min;
  row.p_in = r.verdict.p_in;
  row.ll_in = r.verdict.ll_in;
  row.ll_out = r.verdict.ll_out;
  row.s_odds = r.verdict.s_odds;
  row.is_ood = r.verdict.is_ood;
  row.instantiated = r.instantiated.has_value();
  return row;
}

void reset_stream(MoBModel& m) {
  m.z.assign(m.cfg.latent_dim, 0.0);
  m.window.clear();
  m.window_anchor = m.z;
  m.pending = false;
  m.detector.reset_stream();
}

std::vector<std::vector<double>> draw_eps(MoBModel& m, std::size_t count) {
  std::vector<std::vector<double>> eps(count);
  for (auto& e : eps) {
    e.resize(m.cfg.latent_dim);
    for (auto& v : e) v = m.rng.normal();
  }
  return eps;
}

}  // namespace

basis::EnsemblePrior train_meta_prior(const domains::OfflinePartition& part,
                                      const TrainConfig& cfg) {
  basis::MamlConfig mc = cfg.maml;
  mc.ensemble_size = cfg.ensemble_size;
  mc.hidden = cfg.basis_hidden;
  mc.init_gain = cfg.init_gain;
  mc.init_bias_std = cfg.init_bias_std;
  return basis::train_ensemble_prior(part, mc, cfg.seed);
}

OfflineReport train_offline(const domains::OfflinePartition& part,
                            const TrainConfig& cfg,
                            const std::string& diagnostics_dir,
                            const basis::EnsemblePrior* shared_prior) {
  OfflineReport rep;
  MoBModel& m = rep.model;
  m.cfg = cfg;
  m.rng = nd::Rng::from(cfg.seed, 900);

  m.meta_prior = shared_prior ? *shared_prior : train_meta_prior(part, cfg);

  for (const auto& [task_id, samples] : part.segmented) {
    basis::EnsembleBasis b = basis::adapt_basis(
        m.meta_prior, samples, cfg.pretrain_steps, cfg.pretrain_batch,
        cfg.seed + 1000 + static_cast<std::uint64_t>(task_id),
        /*bootstrap=*/true);
    b.origin = basis::BasisOrigin::kPretrained;
    b.source_task = task_id;
    m.bases.push_back(std::move(b));
  }

  latent::LatentConfig lcfg;
  lcfg.d = cfg.latent_dim;
  lcfg.latent_hidden = cfg.latent_hidden;
  lcfg.mixing_hidden = cfg.mixing_hidden;
  lcfg.init_gain = cfg.init_gain;
  lcfg.init_bias_std = cfg.init_bias_std;
  nd::Rng r_inf = nd::Rng::from(cfg.seed, 901);
  nd::Rng r_pri = nd::Rng::from(cfg.seed, 902);
  nd::Rng r_mix = nd::Rng::from(cfg.seed, 903);
  m.inference = latent::make_inference_net(lcfg, r_inf);
  m.prior_net = latent::make_prior_net(lcfg, r_pri);
  m.mixing = latent::make_mixing_net(lcfg, m.basis_count(), r_mix);

  for (const auto& b : m.bases)
    for (const auto& member : b.members)
      m.basis_adam.emplace_back(cfg.learning_rate, member.param_count());
  m.mixing_adam =
      nd::AdamState(cfg.offline_latent_lr, m.mixing.net.param_count());
  m.prior_adam =
      nd::AdamState(cfg.offline_latent_lr, m.prior_net.net.param_count());
  m.inference_adam =
      nd::AdamState(cfg.offline_latent_lr, m.inference.net.param_count());

  m.detector = odds::OddsDetector(cfg.odds);
  m.detector.set_refit_period(cfg.offline_refit_period);
  reset_stream(m);

  GradBuffers grads;
  nd::Tape tape;
  std::vector<std::size_t> order(part.unsegmented.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    // Fisher-Yates over trajectory order.
    for (std::size_t i = order.size(); i > 1; --i) {
      std::size_t j = m.rng.below(i);
      std::swap(order[i - 1], order[j]);
    }
    double epoch_sum = 0.0;
    int epoch_chunks = 0;
    for (std::size_t pos = 0; pos < order.size();
         pos += cfg.batch_trajectories) {
      std::size_t chunk_end =
          std::min(order.size(), pos + cfg.batch_trajectories);
      std::size_t chunk_n = chunk_end - pos;
      grads.reset(m);
      double chunk_elbo = 0.0;
      for (std::size_t c = pos; c < chunk_end; ++c) {
        const domains::Trajectory& traj = part.unsegmented[order[c]];
        // ODDS sweep over the rollout; instantiation grows the mixture.
        m.detector.reset_stream();
        for (std::size_t t = 0; t < traj.size(); ++t) {
          auto res = m.detector.step(m.bases, m.meta_prior, traj.x(t),
                                     traj.y(t), m.global_step);
          rep.odds_events.push_back(event_row(m.global_step, res));
          if (res.instantiated) {
            add_basis(m, std::move(*res.instantiated));
            grads.grow(m);
          }
          m.global_step += 1;
        }
        // Single-sample estimator over the trajectory with the final K.
        auto eps = draw_eps(m, traj.size() - 1);
        tape.reset();
        std::vector<double> z0(cfg.latent_dim, 0.0);
        auto sinks = sinks_of(grads);
        int root = latent::build_elbo(tape, m.elbo_view(), sinks, z0, true,
                                      traj.xs(), traj.ys(), eps);
        double value = tape.val(root)[0];
        if (!std::isfinite(value)) {
          if (!diagnostics_dir.empty())
            save_checkpoint(m, diagnostics_dir + "/diverged.mob");
          throw DivergenceError(
              "train_offline: non-finite ELBO at epoch " +
              std::to_string(epoch));
        }
        tape.backward(root, -1.0 / static_cast<double>(chunk_n));
        chunk_elbo += value;
      }
      chunk_elbo /= static_cast<double>(chunk_n);
      rep.minibatch_elbo.push_back(chunk_elbo);
      epoch_sum += chunk_elbo;
      epoch_chunks += 1;
      apply_update(m, grads);
    }
    rep.epoch_elbo.push_back(epoch_sum / epoch_chunks);
    rep.epochs_run = epoch + 1;
    if (epoch + 1 >= 2 * cfg.plateau_window) {
      double now = rep.epoch_elbo[epoch];
      double then = rep.epoch_elbo[epoch - cfg.plateau_window];
      double rel = (now - then) / std::max(1.0, std::abs(then));
      if (rel < cfg.plateau_tol) break;
    }
  }

  m.detector.set_refit_period(cfg.odds.refit_period);
  reset_stream(m);
  return rep;
}

OnlineSession::OnlineSession(MoBModel& model) : model_(model) {}

double OnlineSession::predict(double x) {
  MoBModel& m = model_;
  std::vector<double> eps(m.cfg.latent_dim);
  for (auto& v : eps) v = m.rng.normal();
  latent::LatentState st = latent::prior_step(m.prior_net, m.z, eps);
  m.pending_z = st.z;
  m.pending = true;
  auto weights = latent::mixing_weights(m.mixing, st.z);
  return basis::mixture_point_estimate(m.bases, weights, x);
}

OddsEventRow OnlineSession::observe(double x, double y) {
  MoBModel& m = model_;
  if (!m.pending)
    throw ContractError("OnlineSession::observe before predict");
  m.pending = false;

  std::vector<double> eps(m.cfg.latent_dim);
  for (auto& v : eps) v = m.rng.normal();
  m.z = latent::infer_step(m.inference, m.pending_z, x, y, eps).z;

  m.window.push_back(WindowObs{x, y, m.z});
  if (static_cast<int>(m.window.size()) > m.cfg.online_window) {
    m.window_anchor = m.window.front().z;
    m.window.pop_front();
  }

  // Windowed estimator standing in for the full-history loss.
  std::vector<double> xs, ys;
  xs.reserve(m.window.size());
  ys.reserve(m.window.size());
  for (const auto& w : m.window) {
    xs.push_back(w.x);
    ys.push_back(w.y);
  }
  auto eps_w = draw_eps(m, m.window.size());
  GradBuffers grads;
  grads.reset(m);
  nd::Tape tape;
  auto sinks = sinks_of(grads);
  int root = latent::build_elbo(tape, m.elbo_view(), sinks, m.window_anchor,
                                false, xs, ys, eps_w);
  double value = tape.val(root)[0];
  if (std::isfinite(value)) {
    tape.backward(root, -1.0);
    try {
      apply_update(m, grads);
    } catch (const ContractError&) {
      ++skipped_;  // non-finite update: skip, keep streaming
    }
  } else {
    ++skipped_;
  }

  auto res = m.detector.step(m.bases, m.meta_prior, x, y, m.global_step);
  OddsEventRow row = event_row(m.global_step, res);
  if (res.instantiated) add_basis(m, std::move(*res.instantiated));
  m.global_step += 1;
  return row;
}

std::pair<double, OddsEventRow> OnlineSession::step(double x, double y) {
  double y_hat = predict(x);
  return {y_hat, observe(x, y)};
}

void set_learning_rate(MoBModel& m, double lr) {
  set_learning_rates(m, lr, lr);
}

void set_learning_rates(MoBModel& m, double basis_lr, double latent_lr) {
  for (auto& a : m.basis_adam) a.lr = basis_lr;
  m.mixing_adam.lr = latent_lr;
  m.prior_adam.lr = latent_lr;
  m.inference_adam.lr = latent_lr;
}

RunMetrics run_online(MoBModel& model, const domains::Trajectory& stream) {
  reset_stream(model);
  set_learning_rates(model, model.cfg.online_lr, model.cfg.online_latent_lr);
  OnlineSession session(model);
  const auto& labels = domains::EvalAccess::labels(stream);
  RunMetrics metrics;
  metrics.steps.reserve(stream.size());
  double se_sum = 0.0, ae_sum = 0.0;
  for (std::size_t t = 0; t < stream.size(); ++t) {
    double x = stream.x(t), y = stream.y(t);
    double y_hat = session.predict(x);
    OddsEventRow odds_row = session.observe(x, y);
    StepRecord rec;
    rec.step = static_cast<long>(t);
    rec.x = x;
    rec.y = y;
    rec.y_hat = y_hat;
    rec.sq_err = (y - y_hat) * (y - y_hat);
    rec.abs_err = std::abs(y - y_hat);
    rec.n_bases = model.basis_count();
    rec.task = labels[t];
    se_sum += rec.sq_err;
    ae_sum += rec.abs_err;
    metrics.steps.push_back(rec);
    metrics.odds_events.push_back(odds_row);
    metrics.latent_trace.push_back(model.z);
  }
  metrics.mse = se_sum / static_cast<double>(stream.size());
  metrics.mae = ae_sum / static_cast<double>(stream.size());
  metrics.final_bases = model.basis_count();
  return metrics;
}

}  // namespace mob::engine
