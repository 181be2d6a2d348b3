#ifndef MOB_ENGINE_HPP
#define MOB_ENGINE_HPP

#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "mob/adam.hpp"
#include "mob/basis.hpp"
#include "mob/domains.hpp"
#include "mob/latent.hpp"
#include "mob/odds.hpp"

namespace mob::engine {

struct TrainConfig {
  // architecture
  int ensemble_size = 4;
  int latent_dim = 32;
  std::vector<int> basis_hidden = {128, 128};
  std::vector<int> latent_hidden = {128, 128, 128};
  std::vector<int> mixing_hidden = {64, 64};
  double init_gain = 1.0;
  double init_bias_std = 0.1;

  // meta prior + pretrained bases
  basis::MamlConfig maml;
  int pretrain_steps = 300;
  int pretrain_batch = 64;

  // offline loop
  int batch_trajectories = 32;  // B
  double learning_rate = 1e-4;
  double offline_latent_lr = 1e-3;  // mixing/prior/inference get few offline
                                    // updates, so they step faster
  int max_epochs = 50;
  double plateau_tol = 1e-3;
  int plateau_window = 5;
  int offline_refit_period = 40;

  // online loop
  int online_window = 20;
  double online_lr = 2e-3;        // basis adaptation rate for Algorithm 3
  double online_latent_lr = 1e-3;  // routing stays steadier than bases

  // odds + growth
  odds::OddsConfig odds;
  double grow_logit_scale = 0.01;
  double grad_clip = 100.0;

  std::uint64_t seed = 0;
};

struct WindowObs {
  double x = 0.0, y = 0.0;
  std::vector<double> z;  // filtered latent after consuming (x, y)
};

// Full MoB state: generative + inference networks, optimizer moments, the
// ODDS detector (buffer + candidate cache) and the streaming runtime state.
struct MoBModel {
  TrainConfig cfg;

  std::vector<basis::EnsembleBasis> bases;
  latent::MixingNet mixing;
  latent::PriorNet prior_net;
  latent::InferenceNet inference;
  basis::EnsemblePrior meta_prior;  // frozen after pretraining
  odds::OddsDetector detector;

  std::vector<nd::AdamState> basis_adam;  // [basis * M + member]
  nd::AdamState mixing_adam, prior_adam, inference_adam;

  std::vector<double> z;          // filtered latent
  std::vector<double> pending_z;  // prior-sampled z between predict/observe
  bool pending = false;
  std::deque<WindowObs> window;   // recent observations for the online loss
  std::vector<double> window_anchor;  // filtered z just before the window

  long global_step = 0;
  long update_counter = 0;  // alternation phase: even -> bases, odd -> latent
  nd::Rng rng;

  int basis_count() const { return static_cast<int>(bases.size()); }
  latent::ElboModel elbo_view() const {
    return latent::ElboModel{bases, &mixing, &prior_net, &inference};
  }
};

struct OddsEventRow {
  long step = 0;
  double score_min = 1.0, p_in = 1.0, ll_in = 0.0, ll_out = 0.0, s_odds = 0.0;
  bool is_ood = false, instantiated = false;
};

struct OfflineReport {
  MoBModel model;
  std::vector<double> minibatch_elbo;  // mean per-trajectory ELBO per minibatch
  std::vector<double> epoch_elbo;
  int epochs_run = 0;
  std::vector<OddsEventRow> odds_events;
};

// Shared by MoB and the baselines so every algorithm sees the same prior.
basis::EnsemblePrior train_meta_prior(const domains::OfflinePartition& part,
                                      const TrainConfig& cfg);

// Algorithm-2 offline phase: meta prior, one pretrained basis per segmented
// task, then the alternating ELBO loop over D_u with ODDS running inside
// every rollout. On a non-finite loss a diagnostic checkpoint is written to
// diagnostics_dir (when given) and DivergenceError is thrown.
OfflineReport train_offline(const domains::OfflinePartition& part,
                            const TrainConfig& cfg,
                            const std::string& diagnostics_dir = "",
                            const basis::EnsemblePrior* shared_prior = nullptr);

// Algorithm-3 online phase, split so the prediction path cannot read y:
// predict(x) samples z_t from the prior and forms the Eq.-5 point estimate;
// observe(x, y) filters z_t, takes one alternating gradient step on the
// windowed estimator and runs the ODDS step.
class OnlineSession {
 public:
  explicit OnlineSession(MoBModel& model);

  double predict(double x);
  // Returns the ODDS event for logging.
  OddsEventRow observe(double x, double y);
  // predict + observe in Algorithm 3's order.
  std::pair<double, OddsEventRow> step(double x, double y);

  int skipped_updates() const { return skipped_; }

 private:
  MoBModel& model_;
  int skipped_ = 0;
};

struct StepRecord {
  long step = 0;
  double x = 0.0, y = 0.0, y_hat = 0.0, sq_err = 0.0, abs_err = 0.0;
  int n_bases = 0;
  int task = -1;
};

struct RunMetrics {
  std::vector<StepRecord> steps;
  std::vector<OddsEventRow> odds_events;
  std::vector<std::vector<double>> latent_trace;  // filtered z per step
  double mse = 0.0, mae = 0.0;
  int final_bases = 0;
};

// Evaluation harness: streams the trajectory through an OnlineSession,
// recording per-step errors, ODDS events, the latent trace and (evaluation
// only) the hidden task labels.
RunMetrics run_online(MoBModel& model, const domains::Trajectory& stream);

// Sets every optimizer's step size (offline -> online transition).
void set_learning_rate(MoBModel& m, double lr);
void set_learning_rates(MoBModel& m, double basis_lr, double latent_lr);

// Checkpointing: magic "MOB1", version, JSON manifest with named tensor
// entries, little-endian f64 blob in manifest order, trailing FNV-1a 64
// checksum of all preceding bytes. Round trips are byte-identical.
void save_checkpoint(const MoBModel& model, const std::string& path);
MoBModel load_checkpoint(const std::string& path);

}  // namespace mob::engine

#endif
