#ifndef MOB_BASELINES_HPP
#define MOB_BASELINES_HPP

#include <deque>
#include <vector>

#include "mob/adam.hpp"
#include "mob/basis.hpp"
#include "mob/domains.hpp"
#include "mob/mlp.hpp"

namespace mob::baselines {

// All three baselines consume the same meta prior as MoB and adapt
// single-network Gaussian-head predictors from its first member.

struct BaselineConfig {
  int kshot_k = 20;
  int kshot_adapt_steps = 5;      // fresh adaptation from the prior each step
  double continuous_lr = 1e-3;    // Adam on the newest observation
  // MOLe-lite (documented approximation of MOLe's multiple-model scheme)
  double mole_innovation = 0.02;   // prior mass reserved for the new-model hypothesis
  double mole_spawn_threshold = 0.6;
  int mole_spawn_consecutive = 10;
  double mole_lr = 0.01;
  int mole_candidate_steps = 25;
  double mole_candidate_lr = 0.05;
  int mole_candidate_period = 3;
  int mole_recent_window = 15;
  int mole_resp_window = 5;       // joint-likelihood window for responsibilities
  double sigma_floor = basis::kSigmaFloor;
  double clip_norm = 50.0;
};

// Single Gaussian-head predictor: mean of the net's mu head.
double net_predict(const nd::Mlp& net);
double net_predict(const nd::Mlp& net, double x);
double net_log_likelihood(const nd::Mlp& net, double x, double y,
                          double sigma_floor);

// MAML k-shot: re-adapt from the prior on the latest k points, every step.
class KShot {
 public:
  KShot(const basis::EnsemblePrior& prior, const BaselineConfig& cfg);
  double predict(double x);
  void observe(double x, double y);
  int model_count() const { return 1; }

 private:
  const basis::EnsemblePrior& prior_;
  BaselineConfig cfg_;
  std::deque<std::pair<double, double>> buffer_;
  nd::Mlp adapted_;
  bool dirty_ = true;
  nd::MlpWork work_;
};

// MAML continuous: one persistent network, one Adam step per observation.
class Continuous {
 public:
  Continuous(const basis::EnsemblePrior& prior, const BaselineConfig& cfg);
  double predict(double x);
  void observe(double x, double y);
  int model_count() const { return 1; }
  int skipped() const { return skipped_; }

 private:
  BaselineConfig cfg_;
  nd::Mlp net_;
  nd::AdamState adam_;
  nd::MlpWork work_;
  int skipped_ = 0;
};

// MOLe-lite: responsibility-weighted task models with an innovation
// hypothesis scored by a prior-adapted candidate; spawns a new model when the
// innovation responsibility stays above the threshold for a run of steps.
class MoleLite {
 public:
  MoleLite(const basis::EnsemblePrior& prior, const BaselineConfig& cfg);
  double predict(double x);
  void observe(double x, double y);
  int model_count() const { return static_cast<int>(models_.size()); }
  const std::vector<double>& responsibilities() const { return resp_; }
  double last_innovation_resp() const { return last_innovation_; }

 private:
  void refit_candidate(long step);

  const basis::EnsemblePrior& prior_;
  BaselineConfig cfg_;
  std::vector<nd::Mlp> models_;
  std::vector<nd::AdamState> adam_;
  std::vector<double> resp_;
  nd::Mlp candidate_;        // freshest fit
  nd::Mlp scoring_candidate_;  // previous fit: scores arrivals out-of-sample
  nd::Mlp pinned_;           // candidate that opened the current spawn run
  bool has_candidate_ = false;
  bool has_scoring_ = false;
  bool has_pinned_ = false;
  long last_refit_ = -1000000;
  int innovation_run_ = 0;
  double last_innovation_ = 0.0;
  long step_ = 0;
  std::deque<std::pair<double, double>> recent_;
  nd::MlpWork work_;
};

}  // namespace mob::baselines

#endif
