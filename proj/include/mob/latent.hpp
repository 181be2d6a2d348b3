#ifndef MOB_LATENT_HPP
#define MOB_LATENT_HPP

#include <span>
#include <vector>

#include "mob/adam.hpp"
#include "mob/basis.hpp"
#include "mob/graph.hpp"
#include "mob/mlp.hpp"
#include "mob/rng.hpp"

namespace mob::latent {

// Posterior/prior std head: softplus(raw) + kStdFloor keeps densities proper.
inline constexpr double kStdFloor = 1e-4;

struct LatentState {
  std::vector<double> z;
  std::vector<double> mu, sigma;  // parameters that produced z
  long t = 0;
};

// q_phi(z_t | z_{t-1}, x_t, y_t): input (z_prev, x, y), output (mu, raw std).
struct InferenceNet {
  nd::Mlp net;
  int d = 0;
};

// p_theta(z_t | z_{t-1}): input z_prev, output (mu, raw std).
struct PriorNet {
  nd::Mlp net;
  int d = 0;
};

// w_theta(z): input z, output K logits; weights are softmax(logits).
struct MixingNet {
  nd::Mlp net;
  int d = 0;

  int basis_count() const { return net.widths.back(); }
};

struct LatentConfig {
  int d = 32;
  std::vector<int> latent_hidden = {128, 128, 128};
  std::vector<int> mixing_hidden = {64, 64};
  double init_gain = 1.0;
  double init_bias_std = 0.0;
  // Raw-std head bias offset for the prior net: softplus(-3) ~ 0.05 keeps
  // the prior-sampled prediction path crisp before the nets have trained.
  // The inference net keeps the standard init; its std drives the estimator.
  double prior_raw_std_bias = -1.5;
};

InferenceNet make_inference_net(const LatentConfig& cfg, nd::Rng& rng);
PriorNet make_prior_net(const LatentConfig& cfg, nd::Rng& rng);
MixingNet make_mixing_net(const LatentConfig& cfg, int basis_count,
                          nd::Rng& rng);

// z = mu_phi + sigma_phi (.) eps, with eps supplied by the caller.
LatentState infer_step(const InferenceNet& q, std::span<const double> z_prev,
                       double x, double y, std::span<const double> eps);
LatentState prior_step(const PriorNet& p, std::span<const double> z_prev,
                       std::span<const double> eps);

// Softmax of the logits; sums to one within 1e-9.
std::vector<double> mixing_weights(const MixingNet& w,
                                   std::span<const double> z);

// Gaussian log density of `at` under the state's (mu, sigma).
double state_log_density(const LatentState& s, std::span<const double> at);

// Widen the logit head by one unit. Existing rows and biases are untouched;
// the new row is N(0, init_logit_scale^2) with zero bias. When `adam` is
// given, its moment vectors grow with zeroed slots at the same positions.
void grow_mixing_head(MixingNet& w, double init_logit_scale, nd::Rng& rng,
                      nd::AdamState* adam = nullptr);

// Non-owning view of the pieces the ELBO touches.
struct ElboModel {
  std::span<const basis::EnsembleBasis> bases;
  const MixingNet* mixing = nullptr;
  const PriorNet* prior = nullptr;
  const InferenceNet* inference = nullptr;
};

// Flat gradient buffers per parameter group; any pointer may be null to
// freeze that group. basis_members is indexed [basis * M + member].
struct ElboSinks {
  std::vector<std::vector<double>>* basis_members = nullptr;
  std::vector<double>* mixing = nullptr;
  std::vector<double>* prior = nullptr;
  std::vector<double>* inference = nullptr;
};

// Builds the single-sample reparameterized estimator on the tape and returns
// the scalar node. Full-trajectory form: z_0 = z_init is deterministic, the
// first observation is reconstructed at z_init when recon_at_init is set, and
// each later observation contributes
//   log P(y_t|x_t,z_t) + log p(z_t|z_{t-1}) - log q(z_t|z_{t-1},x_t,y_t)
// with z_t = mu_phi + sigma_phi (.) eps_t. Windowed losses pass the filtered
// anchor as z_init with recon_at_init = false, so every (x, y) in the span
// gets an inference step.
int build_elbo(nd::Tape& tape, const ElboModel& model, const ElboSinks& sinks,
               std::span<const double> z_init, bool recon_at_init,
               std::span<const double> xs, std::span<const double> ys,
               std::span<const std::vector<double>> eps);

// Value-only estimate over a full trajectory with eps drawn from rng.
double elbo_estimate(const ElboModel& model, std::span<const double> xs,
                     std::span<const double> ys, nd::Rng& rng);

// Deterministic value for supplied eps (test hook).
double elbo_value(const ElboModel& model, std::span<const double> xs,
                  std::span<const double> ys,
                  std::span<const std::vector<double>> eps);

}  // namespace mob::latent

#endif
