#ifndef MOB_BASIS_HPP
#define MOB_BASIS_HPP

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "mob/domains.hpp"
#include "mob/mlp.hpp"

namespace mob::basis {

inline constexpr double kSigmaFloor = 1e-3;

enum class BasisOrigin : int {
  kPretrained = 0,
  kOddsInstantiated = 1,
  kOddsCandidate = 2,
};

// One basis model: an ensemble of M Gaussian-head networks. Each member maps
// x -> (mu, raw) with sigma = softplus(raw) + sigma_floor.
struct EnsembleBasis {
  std::vector<nd::Mlp> members;
  BasisOrigin origin = BasisOrigin::kPretrained;
  int source_task = -1;      // pretrained bases remember their task
  long creation_step = -1;   // global step at instantiation, -1 for offline init
  double sigma_floor = kSigmaFloor;

  int ensemble_size() const { return static_cast<int>(members.size()); }

  // Per-member heads at x; mu and sigma get ensemble_size() entries.
  void heads(double x, std::vector<double>& mu, std::vector<double>& sigma) const;
};

// Meta-learned initialization {theta*_j} plus the inner-loop recipe used to
// adapt new bases from it.
struct EnsemblePrior {
  std::vector<nd::Mlp> members;
  double inner_lr = 0.01;
  int inner_steps = 5;
  double sigma_floor = kSigmaFloor;
  double clip_norm = 50.0;  // SGD step stability clamp

  int ensemble_size() const { return static_cast<int>(members.size()); }
};

struct MamlConfig {
  int ensemble_size = 4;
  std::vector<int> hidden = {128, 128};
  double init_gain = 1.0;
  double init_bias_std = 0.1;
  double inner_lr = 0.01;
  int inner_steps = 5;
  double outer_lr = 1e-3;
  int meta_iterations = 200;
  int meta_batch = 32;
  double sigma_floor = kSigmaFloor;
  double clip_norm = 50.0;
};

// First-order MAML over the segmented tasks. Members are trained with
// independent initializations and independent minibatch orders.
EnsemblePrior train_ensemble_prior(const domains::OfflinePartition& part,
                                   const MamlConfig& cfg, std::uint64_t seed);

// Adapt every member from theta*_j with plain SGD steps of Gaussian NLL.
// steps < 0 uses prior.inner_steps; minibatch 0 runs full-batch steps. With
// bootstrap set, each member trains on its own with-replacement resample of
// the data, which keeps ensemble spread alive through long adaptations.
EnsembleBasis adapt_basis(const EnsemblePrior& prior,
                          std::span<const double> xs,
                          std::span<const double> ys, int steps = -1,
                          int minibatch = 0, std::uint64_t batch_seed = 0,
                          bool bootstrap = false);
EnsembleBasis adapt_basis(const EnsemblePrior& prior,
                          std::span<const std::pair<double, double>> data,
                          int steps = -1, int minibatch = 0,
                          std::uint64_t batch_seed = 0, bool bootstrap = false);

// log[(1/M) sum_j N(y; mu_ij(x), sigma_ij(x)^2)], log-sum-exp stabilized.
double basis_log_likelihood(const EnsembleBasis& b, double x, double y);

// Throws ContractError when weights stray from the simplex beyond 1e-6.
void validate_simplex(std::span<const double> weights);

// log sum_i w_i exp(ll_i) over bases, log-sum-exp stabilized.
double mixture_log_likelihood(std::span<const EnsembleBasis> bases,
                              std::span<const double> weights, double x,
                              double y);

// Point estimate: (1/M) sum_i w_i sum_j mu_ij(x).
double mixture_point_estimate(std::span<const EnsembleBasis> bases,
                              std::span<const double> weights, double x);

// Full predictive mixture at x: per-basis component heads plus the weights
// and point estimate.
struct GaussianMixturePrediction {
  std::vector<std::vector<double>> mu;     // [basis][member]
  std::vector<std::vector<double>> sigma;  // [basis][member]
  std::vector<double> weights;
  double point = 0.0;
};

GaussianMixturePrediction mixture_predict(std::span<const EnsembleBasis> bases,
                                          std::span<const double> weights,
                                          double x);

// Mean NLL of the ensemble's mixture likelihood over a sample set.
double basis_mean_nll(const EnsembleBasis& b, std::span<const double> xs,
                      std::span<const double> ys);

}  // namespace mob::basis

#endif
