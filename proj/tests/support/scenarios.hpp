#ifndef MOB_TESTS_SCENARIOS_HPP
#define MOB_TESTS_SCENARIOS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "mob/basis.hpp"
#include "mob/domains.hpp"
#include "mob/odds.hpp"

// Shift-detection scenarios for the ODDS detector: OoD flag rates on
// in-distribution versus shifted streams. Each scenario constructs the shift
// type it probes. Covariate shift uses a high-gain (wiggly) task generator so
// the ground truth off the training support genuinely departs from any smooth
// extrapolation; concept shift uses a smooth generator and picks the
// (train pair, held-out) combination with the largest expected density gap,
// so the stream really is a new concept over the same inputs.
namespace scenarios {

struct ShiftOutcome {
  double flag_rate_in = 0.0;
  double flag_rate_shifted = 0.0;
  double margin() const { return flag_rate_shifted - flag_rate_in; }
};

struct ShiftSetup {
  mob::domains::TaskSet tasks;
  mob::basis::EnsemblePrior prior;
  std::vector<mob::basis::EnsembleBasis> bases;
  std::vector<int> train_ids;
};

inline constexpr int kCandidateSteps = 25;
inline constexpr int kWarmup = 40;      // steps before rates are counted
inline constexpr int kRated = 300;      // rated stream length after warmup

inline ShiftSetup train_setup(const mob::domains::TaskSet& tasks,
                              std::vector<int> train_ids, double x_lo,
                              double x_hi, int pretrain_steps,
                              std::uint64_t seed) {
  using namespace mob;
  ShiftSetup s;
  s.tasks = tasks;
  s.train_ids = std::move(train_ids);

  domains::OfflinePartition part;
  part.id = 0;
  nd::Rng rng = nd::Rng::from(seed, 77);
  for (int id : s.train_ids) {
    auto& samples = part.segmented[id];
    for (int k = 0; k < 300; ++k) {
      double x = rng.uniform(x_lo, x_hi);
      samples.emplace_back(x, domains::sample_task(s.tasks.tasks[id], x, rng));
    }
  }
  basis::MamlConfig maml;
  maml.ensemble_size = 4;
  maml.hidden = {64, 64};
  maml.meta_iterations = 150;
  maml.meta_batch = 24;
  s.prior = basis::train_ensemble_prior(part, maml, seed + 1);
  for (int id : s.train_ids) {
    basis::EnsembleBasis b = basis::adapt_basis(
        s.prior, part.segmented.at(id), pretrain_steps, 64, seed + id,
        /*bootstrap=*/true);
    b.origin = basis::BasisOrigin::kPretrained;
    b.source_task = id;
    s.bases.push_back(std::move(b));
  }
  return s;
}

// Contiguous per-task segments so the candidate window stays coherent.
inline std::vector<std::pair<double, double>> task_stream(
    const ShiftSetup& s, const std::vector<int>& ids, double x_lo, double x_hi,
    int length, std::uint64_t seed) {
  mob::nd::Rng rng = mob::nd::Rng::from(seed, 5);
  std::vector<std::pair<double, double>> stream;
  int seg = length / static_cast<int>(ids.size());
  for (int id : ids)
    for (int k = 0; k < seg; ++k) {
      double x = rng.uniform(x_lo, x_hi);
      stream.emplace_back(x,
                          mob::domains::sample_task(s.tasks.tasks[id], x, rng));
    }
  return stream;
}

// Flag rate past the warmup; the basis set is frozen and instantiations are
// discarded.
inline double flag_rate(const ShiftSetup& s,
                        const std::vector<std::pair<double, double>>& stream) {
  mob::odds::OddsConfig cfg;
  cfg.candidate_steps = kCandidateSteps;
  mob::odds::OddsDetector detector(cfg);
  int flags = 0, counted = 0;
  long step = 0;
  for (auto [x, y] : stream) {
    auto r = detector.step(s.bases, s.prior, x, y, step);
    if (step >= kWarmup) {
      flags += r.verdict.is_ood ? 1 : 0;
      ++counted;
    }
    ++step;
  }
  return static_cast<double>(flags) / static_cast<double>(counted);
}

// Covariate shift: bases trained on x in [-1, 0]; shifted points probe
// x in [0.5, 1] with the same tasks.
inline ShiftOutcome covariate_shift(std::uint64_t seed) {
  mob::domains::TaskGenConfig gen;
  gen.hidden = {32, 32};
  gen.sigma_max = 1.5;
  gen.init_gain = 4.0;  // high-frequency tasks: extrapolation honestly fails
  gen.bias_std = 1.0;
  auto tasks = mob::domains::make_task_set(seed, gen);
  ShiftSetup s = train_setup(tasks, {0, 1}, -1.0, 0.0, 80, seed);
  ShiftOutcome out;
  out.flag_rate_in = flag_rate(
      s, task_stream(s, s.train_ids, -1.0, 0.0, kWarmup + kRated, seed + 11));
  out.flag_rate_shifted = flag_rate(
      s, task_stream(s, s.train_ids, 0.5, 1.0, kWarmup + kRated, seed + 12));
  return out;
}

inline double pointwise_kl(double mu_c, double sg_c, double mu_a, double sg_a) {
  return std::log(sg_a / sg_c) +
         (sg_c * sg_c + (mu_c - mu_a) * (mu_c - mu_a)) / (2.0 * sg_a * sg_a) -
         0.5;
}

// Concept shift: same x support, targets from a held-out task. The train pair
// (a, b) and held-out c maximize the mean over x of min(KL(c||a), KL(c||b)),
// the expected per-point detection gap of an oracle candidate.
inline ShiftOutcome concept_shift(std::uint64_t seed) {
  using namespace mob;
  domains::TaskGenConfig gen;
  gen.hidden = {32, 32};
  gen.sigma_max = 1.5;
  auto tasks = domains::make_task_set(seed, gen);
  auto grid = domains::uniform_grid(-1, 1, 101);
  int n = static_cast<int>(tasks.tasks.size());
  int best_a = 0, best_b = 1, best_c = 2;
  double best = -1.0;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      for (int c = 0; c < n; ++c) {
        if (c == a || c == b) continue;
        double gap = 0.0;
        for (double x : grid) {
          double mu_c = tasks.tasks[c].mean(x), sg_c = tasks.tasks[c].stddev(x);
          gap += std::min(
              pointwise_kl(mu_c, sg_c, tasks.tasks[a].mean(x),
                           tasks.tasks[a].stddev(x)),
              pointwise_kl(mu_c, sg_c, tasks.tasks[b].mean(x),
                           tasks.tasks[b].stddev(x)));
        }
        if (gap > best) {
          best = gap;
          best_a = a;
          best_b = b;
          best_c = c;
        }
      }
  ShiftSetup s = train_setup(tasks, {best_a, best_b}, -1.0, 1.0, 300, seed);
  ShiftOutcome out;
  out.flag_rate_in = flag_rate(
      s, task_stream(s, s.train_ids, -1.0, 1.0, kWarmup + kRated, seed + 11));
  out.flag_rate_shifted = flag_rate(
      s, task_stream(s, {best_c}, -1.0, 1.0, kWarmup + kRated, seed + 12));
  return out;
}

}  // namespace scenarios

#endif
