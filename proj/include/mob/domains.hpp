#ifndef MOB_DOMAINS_HPP
#define MOB_DOMAINS_HPP

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mob/mlp.hpp"
#include "mob/rng.hpp"

namespace mob::domains {

// One regression task: y ~ N(mu_i(x), sigma_i(x)^2) with both heads given by
// randomly initialized networks. sigma is squashed into [sigma_min, sigma_max]
// so every task has bounded, nonzero irreducible noise.
struct TaskSpec {
  int id = 0;
  nd::Mlp mu_net;     // x -> raw mean, scaled by mu_scale
  nd::Mlp sigma_net;  // x -> raw, squashed through a logistic
  double mu_scale = 5.0;
  double sigma_min = 0.25;
  double sigma_max = 3.0;

  double mean(double x) const;
  double stddev(double x) const;
};

struct TaskGenConfig {
  int n_tasks = 10;
  std::vector<int> hidden = {64, 64};
  double mu_scale = 5.0;
  double sigma_min = 0.25;
  double sigma_max = 3.0;
  double init_gain = 1.5;  // weight std = gain / sqrt(fan_in)
  double bias_std = 0.5;
};

struct TaskSet {
  std::uint64_t seed = 0;
  std::vector<TaskSpec> tasks;
};

// Deterministic in (seed, cfg); task i's networks depend only on (seed, i).
TaskSet make_task_set(std::uint64_t seed, const TaskGenConfig& cfg);

// Draw y from the task's conditional at x. x must lie in [-1, 1].
double sample_task(const TaskSpec& task, double x, nd::Rng& rng);

struct EvalAccess;

// Observation stream with hidden ground-truth task labels. Learning code sees
// only (x, y); labels are reachable solely through EvalAccess
// (mob/eval_access.hpp), which evaluation code includes and learning code
// must not.
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(std::vector<double> xs, std::vector<double> ys,
             std::vector<int> tasks);

  std::size_t size() const { return xs_.size(); }
  double x(std::size_t t) const { return xs_[t]; }
  double y(std::size_t t) const { return ys_[t]; }
  const std::vector<double>& xs() const { return xs_; }
  const std::vector<double>& ys() const { return ys_; }

 private:
  std::vector<double> xs_, ys_;
  std::vector<int> tasks_;
  friend struct EvalAccess;
};

// Markov task process: with probability switch_prob per step, jump to a
// uniformly random admissible task other than the current one.
struct TaskProcess {
  int active = 0;
  double switch_prob = 0.0;
  std::vector<int> admissible;
  nd::Rng rng;

  static TaskProcess make(std::vector<int> admissible, double switch_prob,
                          nd::Rng rng);
  // Advance one step; returns the (possibly new) active task.
  int step();
};

// x_t ~ U[-1,1]; the task evolves per `process` between consecutive steps.
Trajectory sample_trajectory(TaskProcess& process, const TaskSet& task_set,
                             int length, nd::Rng& xy_rng);

struct PartitionConfig {
  int id = 0;
  std::vector<int> segmented;
  std::vector<int> unsegmented;  // full set; must contain all segmented ids
};

struct DataConfig {
  int segmented_samples = 500;
  int offline_trajectories = 12;
  int offline_length = 200;
  int online_length = 2000;
  double switch_prob = 0.02;
};

struct OfflinePartition {
  int id = 0;
  std::map<int, std::vector<std::pair<double, double>>> segmented;  // D_l
  std::vector<Trajectory> unsegmented;                              // D_u
};

// Builds D_l (segmented_samples per task) and D_u (trajectories whose task
// process is restricted to the partition's unsegmented ids). Deterministic in
// (task_set, cfg, seed).
OfflinePartition make_partition(const TaskSet& task_set,
                                const PartitionConfig& part,
                                const DataConfig& data, std::uint64_t seed);

// Online stream over every task in the set.
Trajectory make_online_stream(const TaskSet& task_set, const DataConfig& data,
                              std::uint64_t seed);

// Mean over the grid of the pointwise Bhattacharyya distance between the two
// tasks' conditionals.
double bhattacharyya_distance(const TaskSpec& a, const TaskSpec& b,
                              std::span<const double> x_grid);

std::vector<double> uniform_grid(double lo, double hi, int points);

struct ErrorFloor {
  double mse = 0.0;
  double mae = 0.0;
};

// Monte Carlo estimate of the Bayes error floor along the stream, using the
// true generative parameters (evaluation context: reads hidden labels).
ErrorFloor irreducible_error(const TaskSet& task_set, const Trajectory& traj,
                             int n_mc, nd::Rng& rng);

// Dataset directory layout: traj_<k>.csv (t,x,y,task), task_<id>.csv (x,y)
// and partition.json with seed/spec/lengths.
void write_partition_dir(const std::string& dir, const OfflinePartition& part,
                         const PartitionConfig& spec, const DataConfig& data,
                         std::uint64_t seed);
OfflinePartition load_partition_dir(const std::string& dir);

}  // namespace mob::domains

#endif
