#include "mob/domains.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "mob/csv.hpp"
#include "mob/errors.hpp"
#include "mob/eval_access.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mob::domains {

double TaskSpec::mean(double x) const {
  return mu_scale * mlp_forward(mu_net, std::span<const double>(&x, 1))[0];
}

double TaskSpec::stddev(double x) const {
  double raw = mlp_forward(sigma_net, std::span<const double>(&x, 1))[0];
  return sigma_min + (sigma_max - sigma_min) * nd::logistic(raw);
}

TaskSet make_task_set(std::uint64_t seed, const TaskGenConfig& cfg) {
  if (cfg.n_tasks < 1) throw ContractError("make_task_set: n_tasks >= 1");
  TaskSet set;
  set.seed = seed;
  std::vector<int> widths;
  widths.push_back(1);
  for (int h : cfg.hidden) widths.push_back(h);
  widths.push_back(1);
  for (int i = 0; i < cfg.n_tasks; ++i) {
    TaskSpec task;
    task.id = i;
    task.mu_scale = cfg.mu_scale;
    task.sigma_min = cfg.sigma_min;
    task.sigma_max = cfg.sigma_max;
    nd::Rng mu_rng = nd::Rng::from(seed, 2 * static_cast<std::uint64_t>(i));
    nd::Rng sg_rng = nd::Rng::from(seed, 2 * static_cast<std::uint64_t>(i) + 1);
    task.mu_net = nd::mlp_init(widths, mu_rng, cfg.init_gain, cfg.bias_std);
    task.sigma_net = nd::mlp_init(widths, sg_rng, cfg.init_gain, cfg.bias_std);
    set.tasks.push_back(std::move(task));
  }
  return set;
}

double sample_task(const TaskSpec& task, double x, nd::Rng& rng) {
  if (x < -1.0 || x > 1.0)
    throw ContractError("sample_task: x outside [-1, 1]");
  return rng.normal(task.mean(x), task.stddev(x));
}

Trajectory::Trajectory(std::vector<double> xs, std::vector<double> ys,
                       std::vector<int> tasks)
    : xs_(std::move(xs)), ys_(std::move(ys)), tasks_(std::move(tasks)) {
  if (xs_.size() != ys_.size() || xs_.size() != tasks_.size())
    throw ContractError("Trajectory: component lengths differ");
}

TaskProcess TaskProcess::make(std::vector<int> admissible, double switch_prob,
                              nd::Rng rng) {
  if (admissible.empty()) throw ContractError("TaskProcess: no admissible tasks");
  if (switch_prob < 0.0 || switch_prob > 1.0)
    throw ContractError("TaskProcess: switch_prob outside [0, 1]");
  TaskProcess p;
  p.admissible = std::move(admissible);
  p.switch_prob = switch_prob;
  p.rng = rng;
  p.active = p.admissible[p.rng.below(p.admissible.size())];
  return p;
}

int TaskProcess::step() {
  if (admissible.size() > 1 && rng.uniform() < switch_prob) {
    int idx = static_cast<int>(rng.below(admissible.size() - 1));
    int count = 0;
    for (int id : admissible) {
      if (id == active) continue;
      if (count++ == idx) {
        active = id;
        break;
      }
    }
  }
  return active;
}

Trajectory sample_trajectory(TaskProcess& process, const TaskSet& task_set,
                             int length, nd::Rng& xy_rng) {
  if (length < 1) throw ContractError("sample_trajectory: length >= 1");
  std::vector<double> xs(length), ys(length);
  std::vector<int> tasks(length);
  for (int t = 0; t < length; ++t) {
    tasks[t] = process.active;
    xs[t] = xy_rng.uniform(-1.0, 1.0);
    ys[t] = sample_task(task_set.tasks[process.active], xs[t], xy_rng);
    process.step();
  }
  return Trajectory(std::move(xs), std::move(ys), std::move(tasks));
}

OfflinePartition make_partition(const TaskSet& task_set,
                                const PartitionConfig& part,
                                const DataConfig& data, std::uint64_t seed) {
  std::set<int> unseg(part.unsegmented.begin(), part.unsegmented.end());
  for (int id : part.segmented) {
    if (!unseg.count(id))
      throw ContractError("make_partition: segmented task " +
                          std::to_string(id) + " not in unsegmented set");
  }
  for (int id : part.unsegmented) {
    if (id < 0 || id >= static_cast<int>(task_set.tasks.size()))
      throw ContractError("make_partition: unknown task id " +
                          std::to_string(id));
  }
  OfflinePartition out;
  out.id = part.id;
  for (int id : part.segmented) {
    nd::Rng rng = nd::Rng::from(seed, 1000 + static_cast<std::uint64_t>(id));
    auto& samples = out.segmented[id];
    samples.reserve(data.segmented_samples);
    for (int k = 0; k < data.segmented_samples; ++k) {
      double x = rng.uniform(-1.0, 1.0);
      samples.emplace_back(x, sample_task(task_set.tasks[id], x, rng));
    }
  }
  for (int k = 0; k < data.offline_trajectories; ++k) {
    TaskProcess proc = TaskProcess::make(
        part.unsegmented, data.switch_prob,
        nd::Rng::from(seed, 2000 + static_cast<std::uint64_t>(k)));
    nd::Rng xy = nd::Rng::from(seed, 3000 + static_cast<std::uint64_t>(k));
    out.unsegmented.push_back(
        sample_trajectory(proc, task_set, data.offline_length, xy));
  }
  return out;
}

Trajectory make_online_stream(const TaskSet& task_set, const DataConfig& data,
                              std::uint64_t seed) {
  std::vector<int> all;
  for (const auto& t : task_set.tasks) all.push_back(t.id);
  TaskProcess proc =
      TaskProcess::make(all, data.switch_prob, nd::Rng::from(seed, 1));
  nd::Rng xy = nd::Rng::from(seed, 2);
  return sample_trajectory(proc, task_set, data.online_length, xy);
}

double bhattacharyya_distance(const TaskSpec& a, const TaskSpec& b,
                              std::span<const double> x_grid) {
  if (x_grid.empty()) throw ContractError("bhattacharyya_distance: empty grid");
  double total = 0.0;
  for (double x : x_grid) {
    double mu_a = a.mean(x), mu_b = b.mean(x);
    double va = a.stddev(x) * a.stddev(x);
    double vb = b.stddev(x) * b.stddev(x);
    double dmu = mu_a - mu_b;
    total += dmu * dmu / (4.0 * (va + vb)) +
             0.5 * std::log((va + vb) / (2.0 * std::sqrt(va * vb)));
  }
  return total / static_cast<double>(x_grid.size());
}

std::vector<double> uniform_grid(double lo, double hi, int points) {
  std::vector<double> g(points);
  for (int i = 0; i < points; ++i)
    g[i] = lo + (hi - lo) * static_cast<double>(i) / (points - 1);
  return g;
}

ErrorFloor irreducible_error(const TaskSet& task_set, const Trajectory& traj,
                             int n_mc, nd::Rng& rng) {
  const auto& labels = EvalAccess::labels(traj);
  ErrorFloor floor;
  for (std::size_t t = 0; t < traj.size(); ++t) {
    const TaskSpec& task = task_set.tasks[labels[t]];
    double mu = task.mean(traj.x(t));
    double sg = task.stddev(traj.x(t));
    double se = 0.0, ae = 0.0;
    for (int k = 0; k < n_mc; ++k) {
      double y = rng.normal(mu, sg);
      se += (y - mu) * (y - mu);
      ae += std::abs(y - mu);  // Gaussian median equals the mean
    }
    floor.mse += se / n_mc;
    floor.mae += ae / n_mc;
  }
  floor.mse /= static_cast<double>(traj.size());
  floor.mae /= static_cast<double>(traj.size());
  return floor;
}

void write_partition_dir(const std::string& dir, const OfflinePartition& part,
                         const PartitionConfig& spec, const DataConfig& data,
                         std::uint64_t seed) {
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = "mob-partition";
  manifest["version"] = 1;
  manifest["id"] = part.id;
  manifest["seed"] = seed;
  manifest["segmented"] = spec.segmented;
  manifest["unsegmented"] = spec.unsegmented;
  manifest["segmented_samples"] = data.segmented_samples;
  manifest["offline_trajectories"] = data.offline_trajectories;
  manifest["offline_length"] = data.offline_length;
  manifest["switch_prob"] = data.switch_prob;
  std::ofstream mf(dir + "/partition.json", std::ios::trunc);
  if (!mf) throw IoError("cannot write " + dir + "/partition.json");
  mf << manifest.dump(2) << '\n';

  for (const auto& [id, samples] : part.segmented) {
    io::Csv table;
    table.header = {"x", "y"};
    for (const auto& [x, y] : samples) table.rows.push_back({x, y});
    io::write_csv(dir + "/task_" + std::to_string(id) + ".csv", table);
  }
  for (std::size_t k = 0; k < part.unsegmented.size(); ++k) {
    const Trajectory& traj = part.unsegmented[k];
    const auto& labels = EvalAccess::labels(traj);
    io::Csv table;
    table.header = {"t", "x", "y", "task"};
    for (std::size_t t = 0; t < traj.size(); ++t)
      table.rows.push_back({static_cast<double>(t), traj.x(t), traj.y(t),
                            static_cast<double>(labels[t])});
    io::write_csv(dir + "/traj_" + std::to_string(k) + ".csv", table);
  }
}

OfflinePartition load_partition_dir(const std::string& dir) {
  std::ifstream mf(dir + "/partition.json");
  if (!mf) throw IoError("cannot open " + dir + "/partition.json");
  json manifest = json::parse(mf, nullptr, /*allow_exceptions=*/true);
  if (manifest.value("format", "") != "mob-partition")
    throw IoError("not a partition manifest: " + dir);
  OfflinePartition part;
  part.id = manifest.at("id").get<int>();
  for (int id : manifest.at("segmented").get<std::vector<int>>()) {
    io::Csv table = io::read_csv(dir + "/task_" + std::to_string(id) + ".csv");
    auto& samples = part.segmented[id];
    for (const auto& row : table.rows) samples.emplace_back(row[0], row[1]);
  }
  int n_traj = manifest.at("offline_trajectories").get<int>();
  for (int k = 0; k < n_traj; ++k) {
    io::Csv table = io::read_csv(dir + "/traj_" + std::to_string(k) + ".csv");
    std::vector<double> xs, ys;
    std::vector<int> tasks;
    for (const auto& row : table.rows) {
      xs.push_back(row[1]);
      ys.push_back(row[2]);
      tasks.push_back(static_cast<int>(row[3]));
    }
    part.unsegmented.emplace_back(std::move(xs), std::move(ys),
                                  std::move(tasks));
  }
  return part;
}

}  // namespace mob::domains
