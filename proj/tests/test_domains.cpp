#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "mob/domains.hpp"
#include "mob/eval_access.hpp"

using namespace mob::domains;
using mob::nd::Rng;

namespace {
TaskGenConfig small_cfg() {
  TaskGenConfig cfg;
  cfg.hidden = {16, 16};
  return cfg;
}
}  // namespace

TEST_CASE("make_task_set: deterministic in seed on a 101-point grid") {
  auto cfg = small_cfg();
  TaskSet a = make_task_set(9, cfg);
  TaskSet b = make_task_set(9, cfg);
  auto grid = uniform_grid(-1, 1, 101);
  for (double x : grid) {
    CHECK(a.tasks[3].mean(x) == b.tasks[3].mean(x));
    CHECK(a.tasks[3].stddev(x) == b.tasks[3].stddev(x));
  }
}

TEST_CASE("make_task_set: ten tasks, dense unique ids") {
  TaskSet set = make_task_set(1, small_cfg());
  REQUIRE(set.tasks.size() == 10);
  for (int i = 0; i < 10; ++i) CHECK(set.tasks[i].id == i);
}

TEST_CASE("distinct tasks differ in mean function") {
  TaskSet set = make_task_set(7, small_cfg());
  auto grid = uniform_grid(-1, 1, 101);
  double gap = 0.0;
  for (double x : grid)
    gap += std::abs(set.tasks[0].mean(x) - set.tasks[1].mean(x));
  CHECK(gap / grid.size() > 0.0);
}

TEST_CASE("sigma stays inside [sigma_min, sigma_max]") {
  TaskSet set = make_task_set(3, small_cfg());
  for (const auto& task : set.tasks)
    for (double x : uniform_grid(-1, 1, 101)) {
      CHECK(task.stddev(x) >= 0.25);
      CHECK(task.stddev(x) <= 3.0);
    }
}

TEST_CASE("sample_task: Monte Carlo mean and variance match the task") {
  TaskSet set = make_task_set(21, small_cfg());
  const TaskSpec& task = set.tasks[2];
  Rng rng(5);
  double x = 0.3;
  int n = 10000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    double y = sample_task(task, x, rng);
    s += y;
    s2 += y * y;
  }
  double mean = s / n, var = s2 / n - mean * mean;
  double sg = task.stddev(x);
  CHECK(std::abs(mean - task.mean(x)) < 4.0 * sg / std::sqrt(double(n)) * 1.5);
  CHECK(var == doctest::Approx(sg * sg).epsilon(0.10));
}

TEST_CASE("sample_task: draws at different x track different means") {
  TaskSet set = make_task_set(21, small_cfg());
  // find a task and pair of x with a large mean gap
  const TaskSpec& task = set.tasks[0];
  double x1 = -0.9, x2 = 0.9, best_gap = 0;
  for (double a : uniform_grid(-1, 1, 21))
    for (double b : uniform_grid(-1, 1, 21)) {
      double g = std::abs(task.mean(a) - task.mean(b));
      if (g > best_gap) best_gap = g, x1 = a, x2 = b;
    }
  REQUIRE(best_gap > 1.0);
  Rng rng(6);
  double m1 = 0, m2 = 0;
  int n = 4000;
  for (int i = 0; i < n; ++i) m1 += sample_task(task, x1, rng);
  for (int i = 0; i < n; ++i) m2 += sample_task(task, x2, rng);
  m1 /= n;
  m2 /= n;
  CHECK(std::abs(m1 - m2) > best_gap / 2);
}

TEST_CASE("sample_task rejects x outside [-1,1]") {
  TaskSet set = make_task_set(1, small_cfg());
  Rng rng(1);
  CHECK_THROWS_AS(sample_task(set.tasks[0], 1.5, rng), mob::ContractError);
}

TEST_CASE("trajectory with switch probability 0 keeps one task") {
  TaskSet set = make_task_set(2, small_cfg());
  TaskProcess proc = TaskProcess::make({0, 1, 2}, 0.0, Rng(3));
  Rng xy(4);
  Trajectory traj = sample_trajectory(proc, set, 200, xy);
  const auto& labels = EvalAccess::labels(traj);
  for (int l : labels) CHECK(l == labels[0]);
}

TEST_CASE("trajectory with switch probability 1 and two tasks alternates") {
  TaskSet set = make_task_set(2, small_cfg());
  TaskProcess proc = TaskProcess::make({0, 1}, 1.0, Rng(3));
  Rng xy(4);
  Trajectory traj = sample_trajectory(proc, set, 50, xy);
  const auto& labels = EvalAccess::labels(traj);
  for (std::size_t t = 1; t < labels.size(); ++t)
    CHECK(labels[t] != labels[t - 1]);
}

TEST_CASE("empirical switch rate concentrates near the parameter") {
  TaskSet set = make_task_set(5, small_cfg());
  TaskProcess proc = TaskProcess::make({0, 1, 2, 3, 4}, 0.02, Rng(11));
  Rng xy(12);
  Trajectory traj = sample_trajectory(proc, set, 10000, xy);
  const auto& labels = EvalAccess::labels(traj);
  int switches = 0;
  for (std::size_t t = 1; t < labels.size(); ++t)
    if (labels[t] != labels[t - 1]) ++switches;
  CHECK(switches > 140);  // 200 +- 30%
  CHECK(switches < 260);
}

TEST_CASE("make_partition: table-3 style partition layout") {
  TaskSet set = make_task_set(13, small_cfg());
  PartitionConfig spec;
  spec.id = 1;
  spec.segmented = {0, 5};
  spec.unsegmented = {0, 1, 2, 5, 6};
  DataConfig data;
  data.segmented_samples = 40;
  data.offline_trajectories = 4;
  data.offline_length = 150;
  OfflinePartition part = make_partition(set, spec, data, 99);
  CHECK(part.segmented.size() == 2);
  CHECK(part.segmented.at(0).size() == 40);
  CHECK(part.unsegmented.size() == 4);
  // all hidden labels fall inside the declared unsegmented set
  std::set<int> allowed(spec.unsegmented.begin(), spec.unsegmented.end());
  for (const auto& traj : part.unsegmented)
    for (int l : EvalAccess::labels(traj)) CHECK(allowed.count(l) == 1);
}

TEST_CASE("make_partition rejects segmented not inside unsegmented") {
  TaskSet set = make_task_set(13, small_cfg());
  PartitionConfig spec;
  spec.segmented = {0, 5};
  spec.unsegmented = {1, 2, 5};
  CHECK_THROWS_AS(make_partition(set, spec, DataConfig{}, 1),
                  mob::ContractError);
}

TEST_CASE("make_partition rejects unknown task ids") {
  TaskSet set = make_task_set(13, small_cfg());
  PartitionConfig spec;
  spec.segmented = {0};
  spec.unsegmented = {0, 42};
  CHECK_THROWS_AS(make_partition(set, spec, DataConfig{}, 1),
                  mob::ContractError);
}

TEST_CASE("bhattacharyya: self distance is zero, symmetric, closed form") {
  TaskSet set = make_task_set(17, small_cfg());
  auto grid = uniform_grid(-1, 1, 101);
  CHECK(bhattacharyya_distance(set.tasks[0], set.tasks[0], grid) ==
        doctest::Approx(0.0).epsilon(1e-12));
  double ab = bhattacharyya_distance(set.tasks[0], set.tasks[1], grid);
  double ba = bhattacharyya_distance(set.tasks[1], set.tasks[0], grid);
  CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
  CHECK(ab >= 0.0);
}

TEST_CASE("bhattacharyya: pointwise N(0,1) vs N(1,1) evaluates to 0.125") {
  // Two synthetic tasks with constant heads: zero nets give mu=0 and
  // logistic(0)=0.5 -> choose bounds so sigma == 1 exactly.
  TaskSpec a, b;
  a.mu_net.widths = {1, 1};
  a.mu_net.params = {0.0, 0.0};
  a.sigma_net = a.mu_net;
  a.mu_scale = 1.0;
  a.sigma_min = 0.0;
  a.sigma_max = 2.0;  // sigma = 0 + 2*0.5 = 1
  b = a;
  b.mu_net.params = {0.0, 1.0};  // mean = 1 everywhere
  auto grid = uniform_grid(-1, 1, 11);
  CHECK(bhattacharyya_distance(a, b, grid) ==
        doctest::Approx(0.125).epsilon(1e-12));
}

TEST_CASE("irreducible_error approaches sigma^2 for constant-noise task") {
  TaskSpec task;
  task.mu_net.widths = {1, 1};
  task.mu_net.params = {0.0, 0.0};
  task.sigma_net = task.mu_net;
  task.mu_scale = 1.0;
  task.sigma_min = 0.0;
  task.sigma_max = 1.5;  // sigma = 0.75 everywhere
  TaskSet set;
  set.tasks = {task};
  std::vector<double> xs(50, 0.0), ys(50, 0.0);
  std::vector<int> labels(50, 0);
  Trajectory traj(xs, ys, labels);
  Rng rng(8);
  ErrorFloor floor = irreducible_error(set, traj, 4000, rng);
  CHECK(floor.mse == doctest::Approx(0.75 * 0.75).epsilon(0.03));
  CHECK(floor.mse >= 0.0);
  CHECK(floor.mae == doctest::Approx(0.75 * std::sqrt(2.0 / M_PI)).epsilon(0.03));
}

TEST_CASE("partition round-trips through the dataset directory format") {
  TaskSet set = make_task_set(4, small_cfg());
  PartitionConfig spec;
  spec.id = 2;
  spec.segmented = {1};
  spec.unsegmented = {1, 3};
  DataConfig data;
  data.segmented_samples = 12;
  data.offline_trajectories = 2;
  data.offline_length = 30;
  OfflinePartition part = make_partition(set, spec, data, 5);
  std::string dir = "test_partition_dir";
  write_partition_dir(dir, part, spec, data, 5);
  OfflinePartition loaded = load_partition_dir(dir);
  CHECK(loaded.id == part.id);
  REQUIRE(loaded.segmented.at(1).size() == part.segmented.at(1).size());
  for (std::size_t i = 0; i < part.segmented.at(1).size(); ++i) {
    CHECK(loaded.segmented.at(1)[i].first == part.segmented.at(1)[i].first);
    CHECK(loaded.segmented.at(1)[i].second == part.segmented.at(1)[i].second);
  }
  REQUIRE(loaded.unsegmented.size() == 2);
  for (std::size_t k = 0; k < 2; ++k) {
    const auto& a = part.unsegmented[k];
    const auto& b = loaded.unsegmented[k];
    REQUIRE(a.size() == b.size());
    for (std::size_t t = 0; t < a.size(); ++t) {
      CHECK(a.x(t) == b.x(t));
      CHECK(a.y(t) == b.y(t));
    }
    CHECK(EvalAccess::labels(a) == EvalAccess::labels(b));
  }
  std::filesystem::remove_all(dir);
}
