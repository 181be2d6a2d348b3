#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "mob/exp.hpp"
#include "mob/pca.hpp"

namespace fs = std::filesystem;
using namespace mob;
using namespace mob::exp;

namespace {

// Small-but-complete config for harness tests.
ExperimentConfig small_config() {
  ExperimentConfig cfg = default_config();
  cfg.task_gen.hidden = {16, 16};
  cfg.data.segmented_samples = 120;
  cfg.data.offline_trajectories = 4;
  cfg.data.offline_length = 40;
  cfg.data.online_length = 120;
  cfg.partitions.resize(2);
  cfg.train.ensemble_size = 2;
  cfg.train.latent_dim = 6;
  cfg.train.basis_hidden = {16, 16};
  cfg.train.latent_hidden = {24};
  cfg.train.mixing_hidden = {12};
  cfg.train.maml.meta_iterations = 40;
  cfg.train.maml.meta_batch = 12;
  cfg.train.pretrain_steps = 40;
  cfg.train.max_epochs = 2;
  cfg.seeds = {0, 1};
  cfg.irreducible_mc = 20;
  return cfg;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("config: save/load round trip preserves the digest") {
  ExperimentConfig cfg = default_config();
  save_config(cfg, "exp_test_config.json");
  ExperimentConfig loaded = load_config("exp_test_config.json");
  CHECK(config_digest(cfg) == config_digest(loaded));
  CHECK(loaded.partitions.size() == 3);
  CHECK(loaded.partitions[0].segmented == std::vector<int>{0, 5});
  CHECK(loaded.train.ensemble_size == 4);
  CHECK(loaded.train.odds.eta == 10.0);
  CHECK(loaded.train.odds.buffer_threshold == 20);
  CHECK(loaded.train.batch_trajectories == 32);
  CHECK(loaded.train.learning_rate == 1e-4);
  CHECK(loaded.train.latent_dim == 32);
  fs::remove("exp_test_config.json");
}

TEST_CASE("config: a missing field is an error naming the field") {
  ExperimentConfig cfg = default_config();
  save_config(cfg, "exp_test_broken.json");
  std::string text = slurp("exp_test_broken.json");
  auto pos = text.find("\"eta\"");
  REQUIRE(pos != std::string::npos);
  // drop the eta field entirely
  auto end = text.find(',', pos);
  text.erase(pos, end - pos + 1);
  std::ofstream out("exp_test_broken.json", std::ios::trunc);
  out << text;
  out.close();
  try {
    load_config("exp_test_broken.json");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("eta") != std::string::npos);
  }
  fs::remove("exp_test_broken.json");
}

TEST_CASE("gen: datasets materialize and regenerate byte-identically") {
  ExperimentConfig cfg = small_config();
  generate_datasets(cfg, "exp_test_data_a", false);
  generate_datasets(cfg, "exp_test_data_b", false);
  CHECK(fs::exists("exp_test_data_a/partition_1/partition.json"));
  CHECK(fs::exists("exp_test_data_a/partition_2/partition.json"));
  CHECK(fs::exists("exp_test_data_a/bhattacharyya.csv"));
  CHECK(slurp("exp_test_data_a/partition_1/traj_0.csv") ==
        slurp("exp_test_data_b/partition_1/traj_0.csv"));
  CHECK(slurp("exp_test_data_a/partition_1/task_0.csv") ==
        slurp("exp_test_data_b/partition_1/task_0.csv"));
  // refuse to clobber without force
  CHECK_THROWS_AS(generate_datasets(cfg, "exp_test_data_a", false), IoError);
  generate_datasets(cfg, "exp_test_data_a", true);  // --force path
  fs::remove_all("exp_test_data_a");
  fs::remove_all("exp_test_data_b");
}

TEST_CASE("streams are deterministic per (partition, seed) and distinct") {
  ExperimentConfig cfg = small_config();
  auto tasks = domains::make_task_set(cfg.domain_seed, cfg.task_gen);
  auto a = make_stream(cfg, tasks, 1, 0);
  auto b = make_stream(cfg, tasks, 1, 0);
  auto c = make_stream(cfg, tasks, 1, 1);
  REQUIRE(a.size() == b.size());
  for (std::size_t t = 0; t < a.size(); ++t) {
    CHECK(a.x(t) == b.x(t));
    CHECK(a.y(t) == b.y(t));
  }
  bool differs = false;
  for (std::size_t t = 0; t < a.size() && !differs; ++t)
    differs = a.x(t) != c.x(t);
  CHECK(differs);
}

TEST_CASE("run_experiment: full fan-out with shared priors and artifacts") {
  ExperimentConfig cfg = small_config();
  std::string out = "exp_test_run";
  fs::remove_all(out);
  run_experiment(cfg, out, cfg.algorithms, cfg.seeds, 2);

  // 4 algorithms x 2 seeds x 2 partitions = 16 metric files
  int metric_files = 0;
  for (const auto& e : fs::recursive_directory_iterator(out))
    if (e.is_regular_file() && e.path().filename() == "metrics.csv")
      ++metric_files;
  CHECK(metric_files == 16);
  CHECK(fs::exists(out + "/config.json"));
  CHECK(fs::exists(out + "/mob/seed0/partition_1/checkpoint.mob"));
  CHECK(fs::exists(out + "/mob/seed0/partition_1/odds_events.csv"));
  CHECK(fs::exists(out + "/mob/seed0/partition_1/latent_trace.csv"));

  // engine schema for mob, algorithm column for baselines
  {
    std::ifstream m(out + "/mob/seed0/partition_1/metrics.csv");
    std::string header;
    std::getline(m, header);
    CHECK(header == "step,x,y,y_hat,sq_err,abs_err,n_bases,task");
    std::ifstream k(out + "/maml_kshot/seed0/partition_1/metrics.csv");
    std::getline(k, header);
    CHECK(header == "step,x,y,y_hat,sq_err,abs_err,n_bases,task,algorithm");
  }

  // rerun one cell and compare bytes (determinism)
  std::string before = slurp(out + "/maml_kshot/seed0/partition_1/metrics.csv");
  auto tasks = domains::make_task_set(cfg.domain_seed, cfg.task_gen);
  auto part = domains::make_partition(tasks, cfg.partitions[0], cfg.data,
                                      cfg.data_seed + cfg.partitions[0].id);
  run_cell(cfg, tasks, part, "maml_kshot", 0, out);
  CHECK(slurp(out + "/maml_kshot/seed0/partition_1/metrics.csv") == before);

  // report over the run directory
  Report report = make_report(out);
  bool found_avg = false;
  for (const auto& row : report.rows) {
    if (row.partition == "avg") found_avg = true;
    CHECK(row.n_seeds >= 1);
    CHECK(std::isfinite(row.mse));
  }
  CHECK(found_avg);
  CHECK(report.rows.front().algorithm == cfg.algorithms.front());
  write_report_csv(report, out + "/report.csv");
  CHECK(fs::exists(out + "/report.csv"));

  fs::remove_all(out);
}

TEST_CASE("report: reducible errors subtract the floor; single seed omits CI") {
  std::string out = "exp_test_report";
  fs::remove_all(out);
  fs::create_directories(out + "/mob/seed0/partition_1");
  std::ofstream s(out + "/mob/seed0/partition_1/summary.json");
  s << R"({"algorithm":"mob","partition":1,"seed":0,"mse":10.0,"mae":2.0,)"
    << R"("model_count":3,"floor_mse":4.0,"floor_mae":1.25,"steps":10,)"
    << R"("config_digest":"x"})";
  s.close();
  Report report = make_report(out);
  REQUIRE(report.rows.size() == 1);
  CHECK(report.rows[0].reducible_mse == doctest::Approx(6.0));
  CHECK(report.rows[0].reducible_mae == doctest::Approx(0.75));
  CHECK(report.rows[0].mse_ci == 0.0);
  fs::remove_all(out);
}

TEST_CASE("report: mixed configs are refused") {
  std::string out = "exp_test_mixed";
  fs::remove_all(out);
  fs::create_directories(out + "/mob/seed0/partition_1");
  fs::create_directories(out + "/mob/seed1/partition_1");
  auto write = [&](const std::string& dir, const std::string& digest) {
    std::ofstream s(dir + "/summary.json");
    s << R"({"algorithm":"mob","partition":1,"seed":0,"mse":1.0,"mae":1.0,)"
      << R"("model_count":1,"floor_mse":0.5,"floor_mae":0.5,"steps":10,)"
      << R"("config_digest":")" << digest << R"("})";
  };
  write(out + "/mob/seed0/partition_1", "aaa");
  write(out + "/mob/seed1/partition_1", "bbb");
  CHECK_THROWS_AS(make_report(out), ConfigError);
  fs::remove_all(out);
}

TEST_CASE("pca: rank-1 data aligns with its axis") {
  nd::Rng rng(4);
  std::vector<double> axis{0.6, -0.8, 0.0};
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 200; ++i) {
    double s = rng.normal(0, 2);
    rows.push_back({axis[0] * s, axis[1] * s, axis[2] * s});
  }
  PcaResult pca = pca_top(rows, 2);
  double cosine = 0.0;
  for (int k = 0; k < 3; ++k) cosine += pca.directions[0][k] * axis[k];
  CHECK(std::abs(cosine) > 0.999);
  CHECK(pca.explained[0] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("pca: diag(4,1)-shaped sample gives fractions (0.8, 0.2)") {
  // four points with exact sample covariance diag(2, 0.5)
  std::vector<std::vector<double>> rows = {
      {2, 0}, {-2, 0}, {0, 1}, {0, -1}};
  PcaResult pca = pca_top(rows, 2);
  CHECK(pca.explained[0] == doctest::Approx(0.8).epsilon(1e-9));
  CHECK(pca.explained[1] == doctest::Approx(0.2).epsilon(1e-9));
}

TEST_CASE("pca: orthonormal directions, diagonal projections, order-invariant") {
  nd::Rng rng(9);
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 300; ++i) {
    std::vector<double> r(5);
    for (int k = 0; k < 5; ++k) r[k] = rng.normal(0, 1.0 + k);
    rows.push_back(std::move(r));
  }
  PcaResult pca = pca_top(rows, 3);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      double dot = 0.0;
      for (int k = 0; k < 5; ++k) dot += pca.directions[a][k] * pca.directions[b][k];
      CHECK(dot == doctest::Approx(a == b ? 1.0 : 0.0).epsilon(1e-8));
    }
  CHECK(pca.explained[0] >= pca.explained[1]);
  CHECK(pca.explained[1] >= pca.explained[2]);

  // projections decorrelate
  std::vector<double> mean(3, 0.0);
  for (const auto& c : pca.coords)
    for (int k = 0; k < 3; ++k) mean[k] += c[k];
  for (auto& m : mean) m /= pca.coords.size();
  double offdiag = 0.0;
  for (const auto& c : pca.coords)
    offdiag += (c[0] - mean[0]) * (c[1] - mean[1]);
  offdiag /= pca.coords.size();
  double v0 = 0.0;
  for (const auto& c : pca.coords) v0 += (c[0] - mean[0]) * (c[0] - mean[0]);
  v0 /= pca.coords.size();
  CHECK(std::abs(offdiag) / v0 < 1e-6);

  // permuting the rows leaves directions unchanged (signs are fixed)
  std::vector<std::vector<double>> shuffled(rows.rbegin(), rows.rend());
  PcaResult again = pca_top(shuffled, 3);
  for (int k = 0; k < 5; ++k)
    CHECK(again.directions[0][k] ==
          doctest::Approx(pca.directions[0][k]).epsilon(1e-6));
}

TEST_CASE("pca: fewer samples than dimensions sets the rank warning") {
  std::vector<std::vector<double>> rows = {{1, 2, 3, 4}, {2, 1, 0, -1}};
  PcaResult pca = pca_top(rows, 1);
  CHECK(pca.rank_warning);
}
