#ifndef MOB_EXP_HPP
#define MOB_EXP_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mob/baselines.hpp"
#include "mob/domains.hpp"
#include "mob/engine.hpp"

namespace mob::exp {

// Fully materialized experiment description. Loading is strict: a missing
// field is a ConfigError naming the field, so config files carry every value.
struct ExperimentConfig {
  std::uint64_t domain_seed = 12345;
  std::uint64_t data_seed = 777;
  domains::TaskGenConfig task_gen;
  domains::DataConfig data;
  std::vector<domains::PartitionConfig> partitions;
  engine::TrainConfig train;
  baselines::BaselineConfig baselines;
  std::vector<std::string> algorithms = {"mob", "mole_lite", "maml_kshot",
                                         "maml_continuous"};
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  int irreducible_mc = 100;
};

ExperimentConfig default_config();
ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& cfg, const std::string& path);
std::string config_digest(const ExperimentConfig& cfg);

// Deterministic online stream seed for a (partition, run-seed) cell.
std::uint64_t stream_seed(const ExperimentConfig& cfg, int partition_id,
                          std::uint64_t seed);
domains::Trajectory make_stream(const ExperimentConfig& cfg,
                                const domains::TaskSet& tasks,
                                int partition_id, std::uint64_t seed);

// Dataset generation: one directory per partition plus a task-distance table.
void generate_datasets(const ExperimentConfig& cfg, const std::string& out_dir,
                       bool force);

struct CellResult {
  std::string algorithm;
  int partition_id = 0;
  std::uint64_t seed = 0;
  double mse = 0.0, mae = 0.0;
  int model_count = 0;
  double floor_mse = 0.0, floor_mae = 0.0;
  engine::RunMetrics metrics;  // per-step rows (odds/latent filled for mob)
};

// Runs one algorithm on one (partition, seed) cell. When out_dir is nonempty
// the metrics CSV, logs, checkpoint and summary.json are written under
// <out_dir>/<algorithm>/seed<seed>/partition<id>/. A cached meta prior may be
// supplied so every algorithm in the cell shares it.
CellResult run_cell(const ExperimentConfig& cfg,
                    const domains::TaskSet& tasks,
                    const domains::OfflinePartition& part,
                    const std::string& algorithm, std::uint64_t seed,
                    const std::string& out_dir,
                    const basis::EnsemblePrior* shared_prior = nullptr);

// Runs the requested (algorithm, seed) cells over every partition, jobs in
// parallel; each (partition, seed) group trains its meta prior once.
void run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                    const std::vector<std::string>& algorithms,
                    const std::vector<std::uint64_t>& seeds, int jobs);

struct ReportRow {
  std::string algorithm;
  std::string partition;  // id or "avg"
  int n_seeds = 0;
  double mse = 0.0, mse_ci = 0.0;
  double mae = 0.0, mae_ci = 0.0;
  double models = 0.0, models_ci = 0.0;
  double reducible_mse = 0.0, reducible_mae = 0.0;
};

struct Report {
  std::vector<ReportRow> rows;
  std::string text;  // aligned table
};

// Aggregates every summary.json under run_dir; refuses mixed-config runs.
Report make_report(const std::string& run_dir);
void write_report_csv(const Report& report, const std::string& path);

}  // namespace mob::exp

#endif
