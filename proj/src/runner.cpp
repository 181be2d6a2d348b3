#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "mob/csv.hpp"
#include "mob/errors.hpp"
#include "mob/eval_access.hpp"
#include "mob/exp.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mob::exp {

std::uint64_t stream_seed(const ExperimentConfig& cfg, int partition_id,
                          std::uint64_t seed) {
  return nd::Rng::from(cfg.data_seed + 0x51ULL * partition_id, 70000 + seed)
      .next_u64();
}

domains::Trajectory make_stream(const ExperimentConfig& cfg,
                                const domains::TaskSet& tasks,
                                int partition_id, std::uint64_t seed) {
  return domains::make_online_stream(tasks, cfg.data,
                                     stream_seed(cfg, partition_id, seed));
}

void generate_datasets(const ExperimentConfig& cfg, const std::string& out_dir,
                       bool force) {
  fs::path root(out_dir);
  if (fs::exists(root) && !fs::is_empty(root) && !force)
    throw IoError("output directory not empty (use --force): " + out_dir);
  fs::create_directories(root);

  domains::TaskSet tasks = domains::make_task_set(cfg.domain_seed, cfg.task_gen);
  for (const auto& pspec : cfg.partitions) {
    domains::OfflinePartition part = domains::make_partition(
        tasks, pspec, cfg.data, cfg.data_seed + pspec.id);
    domains::write_partition_dir(
        (root / ("partition_" + std::to_string(pspec.id))).string(), part,
        pspec, cfg.data, cfg.data_seed + pspec.id);
  }

  // pairwise task distances (appendix-style table)
  auto grid = domains::uniform_grid(-1, 1, 101);
  io::Csv table;
  table.header = {"task_a", "task_b", "bhattacharyya"};
  for (int a = 0; a < cfg.task_gen.n_tasks; ++a)
    for (int b = 0; b < cfg.task_gen.n_tasks; ++b)
      table.rows.push_back(
          {static_cast<double>(a), static_cast<double>(b),
           domains::bhattacharyya_distance(tasks.tasks[a], tasks.tasks[b],
                                           grid)});
  io::write_csv((root / "bhattacharyya.csv").string(), table);

  json manifest;
  manifest["format"] = "mob-dataset";
  manifest["config_digest"] = config_digest(cfg);
  manifest["partitions"] = json::array();
  for (const auto& p : cfg.partitions)
    manifest["partitions"].push_back(p.id);
  std::ofstream mf(root / "dataset.json", std::ios::trunc);
  if (!mf) throw IoError("cannot write dataset manifest");
  mf << manifest.dump(2) << '\n';
}

namespace {

engine::TrainConfig cell_train_config(const ExperimentConfig& cfg,
                                      std::uint64_t seed) {
  engine::TrainConfig tc = cfg.train;
  tc.seed = seed;
  return tc;
}

// Streams a baseline through predict/observe, producing engine-shaped rows.
template <typename Algo>
engine::RunMetrics run_baseline(Algo& algo, const domains::Trajectory& stream) {
  const auto& labels = domains::EvalAccess::labels(stream);
  engine::RunMetrics metrics;
  double se = 0.0, ae = 0.0;
  for (std::size_t t = 0; t < stream.size(); ++t) {
    double x = stream.x(t), y = stream.y(t);
    double y_hat = algo.predict(x);
    algo.observe(x, y);
    engine::StepRecord rec;
    rec.step = static_cast<long>(t);
    rec.x = x;
    rec.y = y;
    rec.y_hat = y_hat;
    rec.sq_err = (y - y_hat) * (y - y_hat);
    rec.abs_err = std::abs(y - y_hat);
    rec.n_bases = algo.model_count();
    rec.task = labels[t];
    se += rec.sq_err;
    ae += rec.abs_err;
    metrics.steps.push_back(rec);
  }
  metrics.mse = se / static_cast<double>(stream.size());
  metrics.mae = ae / static_cast<double>(stream.size());
  metrics.final_bases = algo.model_count();
  return metrics;
}

void write_metrics_csv(const std::string& path,
                       const engine::RunMetrics& metrics,
                       const std::string& algorithm, bool engine_schema) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << "step,x,y,y_hat,sq_err,abs_err,n_bases,task";
  if (!engine_schema) out << ",algorithm";
  out << '\n';
  for (const auto& r : metrics.steps) {
    out << r.step << ',' << io::format_double(r.x) << ','
        << io::format_double(r.y) << ',' << io::format_double(r.y_hat) << ','
        << io::format_double(r.sq_err) << ',' << io::format_double(r.abs_err)
        << ',' << r.n_bases << ',' << r.task;
    if (!engine_schema) out << ',' << algorithm;
    out << '\n';
  }
}

void write_odds_csv(const std::string& path,
                    const std::vector<engine::OddsEventRow>& events) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << "step,score_min,p_in,ll_in,ll_out,s_odds,is_ood,instantiated\n";
  for (const auto& e : events)
    out << e.step << ',' << io::format_double(e.score_min) << ','
        << io::format_double(e.p_in) << ',' << io::format_double(e.ll_in)
        << ',' << io::format_double(e.ll_out) << ','
        << io::format_double(e.s_odds) << ',' << (e.is_ood ? 1 : 0) << ','
        << (e.instantiated ? 1 : 0) << '\n';
}

void write_latent_csv(const std::string& path,
                      const engine::RunMetrics& metrics) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  if (metrics.latent_trace.empty()) return;
  out << "t,task";
  for (std::size_t k = 0; k < metrics.latent_trace[0].size(); ++k)
    out << ",z_" << k;
  out << '\n';
  for (std::size_t t = 0; t < metrics.latent_trace.size(); ++t) {
    out << t << ',' << metrics.steps[t].task;
    for (double v : metrics.latent_trace[t]) out << ',' << io::format_double(v);
    out << '\n';
  }
}

}  // namespace

CellResult run_cell(const ExperimentConfig& cfg,
                    const domains::TaskSet& tasks,
                    const domains::OfflinePartition& part,
                    const std::string& algorithm, std::uint64_t seed,
                    const std::string& out_dir,
                    const basis::EnsemblePrior* shared_prior) {
  CellResult result;
  result.algorithm = algorithm;
  result.partition_id = part.id;
  result.seed = seed;

  domains::Trajectory stream = make_stream(cfg, tasks, part.id, seed);
  engine::TrainConfig tc = cell_train_config(cfg, seed);

  std::string cell_dir;
  if (!out_dir.empty()) {
    cell_dir = out_dir + "/" + algorithm + "/seed" + std::to_string(seed) +
               "/partition_" + std::to_string(part.id);
    fs::create_directories(cell_dir);
  }

  basis::EnsemblePrior local_prior;
  const basis::EnsemblePrior* prior = shared_prior;
  if (!prior) {
    local_prior = engine::train_meta_prior(part, tc);
    prior = &local_prior;
  }

  if (algorithm == "mob") {
    engine::OfflineReport rep = engine::train_offline(part, tc, cell_dir, prior);
    result.metrics = engine::run_online(rep.model, stream);
    result.model_count = result.metrics.final_bases;
    if (!cell_dir.empty()) {
      engine::save_checkpoint(rep.model, cell_dir + "/checkpoint.mob");
      write_odds_csv(cell_dir + "/odds_events.csv", result.metrics.odds_events);
      write_latent_csv(cell_dir + "/latent_trace.csv", result.metrics);
    }
  } else if (algorithm == "maml_kshot") {
    baselines::KShot algo(*prior, cfg.baselines);
    result.metrics = run_baseline(algo, stream);
    result.model_count = algo.model_count();
  } else if (algorithm == "maml_continuous") {
    baselines::Continuous algo(*prior, cfg.baselines);
    result.metrics = run_baseline(algo, stream);
    result.model_count = algo.model_count();
  } else if (algorithm == "mole_lite") {
    baselines::MoleLite algo(*prior, cfg.baselines);
    // offline phase for fair comparison: run over each offline trajectory
    // and carry generated models into the online stream
    for (const auto& traj : part.unsegmented)
      for (std::size_t t = 0; t < traj.size(); ++t) {
        algo.predict(traj.x(t));
        algo.observe(traj.x(t), traj.y(t));
      }
    result.metrics = run_baseline(algo, stream);
    result.model_count = algo.model_count();
  } else {
    throw ConfigError("unknown algorithm: " + algorithm);
  }

  result.mse = result.metrics.mse;
  result.mae = result.metrics.mae;

  nd::Rng floor_rng =
      nd::Rng::from(stream_seed(cfg, part.id, seed), 99);
  domains::ErrorFloor floor =
      domains::irreducible_error(tasks, stream, cfg.irreducible_mc, floor_rng);
  result.floor_mse = floor.mse;
  result.floor_mae = floor.mae;

  if (!cell_dir.empty()) {
    write_metrics_csv(cell_dir + "/metrics.csv", result.metrics, algorithm,
                      algorithm == "mob");
    json summary;
    summary["algorithm"] = algorithm;
    summary["partition"] = part.id;
    summary["seed"] = seed;
    summary["mse"] = result.mse;
    summary["mae"] = result.mae;
    summary["model_count"] = result.model_count;
    summary["floor_mse"] = result.floor_mse;
    summary["floor_mae"] = result.floor_mae;
    summary["steps"] = result.metrics.steps.size();
    summary["config_digest"] = config_digest(cfg);
    std::ofstream out(cell_dir + "/summary.json", std::ios::trunc);
    if (!out) throw IoError("cannot write summary.json in " + cell_dir);
    out << summary.dump(2) << '\n';
  }
  return result;
}

void run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                    const std::vector<std::string>& algorithms,
                    const std::vector<std::uint64_t>& seeds, int jobs) {
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    save_config(cfg, out_dir + "/config.json");
  }
  domains::TaskSet tasks = domains::make_task_set(cfg.domain_seed, cfg.task_gen);
  std::vector<domains::OfflinePartition> parts;
  for (const auto& pspec : cfg.partitions)
    parts.push_back(domains::make_partition(tasks, pspec, cfg.data,
                                            cfg.data_seed + pspec.id));

  // One work item per (partition, seed): the group shares one meta prior.
  struct Group {
    std::size_t part_idx;
    std::uint64_t seed;
  };
  std::vector<Group> groups;
  for (std::size_t p = 0; p < parts.size(); ++p)
    for (std::uint64_t s : seeds) groups.push_back(Group{p, s});

  std::atomic<std::size_t> next{0};
  std::vector<std::string> errors;
  std::mutex err_mu;
  auto worker = [&] {
    for (;;) {
      std::size_t g = next.fetch_add(1);
      if (g >= groups.size()) return;
      const Group& grp = groups[g];
      try {
        engine::TrainConfig tc = cell_train_config(cfg, grp.seed);
        basis::EnsemblePrior prior =
            engine::train_meta_prior(parts[grp.part_idx], tc);
        for (const auto& algo : algorithms)
          run_cell(cfg, tasks, parts[grp.part_idx], algo, grp.seed, out_dir,
                   &prior);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(err_mu);
        errors.push_back(e.what());
      }
    }
  };
  int n_threads = std::max(1, jobs);
  std::vector<std::thread> pool;
  for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (!errors.empty())
    throw DivergenceError("run_experiment: " + errors.front());
}

}  // namespace mob::exp
