// Experiment harness for the mixture-of-basis continual-learning benchmark:
// dataset generation, training + online evaluation, aggregation, and
// latent-space PCA export.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mob/csv.hpp"
#include "mob/errors.hpp"
#include "mob/exp.hpp"
#include "mob/pca.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int cmd_init(const std::string& out) {
  mob::exp::save_config(mob::exp::default_config(), out);
  std::printf("wrote default config to %s\n", out.c_str());
  return 0;
}

int cmd_gen(const std::string& config, const std::string& out, bool force) {
  auto cfg = mob::exp::load_config(config);
  mob::exp::generate_datasets(cfg, out, force);
  std::printf("generated %zu partition(s) under %s\n", cfg.partitions.size(),
              out.c_str());
  return 0;
}

int cmd_run(const std::string& config, const std::string& out,
            std::vector<std::string> algorithms, std::vector<std::uint64_t> seeds,
            int jobs) {
  auto cfg = mob::exp::load_config(config);
  if (algorithms.empty()) algorithms = cfg.algorithms;
  if (seeds.empty()) seeds = cfg.seeds;
  for (const auto& a : algorithms) {
    bool known = a == "mob" || a == "mole_lite" || a == "maml_kshot" ||
                 a == "maml_continuous";
    if (!known) throw mob::ConfigError("unknown algorithm: " + a);
  }
  mob::exp::run_experiment(cfg, out, algorithms, seeds, jobs);
  std::printf("runs complete under %s\n", out.c_str());
  return 0;
}

int cmd_report(const std::string& out) {
  mob::exp::Report report = mob::exp::make_report(out);
  mob::exp::write_report_csv(report, out + "/report.csv");
  std::fputs(report.text.c_str(), stdout);
  std::printf("wrote %s/report.csv\n", out.c_str());
  return 0;
}

int cmd_pca_export(const std::string& out, const std::string& algorithm,
                   int q) {
  // pool every latent trace written by the chosen algorithm
  std::vector<std::vector<double>> rows;
  std::vector<std::pair<double, double>> keys;  // (t, task)
  for (const auto& entry : fs::recursive_directory_iterator(out)) {
    if (!entry.is_regular_file() ||
        entry.path().filename() != "latent_trace.csv")
      continue;
    if (entry.path().string().find("/" + algorithm + "/") == std::string::npos)
      continue;
    mob::io::Csv table = mob::io::read_csv(entry.path().string());
    for (const auto& row : table.rows) {
      keys.emplace_back(row[0], row[1]);
      rows.emplace_back(row.begin() + 2, row.end());
    }
  }
  if (rows.empty())
    throw mob::IoError("pca-export: no latent traces for '" + algorithm +
                       "' under " + out);
  mob::exp::PcaResult pca = mob::exp::pca_top(rows, q);
  if (pca.rank_warning)
    std::fprintf(stderr,
                 "warning: fewer samples than latent dimensions; covariance "
                 "is rank-deficient\n");

  fs::create_directories(fs::path(out) / "pca");
  std::string coords_path = out + "/pca/pca_coords.csv";
  std::ofstream coords(coords_path, std::ios::trunc);
  coords << "t,task";
  for (int c = 0; c < q; ++c) coords << ",pc" << (c + 1);
  coords << '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    coords << mob::io::format_double(keys[i].first) << ','
           << mob::io::format_double(keys[i].second);
    for (double v : pca.coords[i]) coords << ',' << mob::io::format_double(v);
    coords << '\n';
  }
  json summary;
  summary["explained_variance"] = pca.explained;
  summary["directions"] = pca.directions;
  summary["samples"] = rows.size();
  std::ofstream sj(out + "/pca/pca_summary.json", std::ios::trunc);
  sj << summary.dump(2) << '\n';
  std::printf("wrote %s and pca_summary.json (explained:", coords_path.c_str());
  for (double e : pca.explained) std::printf(" %.3f", e);
  std::printf(")\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mixture-of-basis continual-learning benchmark"};
  app.require_subcommand(1);

  std::string config, out = "runs/out";
  std::vector<std::string> algorithms;
  std::vector<std::uint64_t> seeds;
  int jobs = 1, q = 2;
  bool force = false;

  auto* init = app.add_subcommand("init", "write a fully materialized default config");
  init->add_option("--out", out, "config path to write")->required();

  auto* gen = app.add_subcommand("gen", "generate benchmark datasets");
  gen->add_option("--config", config, "experiment config")->required();
  gen->add_option("--out", out, "dataset/run directory")->required();
  gen->add_flag("--force", force, "overwrite non-empty directory");

  auto* run = app.add_subcommand("run", "train and evaluate algorithms");
  run->add_option("--config", config, "experiment config")->required();
  run->add_option("--out", out, "run directory")->required();
  run->add_option("--algorithm", algorithms,
                  "algorithm subset (default: all in config)");
  run->add_option("--seed", seeds, "seed subset (default: all in config)");
  run->add_option("--jobs", jobs, "parallel (partition, seed) groups");

  auto* report = app.add_subcommand("report", "aggregate run summaries");
  report->add_option("--out", out, "run directory")->required();

  auto* pca = app.add_subcommand("pca-export", "latent-space PCA coordinates");
  pca->add_option("--out", out, "run directory")->required();
  pca->add_option("--algorithm", algorithms, "algorithm (default mob)");
  pca->add_option("--components", q, "number of principal components");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(init)) return cmd_init(out);
    if (app.got_subcommand(gen)) return cmd_gen(config, out, force);
    if (app.got_subcommand(run)) return cmd_run(config, out, algorithms, seeds, jobs);
    if (app.got_subcommand(report)) return cmd_report(out);
    if (app.got_subcommand(pca))
      return cmd_pca_export(out, algorithms.empty() ? "mob" : algorithms[0], q);
  } catch (const mob::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const mob::ContractError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const mob::DivergenceError& e) {
    std::fprintf(stderr, "runtime divergence: %s\n", e.what());
    return 3;
  } catch (const mob::IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
