#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "mob/errors.hpp"
#include "mob/exp.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mob::exp {

namespace {

struct CellSummary {
  std::string algorithm;
  int partition;
  std::uint64_t seed;
  double mse, mae, floor_mse, floor_mae;
  double model_count;
};

struct Stats {
  double mean = 0.0, ci = 0.0;
};

Stats mean_ci(const std::vector<double>& xs) {
  Stats s;
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double var = 0.0;
    for (double x : xs) var += (x - s.mean) * (x - s.mean);
    var /= static_cast<double>(xs.size() - 1);
    s.ci = 1.96 * std::sqrt(var / static_cast<double>(xs.size()));
  }
  return s;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

}  // namespace

Report make_report(const std::string& run_dir) {
  std::vector<CellSummary> cells;
  std::string digest;
  for (const auto& entry : fs::recursive_directory_iterator(run_dir)) {
    if (!entry.is_regular_file() || entry.path().filename() != "summary.json")
      continue;
    std::ifstream in(entry.path());
    json j = json::parse(in);
    std::string d = j.at("config_digest").get<std::string>();
    if (digest.empty()) digest = d;
    if (d != digest)
      throw ConfigError("make_report: mixed configs in " + run_dir);
    CellSummary c;
    c.algorithm = j.at("algorithm").get<std::string>();
    c.partition = j.at("partition").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.mse = j.at("mse").get<double>();
    c.mae = j.at("mae").get<double>();
    c.floor_mse = j.at("floor_mse").get<double>();
    c.floor_mae = j.at("floor_mae").get<double>();
    c.model_count = j.at("model_count").get<double>();
    cells.push_back(std::move(c));
  }
  if (cells.empty()) throw IoError("make_report: no summaries in " + run_dir);

  // algorithm ordering from the copied config when present
  std::vector<std::string> algo_order;
  if (fs::exists(fs::path(run_dir) / "config.json")) {
    ExperimentConfig cfg = load_config((fs::path(run_dir) / "config.json").string());
    algo_order = cfg.algorithms;
  }
  for (const auto& c : cells)
    if (std::find(algo_order.begin(), algo_order.end(), c.algorithm) ==
        algo_order.end())
      algo_order.push_back(c.algorithm);

  std::vector<int> partitions;
  for (const auto& c : cells)
    if (std::find(partitions.begin(), partitions.end(), c.partition) ==
        partitions.end())
      partitions.push_back(c.partition);
  std::sort(partitions.begin(), partitions.end());

  Report report;
  auto add_row = [&](const std::string& algo, const std::string& label,
                     const std::vector<CellSummary>& group) {
    if (group.empty()) return;
    std::vector<double> mse, mae, models, red_mse, red_mae;
    for (const auto& c : group) {
      mse.push_back(c.mse);
      mae.push_back(c.mae);
      models.push_back(c.model_count);
      red_mse.push_back(c.mse - c.floor_mse);
      red_mae.push_back(c.mae - c.floor_mae);
    }
    ReportRow row;
    row.algorithm = algo;
    row.partition = label;
    row.n_seeds = static_cast<int>(group.size());
    Stats s = mean_ci(mse);
    row.mse = s.mean;
    row.mse_ci = s.ci;
    s = mean_ci(mae);
    row.mae = s.mean;
    row.mae_ci = s.ci;
    s = mean_ci(models);
    row.models = s.mean;
    row.models_ci = s.ci;
    row.reducible_mse = mean_ci(red_mse).mean;
    row.reducible_mae = mean_ci(red_mae).mean;
    report.rows.push_back(std::move(row));
  };

  for (const auto& algo : algo_order) {
    std::vector<CellSummary> all;
    for (int p : partitions) {
      std::vector<CellSummary> group;
      for (const auto& c : cells)
        if (c.algorithm == algo && c.partition == p) group.push_back(c);
      add_row(algo, std::to_string(p), group);
      for (const auto& c : group) all.push_back(c);
    }
    if (partitions.size() > 1) add_row(algo, "avg", all);
  }

  std::ostringstream text;
  text << "algorithm         part  n   mse (95% ci)        mae (95% ci)      "
          "  models           red_mse   red_mae\n";
  for (const auto& r : report.rows) {
    char line[256];
    std::string mse_s = fmt(r.mse), mae_s = fmt(r.mae);
    std::string mse_ci = r.n_seeds > 1 ? "+-" + fmt(r.mse_ci) : "";
    std::string mae_ci = r.n_seeds > 1 ? "+-" + fmt(r.mae_ci) : "";
    std::string mod_ci = r.n_seeds > 1 ? "+-" + fmt(r.models_ci) : "";
    std::snprintf(line, sizeof(line),
                  "%-17s %-5s %-3d %-9s %-9s %-9s %-9s %-8s %-8s %-9s %-9s\n",
                  r.algorithm.c_str(), r.partition.c_str(), r.n_seeds,
                  mse_s.c_str(), mse_ci.c_str(), mae_s.c_str(), mae_ci.c_str(),
                  fmt(r.models).c_str(), mod_ci.c_str(),
                  fmt(r.reducible_mse).c_str(), fmt(r.reducible_mae).c_str());
    text << line;
  }
  report.text = text.str();
  return report;
}

void write_report_csv(const Report& report, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << "algorithm,partition,n_seeds,mse,mse_ci,mae,mae_ci,models,models_ci,"
         "reducible_mse,reducible_mae\n";
  for (const auto& r : report.rows)
    out << r.algorithm << ',' << r.partition << ',' << r.n_seeds << ','
        << r.mse << ',' << r.mse_ci << ',' << r.mae << ',' << r.mae_ci << ','
        << r.models << ',' << r.models_ci << ',' << r.reducible_mse << ','
        << r.reducible_mae << '\n';
}

}  // namespace mob::exp
