#include <fstream>

#include "mob/config_json.hpp"
#include "mob/errors.hpp"
#include "mob/exp.hpp"

using nlohmann::json;

namespace mob::domains {

void to_json(json& j, const TaskGenConfig& c) {
  j = json{{"n_tasks", c.n_tasks},         {"hidden", c.hidden},
           {"mu_scale", c.mu_scale},       {"sigma_min", c.sigma_min},
           {"sigma_max", c.sigma_max},     {"init_gain", c.init_gain},
           {"bias_std", c.bias_std}};
}

void from_json(const json& j, TaskGenConfig& c) {
  j.at("n_tasks").get_to(c.n_tasks);
  j.at("hidden").get_to(c.hidden);
  j.at("mu_scale").get_to(c.mu_scale);
  j.at("sigma_min").get_to(c.sigma_min);
  j.at("sigma_max").get_to(c.sigma_max);
  j.at("init_gain").get_to(c.init_gain);
  j.at("bias_std").get_to(c.bias_std);
}

void to_json(json& j, const DataConfig& c) {
  j = json{{"segmented_samples", c.segmented_samples},
           {"offline_trajectories", c.offline_trajectories},
           {"offline_length", c.offline_length},
           {"online_length", c.online_length},
           {"switch_prob", c.switch_prob}};
}

void from_json(const json& j, DataConfig& c) {
  j.at("segmented_samples").get_to(c.segmented_samples);
  j.at("offline_trajectories").get_to(c.offline_trajectories);
  j.at("offline_length").get_to(c.offline_length);
  j.at("online_length").get_to(c.online_length);
  j.at("switch_prob").get_to(c.switch_prob);
}

void to_json(json& j, const PartitionConfig& c) {
  j = json{{"id", c.id},
           {"segmented", c.segmented},
           {"unsegmented", c.unsegmented}};
}

void from_json(const json& j, PartitionConfig& c) {
  j.at("id").get_to(c.id);
  j.at("segmented").get_to(c.segmented);
  j.at("unsegmented").get_to(c.unsegmented);
}

}  // namespace mob::domains

namespace mob::baselines {

void to_json(json& j, const BaselineConfig& c) {
  j = json{{"kshot_k", c.kshot_k},
           {"kshot_adapt_steps", c.kshot_adapt_steps},
           {"continuous_lr", c.continuous_lr},
           {"mole_innovation", c.mole_innovation},
           {"mole_spawn_threshold", c.mole_spawn_threshold},
           {"mole_spawn_consecutive", c.mole_spawn_consecutive},
           {"mole_lr", c.mole_lr},
           {"mole_candidate_steps", c.mole_candidate_steps},
           {"mole_candidate_lr", c.mole_candidate_lr},
           {"mole_candidate_period", c.mole_candidate_period},
           {"mole_recent_window", c.mole_recent_window},
           {"mole_resp_window", c.mole_resp_window},
           {"sigma_floor", c.sigma_floor},
           {"clip_norm", c.clip_norm}};
}

void from_json(const json& j, BaselineConfig& c) {
  j.at("kshot_k").get_to(c.kshot_k);
  j.at("kshot_adapt_steps").get_to(c.kshot_adapt_steps);
  j.at("continuous_lr").get_to(c.continuous_lr);
  j.at("mole_innovation").get_to(c.mole_innovation);
  j.at("mole_spawn_threshold").get_to(c.mole_spawn_threshold);
  j.at("mole_spawn_consecutive").get_to(c.mole_spawn_consecutive);
  j.at("mole_lr").get_to(c.mole_lr);
  j.at("mole_candidate_steps").get_to(c.mole_candidate_steps);
  j.at("mole_candidate_lr").get_to(c.mole_candidate_lr);
  j.at("mole_candidate_period").get_to(c.mole_candidate_period);
  j.at("mole_recent_window").get_to(c.mole_recent_window);
  j.at("mole_resp_window").get_to(c.mole_resp_window);
  j.at("sigma_floor").get_to(c.sigma_floor);
  j.at("clip_norm").get_to(c.clip_norm);
}

}  // namespace mob::baselines

namespace mob::exp {

namespace {

void to_json_cfg(json& j, const ExperimentConfig& c) {
  j = json{{"domain_seed", c.domain_seed},
           {"data_seed", c.data_seed},
           {"task_gen", c.task_gen},
           {"data", c.data},
           {"partitions", c.partitions},
           {"train", c.train},
           {"baselines", c.baselines},
           {"algorithms", c.algorithms},
           {"seeds", c.seeds},
           {"irreducible_mc", c.irreducible_mc}};
}

void from_json_cfg(const json& j, ExperimentConfig& c) {
  j.at("domain_seed").get_to(c.domain_seed);
  j.at("data_seed").get_to(c.data_seed);
  j.at("task_gen").get_to(c.task_gen);
  j.at("data").get_to(c.data);
  j.at("partitions").get_to(c.partitions);
  j.at("train").get_to(c.train);
  j.at("baselines").get_to(c.baselines);
  j.at("algorithms").get_to(c.algorithms);
  j.at("seeds").get_to(c.seeds);
  j.at("irreducible_mc").get_to(c.irreducible_mc);
}

}  // namespace

ExperimentConfig default_config() {
  ExperimentConfig cfg;
  // the three benchmark partitions
  cfg.partitions.resize(3);
  cfg.partitions[0].id = 1;
  cfg.partitions[0].segmented = {0, 5};
  cfg.partitions[0].unsegmented = {0, 1, 2, 5, 6};
  cfg.partitions[1].id = 2;
  cfg.partitions[1].segmented = {4, 7};
  cfg.partitions[1].unsegmented = {4, 5, 6, 7, 9};
  cfg.partitions[2].id = 3;
  cfg.partitions[2].segmented = {2, 7};
  cfg.partitions[2].unsegmented = {0, 2, 3, 7, 9};
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  ExperimentConfig cfg;
  try {
    from_json_cfg(j, cfg);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  if (cfg.partitions.empty()) throw ConfigError("config: no partitions");
  if (cfg.seeds.empty()) throw ConfigError("config: no seeds");
  for (const auto& a : cfg.algorithms)
    if (a != "mob" && a != "mole_lite" && a != "maml_kshot" &&
        a != "maml_continuous")
      throw ConfigError("config: unknown algorithm '" + a + "'");
  return cfg;
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
  json j;
  to_json_cfg(j, cfg);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write config: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("config write failed: " + path);
}

std::string config_digest(const ExperimentConfig& cfg) {
  json j;
  to_json_cfg(j, cfg);
  std::string text = j.dump();
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace mob::exp
