#ifndef MOB_CONFIG_JSON_HPP
#define MOB_CONFIG_JSON_HPP

#include <json.hpp>

#include "mob/basis.hpp"
#include "mob/engine.hpp"
#include "mob/odds.hpp"

// nlohmann ADL bindings for the config structs; used by checkpoints and the
// experiment config file.
namespace mob::odds {

inline void to_json(nlohmann::json& j, const OddsConfig& c) {
  j = nlohmann::json{{"eta", c.eta},
                     {"buffer_threshold", c.buffer_threshold},
                     {"decision_threshold", c.decision_threshold},
                     {"capacity", c.capacity},
                     {"stale_age", c.stale_age},
                     {"refit_period", c.refit_period},
                     {"recent_window", c.recent_window},
                     {"candidate_steps", c.candidate_steps},
                     {"candidate_lr", c.candidate_lr}};
}

inline void from_json(const nlohmann::json& j, OddsConfig& c) {
  j.at("eta").get_to(c.eta);
  j.at("buffer_threshold").get_to(c.buffer_threshold);
  j.at("decision_threshold").get_to(c.decision_threshold);
  j.at("capacity").get_to(c.capacity);
  j.at("stale_age").get_to(c.stale_age);
  j.at("refit_period").get_to(c.refit_period);
  j.at("recent_window").get_to(c.recent_window);
  j.at("candidate_steps").get_to(c.candidate_steps);
  j.at("candidate_lr").get_to(c.candidate_lr);
}

}  // namespace mob::odds

namespace mob::basis {

inline void to_json(nlohmann::json& j, const MamlConfig& c) {
  j = nlohmann::json{{"ensemble_size", c.ensemble_size},
                     {"hidden", c.hidden},
                     {"init_gain", c.init_gain},
                     {"init_bias_std", c.init_bias_std},
                     {"inner_lr", c.inner_lr},
                     {"inner_steps", c.inner_steps},
                     {"outer_lr", c.outer_lr},
                     {"meta_iterations", c.meta_iterations},
                     {"meta_batch", c.meta_batch},
                     {"sigma_floor", c.sigma_floor},
                     {"clip_norm", c.clip_norm}};
}

inline void from_json(const nlohmann::json& j, MamlConfig& c) {
  j.at("ensemble_size").get_to(c.ensemble_size);
  j.at("hidden").get_to(c.hidden);
  j.at("init_gain").get_to(c.init_gain);
  j.at("init_bias_std").get_to(c.init_bias_std);
  j.at("inner_lr").get_to(c.inner_lr);
  j.at("inner_steps").get_to(c.inner_steps);
  j.at("outer_lr").get_to(c.outer_lr);
  j.at("meta_iterations").get_to(c.meta_iterations);
  j.at("meta_batch").get_to(c.meta_batch);
  j.at("sigma_floor").get_to(c.sigma_floor);
  j.at("clip_norm").get_to(c.clip_norm);
}

}  // namespace mob::basis

namespace mob::engine {

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"ensemble_size", c.ensemble_size},
                     {"latent_dim", c.latent_dim},
                     {"basis_hidden", c.basis_hidden},
                     {"latent_hidden", c.latent_hidden},
                     {"mixing_hidden", c.mixing_hidden},
                     {"init_gain", c.init_gain},
                     {"init_bias_std", c.init_bias_std},
                     {"maml", c.maml},
                     {"pretrain_steps", c.pretrain_steps},
                     {"pretrain_batch", c.pretrain_batch},
                     {"batch_trajectories", c.batch_trajectories},
                     {"learning_rate", c.learning_rate},
                     {"offline_latent_lr", c.offline_latent_lr},
                     {"max_epochs", c.max_epochs},
                     {"plateau_tol", c.plateau_tol},
                     {"plateau_window", c.plateau_window},
                     {"offline_refit_period", c.offline_refit_period},
                     {"online_window", c.online_window},
                     {"online_lr", c.online_lr},
                     {"online_latent_lr", c.online_latent_lr},
                     {"odds", c.odds},
                     {"grow_logit_scale", c.grow_logit_scale},
                     {"grad_clip", c.grad_clip},
                     {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  j.at("ensemble_size").get_to(c.ensemble_size);
  j.at("latent_dim").get_to(c.latent_dim);
  j.at("basis_hidden").get_to(c.basis_hidden);
  j.at("latent_hidden").get_to(c.latent_hidden);
  j.at("mixing_hidden").get_to(c.mixing_hidden);
  j.at("init_gain").get_to(c.init_gain);
  j.at("init_bias_std").get_to(c.init_bias_std);
  j.at("maml").get_to(c.maml);
  j.at("pretrain_steps").get_to(c.pretrain_steps);
  j.at("pretrain_batch").get_to(c.pretrain_batch);
  j.at("batch_trajectories").get_to(c.batch_trajectories);
  j.at("learning_rate").get_to(c.learning_rate);
  j.at("offline_latent_lr").get_to(c.offline_latent_lr);
  j.at("max_epochs").get_to(c.max_epochs);
  j.at("plateau_tol").get_to(c.plateau_tol);
  j.at("plateau_window").get_to(c.plateau_window);
  j.at("offline_refit_period").get_to(c.offline_refit_period);
  j.at("online_window").get_to(c.online_window);
  j.at("online_lr").get_to(c.online_lr);
  j.at("online_latent_lr").get_to(c.online_latent_lr);
  j.at("odds").get_to(c.odds);
  j.at("grow_logit_scale").get_to(c.grow_logit_scale);
  j.at("grad_clip").get_to(c.grad_clip);
  j.at("seed").get_to(c.seed);
}

}  // namespace mob::engine

#endif
