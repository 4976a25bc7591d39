#include "experiment.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace wadc::cli {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

template <class T>
void read(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

Mat matrix(const json& j, std::size_t rows, std::size_t cols, const std::string& what) {
  Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  if (!j.is_array()) throw ConfigError(what + " must be an array");
  if (!j.empty() && j.front().is_array()) {
    if (j.size() != rows) throw ConfigError(what + " must have " + std::to_string(rows) + " rows");
    for (std::size_t r = 0; r < rows; ++r) {
      if (j[r].size() != cols) throw ConfigError(what + " rows must have " + std::to_string(cols) + " entries");
      for (std::size_t c = 0; c < cols; ++c)
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
  } else {
    if (j.size() != rows * cols) throw ConfigError(what + " must have " + std::to_string(rows * cols) + " entries");
    for (std::size_t k = 0; k < rows * cols; ++k)
      m(static_cast<Eigen::Index>(k / cols), static_cast<Eigen::Index>(k % cols)) = j[k].get<double>();
  }
  return m;
}

PssParams pss_from(const json& j, PssParams p, const std::string& where) {
  reject_unknown(j, {"gain", "washout", "lead1", "lag1", "lead2", "lag2"}, where);
  read(j, "gain", p.gain);
  read(j, "washout", p.washout);
  read(j, "lead1", p.lead1);
  read(j, "lag1", p.lag1);
  read(j, "lead2", p.lead2);
  read(j, "lag2", p.lag2);
  return p;
}

ReducedNetwork network_from(const json& j, const ReducedNetwork& base, const std::string& where) {
  reject_unknown(j, {"conductance", "susceptance"}, where);
  const auto n = static_cast<std::size_t>(base.susceptance.rows());
  ReducedNetwork net = base;
  if (j.contains("conductance")) net.conductance = matrix(j.at("conductance"), n, n, where + ".conductance");
  if (j.contains("susceptance")) net.susceptance = matrix(j.at("susceptance"), n, n, where + ".susceptance");
  return net;
}

EigenSource eigen_source_from(const json& j, const std::string& where) {
  const auto s = j.get<std::string>();
  if (s == "exact") return EigenSource::exact;
  if (s == "dmd") return EigenSource::dmd;
  throw ConfigError(where + ".eigen_source must be 'exact' or 'dmd'");
}

void parse_env(const json& j, EnvConfig& env) {
  reject_unknown(j,
                 {"episode_steps", "action_repeat", "alpha", "beta", "penalty", "noise_std", "eigen_source",
                  "reward_form", "init_scale", "mode_aligned", "k_max", "divergence_limit"},
                 "env");
  read(j, "episode_steps", env.episode_steps);
  read(j, "action_repeat", env.action_repeat);
  read(j, "alpha", env.alpha);
  read(j, "beta", env.beta);
  read(j, "penalty", env.penalty);
  read(j, "noise_std", env.noise_std);
  read(j, "init_scale", env.init_scale);
  read(j, "mode_aligned", env.mode_aligned);
  read(j, "k_max", env.k_max);
  read(j, "divergence_limit", env.divergence_limit);
  if (j.contains("eigen_source")) env.eigen_source = eigen_source_from(j.at("eigen_source"), "env");
  if (j.contains("reward_form")) {
    const auto s = j.at("reward_form").get<std::string>();
    if (s == "printed") env.reward_form = RewardForm::printed;
    else if (s == "difference") env.reward_form = RewardForm::difference;
    else throw ConfigError("env.reward_form must be 'printed' or 'difference'");
  }
}

void parse_agent(const json& j, DdpgConfig& a) {
  reject_unknown(j, {"actor_hidden", "critic_hidden", "gamma", "tau", "actor_lr", "critic_lr", "optimizer"}, "agent");
  read(j, "actor_hidden", a.actor_hidden);
  read(j, "critic_hidden", a.critic_hidden);
  read(j, "gamma", a.gamma);
  read(j, "tau", a.tau);
  read(j, "actor_lr", a.actor_lr);
  read(j, "critic_lr", a.critic_lr);
  if (j.contains("optimizer")) {
    const auto s = j.at("optimizer").get<std::string>();
    if (s == "sgd") a.optimizer = OptimizerKind::sgd;
    else if (s == "adam") a.optimizer = OptimizerKind::adam;
    else throw ConfigError("agent.optimizer must be 'sgd' or 'adam'");
  }
}

void parse_training(const json& j, TrainingConfig& t) {
  reject_unknown(j,
                 {"max_episodes", "batch_size", "replay_capacity", "per_alpha", "per_epsilon", "explore_start",
                  "explore_end", "beta_start", "beta_end", "checkpoint_every"},
                 "training");
  read(j, "max_episodes", t.max_episodes);
  read(j, "batch_size", t.batch_size);
  read(j, "replay_capacity", t.replay.capacity);
  read(j, "per_alpha", t.replay.alpha);
  read(j, "per_epsilon", t.replay.epsilon);
  read(j, "explore_start", t.explore_start);
  read(j, "explore_end", t.explore_end);
  read(j, "beta_start", t.beta_start);
  read(j, "beta_end", t.beta_end);
  read(j, "checkpoint_every", t.checkpoint_every);
}

}  // namespace

Experiment parse_experiment(const std::string& text, const std::filesystem::path& base_dir,
                            const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source + ": " + e.what());
  }
  Experiment exp;
  try {
    reject_unknown(doc,
                   {"model", "seed", "output", "env", "agent", "training", "pss", "scs", "delay", "calibration",
                    "evaluation", "simulate", "fault"},
                   source);
    if (!doc.contains("model")) throw ConfigError(source + ": missing 'model'");
    exp.model_path = base_dir / doc.at("model").get<std::string>();
    exp.model_data = load_model_file(exp.model_path);
    auto model = build_model(exp.model_data);
    read(doc, "seed", exp.seed);
    if (doc.contains("output")) exp.output_dir = base_dir / doc.at("output").get<std::string>();

    if (doc.contains("env")) parse_env(doc.at("env"), exp.env);
    if (doc.contains("agent")) parse_agent(doc.at("agent"), exp.training.agent);
    if (doc.contains("training")) parse_training(doc.at("training"), exp.training);

    exp.controls.pss.assign(model.p, PssParams{});
    if (doc.contains("pss")) {
      const auto& j = doc.at("pss");
      if (j.is_array()) {
        if (j.size() != model.p)
          throw ConfigError(source + ": pss needs one entry per controlled generator (" + std::to_string(model.p) + ")");
        for (std::size_t i = 0; i < model.p; ++i) exp.controls.pss[i] = pss_from(j[i], PssParams{}, "pss");
      } else {
        const auto p = pss_from(j, PssParams{}, "pss");
        exp.controls.pss.assign(model.p, p);
      }
    }
    for (const auto& p : exp.controls.pss) p.validate();

    exp.controls.scs.reference = model.reference;
    if (doc.contains("scs")) {
      const auto& j = doc.at("scs");
      reject_unknown(j, {"threshold", "kappa1", "kappa2", "kappa3"}, "scs");
      read(j, "threshold", exp.controls.scs.threshold);
      read(j, "kappa1", exp.controls.scs.kappa1);
      read(j, "kappa2", exp.controls.scs.kappa2);
      read(j, "kappa3", exp.controls.scs.kappa3);
    }
    read(doc, "delay", exp.controls.delay);

    if (doc.contains("calibration")) {
      const auto& j = doc.at("calibration");
      reject_unknown(j, {"thresholds", "trials", "episode_steps"}, "calibration");
      read(j, "thresholds", exp.calibration.thresholds);
      read(j, "trials", exp.calibration.trials);
      read(j, "episode_steps", exp.calibration.episode_steps);
    }
    if (exp.calibration.thresholds.empty()) throw ConfigError("calibration.thresholds must be non-empty");
    for (double r : exp.calibration.thresholds)
      if (!(r > 0.0)) throw ConfigError("calibration thresholds must be positive");

    if (doc.contains("evaluation")) {
      const auto& j = doc.at("evaluation");
      reject_unknown(j, {"episodes", "episode_steps", "noise_std", "eigen_source", "delays", "nonlinear"},
                     "evaluation");
      read(j, "episodes", exp.evaluation.episodes);
      read(j, "episode_steps", exp.evaluation.episode_steps);
      read(j, "noise_std", exp.evaluation.noise_std);
      read(j, "delays", exp.evaluation.delays);
      read(j, "nonlinear", exp.evaluation.nonlinear);
      if (j.contains("eigen_source")) exp.evaluation.eigen_source = eigen_source_from(j.at("eigen_source"), "evaluation");
    }
    for (double d : exp.evaluation.delays)
      if (!(d >= 0.0)) throw ConfigError("evaluation delays must be non-negative");

    if (doc.contains("simulate")) {
      const auto& j = doc.at("simulate");
      reject_unknown(j, {"steps", "nonlinear", "wide_area", "gain", "delay"}, "simulate");
      read(j, "steps", exp.simulation.steps);
      read(j, "nonlinear", exp.simulation.nonlinear);
      read(j, "wide_area", exp.simulation.wide_area);
      read(j, "delay", exp.simulation.delay);
      if (j.contains("gain")) exp.simulation.gain = matrix(j.at("gain"), model.p, model.observation_size(), "simulate.gain");
    }

    if (doc.contains("fault")) {
      const auto& j = doc.at("fault");
      if (exp.model_data.state_space) throw ConfigError(source + ": fault scenarios need machine data");
      reject_unknown(j, {"bus_from", "bus_to", "start", "near_clear", "remote_clear", "fault_on", "near_cleared",
                         "post_fault"},
                     "fault");
      FaultScenario f = FaultScenario::none(exp.model_data.network);
      read(j, "bus_from", f.bus_from);
      read(j, "bus_to", f.bus_to);
      f.start = j.at("start").get<double>();
      f.near_clear = j.at("near_clear").get<double>();
      f.remote_clear = j.at("remote_clear").get<double>();
      f.fault_on = network_from(j.at("fault_on"), exp.model_data.network, "fault.fault_on");
      f.post_fault = network_from(j.at("post_fault"), exp.model_data.network, "fault.post_fault");
      if (j.contains("near_cleared"))
        f.near_cleared = network_from(j.at("near_cleared"), exp.model_data.network, "fault.near_cleared");
      exp.fault = std::move(f);
    }

    exp.model = std::make_shared<const GridModel>(std::move(model));
    exp.env.validate();
    exp.controls.scs.validate();
    exp.training.validate();
    if (exp.fault) exp.fault->validate();
  } catch (const json::exception& e) {
    throw ConfigError(source + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(source + ": " + e.what());
  } catch (const ModelError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return exp;
}

Experiment load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_experiment(text.str(), path.parent_path(), path.string());
}

FaultScenario nonlinear_scenario(const Experiment& exp) {
  return exp.fault ? *exp.fault : FaultScenario::none(exp.model_data.network);
}

}  // namespace wadc::cli
