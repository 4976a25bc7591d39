#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wadc/environment.hpp"
#include "wadc/model_io.hpp"
#include "wadc/training.hpp"

namespace wadc::cli {

struct CalibrationSpec {
  std::vector<double> thresholds{0.01, 0.02, 0.04, 0.06, 0.08, 0.1, 0.15, 0.2, 0.3, 0.5};
  std::size_t trials = 20;
  std::size_t episode_steps = 50;
};

struct EvaluationSpec {
  std::size_t episodes = 20;
  std::size_t episode_steps = 100;
  double noise_std = 0.0;
  // Evaluation judges the physical plant, stabilizers included, so instability
  // is detected from the trajectory rather than from A - B1 K.
  EigenSource eigen_source = EigenSource::dmd;
  std::vector<double> delays{0.0, 0.35, 0.8};
  bool nonlinear = true;
};

struct SimulationSpec {
  std::size_t steps = 25;  // decisions, each action_repeat substeps long
  bool nonlinear = false;
  bool wide_area = true;
  std::optional<Mat> gain;  // p x m; the checkpoint actor decides when absent
  double delay = 0.0;
};

/// Everything one experiment needs, with paths resolved against the config
/// file's directory.
struct Experiment {
  std::filesystem::path model_path;
  ModelData model_data;
  std::shared_ptr<const GridModel> model;
  EnvConfig env;
  ControlSetup controls;
  TrainingConfig training;
  CalibrationSpec calibration;
  EvaluationSpec evaluation;
  SimulationSpec simulation;
  std::optional<FaultScenario> fault;
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 1;
};

/// Parses a JSON experiment file. Unknown keys are errors.
Experiment load_experiment(const std::filesystem::path& path);
Experiment parse_experiment(const std::string& text, const std::filesystem::path& base_dir,
                            const std::string& source = "<memory>");

/// Fault scenario to use for nonlinear runs; the unfaulted network when the
/// config declares none.
FaultScenario nonlinear_scenario(const Experiment& exp);

}  // namespace wadc::cli
