#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <vector>

#include "experiment.hpp"
#include "wadc/evaluation.hpp"

namespace wadc::cli {

struct RunOptions {
  std::optional<std::filesystem::path> checkpoint;
  std::size_t threads = 1;
};

struct AnalyzeReport {
  std::vector<Mode> modes;
  std::size_t target = 0;
  std::vector<std::size_t> selected;  // zero-based generator indices
  std::size_t oscillatory_pairs = 0;
};

struct CalibrationReport {
  double best_threshold = 0.0;
  std::vector<double> mean_normalized;  // per grid point
};

struct EvaluationCell {
  std::string controller;   // pss_only | drl_scs
  std::string environment;  // linear | nonlinear
  double delay = 0.0;
  std::vector<EpisodeSummary> episodes;
};

AnalyzeReport cmd_analyze(const Experiment& exp, std::ostream& log);
std::vector<EpisodeLog> cmd_train(const Experiment& exp, const RunOptions& opts, std::ostream& log);
CalibrationReport cmd_calibrate(const Experiment& exp, const RunOptions& opts, std::ostream& log);
std::vector<EvaluationCell> cmd_evaluate(const Experiment& exp, const RunOptions& opts, std::ostream& log);
void cmd_simulate(const Experiment& exp, const RunOptions& opts, std::ostream& log);

/// Global min-max normalization; a zero range maps every value to 0.
std::vector<double> minmax_normalize(const std::vector<double>& values);

/// Evaluation episode starts shared by every cell so comparisons are paired.
std::vector<EpisodeStart> evaluation_starts(std::uint64_t seed, std::size_t episodes);

/// Setup for one evaluation cell.
EvaluationSetup cell_setup(const Experiment& exp, bool wide_area, bool nonlinear, double delay);

}  // namespace wadc::cli
