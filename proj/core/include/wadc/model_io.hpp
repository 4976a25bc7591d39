#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wadc/csv.hpp"
#include "wadc/grid_model.hpp"

namespace wadc {

/// Raw linear model (x' = A x + B1 u + B2 eta) without machine data.
struct StateSpaceData {
  Mat A;
  Mat B1;
  Mat B2;
  std::size_t generators = 0;
};

/// Contents of a model data file: either machines behind a reduced network or
/// a raw state-space model.
struct ModelData {
  std::string name;
  std::vector<MachineData> machines;
  ReducedNetwork network;
  std::optional<StateSpaceData> state_space;
  double dt = 0.01;
};

/// Reads a JSON model file. Errors carry the file name and, for syntax
/// errors, the line and column.
ModelData load_model_file(const std::filesystem::path& path);
ModelData parse_model(const std::string& text, const std::string& source = "<memory>");

/// Linearized swing model, or the raw matrices for a state-space file.
GridModel build_model(const ModelData& data);

/// `t,theta_1..theta_ng,omega_1..omega_ng[,scs_on]`, one row per sample.
csv::Writer trajectory_table(const Trajectory& trajectory, double dt,
                             const std::vector<bool>* scs_on = nullptr);

}  // namespace wadc
