#include "wadc/model_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace wadc {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

// Accepts a flat row-major array of n*n numbers or nested rows.
Mat square_matrix(const json& j, std::size_t n, const std::string& what) {
  const auto ni = static_cast<Eigen::Index>(n);
  Mat m(ni, ni);
  if (!j.is_array()) throw ConfigError(what + " must be an array");
  if (!j.empty() && j.front().is_array()) {
    if (j.size() != n) throw ConfigError(what + " must have " + std::to_string(n) + " rows");
    for (std::size_t r = 0; r < n; ++r) {
      if (j[r].size() != n) throw ConfigError(what + " rows must have " + std::to_string(n) + " entries");
      for (std::size_t c = 0; c < n; ++c)
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
  } else {
    if (j.size() != n * n)
      throw ConfigError(what + " must have " + std::to_string(n * n) + " entries (row-major)");
    for (std::size_t k = 0; k < n * n; ++k)
      m(static_cast<Eigen::Index>(k / n), static_cast<Eigen::Index>(k % n)) = j[k].get<double>();
  }
  return m;
}

Mat dense_matrix(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) throw ConfigError(what + " must be an array of rows");
  const std::size_t cols = j.front().size();
  Mat m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw ConfigError(what + " rows must have equal length");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
  }
  if (!m.allFinite()) throw ConfigError(what + " must be finite");
  return m;
}

StateSpaceData parse_state_space(const json& j, const std::string& source) {
  reject_unknown(j, {"A", "B1", "B2", "generators"}, source + ": state_space");
  StateSpaceData ss;
  ss.A = dense_matrix(j.at("A"), source + ": state_space.A");
  ss.B1 = dense_matrix(j.at("B1"), source + ": state_space.B1");
  ss.B2 = j.contains("B2") ? dense_matrix(j.at("B2"), source + ": state_space.B2") : ss.B1;
  ss.generators = j.at("generators").get<std::size_t>();
  if (ss.A.rows() != ss.A.cols()) throw ConfigError(source + ": state_space.A must be square");
  if (ss.B1.rows() != ss.A.rows() || ss.B2.rows() != ss.A.rows())
    throw ConfigError(source + ": state_space.B1 and B2 need as many rows as A");
  if (ss.generators == 0 || static_cast<Eigen::Index>(2 * ss.generators) > ss.A.rows())
    throw ConfigError(source + ": state_space.generators must lie in [1, n/2]");
  return ss;
}

}  // namespace

ModelData parse_model(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source + ": " + e.what());
  }
  try {
    ModelData data;
    data.name = doc.value("name", std::string{});
    data.dt = doc.value("dt", 0.01);
    if (!(data.dt > 0.0)) throw ConfigError(source + ": dt must be positive");
    if (doc.contains("state_space")) {
      reject_unknown(doc, {"name", "dt", "state_space"}, source);
      data.state_space = parse_state_space(doc.at("state_space"), source);
      return data;
    }
    reject_unknown(doc, {"name", "dt", "machines", "conductance", "susceptance"}, source);
    const auto& machines = doc.at("machines");
    if (!machines.is_array() || machines.empty())
      throw ConfigError(source + ": machines must be a non-empty array");
    for (const auto& m : machines) {
      reject_unknown(m, {"inertia", "damping", "emf", "mech_power", "controlled", "reference"},
                     source + ": machine");
      MachineData md;
      md.inertia = m.at("inertia").get<double>();
      md.damping = m.at("damping").get<double>();
      md.emf = m.at("emf").get<double>();
      md.mech_power = m.at("mech_power").get<double>();
      md.controlled = m.value("controlled", false);
      md.reference = m.value("reference", false);
      data.machines.push_back(md);
    }
    const auto ng = data.machines.size();
    data.network.conductance = square_matrix(doc.at("conductance"), ng, source + ": conductance");
    data.network.susceptance = square_matrix(doc.at("susceptance"), ng, source + ": susceptance");
    validate_machines(data.machines);
    validate_network(data.network, ng);
    return data;
  } catch (const json::exception& e) {
    throw ConfigError(source + ": " + e.what());
  } catch (const ModelError& e) {
    throw ConfigError(source + ": " + e.what());
  }
}

ModelData load_model_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read model file " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_model(ss.str(), path.string());
}

GridModel build_model(const ModelData& data) {
  if (data.state_space)
    return GridModel::from_matrices(data.state_space->A, data.state_space->B1, data.state_space->B2,
                                    data.state_space->generators, data.dt);
  return build_linear_model(data.machines, data.network, data.dt);
}

csv::Writer trajectory_table(const Trajectory& trajectory, double dt,
                             const std::vector<bool>* scs_on) {
  const std::size_t ng = trajectory.empty() ? 0 : static_cast<std::size_t>(trajectory.front().theta.size());
  std::vector<std::string> header{"t"};
  for (std::size_t i = 1; i <= ng; ++i) header.push_back("theta_" + std::to_string(i));
  for (std::size_t i = 1; i <= ng; ++i) header.push_back("omega_" + std::to_string(i));
  if (scs_on) header.emplace_back("scs_on");
  csv::Writer w(header);
  for (std::size_t k = 0; k < trajectory.size(); ++k) {
    std::vector<std::string> row{csv::format(static_cast<double>(k) * dt)};
    for (Eigen::Index i = 0; i < trajectory[k].theta.size(); ++i) row.push_back(csv::format(trajectory[k].theta(i)));
    for (Eigen::Index i = 0; i < trajectory[k].omega.size(); ++i) row.push_back(csv::format(trajectory[k].omega(i)));
    if (scs_on) row.emplace_back(k < scs_on->size() && (*scs_on)[k] ? "1" : "0");
    w.add_row(row);
  }
  return w;
}

}  // namespace wadc
