#include "wadc/checkpoint.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace wadc {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "wadc-checkpoint";
constexpr int kVersion = 1;

void require_finite(const std::string& name, const double* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(data[i])) throw InvalidArgument("checkpoint array '" + name + "' holds a non-finite value");
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::linear: return "linear";
  }
  return "linear";
}

Activation activation_from(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "linear") return Activation::linear;
  throw ConfigError("unknown activation '" + s + "' in checkpoint");
}

}  // namespace

void Checkpoint::put(const std::string& name, const Mat& m) {
  require_finite(name, m.data(), static_cast<std::size_t>(m.size()));
  Array a;
  a.shape = {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())};
  a.data.assign(m.data(), m.data() + m.size());
  arrays_[name] = std::move(a);
}

void Checkpoint::put_vector(const std::string& name, const Vec& v) {
  require_finite(name, v.data(), static_cast<std::size_t>(v.size()));
  Array a;
  a.shape = {static_cast<std::size_t>(v.size())};
  a.data.assign(v.data(), v.data() + v.size());
  arrays_[name] = std::move(a);
}

Mat Checkpoint::matrix(const std::string& name) const {
  const auto it = arrays_.find(name);
  if (it == arrays_.end()) throw ConfigError("checkpoint has no array '" + name + "'");
  const auto& a = it->second;
  if (a.shape.size() != 2) throw ConfigError("checkpoint array '" + name + "' is not a matrix");
  const auto rows = static_cast<Eigen::Index>(a.shape[0]);
  const auto cols = static_cast<Eigen::Index>(a.shape[1]);
  return Eigen::Map<const Mat>(a.data.data(), rows, cols);
}

Vec Checkpoint::vector(const std::string& name) const {
  const auto it = arrays_.find(name);
  if (it == arrays_.end()) throw ConfigError("checkpoint has no array '" + name + "'");
  const auto& a = it->second;
  if (a.shape.size() != 1) throw ConfigError("checkpoint array '" + name + "' is not a vector");
  return Eigen::Map<const Vec>(a.data.data(), static_cast<Eigen::Index>(a.data.size()));
}

void Checkpoint::set_scalar(const std::string& name, double value) {
  if (!std::isfinite(value)) throw InvalidArgument("checkpoint scalar '" + name + "' is not finite");
  scalars_[name] = value;
}

double Checkpoint::scalar(const std::string& name) const {
  const auto it = scalars_.find(name);
  if (it == scalars_.end()) throw ConfigError("checkpoint has no scalar '" + name + "'");
  return it->second;
}

const std::string& Checkpoint::meta(const std::string& key) const {
  const auto it = meta_.find(key);
  if (it == meta_.end()) throw ConfigError("checkpoint has no metadata '" + key + "'");
  return it->second;
}

std::string Checkpoint::dump() const {
  json doc;
  doc["format"] = kFormat;
  doc["version"] = kVersion;
  doc["meta"] = meta_;
  doc["scalars"] = scalars_;
  json arrays = json::object();
  for (const auto& [name, a] : arrays_) arrays[name] = {{"shape", a.shape}, {"data", a.data}};
  doc["arrays"] = std::move(arrays);
  return doc.dump(1);
}

Checkpoint Checkpoint::parse(const std::string& text) {
  Checkpoint c;
  try {
    const json doc = json::parse(text);
    if (doc.value("format", std::string{}) != kFormat) throw ConfigError("not a checkpoint file");
    if (doc.value("version", 0) != kVersion) throw ConfigError("unsupported checkpoint version");
    c.meta_ = doc.at("meta").get<std::map<std::string, std::string>>();
    c.scalars_ = doc.at("scalars").get<std::map<std::string, double>>();
    for (const auto& [name, a] : doc.at("arrays").items()) {
      Array arr;
      arr.shape = a.at("shape").get<std::vector<std::size_t>>();
      arr.data = a.at("data").get<std::vector<double>>();
      std::size_t expected = 1;
      for (auto s : arr.shape) expected *= s;
      if (expected != arr.data.size()) throw ConfigError("checkpoint array '" + name + "' has the wrong size");
      c.arrays_[name] = std::move(arr);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  }
  return c;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << dump();
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into " + path.string() + ": " + ec.message());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str());
}

void store_network(Checkpoint& ckpt, const std::string& prefix, const Mlp& net) {
  const auto& layers = net.layers();
  ckpt.set_scalar(prefix + ".layers", static_cast<double>(layers.size()));
  std::string acts;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    ckpt.put(prefix + "." + std::to_string(l) + ".weight", layers[l].weight);
    ckpt.put_vector(prefix + "." + std::to_string(l) + ".bias", layers[l].bias);
    if (l) acts += ',';
    acts += activation_name(layers[l].activation);
  }
  ckpt.set_meta(prefix + ".activations", acts);
}

Mlp load_network(const Checkpoint& ckpt, const std::string& prefix) {
  const auto count = static_cast<std::size_t>(ckpt.scalar(prefix + ".layers"));
  std::vector<std::string> acts;
  std::stringstream ss(ckpt.meta(prefix + ".activations"));
  for (std::string tok; std::getline(ss, tok, ',');) acts.push_back(tok);
  if (acts.size() != count) throw ConfigError("checkpoint network '" + prefix + "' is inconsistent");
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l < count; ++l)
    layers.push_back({ckpt.matrix(prefix + "." + std::to_string(l) + ".weight"),
                      ckpt.vector(prefix + "." + std::to_string(l) + ".bias"), activation_from(acts[l])});
  try {
    return Mlp(std::move(layers));
  } catch (const InvalidArgument& e) {
    throw ConfigError("checkpoint network '" + prefix + "': " + e.what());
  }
}

}  // namespace wadc
