#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "wadc/mlp.hpp"
#include "wadc/types.hpp"

namespace wadc {

/// Named numeric arrays, scalars and string metadata in one JSON document.
///
/// Doubles are written in shortest round-trip form, so a save/load cycle
/// reproduces every value bit for bit. Non-finite values are rejected.
class Checkpoint {
public:
  struct Array {
    std::vector<std::size_t> shape;
    std::vector<double> data;  // column-major for matrices
  };

  void put(const std::string& name, const Mat& m);
  void put_vector(const std::string& name, const Vec& v);
  Mat matrix(const std::string& name) const;
  Vec vector(const std::string& name) const;
  bool has_array(const std::string& name) const { return arrays_.count(name) > 0; }

  void set_scalar(const std::string& name, double value);
  double scalar(const std::string& name) const;
  bool has_scalar(const std::string& name) const { return scalars_.count(name) > 0; }

  void set_meta(const std::string& key, std::string value) { meta_[key] = std::move(value); }
  const std::string& meta(const std::string& key) const;

  const std::map<std::string, Array>& arrays() const noexcept { return arrays_; }

  std::string dump() const;
  static Checkpoint parse(const std::string& text);

  /// Writes to a sibling temporary file and renames it into place.
  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

private:
  std::map<std::string, Array> arrays_;
  std::map<std::string, double> scalars_;
  std::map<std::string, std::string> meta_;
};

/// Stores layers as `<prefix>.<l>.weight`, `<prefix>.<l>.bias` plus an
/// activation tag in the metadata.
void store_network(Checkpoint& ckpt, const std::string& prefix, const Mlp& net);
Mlp load_network(const Checkpoint& ckpt, const std::string& prefix);

}  // namespace wadc
