#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace wadc::csv {

/// 12 significant digits, the precision of every CSV artifact.
std::string format(double value);

/// Accumulates rows and writes them in one go; rows must match the header.
class Writer {
public:
  explicit Writer(std::vector<std::string> header);

  void add_row(const std::vector<double>& values);
  void add_row(const std::vector<std::string>& fields);
  std::size_t rows() const noexcept { return rows_.size(); }
  std::string str() const;
  void save(const std::filesystem::path& path) const;

private:
  std::vector<std::string> header_;
  std::vector<std::string> rows_;
};

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
  double number(std::size_t row, const std::string& name) const;
};

/// Strict reader: every row must have as many fields as the header.
Table read(const std::filesystem::path& path);
Table parse(const std::string& text);

}  // namespace wadc::csv
