#include "wadc/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "wadc/types.hpp"

namespace wadc::csv {

std::string format(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", value);
  return buf;
}

Writer::Writer(std::vector<std::string> header) : header_(std::move(header)) {}

void Writer::add_row(const std::vector<double>& values) {
  std::vector<std::string> fields;
  fields.reserve(values.size());
  for (double v : values) fields.push_back(format(v));
  add_row(fields);
}

void Writer::add_row(const std::vector<std::string>& fields) {
  if (fields.size() != header_.size()) throw InvalidArgument("CSV row width does not match header");
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line += ',';
    line += fields[i];
  }
  rows_.push_back(std::move(line));
}

std::string Writer::str() const {
  std::string out;
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (i) out += ',';
    out += header_[i];
  }
  out += '\n';
  for (const auto& r : rows_) {
    out += r;
    out += '\n';
  }
  return out;
}

void Writer::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << str();
  if (!os) throw IoError("write failed for " + path.string());
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::size_t Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw InvalidArgument("no CSV column named " + name);
}

double Table::number(std::size_t row, const std::string& name) const {
  return std::stod(rows.at(row).at(column(name)));
}

Table parse(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  Table t;
  if (!std::getline(is, line) || line.empty()) throw InvalidArgument("CSV has no header");
  t.header = split(line);
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    auto fields = split(line);
    if (fields.size() != t.header.size())
      throw InvalidArgument("ragged CSV row at line " + std::to_string(lineno));
    t.rows.push_back(std::move(fields));
  }
  return t;
}

Table read(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse(ss.str());
}

}  // namespace wadc::csv
