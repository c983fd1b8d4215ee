#include "palyno/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "palyno/error.hpp"

namespace palyno {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

}  // namespace

void FeatureMatrix::validate() const {
  if (labels.size() != rows.size() || ids.size() != rows.size())
    throw Error(Errc::DimensionMismatch, "feature matrix: rows, labels and ids differ in length");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != feature_names.size())
      throw Error(Errc::DimensionMismatch, "feature matrix: row " + std::to_string(i) + " has " +
                                               std::to_string(rows[i].size()) + " values, expected " +
                                               std::to_string(feature_names.size()));
    if (labels[i] < -1 || labels[i] >= static_cast<int>(categories.size()))
      throw Error(Errc::UnknownCategory, "feature matrix: row " + std::to_string(i) + " has an undeclared label");
  }
}

FeatureMatrix FeatureMatrix::subset_rows(const std::vector<std::size_t>& indices) const {
  FeatureMatrix out;
  out.feature_names = feature_names;
  out.categories = categories;
  for (std::size_t i : indices) {
    out.rows.push_back(rows.at(i));
    out.labels.push_back(labels.at(i));
    out.ids.push_back(ids.at(i));
  }
  return out;
}

FeatureMatrix FeatureMatrix::subset_cols(const std::vector<std::size_t>& indices) const {
  FeatureMatrix out;
  out.categories = categories;
  out.labels = labels;
  out.ids = ids;
  for (std::size_t j : indices) out.feature_names.push_back(feature_names.at(j));
  out.rows.reserve(rows.size());
  for (const auto& r : rows) {
    std::vector<double> v;
    v.reserve(indices.size());
    for (std::size_t j : indices) v.push_back(r.at(j));
    out.rows.push_back(std::move(v));
  }
  return out;
}

std::vector<std::size_t> FeatureMatrix::category_counts() const {
  std::vector<std::size_t> counts(categories.size(), 0);
  for (int l : labels)
    if (l >= 0) ++counts[static_cast<std::size_t>(l)];
  return counts;
}

int FeatureMatrix::category_index(const std::string& name) const {
  const auto it = std::find(categories.begin(), categories.end(), name);
  return it == categories.end() ? -1 : static_cast<int>(it - categories.begin());
}

void write_feature_csv(const std::filesystem::path& path, const FeatureMatrix& m) {
  m.validate();
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << "source_id,label";
  for (const auto& n : m.feature_names) out << ',' << n;
  out << '\n';
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    out << m.ids[i] << ',' << (m.labels[i] >= 0 ? m.categories[m.labels[i]] : std::string());
    for (double v : m.rows[i]) out << ',' << format_double(v);
    out << '\n';
  }
  if (!out) throw Error(Errc::IoError, "write failed: " + path.string());
}

FeatureMatrix read_feature_csv(const std::filesystem::path& path, const std::vector<std::string>* expected_columns) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::FileNotFound, path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::SchemaMismatch, path.string() + ": missing header row");
  auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "source_id" || header[1] != "label")
    throw Error(Errc::SchemaMismatch, path.string() + ": header must start with 'source_id,label'");

  FeatureMatrix m;
  m.feature_names.assign(header.begin() + 2, header.end());
  if (expected_columns) {
    const auto& exp = *expected_columns;
    const std::size_t n = std::max(exp.size(), m.feature_names.size());
    for (std::size_t j = 0; j < n; ++j) {
      const std::string got = j < m.feature_names.size() ? m.feature_names[j] : "<missing>";
      const std::string want = j < exp.size() ? exp[j] : "<none>";
      if (got != want)
        throw Error(Errc::SchemaMismatch, path.string() + ": column " + std::to_string(j + 3) + " is '" + got +
                                              "', expected '" + want + "'");
    }
  }

  std::vector<std::string> label_names;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw Error(Errc::SchemaMismatch, path.string() + ": line " + std::to_string(line_no) + " has " +
                                            std::to_string(cells.size()) + " cells, expected " +
                                            std::to_string(header.size()));
    std::vector<double> row(cells.size() - 2);
    for (std::size_t j = 2; j < cells.size(); ++j) {
      const auto& c = cells[j];
      const auto res = std::from_chars(c.data(), c.data() + c.size(), row[j - 2]);
      if (res.ec != std::errc() || res.ptr != c.data() + c.size())
        throw Error(Errc::CorruptData, path.string() + ": line " + std::to_string(line_no) + ", column '" +
                                           header[j] + "': not a number: '" + c + "'");
    }
    m.ids.push_back(cells[0]);
    label_names.push_back(cells[1]);
    m.rows.push_back(std::move(row));
  }

  std::set<std::string> distinct;
  for (const auto& l : label_names)
    if (!l.empty()) distinct.insert(l);
  m.categories.assign(distinct.begin(), distinct.end());
  for (const auto& l : label_names) m.labels.push_back(l.empty() ? -1 : m.category_index(l));
  return m;
}

FeatureMatrix align_columns(const FeatureMatrix& m, const std::vector<std::string>& names) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t j = 0; j < m.feature_names.size(); ++j) index.emplace(m.feature_names[j], j);
  std::vector<std::size_t> cols;
  cols.reserve(names.size());
  for (const auto& n : names) {
    const auto it = index.find(n);
    if (it == index.end()) throw Error(Errc::SchemaMismatch, "feature column '" + n + "' is missing");
    cols.push_back(it->second);
  }
  return m.subset_cols(cols);
}

}  // namespace palyno
