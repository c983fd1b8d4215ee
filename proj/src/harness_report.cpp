#include <cstdio>
#include <fstream>
#include <sstream>

#include "palyno/error.hpp"
#include "palyno/features.hpp"
#include "palyno/harness.hpp"

namespace palyno::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + p.string());
  return out;
}

void write_aggregates(const fs::path& p, const std::string& key_col, const std::string& x_col,
                      const std::vector<Aggregate>& rows) {
  auto out = open_out(p);
  out << key_col << ",p," << (x_col.empty() ? "" : x_col + ",") << "mean,sd,n\n";
  for (const auto& a : rows) {
    out << a.key << ',' << a.p << ',';
    if (!x_col.empty()) out << num(a.x) << ',';
    out << num(a.mean) << ',' << num(a.sd) << ',' << a.n << '\n';
  }
}

json aggregates_json(const std::vector<Aggregate>& rows) {
  json arr = json::array();
  for (const auto& a : rows)
    arr.push_back({{"key", a.key}, {"p", a.p}, {"x", a.x}, {"mean", a.mean}, {"sd", a.sd}, {"n", a.n}});
  return arr;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p, const std::string& header) {
  std::ifstream in(p);
  if (!in) throw Error(Errc::FileNotFound, p.string());
  std::string line;
  if (!std::getline(in, line) || line != header)
    throw Error(Errc::SchemaMismatch, p.string() + ": unexpected header, expected '" + header + "'");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

double to_double(const std::string& s, const fs::path& p) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(Errc::CorruptData, p.string() + ": '" + s + "' is not a number");
}

const char* kClsHeader = "p,repeat,classifier,n_features,accuracy";
const char* kSweepHeader = "p,repeat,classifier,fraction,n_features,accuracy";
const char* kAuthHeader = "p,repeat,condition,alpha_in,alpha_out,n_inliers,n_outliers";

}  // namespace

void emit_report(const Report& r, const fs::path& dir) {
  fs::create_directories(dir);
  {
    auto out = open_out(dir / "classification.csv");
    out << kClsHeader << '\n';
    for (const auto& c : r.classification)
      out << c.p << ',' << c.repeat << ',' << c.classifier << ',' << c.n_features << ',' << num(c.accuracy) << '\n';
  }
  {
    auto out = open_out(dir / "feature_sweep.csv");
    out << kSweepHeader << '\n';
    for (const auto& s : r.sweep)
      out << s.p << ',' << s.repeat << ',' << s.classifier << ',' << num(s.fraction) << ',' << s.n_features << ','
          << num(s.accuracy) << '\n';
  }
  {
    auto out = open_out(dir / "authentication.csv");
    out << kAuthHeader << '\n';
    for (const auto& a : r.authentication)
      out << a.p << ',' << a.repeat << ',' << a.condition << ',' << num(a.alpha_in) << ',' << num(a.alpha_out) << ','
          << a.n_inliers << ',' << a.n_outliers << '\n';
  }
  const auto cls = r.classification_summary();
  const auto swp = r.sweep_summary();
  const auto aut = r.authentication_summary();
  write_aggregates(dir / "accuracy_vs_p.csv", "classifier", "", cls);
  write_aggregates(dir / "accuracy_vs_features.csv", "classifier", "fraction", swp);
  write_aggregates(dir / "auth_vs_p.csv", "condition", "", aut);

  const json summary{{"schema_version", kReportSchemaVersion},
                     {"catalog_version", features::kCatalogVersion},
                     {"config", r.config},
                     {"classification", aggregates_json(cls)},
                     {"feature_sweep", aggregates_json(swp)},
                     {"authentication", aggregates_json(aut)}};
  open_out(dir / "summary.json") << summary.dump(2) << '\n';
  open_out(dir / "timing.json") << json{{"runtime_seconds", r.runtime_seconds}}.dump(2) << '\n';
}

Report load_report(const fs::path& dir) {
  Report r;
  {
    std::ifstream in(dir / "summary.json");
    if (!in) throw Error(Errc::FileNotFound, (dir / "summary.json").string());
    try {
      const json j = json::parse(in);
      if (j.at("schema_version").get<int>() != kReportSchemaVersion)
        throw Error(Errc::SchemaMismatch, dir.string() + ": unsupported report schema");
      r.config = j.at("config");
    } catch (const json::exception& e) {
      throw Error(Errc::CorruptData, (dir / "summary.json").string() + ": " + e.what());
    }
  }
  const auto row_error = [](const fs::path& p) { return Error(Errc::CorruptData, p.string() + ": wrong column count"); };
  auto p = dir / "classification.csv";
  for (const auto& c : read_csv(p, kClsHeader)) {
    if (c.size() != 5) throw row_error(p);
    r.classification.push_back({static_cast<int>(to_double(c[0], p)), static_cast<int>(to_double(c[1], p)), c[2],
                                static_cast<int>(to_double(c[3], p)), to_double(c[4], p)});
  }
  p = dir / "feature_sweep.csv";
  for (const auto& c : read_csv(p, kSweepHeader)) {
    if (c.size() != 6) throw row_error(p);
    r.sweep.push_back({static_cast<int>(to_double(c[0], p)), static_cast<int>(to_double(c[1], p)), c[2],
                       to_double(c[3], p), static_cast<int>(to_double(c[4], p)), to_double(c[5], p)});
  }
  p = dir / "authentication.csv";
  for (const auto& c : read_csv(p, kAuthHeader)) {
    if (c.size() != 7) throw row_error(p);
    r.authentication.push_back({static_cast<int>(to_double(c[0], p)), static_cast<int>(to_double(c[1], p)), c[2],
                                to_double(c[3], p), to_double(c[4], p), static_cast<int>(to_double(c[5], p)),
                                static_cast<int>(to_double(c[6], p))});
  }
  std::ifstream timing(dir / "timing.json");
  if (timing) {
    try {
      r.runtime_seconds = json::parse(timing).value("runtime_seconds", 0.0);
    } catch (const json::exception&) {
    }
  }
  return r;
}

}  // namespace palyno::harness
