#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>

#include <spdlog/spdlog.h>

#include "palyno/error.hpp"
#include "palyno/features.hpp"
#include "palyno/harness.hpp"
#include "palyno/parallel.hpp"
#include "palyno/random.hpp"

namespace palyno::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string_view role_name(Role r) { return r == Role::Inlier ? "inlier" : "outlier"; }

Role parse_role(const std::string& s) {
  if (s == "inlier") return Role::Inlier;
  if (s == "outlier") return Role::Outlier;
  throw Error(Errc::SchemaMismatch, "manifest role must be 'inlier' or 'outlier', got '" + s + "'");
}

bool is_image_file(const fs::path& p) {
  const auto ext = p.extension().string();
  return ext == ".png" || ext == ".tif" || ext == ".tiff";
}

// Plane index of "plane_<k>.<ext>", or -1.
int plane_index(const fs::path& p) {
  const std::string stem = p.stem().string();
  if (!is_image_file(p) || stem.rfind("plane_", 0) != 0) return -1;
  int k = -1;
  const auto res = std::from_chars(stem.data() + 6, stem.data() + stem.size(), k);
  return (res.ec == std::errc() && res.ptr == stem.data() + stem.size()) ? k : -1;
}

bool is_stack_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) return false;
  for (const auto& e : fs::directory_iterator(dir))
    if (plane_index(e.path()) >= 0) return true;
  return false;
}

std::vector<fs::path> sorted_children(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

Manifest parse_manifest_file(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(Errc::FileNotFound, file.string());
  Manifest m;
  try {
    const json j = json::parse(in);
    m.version = j.at("version").get<int>();
    if (m.version != kManifestVersion)
      throw Error(Errc::SchemaMismatch, file.string() + ": unsupported manifest version " + std::to_string(m.version));
    for (const auto& e : j.at("entries")) {
      ManifestEntry entry;
      entry.category = e.at("category").get<std::string>();
      entry.path = e.at("path").get<std::string>();
      entry.role = parse_role(e.value("role", std::string("inlier")));
      if (entry.path.is_relative()) entry.path = file.parent_path() / entry.path;
      m.entries.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptData, file.string() + ": " + e.what());
  }
  return m;
}

std::string stack_label(const fs::path& path) {
  return path.has_extension() ? path.stem().string() : path.filename().string();
}

// Focus, segment and extract one source; returns one row per grain.
void process_stack(const FocalStack& stack, const std::string& category_id, const PipelineParams& p,
                   std::vector<std::vector<double>>& rows, std::vector<std::string>& ids) {
  const auto curve = focus::select_optimal_plane(stack, p.focus_measure);
  const Image& plane = stack.planes[curve.best_index];
  const auto grains = seg::segment_grains(plane, p.coarse, p.snake, category_id);
  if (grains.empty()) spdlog::warn("{}: no grain segmented, source skipped", category_id);
  for (std::size_t g = 0; g < grains.size(); ++g) {
    rows.push_back(features::extract_all(grains[g]));
    ids.push_back(category_id + "#" + std::to_string(g));
  }
}

FeatureMatrix empty_matrix(std::vector<std::string> categories) {
  FeatureMatrix m;
  m.feature_names = features::default_catalog().names();
  m.categories = std::move(categories);
  return m;
}

}  // namespace

std::vector<std::string> Manifest::categories(Role role) const {
  std::vector<std::string> out;
  for (const auto& e : entries)
    if (e.role == role) out.push_back(e.category);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Manifest load_manifest(const fs::path& root) {
  if (!fs::exists(root)) throw Error(Errc::FileNotFound, root.string());
  Manifest m;
  if (fs::is_regular_file(root) && root.extension() == ".json") {
    m = parse_manifest_file(root);
  } else if (fs::is_regular_file(root / "manifest.json")) {
    m = parse_manifest_file(root / "manifest.json");
  } else {
    if (!fs::is_directory(root)) throw Error(Errc::UnsupportedFormat, root.string() + ": expected a directory or manifest");
    for (const auto& cat : sorted_children(root)) {
      if (!fs::is_directory(cat)) continue;
      for (const auto& item : sorted_children(cat)) {
        if (is_stack_dir(item) || (fs::is_regular_file(item) && is_image_file(item)))
          m.entries.push_back({cat.filename().string(), item, Role::Inlier});
      }
    }
  }
  if (m.entries.empty()) throw Error(Errc::EmptyMatrix, root.string() + ": no stacks or images found");
  for (const auto& e : m.entries)
    if (!fs::exists(e.path)) throw Error(Errc::FileNotFound, e.path.string());
  return m;
}

void save_manifest(const fs::path& file, const Manifest& m) {
  json entries = json::array();
  const fs::path base = file.parent_path();
  for (const auto& e : m.entries) {
    const fs::path rel = e.path.lexically_relative(base);
    entries.push_back({{"category", e.category},
                       {"path", (rel.empty() ? e.path : rel).generic_string()},
                       {"role", role_name(e.role)}});
  }
  std::ofstream out(file);
  if (!out) throw Error(Errc::IoError, "cannot write " + file.string());
  out << json{{"version", m.version}, {"entries", entries}}.dump(2) << '\n';
}

FocalStack load_stack(const fs::path& dir) {
  if (fs::is_regular_file(dir)) return FocalStack{{load_grayscale(dir)}, 1.0};
  if (!fs::is_directory(dir)) throw Error(Errc::FileNotFound, dir.string());
  std::map<int, fs::path> planes;
  for (const auto& e : fs::directory_iterator(dir)) {
    const int k = plane_index(e.path());
    if (k >= 0) planes.emplace(k, e.path());
  }
  if (planes.empty()) throw Error(Errc::EmptyStack, dir.string() + ": no plane_<k> images");
  FocalStack s;
  for (const auto& [k, path] : planes) s.planes.push_back(load_grayscale(path));
  for (const auto& pl : s.planes)
    if (pl.width() != s.planes.front().width() || pl.height() != s.planes.front().height())
      throw Error(Errc::DimensionMismatch, dir.string() + ": planes differ in size");
  return s;
}

std::string synth_category(int type_id) {
  return std::string("type_") + (type_id < 10 ? "0" : "") + std::to_string(type_id);
}

Manifest write_synthetic_dataset(const synth::SynthConfig& cfg, const fs::path& out, int threads) {
  cfg.validate();
  fs::create_directories(out);
  const int n_types = cfg.n_types + cfg.n_outlier_types;
  const std::size_t jobs = static_cast<std::size_t>(n_types) * cfg.grains_per_type;
  Manifest m;
  m.entries.resize(jobs);
  parallel_for(jobs, threads, [&](std::size_t job) {
    const int type = static_cast<int>(job / cfg.grains_per_type);
    const int k = static_cast<int>(job % cfg.grains_per_type);
    const auto stack = synth::synth_stack(cfg, type, derive_seed(cfg.seed, {static_cast<std::uint64_t>(type),
                                                                           static_cast<std::uint64_t>(k)}));
    char name[16];
    std::snprintf(name, sizeof(name), "%04d", k);
    const fs::path dir = out / synth_category(type) / name;
    fs::create_directories(dir);
    for (std::size_t pl = 0; pl < stack.stack.planes.size(); ++pl) {
      char file[32];
      std::snprintf(file, sizeof(file), "plane_%02zu.png", pl);
      save_png(dir / file, stack.stack.planes[pl]);
    }
    json grains = json::array();
    for (const auto& g : stack.grains)
      grains.push_back({{"type_id", g.type_id}, {"box", {g.box.x, g.box.y, g.box.w, g.box.h}}});
    std::ofstream truth(dir / "truth.json");
    truth << json{{"sharp_plane", stack.sharp_plane}, {"grains", grains}, {"debris", stack.debris.size()}}.dump(2)
          << '\n';
    if (!truth) throw Error(Errc::IoError, "cannot write " + (dir / "truth.json").string());
    m.entries[job] = {synth_category(type), dir, type < cfg.n_types ? Role::Inlier : Role::Outlier};
  });
  save_manifest(out / "manifest.json", m);
  return m;
}

FeatureMatrix build_feature_matrix(const Manifest& m, const PipelineParams& p, int threads) {
  std::vector<std::string> cats;
  for (const auto& e : m.entries) cats.push_back(e.category);
  std::sort(cats.begin(), cats.end());
  cats.erase(std::unique(cats.begin(), cats.end()), cats.end());

  std::vector<std::vector<std::vector<double>>> rows(m.entries.size());
  std::vector<std::vector<std::string>> ids(m.entries.size());
  parallel_for(m.entries.size(), threads, [&](std::size_t i) {
    const auto& e = m.entries[i];
    process_stack(load_stack(e.path), e.category + "/" + stack_label(e.path), p, rows[i], ids[i]);
  });

  FeatureMatrix out = empty_matrix(cats);
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    const int label = out.category_index(m.entries[i].category);
    for (std::size_t g = 0; g < rows[i].size(); ++g) {
      out.rows.push_back(std::move(rows[i][g]));
      out.ids.push_back(ids[i][g]);
      out.labels.push_back(label);
    }
  }
  return out;
}

FeatureMatrix build_synthetic_matrix(const synth::SynthConfig& cfg, const std::vector<int>& types,
                                     const PipelineParams& p, int threads) {
  cfg.validate();
  std::vector<std::string> cats;
  for (int t : types) cats.push_back(synth_category(t));
  std::sort(cats.begin(), cats.end());
  cats.erase(std::unique(cats.begin(), cats.end()), cats.end());

  const std::size_t jobs = types.size() * static_cast<std::size_t>(cfg.grains_per_type);
  std::vector<std::vector<std::vector<double>>> rows(jobs);
  std::vector<std::vector<std::string>> ids(jobs);
  parallel_for(jobs, threads, [&](std::size_t job) {
    const int type = types[job / cfg.grains_per_type];
    const int k = static_cast<int>(job % cfg.grains_per_type);
    const auto s = synth::synth_stack(cfg, type, derive_seed(cfg.seed, {static_cast<std::uint64_t>(type),
                                                                       static_cast<std::uint64_t>(k)}));
    char name[16];
    std::snprintf(name, sizeof(name), "%04d", k);
    process_stack(s.stack, synth_category(type) + "/" + name, p, rows[job], ids[job]);
  });

  FeatureMatrix out = empty_matrix(cats);
  for (std::size_t job = 0; job < jobs; ++job) {
    const int label = out.category_index(synth_category(types[job / cfg.grains_per_type]));
    for (std::size_t g = 0; g < rows[job].size(); ++g) {
      out.rows.push_back(std::move(rows[job][g]));
      out.ids.push_back(ids[job][g]);
      out.labels.push_back(label);
    }
  }
  return out;
}

}  // namespace palyno::harness
