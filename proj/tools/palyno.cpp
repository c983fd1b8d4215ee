// palyno: command line front end for the pollen pipeline.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "palyno/authentication.hpp"
#include "palyno/classifiers.hpp"
#include "palyno/dataset.hpp"
#include "palyno/error.hpp"
#include "palyno/features.hpp"
#include "palyno/focus.hpp"
#include "palyno/harness.hpp"
#include "palyno/parallel.hpp"
#include "palyno/segmentation.hpp"
#include "palyno/selection.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace palyno;

namespace {

constexpr const char* kToolVersion = "1.0.0";

struct Global {
  int threads = 0;
  std::optional<std::uint64_t> seed;
  std::string params_file;
  std::string log_level = "warn";
};

harness::Params resolve_params(const Global& g) {
  harness::Params p;
  if (!g.params_file.empty()) p = harness::load_params(g.params_file);
  if (g.seed) {
    p.synth.seed = *g.seed;
    p.experiment.seed = *g.seed;
  }
  p.experiment.threads = resolve_threads(g.threads);
  p.experiment.train.threads = p.experiment.threads;
  return p;
}

focus::MeasureKind measure_or(const std::string& name, focus::MeasureKind fallback) {
  if (name.empty()) return fallback;
  const auto m = focus::parse_measure(name);
  if (!m) throw Error(Errc::InvalidArgument, "unknown focus measure '" + name + "'");
  return *m;
}

FocalStack load_source(const fs::path& p) { return harness::load_stack(p); }

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoError, "cannot write " + path);
  out << text;
}

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

// Merges two reports from the same run into one.
harness::Report combine(harness::Report a, const harness::Report& b) {
  a.authentication = b.authentication;
  a.config = {{"classification", a.config}, {"authentication", b.config}};
  a.runtime_seconds += b.runtime_seconds;
  return a;
}

}  // namespace

int main(int argc, char** argv) {
  Global g;
  const std::string defaults = "Built-in parameter defaults (override with --params FILE, flags win over the file):\n" +
                               harness::params_to_json(harness::Params{}).dump(2);

  CLI::App app{"palyno: pollen grain focus selection, segmentation, feature extraction, classification and "
               "authentication"};
  app.footer(defaults);
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version",
                       std::string("palyno ") + kToolVersion + "\nfeature catalog: " +
                           std::string(features::kCatalogVersion) +
                           "\nmodel format: palyno-model v" + std::to_string(classify::kModelFormatVersion) +
                           "\nprofile format: palyno-profiles v" + std::to_string(auth::kProfileFormatVersion) +
                           "\nreport schema: v" + std::to_string(harness::kReportSchemaVersion));
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)")->capture_default_str()->check(CLI::NonNegativeNumber);
  app.add_option("--seed", g.seed, "Master seed (overrides synth.seed and experiment.seed)");
  app.add_option("--params", g.params_file, "JSON file overriding parameter defaults")->check(CLI::ExistingFile);
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error, off")->capture_default_str();

  // focus
  std::string f_stack, f_measure, f_out;
  auto* focus_cmd = app.add_subcommand("focus", "Pick the sharpest plane of a focal stack");
  focus_cmd->add_option("--stack", f_stack, "Stack directory (plane_<k>.png) or single image")->required();
  focus_cmd->add_option("--measure", f_measure, "absolute_gradient, vollath_f4, variance or histogram_entropy (default: pipeline.focus_measure = absolute_gradient)");
  focus_cmd->add_option("--out", f_out, "Output CSV plane_index,score (default: stdout)");

  // segment
  std::string s_input, s_out;
  auto* seg_cmd = app.add_subcommand("segment", "Segment grains from the sharpest plane");
  seg_cmd->add_option("--image,--input", s_input, "Stack directory or single image")->required();
  seg_cmd->add_option("--out", s_out, "Output directory for grain crops, masks and grains.json")->required();
  seg_cmd->add_option("--measure", f_measure, "Focus measure for stacks");

  // extract
  std::string e_data, e_out;
  auto* extract_cmd = app.add_subcommand("extract", "Run focus, segmentation and feature extraction over a dataset");
  extract_cmd->add_option("--data,--grains", e_data, "Dataset root or manifest.json")->required();
  extract_cmd->add_option("--out", e_out, "Feature CSV")->required();

  // select
  std::string sel_features, sel_out;
  double sel_fraction = selection::kDefaultFraction;
  std::optional<std::size_t> sel_count;
  auto* select_cmd = app.add_subcommand("select", "Normalize and rank features by Fisher score");
  select_cmd->add_option("--features", sel_features, "Labeled feature CSV")->required()->check(CLI::ExistingFile);
  select_cmd->add_option("--out", sel_out, "Selection JSON")->required();
  auto* frac_opt = select_cmd->add_option("--fraction", sel_fraction, "Fraction of features kept")->capture_default_str();
  select_cmd->add_option("--count", sel_count, "Exact number of features kept")->excludes(frac_opt);

  // train
  std::string t_features, t_out, t_model = "rf", t_rule;
  std::optional<int> t_trees;
  std::optional<double> t_fraction;
  bool t_no_prune = false;
  auto* train_cmd = app.add_subcommand("train", "Train a classifier on a labeled feature CSV");
  train_cmd->add_option("--features", t_features, "Labeled feature CSV")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", t_out, "Model JSON")->required();
  train_cmd->add_option("--model", t_model, "wnd5, dt, rf or nn")->capture_default_str();
  train_cmd->add_option("--trees", t_trees, "Forest size (default 500)");
  train_cmd->add_option("--fraction", t_fraction, "Feature fraction for wnd5/nn (default 0.02)");
  train_cmd->add_option("--wnd-rule", t_rule, "argmax or shortest (default argmax)");
  train_cmd->add_flag("--no-prune", t_no_prune, "Skip reduced-error pruning of the decision tree");

  // classify
  std::string c_model, c_features, c_out;
  auto* classify_cmd = app.add_subcommand("classify", "Classify the rows of a feature CSV");
  classify_cmd->add_option("--model", c_model, "Model JSON")->required()->check(CLI::ExistingFile);
  classify_cmd->add_option("--features", c_features, "Feature CSV")->required()->check(CLI::ExistingFile);
  classify_cmd->add_option("--out", c_out, "Predictions CSV (default: stdout)");

  // auth
  std::string a_model, a_features, a_profile_set, a_profiles, a_save_profiles, a_condition = "theta21", a_out;
  auto* auth_cmd = app.add_subcommand("auth", "Open-set authentication with a random forest");
  auth_cmd->add_option("--model", a_model, "Random forest model JSON")->required()->check(CLI::ExistingFile);
  auth_cmd->add_option("--features", a_features, "Query feature CSV")->required()->check(CLI::ExistingFile);
  auto* ps_opt = auth_cmd->add_option("--profile-set", a_profile_set, "Labeled CSV used to build true-positive profiles");
  auth_cmd->add_option("--profiles", a_profiles, "Saved profile JSON")->excludes(ps_opt);
  auth_cmd->add_option("--save-profiles", a_save_profiles, "Write the built profiles here");
  auth_cmd->add_option("--condition", a_condition, "theta11, theta12, theta21 or theta22")->capture_default_str();
  auth_cmd->add_option("--out", a_out, "Decisions CSV (default: stdout)");

  // experiment
  std::string x_data, x_features, x_out, x_outliers;
  std::vector<int> x_p;
  std::optional<int> x_repeats;
  auto* exp_cmd = app.add_subcommand("experiment", "Classification and authentication experiments over a dataset");
  auto* data_opt = exp_cmd->add_option("--data", x_data, "Dataset root or manifest.json");
  exp_cmd->add_option("--features", x_features, "Precomputed feature CSV instead of --data")->excludes(data_opt);
  exp_cmd->add_option("--out", x_out, "Report directory")->required();
  exp_cmd->add_option("--p", x_p, "Category counts (default 2..15 clipped to the dataset)");
  exp_cmd->add_option("--repeats", x_repeats, "Repeats per p (default 10)");
  exp_cmd->add_option("--outliers", x_outliers,
                      "Comma-separated outlier categories (default: manifest roles; none with --features)");

  // synth
  std::string y_config, y_out;
  auto* synth_cmd = app.add_subcommand("synth", "Render a synthetic multi-focal dataset");
  synth_cmd->add_option("--config", y_config, "Synthetic data JSON (bare synth keys or a full parameter file)")
      ->check(CLI::ExistingFile);
  synth_cmd->add_option("--out", y_out, "Output directory")->required();

  for (auto* sub : app.get_subcommands({})) sub->footer(defaults);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    if (rc == 0) return 0;
    std::cerr << "usage: palyno [--threads N] [--seed S] [--params FILE] <subcommand> [options]\n"
                 "subcommands: focus segment extract select train classify auth experiment synth\n";
    return 2;
  }

  spdlog::set_level(spdlog::level::from_str(g.log_level));
  spdlog::set_default_logger(spdlog::default_logger());

  try {
    harness::Params params = resolve_params(g);
    const int threads = params.experiment.threads;

    if (*focus_cmd) {
      const auto stack = load_source(f_stack);
      const auto kind = measure_or(f_measure, params.pipeline.focus_measure);
      const auto curve = focus::select_optimal_plane(stack, kind);
      std::string text = "plane_index,score\n";
      for (std::size_t i = 0; i < curve.scores.size(); ++i) text += std::to_string(i) + "," + fmt17(curve.scores[i]) + "\n";
      write_text(f_out, text);
      std::cerr << "selected plane " << curve.best_index << " (" << focus::to_string(kind) << ")\n";
    } else if (*seg_cmd) {
      const auto stack = load_source(s_input);
      const auto curve = focus::select_optimal_plane(stack, measure_or(f_measure, params.pipeline.focus_measure));
      const auto grains = seg::segment_grains(stack.planes[curve.best_index], params.pipeline.coarse,
                                              params.pipeline.snake, fs::path(s_input).filename().string());
      fs::create_directories(s_out);
      json list = json::array();
      for (std::size_t i = 0; i < grains.size(); ++i) {
        const auto& gr = grains[i];
        const std::string stem = "grain_" + std::to_string(i);
        save_png(fs::path(s_out) / (stem + ".png"), gr.image);
        save_mask_png(fs::path(s_out) / (stem + ".mask.png"), gr.mask);
        list.push_back({{"source_id", gr.source_id}, {"grain", i}, {"box", {gr.box.x, gr.box.y, gr.box.w, gr.box.h}}, {"area", seg::mask_area(gr.mask)}});
      }
      std::ofstream(fs::path(s_out) / "grains.json")
          << json{{"source", s_input}, {"plane", curve.best_index}, {"grains", list}}.dump(2) << '\n';
      std::cout << grains.size() << " grain(s) written to " << s_out << '\n';
    } else if (*extract_cmd) {
      const auto manifest = harness::load_manifest(e_data);
      const auto m = harness::build_feature_matrix(manifest, params.pipeline, threads);
      write_feature_csv(e_out, m);
      std::cout << m.n_rows() << " row(s), " << m.n_cols() << " features written to " << e_out << '\n';
    } else if (*select_cmd) {
      const auto names = features::default_catalog().names();
      const auto m = read_feature_csv(sel_features, &names);
      selection::SelectionConfig sc;
      sc.fraction = sel_fraction;
      sc.count = sel_count;
      const auto sel = selection::run_selection(m, sc);
      selection::save_selection(sel_out, sel);
      for (std::size_t i : sel.selected)
        std::cout << sel.feature_names[i] << '\t' << fmt17(sel.scores.score[i]) << '\n';
    } else if (*train_cmd) {
      const auto names = features::default_catalog().names();
      const auto m = read_feature_csv(t_features, &names);
      auto opts = params.experiment.train;
      if (t_trees) opts.n_trees = *t_trees;
      if (t_fraction) opts.selection_fraction = *t_fraction;
      if (t_no_prune) opts.prune = false;
      if (!t_rule.empty()) {
        if (t_rule != "argmax" && t_rule != "shortest") throw Error(Errc::InvalidArgument, "--wnd-rule must be argmax or shortest");
        opts.wnd_rule = t_rule == "argmax" ? classify::WndRule::Argmax : classify::WndRule::Shortest;
      }
      const auto model = classify::train_model(classify::parse_model_kind(t_model), m, opts, params.experiment.seed);
      classify::save_model(t_out, model);
      if (model.kind == classify::ModelKind::RandomForest)
        std::cout << "out-of-bag accuracy: " << model.forest.oob_accuracy << '\n';
      std::cout << "model written to " << t_out << '\n';
    } else if (*classify_cmd) {
      const auto model = classify::load_model(c_model);
      const auto m = read_feature_csv(c_features, &model.input_features);
      const auto ev = classify::evaluate(model, m);
      std::string text = "source_id,predicted,truth\n";
      for (std::size_t i = 0; i < ev.records.size(); ++i) {
        const auto& r = ev.records[i];
        text += r.id + "," + model.categories[r.predicted] + "," +
                (m.labels[i] >= 0 ? m.categories[m.labels[i]] : std::string()) + "\n";
      }
      write_text(c_out, text);
      bool labelled = false;
      for (int l : m.labels) labelled = labelled || l >= 0;
      if (labelled) std::cerr << "accuracy: " << ev.accuracy << '\n';
    } else if (*auth_cmd) {
      const auto model = classify::load_model(a_model);
      if (model.kind != classify::ModelKind::RandomForest)
        throw Error(Errc::InvalidArgument, "authentication needs a random forest model (rf)");
      const auto cond = auth::parse_condition(a_condition);
      auth::TpVoteProfile profiles;
      if (!a_profiles.empty()) {
        profiles = auth::load_profiles(a_profiles, model.categories);
      } else if (!a_profile_set.empty()) {
        auto ps = read_feature_csv(a_profile_set, &model.input_features);
        // Re-index labels onto the model's categories; rows of unknown categories are dropped.
        FeatureMatrix mapped = ps;
        mapped.categories = model.categories;
        for (auto& l : mapped.labels)
          if (l >= 0) {
            const auto it = std::find(model.categories.begin(), model.categories.end(), ps.categories[l]);
            l = it == model.categories.end() ? -1 : static_cast<int>(it - model.categories.begin());
          }
        profiles = auth::build_tp_profiles(model.forest, mapped);
      } else {
        throw Error(Errc::InvalidArgument, "auth needs --profiles or --profile-set");
      }
      if (!a_save_profiles.empty()) auth::save_profiles(a_save_profiles, profiles, model.categories);
      for (int c : auth::categories_without_profile(profiles))
        spdlog::warn("category '{}' has no true-positive profile; its predictions are always rejected", model.categories[c]);
      const auto q = read_feature_csv(a_features, &model.input_features);
      std::string text = "source_id,verdict,winner,vp1,vp2,threshold,note\n";
      for (std::size_t i = 0; i < q.rows.size(); ++i) {
        const auto d = auth::authenticate(model.forest, profiles, cond, q.rows[i]);
        text += q.ids[i] + "," + (d.inlier ? "inlier" : "outlier") + "," + model.categories[d.winner] + "," +
                std::to_string(d.vp1) + "," + std::to_string(d.vp2) + "," + fmt17(d.threshold) + "," + d.note + "\n";
      }
      write_text(a_out, text);
    } else if (*exp_cmd) {
      if (x_data.empty() && x_features.empty()) throw CLI::RequiredError("--data or --features");
      auto cfg = params.experiment;
      if (!x_p.empty()) cfg.p_range = x_p;
      if (x_repeats) cfg.repeats = *x_repeats;
      FeatureMatrix m;
      std::vector<std::string> outliers = split_list(x_outliers);
      if (!x_data.empty()) {
        const auto manifest = harness::load_manifest(x_data);
        m = harness::build_feature_matrix(manifest, params.pipeline, threads);
        if (x_outliers.empty()) outliers = manifest.categories(harness::Role::Outlier);
      } else {
        const auto names = features::default_catalog().names();
        m = read_feature_csv(x_features, &names);
      }
      fs::create_directories(x_out);
      write_feature_csv(fs::path(x_out) / "features.csv", m);
      std::vector<std::string> inliers;
      for (const auto& c : m.categories)
        if (std::find(outliers.begin(), outliers.end(), c) == outliers.end()) inliers.push_back(c);
      auto report = harness::run_classification_experiment(m, cfg, outliers);
      if (!outliers.empty()) report = combine(report, harness::run_authentication_experiment(m, cfg, inliers, outliers));
      harness::emit_report(report, x_out);
      for (const auto& a : report.classification_summary())
        std::cout << a.key << " p=" << a.p << " accuracy " << a.mean << " +/- " << a.sd << '\n';
      for (const auto& a : report.authentication_summary())
        std::cout << a.key << " p=" << a.p << " alpha " << a.mean << " +/- " << a.sd << '\n';
    } else if (*synth_cmd) {
      if (!y_config.empty()) {
        std::ifstream in(y_config);
        json j;
        try {
          j = json::parse(in);
        } catch (const json::exception& e) {
          throw Error(Errc::CorruptData, y_config + ": " + e.what());
        }
        const bool full = j.contains("synth") || j.contains("pipeline") || j.contains("experiment");
        harness::Params file_params;
        harness::merge_params_json(full ? j : json{{"synth", j}}, file_params);
        params.synth = file_params.synth;
        if (g.seed) params.synth.seed = *g.seed;
      }
      const auto manifest = harness::write_synthetic_dataset(params.synth, y_out, threads);
      std::cout << manifest.entries.size() << " stack(s) written to " << y_out << '\n';
    }
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
