#include <fstream>

#include "palyno/error.hpp"
#include "palyno/harness.hpp"

namespace palyno {
namespace synth {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TypeStyle, radius_min, radius_max, elongation, lobes, lobe_amplitude,
                                                interior, rim, rim_width, stripe_frequency, stripe_contrast,
                                                spot_density, spot_radius, spot_contrast)
}
namespace seg {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(CoarseParams, clahe_tiles, clahe_clip, median_radius, struct_radius,
                                                min_area, max_area, border_interior_fraction)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SnakeParams, subsample_stride, iterations, gvf_mu, gvf_iterations, alpha,
                                                beta, balloon, time_step, edge_sigma, external_weight, force_softening,
                                                point_spacing, resample_every)
}  // namespace seg
namespace classify {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TreeParams, max_depth, min_samples_split, max_features)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(NnParams, epochs, tolerance)
}  // namespace classify
}  // namespace palyno

namespace palyno::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Every key of `overlay` must exist in `base` with a compatible type.
void check_keys(const json& overlay, const json& base, const std::string& path) {
  if (!overlay.is_object()) throw Error(Errc::InvalidArgument, "parameter '" + path + "' must be an object");
  for (const auto& [k, v] : overlay.items()) {
    const std::string where = path.empty() ? k : path + "." + k;
    if (!base.contains(k)) throw Error(Errc::InvalidArgument, "unknown parameter '" + where + "'");
    const json& b = base.at(k);
    if (b.is_object()) {
      check_keys(v, b, where);
    } else if (k == "styles") {
      if (!v.is_array()) throw Error(Errc::InvalidArgument, "parameter '" + where + "' must be an array");
      for (const auto& s : v) check_keys(s, json(synth::TypeStyle{}), where + "[]");
    } else if (b.is_number() != v.is_number() || b.is_string() != v.is_string() || b.is_boolean() != v.is_boolean() ||
               b.is_array() != v.is_array()) {
      throw Error(Errc::InvalidArgument, "parameter '" + where + "' has the wrong type");
    }
  }
}

}  // namespace

json params_to_json(const Params& p) {
  const auto& s = p.synth;
  const auto& e = p.experiment;
  std::vector<std::string> kinds, conds;
  for (auto k : e.classifiers) kinds.emplace_back(classify::to_string(k));
  for (auto c : e.conditions) conds.emplace_back(auth::to_string(c));
  return {
      {"synth",
       {{"n_types", s.n_types},
        {"n_outlier_types", s.n_outlier_types},
        {"grains_per_type", s.grains_per_type},
        {"planes", s.planes},
        {"sharp_plane", s.sharp_plane},
        {"blur_per_plane", s.blur_per_plane},
        {"psf_sigma", s.psf_sigma},
        {"field_width", s.field_width},
        {"field_height", s.field_height},
        {"grains_per_field", s.grains_per_field},
        {"background", s.background},
        {"noise_sigma", s.noise_sigma},
        {"debris_density", s.debris_density},
        {"cluster_probability", s.cluster_probability},
        {"random_sharp_plane", s.random_sharp_plane},
        {"seed", s.seed},
        {"styles", s.styles}}},
      {"pipeline",
       {{"focus_measure", focus::to_string(p.pipeline.focus_measure)},
        {"coarse", p.pipeline.coarse},
        {"snake", p.pipeline.snake}}},
      {"experiment",
       {{"p_range", e.p_range},
        {"repeats", e.repeats},
        {"train_fraction", e.train_fraction},
        {"seed", e.seed},
        {"classifiers", kinds},
        {"sweep_fractions", e.sweep_fractions},
        {"conditions", conds},
        {"profile_fraction", e.profile_fraction},
        {"train",
         {{"selection_fraction", e.train.selection_fraction},
          {"wnd_exponent", e.train.wnd_exponent},
          {"wnd_rule", e.train.wnd_rule == classify::WndRule::Argmax ? "argmax" : "shortest"},
          {"tree", e.train.tree},
          {"prune", e.train.prune},
          {"grow_fraction", e.train.grow_fraction},
          {"n_trees", e.train.n_trees},
          {"nn", e.train.nn}}}}},
  };
}

void merge_params_json(const json& j, Params& p) {
  json base = params_to_json(p);
  check_keys(j, base, "");
  base.merge_patch(j);
  try {
    const auto& s = base.at("synth");
    auto& o = p.synth;
    s.at("n_types").get_to(o.n_types);
    s.at("n_outlier_types").get_to(o.n_outlier_types);
    s.at("grains_per_type").get_to(o.grains_per_type);
    s.at("planes").get_to(o.planes);
    s.at("sharp_plane").get_to(o.sharp_plane);
    s.at("blur_per_plane").get_to(o.blur_per_plane);
    s.at("psf_sigma").get_to(o.psf_sigma);
    s.at("field_width").get_to(o.field_width);
    s.at("field_height").get_to(o.field_height);
    s.at("grains_per_field").get_to(o.grains_per_field);
    s.at("background").get_to(o.background);
    s.at("noise_sigma").get_to(o.noise_sigma);
    s.at("debris_density").get_to(o.debris_density);
    s.at("cluster_probability").get_to(o.cluster_probability);
    s.at("random_sharp_plane").get_to(o.random_sharp_plane);
    s.at("seed").get_to(o.seed);
    s.at("styles").get_to(o.styles);

    const auto& pl = base.at("pipeline");
    const auto measure = focus::parse_measure(pl.at("focus_measure").get<std::string>());
    if (!measure) throw Error(Errc::InvalidArgument, "unknown focus measure '" + pl.at("focus_measure").get<std::string>() + "'");
    p.pipeline.focus_measure = *measure;
    pl.at("coarse").get_to(p.pipeline.coarse);
    pl.at("snake").get_to(p.pipeline.snake);

    const auto& e = base.at("experiment");
    auto& x = p.experiment;
    e.at("p_range").get_to(x.p_range);
    e.at("repeats").get_to(x.repeats);
    e.at("train_fraction").get_to(x.train_fraction);
    e.at("seed").get_to(x.seed);
    x.classifiers.clear();
    for (const auto& k : e.at("classifiers")) x.classifiers.push_back(classify::parse_model_kind(k.get<std::string>()));
    e.at("sweep_fractions").get_to(x.sweep_fractions);
    x.conditions.clear();
    for (const auto& c : e.at("conditions")) x.conditions.push_back(auth::parse_condition(c.get<std::string>()));
    e.at("profile_fraction").get_to(x.profile_fraction);
    const auto& t = e.at("train");
    t.at("selection_fraction").get_to(x.train.selection_fraction);
    t.at("wnd_exponent").get_to(x.train.wnd_exponent);
    const auto rule = t.at("wnd_rule").get<std::string>();
    if (rule != "argmax" && rule != "shortest")
      throw Error(Errc::InvalidArgument, "wnd_rule must be 'argmax' or 'shortest'");
    x.train.wnd_rule = rule == "argmax" ? classify::WndRule::Argmax : classify::WndRule::Shortest;
    t.at("tree").get_to(x.train.tree);
    t.at("prune").get_to(x.train.prune);
    t.at("grow_fraction").get_to(x.train.grow_fraction);
    t.at("n_trees").get_to(x.train.n_trees);
    t.at("nn").get_to(x.train.nn);
  } catch (const json::exception& ex) {
    throw Error(Errc::InvalidArgument, std::string("bad parameter value: ") + ex.what());
  }
}

Params load_params(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(Errc::FileNotFound, file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptData, file.string() + ": " + e.what());
  }
  Params p;
  merge_params_json(j, p);
  return p;
}

}  // namespace palyno::harness
