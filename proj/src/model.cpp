#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "palyno/classifiers.hpp"
#include "palyno/error.hpp"
#include "palyno/features.hpp"
#include "palyno/random.hpp"

namespace palyno::classify {

using nlohmann::json;

namespace {

json tree_to_json(const DecisionTree& t, int id = 0) {
  const TreeNode& n = t.nodes[id];
  json j{{"label", n.label}, {"counts", n.counts}};
  if (n.feature >= 0) {
    j["f"] = n.feature;
    j["t"] = n.threshold;
    j["l"] = tree_to_json(t, n.left);
    j["r"] = tree_to_json(t, n.right);
  }
  return j;
}

int tree_from_json(const json& j, DecisionTree& t) {
  const int id = static_cast<int>(t.nodes.size());
  t.nodes.push_back({});
  t.nodes[id].label = j.at("label").get<int>();
  t.nodes[id].counts = j.at("counts").get<std::vector<std::size_t>>();
  if (t.nodes[id].label < 0 || t.nodes[id].label >= t.n_categories)
    throw Error(Errc::SchemaMismatch, "tree leaf label out of range");
  if (j.contains("f")) {
    const int feature = j.at("f").get<int>();
    const double threshold = j.at("t").get<double>();
    const int l = tree_from_json(j.at("l"), t);
    const int r = tree_from_json(j.at("r"), t);
    TreeNode& n = t.nodes[id];
    n.feature = feature;
    n.threshold = threshold;
    n.left = l;
    n.right = r;
  }
  return id;
}

DecisionTree load_tree(const json& j, int n_categories) {
  DecisionTree t;
  t.n_categories = n_categories;
  tree_from_json(j, t);
  return t;
}

}  // namespace

std::string_view to_string(ModelKind kind) noexcept {
  switch (kind) {
    case ModelKind::Wnd5: return "wnd5";
    case ModelKind::DecisionTree: return "dt";
    case ModelKind::RandomForest: return "rf";
    case ModelKind::NeuralNet: return "nn";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  for (ModelKind k : {ModelKind::Wnd5, ModelKind::DecisionTree, ModelKind::RandomForest, ModelKind::NeuralNet})
    if (to_string(k) == name) return k;
  throw Error(Errc::InvalidArgument, "unknown model kind '" + std::string(name) + "' (expected wnd5, dt, rf or nn)");
}

TrainedModel train_model(ModelKind kind, const FeatureMatrix& train, const TrainOptions& opts, std::uint64_t seed) {
  train.validate();
  TrainedModel m;
  m.kind = kind;
  m.categories = train.categories;
  m.input_features = train.feature_names;
  const std::uint64_t child = derive_seed(seed, {static_cast<std::uint64_t>(kind)});

  if (kind == ModelKind::Wnd5 || kind == ModelKind::NeuralNet) {
    selection::SelectionConfig sc;
    sc.fraction = opts.selection_fraction;
    const auto sel = selection::run_selection(train, sc);
    m.norm = sel.norm;
    m.selected = sel.selected;
    const FeatureMatrix reduced = selection::apply_normalization(train, sel.norm).subset_cols(sel.selected);
    if (kind == ModelKind::Wnd5) {
      std::vector<double> w;
      for (std::size_t i : sel.selected) w.push_back(sel.scores.score[i]);
      m.wnd = train_wnd(reduced, w, opts.wnd_exponent);
      m.wnd.rule = opts.wnd_rule;
    } else {
      m.net = train_nn(reduced, opts.nn, child);
    }
  } else if (kind == ModelKind::DecisionTree) {
    m.tree = opts.prune ? train_pruned_tree(train, opts.tree, child, opts.grow_fraction)
                        : train_tree(train, opts.tree, child);
  } else {
    m.forest = train_forest(train, opts.n_trees, child, opts.threads);
  }
  return m;
}

int predict(const TrainedModel& model, const std::vector<double>& raw) {
  if (raw.size() != model.input_features.size())
    throw Error(Errc::DimensionMismatch, "predict: row has " + std::to_string(raw.size()) + " features, model expects " +
                                             std::to_string(model.input_features.size()));
  switch (model.kind) {
    case ModelKind::DecisionTree: return model.tree.predict(raw);
    case ModelKind::RandomForest: return forest_classify(model.forest, raw);
    case ModelKind::Wnd5:
    case ModelKind::NeuralNet: {
      if (!model.norm) throw Error(Errc::UntrainedModel, "model has no normalization parameters");
      const auto norm = selection::normalize_row(raw, *model.norm);
      std::vector<double> z;
      z.reserve(model.selected.size());
      for (std::size_t i : model.selected) z.push_back(norm[i]);
      return model.kind == ModelKind::Wnd5 ? wnd5_classify(z, model.wnd) : nn_classify(model.net, z);
    }
  }
  throw Error(Errc::InvalidArgument, "predict: unknown model kind");
}

Evaluation evaluate(const TrainedModel& model, const FeatureMatrix& test) {
  test.validate();
  if (test.rows.empty()) throw Error(Errc::EmptyMatrix, "evaluate: empty test matrix");
  if (test.feature_names != model.input_features)
    throw Error(Errc::SchemaMismatch, "evaluate: test columns differ from the model's input features");
  Evaluation ev;
  std::size_t correct = 0, labelled = 0;
  for (std::size_t i = 0; i < test.rows.size(); ++i) {
    SampleRecord r;
    r.id = test.ids[i];
    r.truth = -1;
    if (test.labels[i] >= 0) {
      // Map the test category name onto the model's category index.
      const auto& name = test.categories[test.labels[i]];
      const auto it = std::find(model.categories.begin(), model.categories.end(), name);
      r.truth = it == model.categories.end() ? -1 : static_cast<int>(it - model.categories.begin());
    }
    if (model.kind == ModelKind::RandomForest) {
      r.tally = forest_votes(model.forest, test.rows[i]);
      r.predicted = r.tally->winner();
    } else {
      r.predicted = predict(model, test.rows[i]);
    }
    if (test.labels[i] >= 0) {
      ++labelled;
      correct += r.predicted == r.truth;
    }
    ev.records.push_back(std::move(r));
  }
  ev.accuracy = labelled ? static_cast<double>(correct) / static_cast<double>(labelled) : 0.0;
  return ev;
}

void save_model(const std::filesystem::path& path, const TrainedModel& m) {
  json j;
  j["format"] = "palyno-model";
  j["version"] = kModelFormatVersion;
  j["catalog_version"] = features::kCatalogVersion;
  j["kind"] = to_string(m.kind);
  j["categories"] = m.categories;
  j["input_features"] = m.input_features;
  if (m.norm) j["norm"] = {{"min", m.norm->min}, {"max", m.norm->max}};
  j["selected"] = m.selected;
  switch (m.kind) {
    case ModelKind::Wnd5:
      j["wnd"] = {{"p", m.wnd.p},
                  {"rule", m.wnd.rule == WndRule::Argmax ? "argmax" : "shortest"},
                  {"weights", m.wnd.weights},
                  {"rows", m.wnd.rows},
                  {"labels", m.wnd.labels}};
      break;
    case ModelKind::DecisionTree: j["tree"] = tree_to_json(m.tree); break;
    case ModelKind::RandomForest: {
      json trees = json::array();
      for (const auto& t : m.forest.trees) trees.push_back(tree_to_json(t));
      j["forest"] = {{"trees", trees}, {"seeds", m.forest.tree_seeds}, {"oob_accuracy", m.forest.oob_accuracy}};
      break;
    }
    case ModelKind::NeuralNet:
      j["nn"] = {{"n_inputs", m.net.n_inputs},     {"n_categories", m.net.n_categories},
                 {"weights", m.net.weights},       {"converged", m.net.converged},
                 {"epochs_run", m.net.epochs_run}, {"final_loss", m.net.final_loss}};
      break;
  }
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << j.dump() << '\n';
  if (!out) throw Error(Errc::IoError, "write failed: " + path.string());
}

TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::FileNotFound, path.string());
  try {
    const json j = json::parse(in);
    if (j.at("format") != "palyno-model")
      throw Error(Errc::SchemaMismatch, path.string() + ": not a model file");
    if (j.at("version").get<int>() != kModelFormatVersion)
      throw Error(Errc::SchemaMismatch, path.string() + ": unsupported model format version " +
                                            std::to_string(j.at("version").get<int>()));
    TrainedModel m;
    m.kind = parse_model_kind(j.at("kind").get<std::string>());
    m.categories = j.at("categories").get<std::vector<std::string>>();
    m.input_features = j.at("input_features").get<std::vector<std::string>>();
    if (j.contains("norm"))
      m.norm = selection::NormParams{j["norm"].at("min").get<std::vector<double>>(),
                                     j["norm"].at("max").get<std::vector<double>>()};
    m.selected = j.at("selected").get<std::vector<std::size_t>>();
    const int C = static_cast<int>(m.categories.size());
    switch (m.kind) {
      case ModelKind::Wnd5: {
        const auto& w = j.at("wnd");
        m.wnd.p = w.at("p").get<double>();
        m.wnd.rule = w.at("rule") == "shortest" ? WndRule::Shortest : WndRule::Argmax;
        m.wnd.weights = w.at("weights").get<std::vector<double>>();
        m.wnd.rows = w.at("rows").get<std::vector<std::vector<double>>>();
        m.wnd.labels = w.at("labels").get<std::vector<int>>();
        m.wnd.n_categories = C;
        break;
      }
      case ModelKind::DecisionTree: m.tree = load_tree(j.at("tree"), C); break;
      case ModelKind::RandomForest: {
        const auto& f = j.at("forest");
        m.forest.n_categories = C;
        for (const auto& t : f.at("trees")) m.forest.trees.push_back(load_tree(t, C));
        m.forest.tree_seeds = f.at("seeds").get<std::vector<std::uint64_t>>();
        m.forest.oob_accuracy = f.at("oob_accuracy").get<double>();
        break;
      }
      case ModelKind::NeuralNet: {
        const auto& n = j.at("nn");
        m.net.n_inputs = n.at("n_inputs").get<int>();
        m.net.n_categories = n.at("n_categories").get<int>();
        m.net.weights = n.at("weights").get<std::vector<double>>();
        m.net.converged = n.at("converged").get<bool>();
        m.net.epochs_run = n.at("epochs_run").get<int>();
        m.net.final_loss = n.at("final_loss").get<double>();
        m.net.trained = true;
        if (m.net.weights.size() != static_cast<std::size_t>(m.net.n_inputs + 1) * m.net.n_categories)
          throw Error(Errc::SchemaMismatch, path.string() + ": network weight count mismatch");
        break;
      }
    }
    for (std::size_t i : m.selected)
      if (i >= m.input_features.size()) throw Error(Errc::SchemaMismatch, path.string() + ": selected index out of range");
    return m;
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptData, path.string() + ": " + e.what());
  }
}

}  // namespace palyno::classify
