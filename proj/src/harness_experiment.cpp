#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <iterator>

#include <spdlog/spdlog.h>

#include "palyno/error.hpp"
#include "palyno/harness.hpp"
#include "palyno/parallel.hpp"
#include "palyno/random.hpp"

namespace palyno::harness {

using classify::ModelKind;

namespace {

// Rows of `data` whose category is in `cats` (given as data category
// indices), relabeled onto the order of `cats`.
FeatureMatrix restrict_rows(const FeatureMatrix& data, const std::vector<int>& cats,
                            const std::vector<std::size_t>& rows) {
  FeatureMatrix out;
  out.feature_names = data.feature_names;
  for (int c : cats) out.categories.push_back(data.categories[c]);
  for (std::size_t i : rows) {
    const auto it = std::find(cats.begin(), cats.end(), data.labels[i]);
    if (it == cats.end()) continue;
    out.rows.push_back(data.rows[i]);
    out.labels.push_back(static_cast<int>(it - cats.begin()));
    out.ids.push_back(data.ids[i]);
  }
  return out;
}

std::vector<int> category_indices(const FeatureMatrix& data, const std::vector<std::string>& names) {
  std::vector<int> out;
  for (const auto& n : names) {
    const int k = data.category_index(n);
    if (k < 0) throw Error(Errc::UnknownCategory, "category '" + n + "' is not in the feature matrix");
    out.push_back(k);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<int> pick(const std::vector<int>& pool, const std::vector<int>& positions) {
  std::vector<int> out;
  for (int k : positions) out.push_back(pool[k]);
  return out;
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / (v.size() - 1.0));
}

Aggregate make_aggregate(std::string key, int p, double x, const std::vector<double>& v) {
  return {std::move(key), p, x, mean_of(v), sample_sd(v), static_cast<int>(v.size())};
}

nlohmann::json config_echo(const ExperimentConfig& cfg) {
  std::vector<std::string> kinds, conds;
  for (auto k : cfg.classifiers) kinds.emplace_back(classify::to_string(k));
  for (auto c : cfg.conditions) conds.emplace_back(auth::to_string(c));
  return {{"p_range", cfg.p_range},
          {"repeats", cfg.repeats},
          {"train_fraction", cfg.train_fraction},
          {"seed", cfg.seed},
          {"classifiers", kinds},
          {"sweep_fractions", cfg.sweep_fractions},
          {"conditions", conds},
          {"profile_fraction", cfg.profile_fraction},
          {"n_trees", cfg.train.n_trees},
          {"selection_fraction", cfg.train.selection_fraction}};
}

struct Cell {
  int p;
  int repeat;
};

std::vector<Cell> make_cells(const std::vector<int>& ps, int repeats) {
  std::vector<Cell> cells;
  for (int p : ps)
    for (int r = 0; r < repeats; ++r) cells.push_back({p, r});
  return cells;
}

std::uint64_t cell_seed(std::uint64_t master, const Cell& c) {
  return derive_seed(master, {static_cast<std::uint64_t>(c.p), static_cast<std::uint64_t>(c.repeat)});
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

void ExperimentConfig::validate() const {
  if (repeats < 1) throw Error(Errc::InvalidArgument, "repeats must be >= 1");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw Error(Errc::InvalidArgument, "train fraction must be in (0,1)");
  if (!(profile_fraction >= 0.0 && profile_fraction < 1.0))
    throw Error(Errc::InvalidArgument, "profile fraction must be in [0,1)");
  for (int p : p_range)
    if (p < 2) throw Error(Errc::InvalidArgument, "p must be >= 2");
  for (double f : sweep_fractions)
    if (!(f > 0.0 && f <= 1.0)) throw Error(Errc::InvalidArgument, "sweep fractions must be in (0,1]");
  if (classifiers.empty()) throw Error(Errc::InvalidArgument, "no classifier selected");
}

std::vector<int> ExperimentConfig::resolved_p_range(std::size_t available) const {
  if (available < 2) throw Error(Errc::TooFewCategories, "need at least 2 categories, have " + std::to_string(available));
  std::vector<int> out;
  if (p_range.empty()) {
    for (int p = 2; p <= std::min<int>(15, static_cast<int>(available)); ++p) out.push_back(p);
    return out;
  }
  for (int p : p_range) {
    if (p > static_cast<int>(available))
      throw Error(Errc::InvalidArgument,
                  "p = " + std::to_string(p) + " exceeds the " + std::to_string(available) + " available categories");
    out.push_back(p);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<int> build_subdataset(std::size_t n_categories, int p, std::uint64_t seed) {
  if (p < 1 || static_cast<std::size_t>(p) > n_categories)
    throw Error(Errc::CountOutOfRange, "sub-dataset size " + std::to_string(p) + " out of range");
  std::vector<int> all(n_categories);
  std::iota(all.begin(), all.end(), 0);
  Rng rng(seed);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(p);
  std::sort(all.begin(), all.end());
  return all;
}

Split split_dataset(const FeatureMatrix& m, const std::vector<int>& categories, double train_fraction,
                    std::uint64_t seed) {
  Split s;
  Rng rng(seed);
  for (int c : categories) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < m.labels.size(); ++i)
      if (m.labels[i] == c) rows.push_back(i);
    std::shuffle(rows.begin(), rows.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::floor((1.0 - train_fraction) * rows.size() + 1e-9));
    if (rows.size() < 2 || n_test == 0 || n_test == rows.size())
      throw Error(Errc::TooFewSamples, "category '" + m.categories[c] + "' has too few rows (" +
                                              std::to_string(rows.size()) + ") to split");
    s.test.insert(s.test.end(), rows.begin(), rows.begin() + n_test);
    s.train.insert(s.train.end(), rows.begin() + n_test, rows.end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  std::vector<std::size_t> common;
  std::set_intersection(s.train.begin(), s.train.end(), s.test.begin(), s.test.end(), std::back_inserter(common));
  if (!common.empty()) throw Error(Errc::InvalidArgument, "split_dataset: train and test overlap");
  return s;
}

std::vector<Aggregate> Report::classification_summary() const {
  std::map<std::pair<std::string, int>, std::vector<double>> groups;
  for (const auto& r : classification) groups[{r.classifier, r.p}].push_back(r.accuracy);
  std::vector<Aggregate> out;
  for (const auto& [k, v] : groups) out.push_back(make_aggregate(k.first, k.second, 0.0, v));
  return out;
}

std::vector<Aggregate> Report::sweep_summary() const {
  std::map<std::tuple<std::string, int, double>, std::vector<double>> groups;
  for (const auto& r : sweep) groups[{r.classifier, r.p, r.fraction}].push_back(r.accuracy);
  std::vector<Aggregate> out;
  for (const auto& [k, v] : groups) out.push_back(make_aggregate(std::get<0>(k), std::get<1>(k), std::get<2>(k), v));
  return out;
}

std::vector<Aggregate> Report::authentication_summary() const {
  std::map<std::pair<std::string, int>, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& r : authentication) {
    auto& g = groups[{r.condition, r.p}];
    g.first.push_back(r.alpha_in);
    g.second.push_back(r.alpha_out);
  }
  std::vector<Aggregate> out;
  for (const auto& [k, v] : groups) {
    out.push_back(make_aggregate(k.first + ":in", k.second, 0.0, v.first));
    out.push_back(make_aggregate(k.first + ":out", k.second, 0.0, v.second));
  }
  return out;
}

Report run_classification_experiment(const FeatureMatrix& data, const ExperimentConfig& cfg,
                                     const std::vector<std::string>& exclude) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  data.validate();
  std::vector<int> pool;
  for (std::size_t c = 0; c < data.categories.size(); ++c)
    if (std::find(exclude.begin(), exclude.end(), data.categories[c]) == exclude.end())
      pool.push_back(static_cast<int>(c));
  const auto ps = cfg.resolved_p_range(pool.size());
  const int p_max = ps.back();
  const auto cells = make_cells(ps, cfg.repeats);

  std::vector<ModelKind> sweep_kinds;
  for (auto k : cfg.classifiers)
    if (k == ModelKind::Wnd5 || k == ModelKind::NeuralNet) sweep_kinds.push_back(k);

  std::vector<std::vector<ClassificationRow>> cls(cells.size());
  std::vector<std::vector<SweepRow>> swp(cells.size());
  parallel_for(cells.size(), cfg.threads, [&](std::size_t ci) {
    const Cell& cell = cells[ci];
    const std::uint64_t seed = cell_seed(cfg.seed, cell);
    const auto cats = pick(pool, build_subdataset(pool.size(), cell.p, derive_seed(seed, {0x5b})));
    const Split split = split_dataset(data, cats, cfg.train_fraction, derive_seed(seed, {0x5c}));
    const FeatureMatrix train = restrict_rows(data, cats, split.train);
    const FeatureMatrix test = restrict_rows(data, cats, split.test);
    classify::TrainOptions opts = cfg.train;
    opts.threads = 1;
    for (ModelKind kind : cfg.classifiers) {
      const auto model = classify::train_model(kind, train, opts, seed);
      const int nf = model.selected.empty() ? static_cast<int>(train.n_cols()) : static_cast<int>(model.selected.size());
      cls[ci].push_back({cell.p, cell.repeat, std::string(classify::to_string(kind)), nf,
                         classify::evaluate(model, test).accuracy});
    }
    if (cell.p != p_max) return;
    for (ModelKind kind : sweep_kinds)
      for (double f : cfg.sweep_fractions) {
        classify::TrainOptions o = opts;
        o.selection_fraction = f;
        const auto model = classify::train_model(kind, train, o, seed);
        swp[ci].push_back({cell.p, cell.repeat, std::string(classify::to_string(kind)), f,
                           static_cast<int>(model.selected.size()), classify::evaluate(model, test).accuracy});
      }
  });

  Report r;
  r.config = {{"experiment", "classification"}, {"settings", config_echo(cfg)}, {"exclude", exclude},
              {"p_values", ps}, {"categories", data.categories}, {"n_rows", data.n_rows()}};
  for (auto& v : cls) r.classification.insert(r.classification.end(), v.begin(), v.end());
  for (auto& v : swp) r.sweep.insert(r.sweep.end(), v.begin(), v.end());
  r.runtime_seconds = seconds_since(t0);
  return r;
}

Report run_authentication_experiment(const FeatureMatrix& data, const ExperimentConfig& cfg,
                                     const std::vector<std::string>& inliers,
                                     const std::vector<std::string>& outliers) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  data.validate();
  const auto pool = category_indices(data, inliers);
  const auto out_cats = category_indices(data, outliers);
  for (int c : out_cats)
    if (std::find(pool.begin(), pool.end(), c) != pool.end())
      throw Error(Errc::CategoryOverlap, "category '" + data.categories[c] + "' is both inlier and outlier");
  std::vector<std::size_t> outlier_rows;
  for (std::size_t i = 0; i < data.labels.size(); ++i)
    if (std::find(out_cats.begin(), out_cats.end(), data.labels[i]) != out_cats.end()) outlier_rows.push_back(i);
  if (outlier_rows.empty()) throw Error(Errc::TooFewSamples, "no outlier rows");

  const auto ps = cfg.resolved_p_range(pool.size());
  const auto cells = make_cells(ps, cfg.repeats);
  std::vector<std::vector<AuthRow>> rows(cells.size());
  parallel_for(cells.size(), cfg.threads, [&](std::size_t ci) {
    const Cell& cell = cells[ci];
    const std::uint64_t seed = cell_seed(cfg.seed, cell);
    const auto cats = pick(pool, build_subdataset(pool.size(), cell.p, derive_seed(seed, {0x5b})));
    const Split split = split_dataset(data, cats, cfg.train_fraction, derive_seed(seed, {0x5c}));
    FeatureMatrix train = restrict_rows(data, cats, split.train);
    const FeatureMatrix test = restrict_rows(data, cats, split.test);
    FeatureMatrix profile_set = test;
    if (cfg.profile_fraction > 0.0) {
      // Carve the profile set out of training so it is disjoint from the test set.
      std::vector<int> local(cats.size());
      std::iota(local.begin(), local.end(), 0);
      const Split inner = split_dataset(train, local, 1.0 - cfg.profile_fraction, derive_seed(seed, {0x5d}));
      profile_set = train.subset_rows(inner.test);
      train = train.subset_rows(inner.train);
    }
    const auto forest = classify::train_forest(train, cfg.train.n_trees,
                                               derive_seed(seed, {static_cast<std::uint64_t>(ModelKind::RandomForest)}), 1);
    const auto profiles = auth::build_tp_profiles(forest, profile_set);

    std::vector<classify::VoteTally> in_tallies, out_tallies;
    for (const auto& z : test.rows) in_tallies.push_back(classify::forest_votes(forest, z));
    for (std::size_t i : outlier_rows) out_tallies.push_back(classify::forest_votes(forest, data.rows[i]));

    for (auto cond : cfg.conditions) {
      int accepted_in = 0, rejected_out = 0;
      for (std::size_t i = 0; i < in_tallies.size(); ++i) {
        const auto d = auth::decide(in_tallies[i], profiles, cond);
        accepted_in += d.inlier && d.winner == test.labels[i];
      }
      for (const auto& t : out_tallies) rejected_out += !auth::decide(t, profiles, cond).inlier;
      rows[ci].push_back({cell.p, cell.repeat, std::string(auth::to_string(cond)),
                          static_cast<double>(accepted_in) / in_tallies.size(),
                          static_cast<double>(rejected_out) / out_tallies.size(), static_cast<int>(in_tallies.size()),
                          static_cast<int>(out_tallies.size())});
    }
  });

  Report r;
  r.config = {{"experiment", "authentication"}, {"settings", config_echo(cfg)}, {"inliers", inliers},
              {"outliers", outliers}, {"p_values", ps}, {"n_rows", data.n_rows()}};
  for (auto& v : rows) r.authentication.insert(r.authentication.end(), v.begin(), v.end());
  r.runtime_seconds = seconds_since(t0);
  return r;
}

}  // namespace palyno::harness
