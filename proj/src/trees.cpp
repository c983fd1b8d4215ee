#include <algorithm>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "palyno/classifiers.hpp"
#include "palyno/error.hpp"
#include "palyno/parallel.hpp"
#include "palyno/random.hpp"

namespace palyno::classify {

namespace {

int majority(const std::vector<std::size_t>& counts) {
  return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double gain = -1.0;
};

class Grower {
 public:
  Grower(const FeatureMatrix& m, const TreeParams& p, Rng& rng)
      : m_(m), p_(p), rng_(rng), C_(static_cast<int>(m.categories.size())), F_(static_cast<int>(m.n_cols())) {}

  DecisionTree run(std::vector<std::size_t> idx) {
    tree_.n_categories = C_;
    grow(std::move(idx), 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<std::size_t> idx, int depth) {
    std::vector<std::size_t> counts(C_, 0);
    for (std::size_t i : idx) ++counts[m_.labels[i]];
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.push_back({});
    tree_.nodes[id].label = majority(counts);
    const bool pure = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) <= 1;
    const bool too_deep = p_.max_depth > 0 && depth >= p_.max_depth;
    if (pure || too_deep || static_cast<int>(idx.size()) < p_.min_samples_split) {
      tree_.nodes[id].counts = std::move(counts);
      return id;
    }

    const double parent = gini_impurity(counts);
    Split best = search(idx, candidate_features(), counts, parent);
    if (best.feature < 0 && p_.max_features > 0 && p_.max_features < F_) best = search(idx, all_features(), counts, parent);
    if (best.feature < 0) {
      spdlog::debug("tree node with {} rows has no usable split (identical feature vectors); leaf", idx.size());
      tree_.nodes[id].counts = std::move(counts);
      return id;
    }

    std::vector<std::size_t> left, right;
    for (std::size_t i : idx) (m_.rows[i][best.feature] <= best.threshold ? left : right).push_back(i);
    idx.clear();
    idx.shrink_to_fit();
    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    TreeNode& node = tree_.nodes[id];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = l;
    node.right = r;
    node.counts = std::move(counts);
    return id;
  }

  std::vector<int> all_features() const {
    std::vector<int> f(F_);
    std::iota(f.begin(), f.end(), 0);
    return f;
  }

  std::vector<int> candidate_features() {
    std::vector<int> f = all_features();
    if (p_.max_features <= 0 || p_.max_features >= F_) return f;
    for (int i = 0; i < p_.max_features; ++i) {
      std::uniform_int_distribution<int> pick(i, F_ - 1);
      std::swap(f[i], f[pick(rng_)]);
    }
    f.resize(p_.max_features);
    std::sort(f.begin(), f.end());
    return f;
  }

  Split search(const std::vector<std::size_t>& idx, const std::vector<int>& features,
               const std::vector<std::size_t>& counts, double parent) const {
    Split best;
    const double n = static_cast<double>(idx.size());
    std::vector<std::pair<double, int>> col(idx.size());
    std::vector<double> left(C_), right(C_);
    for (int f : features) {
      for (std::size_t k = 0; k < idx.size(); ++k) col[k] = {m_.rows[idx[k]][f], m_.labels[idx[k]]};
      std::sort(col.begin(), col.end());
      if (col.front().first == col.back().first) continue;
      std::fill(left.begin(), left.end(), 0.0);
      double sq_left = 0.0, sq_right = 0.0;
      for (int c = 0; c < C_; ++c) {
        right[c] = static_cast<double>(counts[c]);
        sq_right += right[c] * right[c];
      }
      for (std::size_t k = 0; k + 1 < col.size(); ++k) {
        const int c = col[k].second;
        sq_left += 2.0 * left[c] + 1.0;
        left[c] += 1.0;
        sq_right -= 2.0 * right[c] - 1.0;
        right[c] -= 1.0;
        if (col[k].first == col[k + 1].first) continue;
        const double nl = static_cast<double>(k + 1), nr = n - nl;
        const double child = (nl - sq_left / nl) / n + (nr - sq_right / nr) / n;
        const double gain = parent - child;
        if (gain > best.gain) {
          double thr = 0.5 * (col[k].first + col[k + 1].first);
          if (!(thr < col[k + 1].first)) thr = col[k].first;
          best = {f, thr, gain};
        }
      }
    }
    return best;
  }

  const FeatureMatrix& m_;
  TreeParams p_;
  Rng& rng_;
  int C_, F_;
  DecisionTree tree_;
};

void check_training_matrix(const FeatureMatrix& train, const char* who) {
  train.validate();
  if (train.rows.empty()) throw Error(Errc::EmptyMatrix, std::string(who) + ": no rows");
  for (int l : train.labels)
    if (l < 0) throw Error(Errc::UnknownCategory, std::string(who) + ": unlabeled training row");
  if (train.categories.size() < 2) throw Error(Errc::TooFewCategories, std::string(who) + ": need at least 2 categories");
}

DecisionTree grow_on(const FeatureMatrix& train, std::vector<std::size_t> idx, const TreeParams& params, Rng& rng) {
  return Grower(train, params, rng).run(std::move(idx));
}

// Copies the subtree reachable from the root into DFS order.
DecisionTree compact(const DecisionTree& t) {
  DecisionTree out;
  out.n_categories = t.n_categories;
  auto copy = [&](auto&& self, int src) -> int {
    const int id = static_cast<int>(out.nodes.size());
    out.nodes.push_back(t.nodes[src]);
    if (t.nodes[src].feature >= 0) {
      const int l = self(self, t.nodes[src].left);
      const int r = self(self, t.nodes[src].right);
      out.nodes[id].left = l;
      out.nodes[id].right = r;
    } else {
      out.nodes[id].left = out.nodes[id].right = -1;
    }
    return id;
  };
  if (!t.nodes.empty()) copy(copy, 0);
  return out;
}

}  // namespace

double gini_impurity(const std::vector<std::size_t>& counts) {
  const double n = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
  if (n <= 0.0) throw Error(Errc::EmptyNode, "gini_impurity: no samples");
  double s = 1.0;
  for (std::size_t c : counts) s -= (c / n) * (c / n);
  return s;
}

int DecisionTree::predict(const std::vector<double>& z) const {
  if (nodes.empty()) throw Error(Errc::UntrainedModel, "decision tree has no nodes");
  int id = 0;
  while (nodes[id].feature >= 0) {
    const auto& n = nodes[id];
    if (static_cast<std::size_t>(n.feature) >= z.size())
      throw Error(Errc::DimensionMismatch, "tree feature index exceeds vector length");
    id = z[n.feature] <= n.threshold ? n.left : n.right;
  }
  return nodes[id].label;
}

std::size_t DecisionTree::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.feature < 0; }));
}

int DecisionTree::depth() const {
  if (nodes.empty()) return 0;
  auto rec = [&](auto&& self, int id) -> int {
    if (nodes[id].feature < 0) return 0;
    return 1 + std::max(self(self, nodes[id].left), self(self, nodes[id].right));
  };
  return rec(rec, 0);
}

DecisionTree train_tree(const FeatureMatrix& train, const TreeParams& params, std::uint64_t seed) {
  check_training_matrix(train, "train_tree");
  std::vector<std::size_t> idx(train.rows.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  return grow_on(train, std::move(idx), params, rng);
}

DecisionTree prune_tree(const DecisionTree& tree, const FeatureMatrix& pruning_set) {
  DecisionTree t = tree;
  if (t.nodes.empty() || pruning_set.rows.empty()) return t;

  // Pruning rows reaching each node.
  auto route = [&] {
    std::vector<std::vector<std::size_t>> reach(t.nodes.size());
    for (std::size_t i = 0; i < pruning_set.rows.size(); ++i) {
      if (pruning_set.labels[i] < 0) continue;
      int id = 0;
      reach[0].push_back(i);
      while (t.nodes[id].feature >= 0) {
        const auto& n = t.nodes[id];
        id = pruning_set.rows[i][n.feature] <= n.threshold ? n.left : n.right;
        reach[id].push_back(i);
      }
    }
    return reach;
  };

  bool changed = true;
  while (changed) {
    changed = false;
    const auto reach = route();
    auto leaf_errors = [&](int id) {
      std::size_t e = 0;
      for (std::size_t i : reach[id]) e += pruning_set.labels[i] != t.nodes[id].label;
      return e;
    };
    auto rec = [&](auto&& self, int id) -> std::size_t {
      if (t.nodes[id].feature < 0) return leaf_errors(id);
      const std::size_t sub = self(self, t.nodes[id].left) + self(self, t.nodes[id].right);
      const std::size_t as_leaf = leaf_errors(id);
      if (as_leaf <= sub) {
        t.nodes[id].feature = -1;
        changed = true;
        return as_leaf;
      }
      return sub;
    };
    rec(rec, 0);
    if (changed) t = compact(t);
  }
  return t;
}

DecisionTree train_pruned_tree(const FeatureMatrix& train, const TreeParams& params, std::uint64_t seed,
                               double grow_fraction) {
  check_training_matrix(train, "train_pruned_tree");
  Rng rng(derive_seed(seed, {0x70}));
  std::vector<std::vector<std::size_t>> by_cat(train.categories.size());
  for (std::size_t i = 0; i < train.rows.size(); ++i) by_cat[train.labels[i]].push_back(i);
  std::vector<std::size_t> grow, prune;
  for (auto& rows : by_cat) {
    std::shuffle(rows.begin(), rows.end(), rng);
    std::size_t n_grow = static_cast<std::size_t>(std::llround(grow_fraction * static_cast<double>(rows.size())));
    n_grow = std::clamp<std::size_t>(n_grow, std::min<std::size_t>(1, rows.size()), rows.size());
    grow.insert(grow.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_grow));
    prune.insert(prune.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_grow), rows.end());
  }
  std::sort(grow.begin(), grow.end());
  std::sort(prune.begin(), prune.end());
  DecisionTree t = grow_on(train, grow, params, rng);
  if (prune.empty()) return t;
  return prune_tree(t, train.subset_rows(prune));
}

int VoteTally::total() const { return std::accumulate(votes.begin(), votes.end(), 0); }

int VoteTally::winner() const {
  return static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

int VoteTally::runner_up() const {
  if (votes.size() < 2) return -1;
  const int w = winner();
  int best = -1;
  for (int c = 0; c < static_cast<int>(votes.size()); ++c)
    if (c != w && (best < 0 || votes[c] > votes[best])) best = c;
  return best;
}

ForestModel train_forest(const FeatureMatrix& train, int n_trees, std::uint64_t seed, int threads) {
  check_training_matrix(train, "train_forest");
  if (n_trees < 1) throw Error(Errc::InvalidArgument, "train_forest: n_trees must be >= 1");
  const std::size_t n = train.rows.size();
  TreeParams params;
  params.max_features = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(train.n_cols()))));

  ForestModel f;
  f.n_categories = static_cast<int>(train.categories.size());
  f.trees.resize(n_trees);
  f.tree_seeds.resize(n_trees);
  std::vector<std::vector<int>> oob_pred(n_trees);
  parallel_for(static_cast<std::size_t>(n_trees), threads, [&](std::size_t t) {
    f.tree_seeds[t] = derive_seed(seed, {t});
    Rng rng(f.tree_seeds[t]);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::size_t> idx(n);
    std::vector<bool> in_bag(n, false);
    for (auto& i : idx) {
      i = pick(rng);
      in_bag[i] = true;
    }
    f.trees[t] = grow_on(train, std::move(idx), params, rng);
    oob_pred[t].assign(n, -1);
    for (std::size_t i = 0; i < n; ++i)
      if (!in_bag[i]) oob_pred[t][i] = f.trees[t].predict(train.rows[i]);
  });

  std::size_t scored = 0, correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    VoteTally tally{std::vector<int>(f.n_categories, 0)};
    for (int t = 0; t < n_trees; ++t)
      if (oob_pred[t][i] >= 0) ++tally.votes[oob_pred[t][i]];
    if (tally.total() == 0) continue;
    ++scored;
    correct += tally.winner() == train.labels[i];
  }
  if (scored > 0) f.oob_accuracy = static_cast<double>(correct) / static_cast<double>(scored);
  return f;
}

VoteTally forest_votes(const ForestModel& model, const std::vector<double>& z) {
  VoteTally tally{std::vector<int>(model.n_categories, 0)};
  for (const auto& t : model.trees) ++tally.votes[t.predict(z)];
  return tally;
}

int forest_classify(const ForestModel& model, const std::vector<double>& z) {
  if (model.trees.empty()) throw Error(Errc::UntrainedModel, "forest has no trees");
  return forest_votes(model, z).winner();
}

}  // namespace palyno::classify
