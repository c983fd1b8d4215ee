#include "palyno/authentication.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "palyno/error.hpp"

namespace palyno::auth {

using classify::VoteTally;
using nlohmann::json;

namespace {

const std::vector<int>& winner_votes(const VoteTally& tally, const TpVoteProfile& p) {
  const int w = tally.winner();
  if (w < 0 || static_cast<std::size_t>(w) >= p.votes.size() || p.votes[w].empty())
    throw Error(Errc::MissingProfile, "no true-positive profile for category " + std::to_string(w));
  return p.votes[w];
}

int observed_margin(const VoteTally& tally) {
  const int r = tally.runner_up();
  return tally.votes[tally.winner()] - (r >= 0 ? tally.votes[r] : 0);
}

bool margin_clause(const VoteTally& tally, const TpVoteProfile& p) {
  const auto& m = p.margins.at(tally.winner());
  if (m.empty()) throw Error(Errc::MissingProfile, "no margin profile for category " + std::to_string(tally.winner()));
  return observed_margin(tally) > *std::min_element(m.begin(), m.end());
}

double min_threshold(const std::vector<int>& tp) { return *std::min_element(tp.begin(), tp.end()); }

// mean - sample std; NaN when fewer than two entries.
double dynamic_threshold(const std::vector<int>& tp) {
  if (tp.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double n = static_cast<double>(tp.size());
  const double mean = std::accumulate(tp.begin(), tp.end(), 0.0) / n;
  double ss = 0.0;
  for (int v : tp) ss += (v - mean) * (v - mean);
  return mean - std::sqrt(ss / (n - 1.0));
}

}  // namespace

std::string_view to_string(ThetaCondition c) noexcept {
  switch (c) {
    case ThetaCondition::Theta11: return "theta11";
    case ThetaCondition::Theta12: return "theta12";
    case ThetaCondition::Theta21: return "theta21";
    case ThetaCondition::Theta22: return "theta22";
  }
  return "unknown";
}

ThetaCondition parse_condition(std::string_view name) {
  for (ThetaCondition c : kAllConditions)
    if (to_string(c) == name) return c;
  throw Error(Errc::InvalidArgument, "unknown condition '" + std::string(name) + "'");
}

TpVoteProfile build_tp_profiles(const classify::ForestModel& forest, const FeatureMatrix& test) {
  test.validate();
  if (test.rows.empty()) throw Error(Errc::EmptyMatrix, "build_tp_profiles: empty test matrix");
  TpVoteProfile p;
  p.n_trees = static_cast<int>(forest.trees.size());
  p.votes.resize(forest.n_categories);
  p.margins.resize(forest.n_categories);
  for (std::size_t i = 0; i < test.rows.size(); ++i) {
    const int y = test.labels[i];
    if (y < 0) continue;
    if (y >= forest.n_categories) throw Error(Errc::UnknownCategory, "build_tp_profiles: label outside forest categories");
    const VoteTally t = classify::forest_votes(forest, test.rows[i]);
    if (t.winner() != y) continue;
    p.votes[y].push_back(t.votes[y]);
    p.margins[y].push_back(observed_margin(t));
  }
  return p;
}

bool theta11(const VoteTally& tally, const TpVoteProfile& p) {
  return tally.votes[tally.winner()] > min_threshold(winner_votes(tally, p));
}

bool theta12(const VoteTally& tally, const TpVoteProfile& p) { return theta11(tally, p) && margin_clause(tally, p); }

bool theta21(const VoteTally& tally, const TpVoteProfile& p) {
  const auto& tp = winner_votes(tally, p);
  if (tp.size() < 2) {
    spdlog::debug("theta21: InsufficientProfile for category {} ({} entry), using theta11", tally.winner(), tp.size());
    return theta11(tally, p);
  }
  return tally.votes[tally.winner()] > dynamic_threshold(tp);
}

bool theta22(const VoteTally& tally, const TpVoteProfile& p) { return theta21(tally, p) && margin_clause(tally, p); }

bool evaluate_condition(ThetaCondition c, const VoteTally& tally, const TpVoteProfile& p) {
  switch (c) {
    case ThetaCondition::Theta11: return theta11(tally, p);
    case ThetaCondition::Theta12: return theta12(tally, p);
    case ThetaCondition::Theta21: return theta21(tally, p);
    case ThetaCondition::Theta22: return theta22(tally, p);
  }
  return false;
}

AuthDecision decide(const VoteTally& tally, const TpVoteProfile& p, ThetaCondition condition) {
  AuthDecision d;
  d.winner = tally.winner();
  d.runner_up = tally.runner_up();
  d.vp1 = tally.votes[d.winner];
  d.vp2 = d.runner_up >= 0 ? tally.votes[d.runner_up] : 0;
  d.threshold = std::numeric_limits<double>::quiet_NaN();
  try {
    const auto& tp = winner_votes(tally, p);
    const bool dynamic = condition == ThetaCondition::Theta21 || condition == ThetaCondition::Theta22;
    if (dynamic && tp.size() < 2) d.note = "InsufficientProfile";
    d.threshold = dynamic && tp.size() >= 2 ? dynamic_threshold(tp) : min_threshold(tp);
    d.inlier = evaluate_condition(condition, tally, p);
  } catch (const Error& e) {
    if (e.code() != Errc::MissingProfile) throw;
    d.inlier = false;
    d.note = "MissingProfile";
  }
  return d;
}

AuthDecision authenticate(const classify::ForestModel& forest, const TpVoteProfile& profiles,
                          ThetaCondition condition, const std::vector<double>& z) {
  if (forest.trees.empty()) throw Error(Errc::UntrainedModel, "authenticate: forest has no trees");
  return decide(classify::forest_votes(forest, z), profiles, condition);
}

std::vector<int> categories_without_profile(const TpVoteProfile& p) {
  std::vector<int> out;
  for (std::size_t c = 0; c < p.votes.size(); ++c)
    if (p.votes[c].empty()) out.push_back(static_cast<int>(c));
  return out;
}

void save_profiles(const std::filesystem::path& path, const TpVoteProfile& p, const std::vector<std::string>& categories) {
  if (categories.size() != p.votes.size())
    throw Error(Errc::DimensionMismatch, "save_profiles: category names do not match the profile");
  json cats = json::array();
  for (std::size_t c = 0; c < categories.size(); ++c)
    cats.push_back({{"name", categories[c]}, {"votes", p.votes[c]}, {"margins", p.margins[c]}});
  const json j{{"format", "palyno-profiles"}, {"version", kProfileFormatVersion}, {"n_trees", p.n_trees},
               {"categories", cats}};
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

TpVoteProfile load_profiles(const std::filesystem::path& path, const std::vector<std::string>& categories) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::FileNotFound, path.string());
  try {
    const json j = json::parse(in);
    if (j.at("format") != "palyno-profiles" || j.at("version").get<int>() != kProfileFormatVersion)
      throw Error(Errc::SchemaMismatch, path.string() + ": not a version-1 profile file");
    TpVoteProfile p;
    p.n_trees = j.at("n_trees").get<int>();
    p.votes.resize(categories.size());
    p.margins.resize(categories.size());
    for (const auto& c : j.at("categories")) {
      const auto name = c.at("name").get<std::string>();
      const auto it = std::find(categories.begin(), categories.end(), name);
      if (it == categories.end())
        throw Error(Errc::UnknownCategory, path.string() + ": profile category '" + name + "' is not in the model");
      const auto k = static_cast<std::size_t>(it - categories.begin());
      p.votes[k] = c.at("votes").get<std::vector<int>>();
      p.margins[k] = c.at("margins").get<std::vector<int>>();
      if (p.votes[k].size() != p.margins[k].size())
        throw Error(Errc::SchemaMismatch, path.string() + ": votes and margins differ in length for '" + name + "'");
    }
    return p;
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptData, path.string() + ": " + e.what());
  }
}

}  // namespace palyno::auth
