#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "palyno/classifiers.hpp"

namespace palyno::auth {

inline constexpr int kProfileFormatVersion = 1;

enum class ThetaCondition { Theta11, Theta12, Theta21, Theta22 };
inline constexpr std::array<ThetaCondition, 4> kAllConditions{ThetaCondition::Theta11, ThetaCondition::Theta12,
                                                              ThetaCondition::Theta21, ThetaCondition::Theta22};

std::string_view to_string(ThetaCondition c) noexcept;
ThetaCondition parse_condition(std::string_view name);

/// Per category: winning vote counts and winner-minus-runner-up margins of
/// the correctly classified testing samples.
struct TpVoteProfile {
  std::vector<std::vector<int>> votes;
  std::vector<std::vector<int>> margins;
  int n_trees = 0;
};

/// `test` labels index the forest's categories.
TpVoteProfile build_tp_profiles(const classify::ForestModel& forest, const FeatureMatrix& test);

bool theta11(const classify::VoteTally& tally, const TpVoteProfile& profiles);
bool theta12(const classify::VoteTally& tally, const TpVoteProfile& profiles);
bool theta21(const classify::VoteTally& tally, const TpVoteProfile& profiles);
bool theta22(const classify::VoteTally& tally, const TpVoteProfile& profiles);
bool evaluate_condition(ThetaCondition c, const classify::VoteTally& tally, const TpVoteProfile& profiles);

struct AuthDecision {
  bool inlier = false;
  int winner = -1;
  int runner_up = -1;
  int vp1 = 0;
  int vp2 = 0;
  double threshold = 0.0;  // vote threshold of the condition (NaN if no profile)
  std::string note;        // e.g. MissingProfile, InsufficientProfile
};

/// Applies `condition` to a tally. A winner without profile entries yields
/// Outlier with note "MissingProfile".
AuthDecision decide(const classify::VoteTally& tally, const TpVoteProfile& profiles, ThetaCondition condition);
AuthDecision authenticate(const classify::ForestModel& forest, const TpVoteProfile& profiles,
                          ThetaCondition condition, const std::vector<double>& z);

/// Categories whose profile is empty (authentication disabled for them).
std::vector<int> categories_without_profile(const TpVoteProfile& profiles);

void save_profiles(const std::filesystem::path& path, const TpVoteProfile& p, const std::vector<std::string>& categories);
TpVoteProfile load_profiles(const std::filesystem::path& path, const std::vector<std::string>& categories);

}  // namespace palyno::auth
