#pragma once

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "banditrex/domain.hpp"
#include "banditrex/features.hpp"

namespace banditrex {

/// One logged offer: the platform showed `action` to `user_id` in `week`
/// under the given context, the user's engagement decision is `reward`,
/// and `propensity` is the probability that the logging policy offered
/// this action.
struct LogRecord {
  std::string user_id;
  int week = 0;
  std::string action;
  ContextVector context;
  int reward = 0;          // {0,1}
  double propensity = 1.0; // (0,1]
};

using InteractionLog = std::vector<LogRecord>;

/// Per-user preference set: every challenge the user selected in the data.
inline std::map<std::string, std::set<std::string>> preference_sets(
    std::span<const SelectionEvent> selections) {
  std::map<std::string, std::set<std::string>> out;
  for (const SelectionEvent& s : selections) out[s.user_id].insert(s.challenge_id);
  return out;
}

}  // namespace banditrex
