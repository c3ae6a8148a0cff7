#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "banditrex/domain.hpp"
#include "banditrex/errors.hpp"

namespace banditrex {

/// A candidate item with its predicted reward and dimension membership.
struct ScoredCandidate {
  std::string challenge_id;
  double score = 0.0;
  DimMask mask;
};

/// Choose up to k candidates maximizing total score, subject to at least
/// one item per required dimension.
struct SelectionProblem {
  std::vector<ScoredCandidate> candidates;
  int k = 1;
  DimMask required;
};

using WarnFn = std::function<void(const std::string&)>;

namespace detail {

struct PreparedProblem {
  std::vector<const ScoredCandidate*> sorted;  // ascending challenge_id
  DimMask retained;                            // required dims with coverage
};

inline PreparedProblem prepare_problem(const SelectionProblem& p,
                                       const WarnFn& warn) {
  if (p.candidates.empty()) throw EmptyCandidates("selection: no candidates");
  if (p.k < 1) throw InvalidArgument("selection: k must be >= 1");
  for (const ScoredCandidate& c : p.candidates) {
    if (!std::isfinite(c.score))
      throw InvalidArgument("selection: non-finite score for " + c.challenge_id);
  }

  PreparedProblem out;
  out.sorted.reserve(p.candidates.size());
  for (const ScoredCandidate& c : p.candidates) out.sorted.push_back(&c);
  std::sort(out.sorted.begin(), out.sorted.end(),
            [](const ScoredCandidate* a, const ScoredCandidate* b) {
              return a->challenge_id < b->challenge_id;
            });

  DimMask coverable;
  for (const ScoredCandidate* c : out.sorted)
    coverable = DimMask::from_bits(coverable.bits() | c->mask.bits());
  for (int d = 0; d < kNumDimensions; ++d) {
    const auto dim = static_cast<Dimension>(d);
    if (p.required.has(dim)) {
      if (coverable.has(dim)) {
        out.retained.set(dim);
      } else if (warn) {
        warn("diversity dimension " + dimension_name(dim) +
             " has no covering candidate; constraint relaxed");
      }
    }
  }
  if (p.k < out.retained.count())
    throw InvalidArgument("selection: k smaller than number of coverable required dimensions");
  return out;
}

}  // namespace detail

/// Exact solver. Dynamic program over states (candidate index, still-missing
/// coverage mask, remaining slots); candidates are processed in ascending id
/// order and "take" is preferred on value ties, so among optimal sets the
/// lexicographically smallest id sequence is returned. Required dimensions
/// with no covering candidate are dropped with a warning. Runs in
/// O(|candidates| * 2^3 * k). Returns ids in ascending order. When
/// |candidates| >= k and all scores are positive, exactly k items come back.
inline std::vector<std::string> solve_constrained_topk(const SelectionProblem& p,
                                                       const WarnFn& warn = {}) {
  const detail::PreparedProblem prep = detail::prepare_problem(p, warn);
  const int n = static_cast<int>(prep.sorted.size());
  const int k = std::min(p.k, n);
  const int masks = 1 << kNumDimensions;
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();

  // value[i][need][s]: best total score from candidates[i..) that still
  // covers `need` using at most s slots. take[..] records the decision.
  const auto idx = [&](int i, int need, int s) {
    return (static_cast<std::size_t>(i) * masks + need) * (k + 1) + s;
  };
  std::vector<double> value(static_cast<std::size_t>(n + 1) * masks * (k + 1), kNegInf);
  std::vector<std::uint8_t> take(value.size(), 0);
  for (int s = 0; s <= k; ++s) value[idx(n, 0, s)] = 0.0;

  for (int i = n - 1; i >= 0; --i) {
    const ScoredCandidate& c = *prep.sorted[i];
    const int covers = c.mask.bits() & prep.retained.bits();
    for (int need = 0; need < masks; ++need) {
      for (int s = 0; s <= k; ++s) {
        const double skip = value[idx(i + 1, need, s)];
        double best = skip;
        std::uint8_t chosen = 0;
        if (s > 0) {
          const double rest = value[idx(i + 1, need & ~covers, s - 1)];
          if (rest != kNegInf) {
            const double with = c.score + rest;
            if (with >= skip) {  // prefer take on ties
              best = with;
              chosen = 1;
            }
          }
        }
        value[idx(i, need, s)] = best;
        take[idx(i, need, s)] = chosen;
      }
    }
  }

  std::vector<std::string> out;
  int need = prep.retained.bits();
  int s = k;
  for (int i = 0; i < n; ++i) {
    if (take[idx(i, need, s)]) {
      const ScoredCandidate& c = *prep.sorted[i];
      out.push_back(c.challenge_id);
      need &= ~(c.mask.bits() & prep.retained.bits());
      --s;
    }
  }
  return out;
}

/// Exhaustive oracle for small instances (|candidates| <= 20): enumerates
/// every subset of size <= k under the same relaxation rule. Ties on the
/// objective are broken toward the lexicographically smallest id sequence.
inline std::vector<std::string> brute_force_topk(const SelectionProblem& p,
                                                 const WarnFn& warn = {}) {
  if (p.candidates.size() > 20)
    throw TooManyCandidates("brute_force_topk: " +
                            std::to_string(p.candidates.size()) +
                            " candidates (limit 20)");
  const detail::PreparedProblem prep = detail::prepare_problem(p, warn);
  const int n = static_cast<int>(prep.sorted.size());

  double best_value = -std::numeric_limits<double>::infinity();
  std::vector<std::string> best_ids;
  for (std::uint32_t subset = 0; subset < (1u << n); ++subset) {
    if (std::popcount(subset) > p.k) continue;
    DimMask covered;
    double total = 0.0;
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) {
      if (subset & (1u << i)) {
        const ScoredCandidate& c = *prep.sorted[i];
        covered = DimMask::from_bits(covered.bits() | c.mask.bits());
        total += c.score;
        ids.push_back(c.challenge_id);
      }
    }
    if (!covered.covers(prep.retained)) continue;
    if (total > best_value ||
        (total == best_value && ids < best_ids)) {
      best_value = total;
      best_ids = std::move(ids);
    }
  }
  return best_ids;
}

/// Total score of a chosen id set under a problem's candidate scores.
inline double selection_objective(const SelectionProblem& p,
                                  const std::vector<std::string>& ids) {
  double total = 0.0;
  for (const std::string& id : ids) {
    auto it = std::find_if(p.candidates.begin(), p.candidates.end(),
                           [&](const ScoredCandidate& c) {
                             return c.challenge_id == id;
                           });
    if (it == p.candidates.end())
      throw InvalidArgument("selection_objective: unknown id " + id);
    total += it->score;
  }
  return total;
}

}  // namespace banditrex
