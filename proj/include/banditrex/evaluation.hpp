#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "banditrex/domain.hpp"
#include "banditrex/features.hpp"
#include "banditrex/interaction_log.hpp"
#include "banditrex/reward_model.hpp"
#include "banditrex/rng.hpp"

namespace banditrex {

/// Logistic reward predictor rho-hat used by the doubly-robust estimator.
struct RewardSimulator {
  std::vector<double> weights;

  double predict(std::span<const double> context) const {
    return expected_reward(weights, context);
  }
};

/// Ground-truth logistic environment with known weights zeta.
struct OmniscientSimulator {
  std::vector<double> zeta;

  double true_reward(std::span<const double> context) const {
    return expected_reward(zeta, context);
  }
};

/// One recommended item together with the context it was scored under.
struct RecommendedItem {
  std::string challenge_id;
  ContextVector context;
};

struct RecommendationSet {
  std::vector<RecommendedItem> items;
};

/// Recommendations per (user, week). An ordered map keeps every iteration
/// deterministic.
using RecKey = std::pair<std::string, int>;
using RecommendationTable = std::map<RecKey, RecommendationSet>;

inline constexpr double kDefaultPropensityClip = 0.01;

struct DrResult {
  double estimate = 0.0;
  double std_error = 0.0;  // over (user, week) terms
  std::size_t n_records = 0;
  std::size_t n_groups = 0;
};

/// Doubly-robust policy value. Per logged (i,t) group with action records a:
///   (1/K) sum_{k in S_it} rho(v_itk)
///   + (1/K) sum_{a in S_it} (r_a - rho(v_ita)) / p_a
/// averaged over groups, with logged propensities clipped from below. For a
/// dataset with one logged action per (i,t) this is term-for-term the
/// record-level estimator; grouping keeps it unbiased when the log carries
/// every offered item of a K-sized slate (the direct-method term must enter
/// once per (i,t), not once per offered item).
inline DrResult doubly_robust_detailed(const InteractionLog& log,
                                       const RecommendationTable& recs,
                                       const RewardSimulator& rho,
                                       double propensity_clip = kDefaultPropensityClip) {
  if (log.empty()) throw EmptyLog("doubly_robust: empty log");

  std::map<RecKey, double> corrections;  // sum of matched IPS corrections
  for (const LogRecord& rec : log) {
    const RecKey key{rec.user_id, rec.week};
    const auto it = recs.find(key);
    if (it == recs.end())
      throw MissingRecommendation("doubly_robust: no recommendation for (" +
                                  rec.user_id + ", week " +
                                  std::to_string(rec.week) + ")");
    const RecommendationSet& s = it->second;
    if (s.items.empty())
      throw MissingRecommendation("doubly_robust: empty recommendation set for (" +
                                  rec.user_id + ", week " +
                                  std::to_string(rec.week) + ")");
    bool action_in_set = false;
    for (const RecommendedItem& item : s.items) {
      if (item.challenge_id == rec.action) {
        action_in_set = true;
        break;
      }
    }
    double& correction = corrections[key];
    if (action_in_set) {
      const double p = std::max(rec.propensity, propensity_clip);
      correction += (rec.reward - rho.predict(rec.context)) / p;
    }
  }

  std::vector<double> terms;
  terms.reserve(corrections.size());
  for (const auto& [key, correction] : corrections) {
    const RecommendationSet& s = recs.at(key);
    const double k = static_cast<double>(s.items.size());
    double direct = 0.0;
    for (const RecommendedItem& item : s.items) direct += rho.predict(item.context);
    terms.push_back(direct / k + correction / k);
  }

  DrResult out;
  out.n_records = log.size();
  out.n_groups = terms.size();
  double sum = 0.0;
  for (double t : terms) sum += t;
  out.estimate = sum / static_cast<double>(terms.size());

  double var = 0.0;
  for (double t : terms) var += (t - out.estimate) * (t - out.estimate);
  out.std_error =
      terms.size() > 1
          ? std::sqrt(var / static_cast<double>(terms.size() - 1)) /
                std::sqrt(static_cast<double>(terms.size()))
          : 0.0;
  return out;
}

inline double doubly_robust_estimate(const InteractionLog& log,
                                     const RecommendationTable& recs,
                                     const RewardSimulator& rho,
                                     double propensity_clip = kDefaultPropensityClip) {
  return doubly_robust_detailed(log, recs, rho, propensity_clip).estimate;
}

/// Logistic MLE on the log under a weak prior (v_j = 100), via the Laplace
/// solver. Deterministic.
inline RewardSimulator fit_reward_simulator(const InteractionLog& log) {
  if (log.empty()) throw EmptyLog("fit_reward_simulator: empty log");
  const int d = static_cast<int>(log.front().context.size());
  FeedbackBatch batch;
  batch.reserve(log.size());
  for (const LogRecord& rec : log) batch.push_back({rec.context, rec.reward});
  const GaussianPosterior prior = GaussianPosterior::standard(d, 100.0);
  return RewardSimulator{update_posterior(prior, batch).mean};
}

/// Mean over (user, week) of |S_it intersect P_i| / |S_it|.
inline double offline_precision(
    const RecommendationTable& recs,
    const std::map<std::string, std::set<std::string>>& prefs) {
  if (recs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& [key, set] : recs) {
    if (set.items.empty())
      throw MissingRecommendation("offline_precision: empty set for " + key.first);
    const auto pref = prefs.find(key.first);
    int hits = 0;
    if (pref != prefs.end()) {
      for (const RecommendedItem& item : set.items)
        hits += pref->second.count(item.challenge_id) ? 1 : 0;
    }
    total += static_cast<double>(hits) / static_cast<double>(set.items.size());
  }
  return total / static_cast<double>(recs.size());
}

/// Bernoulli feedback draw with success probability sigmoid(zeta^T v).
inline int simulate_feedback(const OmniscientSimulator& sim,
                             std::span<const double> context, Rng& rng) {
  return rng.next_bernoulli(sim.true_reward(context)) ? 1 : 0;
}

/// Trains a logistic predictor on the log and perturbs it per coordinate
/// with N(0, sigma^2), sigma = sigma_scale * ||zeta||_2 / sqrt(d).
inline OmniscientSimulator make_omniscient(const InteractionLog& train_log,
                                           double sigma_scale, Rng& rng) {
  RewardSimulator fitted = fit_reward_simulator(train_log);
  const std::size_t d = fitted.weights.size();
  double norm = 0.0;
  for (double w : fitted.weights) norm += w * w;
  const double sigma = sigma_scale * std::sqrt(norm) / std::sqrt(static_cast<double>(d));
  for (double& w : fitted.weights) w += sigma * rng.next_normal();
  return OmniscientSimulator{std::move(fitted.weights)};
}

/// Probability distribution over the three challenge types, in
/// (weight_loss, diet, exercise) order.
struct DiversityDistribution {
  std::array<double, kNumDimensions> p{};

  void validate() const {
    double sum = 0.0;
    for (double x : p) {
      if (x < 0.0) throw InvalidArgument("DiversityDistribution: negative mass");
      sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw InvalidArgument("DiversityDistribution: does not sum to 1");
  }
};

/// Counts one unit per dimension bit per event and normalizes.
inline DiversityDistribution diversity_distribution(
    std::span<const std::string> item_ids, const Catalog& catalog) {
  std::array<double, kNumDimensions> counts{};
  double total = 0.0;
  for (const std::string& id : item_ids) {
    const DimMask mask = dimension_mask(catalog.at(id).meta);
    for (int d = 0; d < kNumDimensions; ++d) {
      if (mask.has(static_cast<Dimension>(d))) {
        counts[d] += 1.0;
        total += 1.0;
      }
    }
  }
  if (total == 0.0)
    throw NoTypedEvents("diversity_distribution: no event carries a dimension bit");
  DiversityDistribution out;
  for (int d = 0; d < kNumDimensions; ++d) out.p[d] = counts[d] / total;
  return out;
}

/// Jensen-Shannon divergence with base-2 logarithms; lies in [0,1] and is
/// 1 exactly for disjoint support.
inline double jsd(const DiversityDistribution& p, const DiversityDistribution& q) {
  p.validate();
  q.validate();
  auto kl_to_mix = [](const DiversityDistribution& a, const DiversityDistribution& b) {
    double s = 0.0;
    for (int i = 0; i < kNumDimensions; ++i) {
      if (a.p[i] > 0.0) {
        const double m = 0.5 * (a.p[i] + b.p[i]);
        s += a.p[i] * std::log2(a.p[i] / m);
      }
    }
    return s;
  };
  return 0.5 * kl_to_mix(p, q) + 0.5 * kl_to_mix(q, p);
}

/// Fraction of users who receive strictly more preferred items from the
/// focal policy than from the baseline over the horizon. Ties do not count.
inline double user_improvement(
    const RecommendationTable& focal, const RecommendationTable& baseline,
    const std::map<std::string, std::set<std::string>>& prefs) {
  auto counts = [&](const RecommendationTable& recs) {
    std::map<std::string, int> c;
    for (const auto& [key, set] : recs) {
      c.try_emplace(key.first, 0);
      const auto pref = prefs.find(key.first);
      if (pref == prefs.end()) continue;
      for (const RecommendedItem& item : set.items)
        c[key.first] += pref->second.count(item.challenge_id) ? 1 : 0;
    }
    return c;
  };
  const auto focal_counts = counts(focal);
  const auto baseline_counts = counts(baseline);

  std::set<std::string> users;
  for (const auto& [u, n] : focal_counts) users.insert(u);
  for (const auto& [u, n] : baseline_counts) users.insert(u);
  if (users.empty()) return 0.0;

  int improved = 0;
  for (const std::string& u : users) {
    const auto f = focal_counts.find(u);
    const auto b = baseline_counts.find(u);
    const int fc = f == focal_counts.end() ? 0 : f->second;
    const int bc = b == baseline_counts.end() ? 0 : b->second;
    if (fc > bc) ++improved;
  }
  return static_cast<double>(improved) / static_cast<double>(users.size());
}

/// Users ranked by the dynamics of their choices: per user, per-coordinate
/// population variance of the chosen items' feature vectors, scored by the
/// minimum over coordinates. Top-n by descending score, ties by ascending
/// id; users with fewer than two selections score 0.
inline std::vector<std::string> select_dynamic_users(
    const std::vector<std::pair<std::string, ItemFeatures>>& selections, int n) {
  std::map<std::string, std::vector<const ItemFeatures*>> by_user;
  for (const auto& [user, features] : selections)
    by_user[user].push_back(&features);

  std::vector<std::pair<double, std::string>> scored;  // (-score, id) for sorting
  for (const auto& [user, rows] : by_user) {
    double score = 0.0;
    if (rows.size() >= 2) {
      const std::size_t dim = rows.front()->size();
      for (const ItemFeatures* row : rows) {
        if (row->size() != dim)
          throw LengthMismatch("select_dynamic_users: inconsistent feature lengths for " +
                               user);
      }
      score = std::numeric_limits<double>::infinity();
      const double count = static_cast<double>(rows.size());
      for (std::size_t j = 0; j < dim; ++j) {
        double mean = 0.0;
        for (const ItemFeatures* row : rows) mean += (*row)[j];
        mean /= count;
        double var = 0.0;
        for (const ItemFeatures* row : rows) {
          const double d = (*row)[j] - mean;
          var += d * d;
        }
        score = std::min(score, var / count);
      }
      if (dim == 0) score = 0.0;
    }
    scored.push_back({-score, user});
  }
  std::sort(scored.begin(), scored.end());
  std::vector<std::string> out;
  for (std::size_t i = 0; i < scored.size() && static_cast<int>(i) < n; ++i)
    out.push_back(scored[i].second);
  return out;
}

/// One period's weight-outcome draw: input = [1, user_emb, mean of chosen
/// item vectors] (zero vector if nothing was chosen); returns 1 for
/// non-gain with probability sigmoid(omega^T input).
inline int weight_outcome_round(const UserContext& user_emb,
                                std::span<const ItemFeatures> chosen,
                                std::span<const double> omega, Rng& rng) {
  const long item_dim =
      static_cast<long>(omega.size()) - 1 - static_cast<long>(user_emb.size());
  if (item_dim < 0)
    throw LengthMismatch("weight_outcome_round: omega shorter than [1, user_emb]");
  std::vector<double> input;
  input.reserve(omega.size());
  input.push_back(1.0);
  input.insert(input.end(), user_emb.begin(), user_emb.end());
  std::vector<double> mean_item(static_cast<std::size_t>(item_dim), 0.0);
  for (const ItemFeatures& z : chosen) {
    if (static_cast<long>(z.size()) != item_dim)
      throw LengthMismatch("weight_outcome_round: chosen item dimension mismatch");
    for (long j = 0; j < item_dim; ++j) mean_item[j] += z[j];
  }
  if (!chosen.empty()) {
    for (double& m : mean_item) m /= static_cast<double>(chosen.size());
  }
  input.insert(input.end(), mean_item.begin(), mean_item.end());
  return rng.next_bernoulli(expected_reward(omega, input)) ? 1 : 0;
}

/// Fraction of periods with a non-gain outcome, over periods where the
/// outcome is defined.
inline double in_period_weightloss_rate(std::span<const std::optional<int>> outcomes) {
  int defined = 0;
  int non_gain = 0;
  for (const std::optional<int>& o : outcomes) {
    if (!o) continue;
    ++defined;
    if (*o) ++non_gain;
  }
  return defined == 0 ? 0.0
                      : static_cast<double>(non_gain) / static_cast<double>(defined);
}

/// Element t is the mean of all rewards observed in rounds 1..t.
inline std::vector<double> learning_curve(
    const std::vector<std::vector<double>>& per_round_rewards) {
  std::vector<double> curve;
  curve.reserve(per_round_rewards.size());
  double sum = 0.0;
  double count = 0.0;
  for (const auto& round : per_round_rewards) {
    for (double r : round) {
      sum += r;
      count += 1.0;
    }
    curve.push_back(count == 0.0 ? 0.0 : sum / count);
  }
  return curve;
}

}  // namespace banditrex
