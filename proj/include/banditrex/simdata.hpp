#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "banditrex/domain.hpp"
#include "banditrex/evaluation.hpp"
#include "banditrex/features.hpp"
#include "banditrex/interaction_log.hpp"
#include "banditrex/rng.hpp"

namespace banditrex {

struct TypeMix {
  double weight_loss = 0.3;
  double diet = 0.4;
  double exercise = 0.4;

  friend bool operator==(const TypeMix&, const TypeMix&) = default;
};

/// Desk-scale defaults mirror the evaluation shape: 200 users, 60
/// challenges, 16-week horizon, ~50 available challenges per week, K = 10.
struct EnvConfig {
  int n_users = 200;
  int n_challenges = 60;
  int horizon_weeks = 16;
  int weekly_pool = 50;
  int k = 10;
  std::uint64_t seed = 1;
  double ground_truth_sigma = 0.5;
  TypeMix type_mix;

  void validate() const {
    if (n_users < 1) throw InvalidConfig("environment.n_users", "must be >= 1");
    if (n_challenges < 1)
      throw InvalidConfig("environment.n_challenges", "must be >= 1");
    if (horizon_weeks < 1)
      throw InvalidConfig("environment.horizon_weeks", "must be >= 1");
    if (weekly_pool < 1 || weekly_pool > n_challenges)
      throw InvalidConfig("environment.weekly_pool",
                          "must be in [1, n_challenges]");
    if (n_challenges > weekly_pool * horizon_weeks)
      throw InvalidConfig("environment.n_challenges",
                          "must be <= weekly_pool * horizon_weeks so every "
                          "challenge gets an availability window");
    if (k < 1 || k > weekly_pool)
      throw InvalidConfig("environment.K", "must be in [1, weekly_pool]");
    if (!(ground_truth_sigma >= 0))
      throw InvalidConfig("environment.ground_truth_sigma", "must be >= 0");
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob(type_mix.weight_loss) || !prob(type_mix.diet) || !prob(type_mix.exercise))
      throw InvalidConfig("environment.type_mix", "probabilities must be in [0,1]");
    if (type_mix.weight_loss + type_mix.diet + type_mix.exercise <= 0.0)
      throw InvalidConfig("environment.type_mix", "at least one dimension must have positive probability");
  }

  friend bool operator==(const EnvConfig&, const EnvConfig&) = default;
};

/// Fully seeded synthetic world: profiles, catalog with availability
/// windows, ground-truth selection weights zeta and weight-outcome weights
/// omega (both over [1, x_it, z_k] with the 11-dim meta encoding), and the
/// weekly pools C_t derived from the windows.
struct SyntheticEnvironment {
  EnvConfig config;
  std::vector<UserProfile> users;
  Catalog catalog;
  std::vector<double> zeta;
  std::vector<double> omega;
  std::vector<std::vector<int>> weekly_pools;  // catalog indices, week 1 first

  const std::vector<int>& pool(int week) const {
    return weekly_pools.at(static_cast<std::size_t>(week - 1));
  }

  friend bool operator==(const SyntheticEnvironment&, const SyntheticEnvironment&) = default;
};

inline constexpr int kGroundTruthDim = 1 + kUserContextDim + kMetaFeatureCount;

/// Offsets of the item dimension flags inside v = [1, x, z].
inline constexpr int kZetaDietIndex = 1 + kUserContextDim + kMetaDietFlagIndex;
inline constexpr int kZetaActivityIndex = 1 + kUserContextDim + kMetaActivityFlagIndex;
inline constexpr int kZetaWeightLossIndex = 1 + kUserContextDim + kMetaWeightLossFlagIndex;

namespace detail {

inline long long geometric_count(Rng& rng, double mean) {
  // failures before first success, P(success) = 1/(1+mean)
  const double p = 1.0 / (1.0 + mean);
  const double u = 1.0 - rng.next_double();  // (0, 1]
  return static_cast<long long>(std::floor(std::log(u) / std::log1p(-p)));
}

inline Intensity random_intensity(Rng& rng) {
  switch (rng.next_below(3)) {
    case 0: return Intensity::kLow;
    case 1: return Intensity::kMedium;
    default: return Intensity::kHigh;
  }
}

inline std::string padded_id(const char* prefix, int i, int width) {
  std::string num = std::to_string(i);
  std::string out = prefix;
  for (int j = static_cast<int>(num.size()); j < width; ++j) out += '0';
  return out + num;
}

/// Availability windows with exact weekly coverage: imagine `weekly_pool`
/// slots, each spanning the whole horizon; each slot's timeline is cut into
/// contiguous intervals and every interval becomes one challenge's window.
/// Each week then has exactly `weekly_pool` available challenges.
inline std::vector<std::pair<int, int>> draw_windows(const EnvConfig& cfg, Rng& rng) {
  const int slots = cfg.weekly_pool;
  const int n = cfg.n_challenges;
  std::vector<int> intervals_per_slot(slots, n / slots);
  for (int s = 0; s < n % slots; ++s) ++intervals_per_slot[s];

  std::vector<std::pair<int, int>> windows;
  windows.reserve(n);
  for (int s = 0; s < slots; ++s) {
    const int m = intervals_per_slot[s];
    // m-1 distinct cut points in [2, horizon]
    std::vector<int> cuts;
    while (static_cast<int>(cuts.size()) < m - 1) {
      const int c = 2 + static_cast<int>(rng.next_below(cfg.horizon_weeks - 1));
      if (std::find(cuts.begin(), cuts.end(), c) == cuts.end()) cuts.push_back(c);
    }
    std::sort(cuts.begin(), cuts.end());
    int start = 1;
    for (int i = 0; i < m; ++i) {
      const int end = i + 1 < m ? cuts[i] - 1 : cfg.horizon_weeks;
      windows.push_back({start, end});
      start = end + 1;
    }
  }
  // assign windows to challenges in random order
  for (std::size_t i = 0; i + 1 < windows.size(); ++i) {
    const std::size_t j = i + rng.next_below(windows.size() - i);
    std::swap(windows[i], windows[j]);
  }
  return windows;
}

}  // namespace detail

/// Deterministic generation given cfg.seed. User attributes: gender
/// Bernoulli(0.5), age uniform 20..69, initial weight N(85,15) clipped to
/// [50,150], membership uniform 0..260, friends/posts geometric with mean
/// 5. Challenge meta: dimension bits per type_mix (resampled until at least
/// one bit is set), intensities uniform over {L,M,H} where applicable,
/// specific/measurable/motivational/self_monitoring Bernoulli(0.5),
/// duration uniform 1..8. zeta and omega are N(0, sigma^2 I) draws with the
/// three item dimension-flag coordinates boosted by +1 so type preferences
/// are learnable. Weekly pools are validated to cover every dimension that
/// can occur (regenerated with a derived seed otherwise).
inline SyntheticEnvironment generate_environment(const EnvConfig& cfg) {
  cfg.validate();

  for (std::uint64_t attempt = 0; attempt < 1000; ++attempt) {
    Rng rng = Rng::stream(cfg.seed, "environment", {attempt});

    SyntheticEnvironment env;
    env.config = cfg;

    env.users.reserve(cfg.n_users);
    const int id_width = static_cast<int>(std::to_string(cfg.n_users).size());
    for (int i = 0; i < cfg.n_users; ++i) {
      UserProfile u;
      u.user_id = detail::padded_id("u", i + 1, id_width);
      u.gender = rng.next_below(2) == 1;
      u.age = static_cast<double>(20 + rng.next_below(50));
      u.initial_weight = std::clamp(85.0 + 15.0 * rng.next_normal(), 50.0, 150.0);
      u.membership_weeks = static_cast<int>(rng.next_below(261));
      u.friends = detail::geometric_count(rng, 5.0);
      u.posts = detail::geometric_count(rng, 5.0);
      env.users.push_back(std::move(u));
    }

    const int cid_width = static_cast<int>(std::to_string(cfg.n_challenges).size());
    auto windows = detail::draw_windows(cfg, rng);
    std::vector<ChallengeRecord> challenges;
    challenges.reserve(cfg.n_challenges);
    for (int i = 0; i < cfg.n_challenges; ++i) {
      ChallengeRecord rec;
      rec.challenge_id = detail::padded_id("c", i + 1, cid_width);
      rec.title = "challenge " + std::to_string(i + 1);
      rec.description = "synthetic challenge " + std::to_string(i + 1);
      ChallengeMeta& m = rec.meta;
      m.specific = rng.next_bernoulli(0.5);
      m.measurable = rng.next_bernoulli(0.5);
      do {
        m.diet = rng.next_bernoulli(cfg.type_mix.diet);
        m.activity = rng.next_bernoulli(cfg.type_mix.exercise);
        m.weight_loss = rng.next_bernoulli(cfg.type_mix.weight_loss);
      } while (!m.diet && !m.activity && !m.weight_loss);
      m.intensity_diet = m.diet ? detail::random_intensity(rng) : Intensity::kNA;
      m.intensity_activity = m.activity ? detail::random_intensity(rng) : Intensity::kNA;
      m.intensity_weight_loss =
          m.weight_loss ? detail::random_intensity(rng) : Intensity::kNA;
      m.motivational = rng.next_bernoulli(0.5);
      m.self_monitoring = rng.next_bernoulli(0.5);
      m.duration_weeks = 1 + static_cast<int>(rng.next_below(8));
      rec.start_week = windows[i].first;
      rec.end_week = windows[i].second;
      challenges.push_back(std::move(rec));
    }
    env.catalog = Catalog(std::move(challenges));

    env.zeta.resize(kGroundTruthDim);
    for (double& z : env.zeta) z = cfg.ground_truth_sigma * rng.next_normal();
    env.zeta[kZetaDietIndex] += 1.0;
    env.zeta[kZetaActivityIndex] += 1.0;
    env.zeta[kZetaWeightLossIndex] += 1.0;

    env.omega.resize(kGroundTruthDim);
    for (double& w : env.omega) w = cfg.ground_truth_sigma * rng.next_normal();
    env.omega[kZetaDietIndex] += 1.0;
    env.omega[kZetaActivityIndex] += 1.0;
    env.omega[kZetaWeightLossIndex] += 1.0;

    env.weekly_pools.assign(cfg.horizon_weeks, {});
    for (int w = 1; w <= cfg.horizon_weeks; ++w) {
      for (std::size_t i = 0; i < env.catalog.size(); ++i) {
        if (env.catalog.items()[i].available(w))
          env.weekly_pools[w - 1].push_back(static_cast<int>(i));
      }
    }

    // Which dimensions exist in the catalog at all? The pool check only
    // demands coverage of those.
    DimMask catalog_dims;
    for (const ChallengeRecord& rec : env.catalog.items())
      catalog_dims = DimMask::from_bits(catalog_dims.bits() |
                                        dimension_mask(rec.meta).bits());
    bool valid = true;
    for (const auto& pool : env.weekly_pools) {
      if (pool.empty()) {
        valid = false;
        break;
      }
      DimMask covered;
      for (int idx : pool)
        covered = DimMask::from_bits(
            covered.bits() | dimension_mask(env.catalog.items()[idx].meta).bits());
      if (!covered.covers(catalog_dims)) {
        valid = false;
        break;
      }
    }
    if (valid) return env;
  }
  throw GenerationFailure(
      "generate_environment: could not build weekly pools covering all "
      "dimensions in 1000 attempts");
}

enum class LoggingPolicy { kUniformRandomK, kExploitOracle };

inline std::string logging_policy_name(LoggingPolicy p) {
  return p == LoggingPolicy::kUniformRandomK ? "uniform_random_k" : "exploit_oracle";
}

/// The logging data bundle: the full offer-level log driving off-policy
/// evaluation plus its rendering as platform CSV data.
struct GeneratedData {
  InteractionLog log;
  std::vector<SelectionEvent> selections;  // offers with reward 1
  std::vector<WeighIn> weighins;
};

inline constexpr double kOracleExploreProb = 0.05;
inline constexpr double kWeighInProb = 0.9;
inline constexpr double kWeightStepKg = 0.3;
inline constexpr double kMinSimWeightKg = 40.0;

/// Rolls the logging policy forward for `rounds` weeks. Uniform-random-K
/// offers carry exact propensity K/|C_t|; the exploit-oracle logger is a
/// 0.95/0.05 mixture of the true-score top-K and a uniform K-subset, again
/// with exact propensities. Rewards are Bernoulli(sigmoid(zeta^T v)).
/// Weigh-ins evolve from the ground-truth omega outcome: weight moves
/// -+0.3 kg on non-gain/gain, recorded with probability 0.9.
inline GeneratedData generate_logs(const SyntheticEnvironment& env,
                                   LoggingPolicy policy, int rounds,
                                   std::uint64_t seed) {
  if (rounds < 1 || rounds > env.config.horizon_weeks)
    throw InvalidArgument("generate_logs: rounds must be in [1, horizon_weeks]");
  Rng rng = Rng::stream(seed, "logs");

  GeneratedData data;
  const int k = env.config.k;

  std::vector<ItemFeatures> item_features;
  item_features.reserve(env.catalog.size());
  for (const ChallengeRecord& rec : env.catalog.items())
    item_features.push_back(encode_challenge_meta(rec.meta));

  std::vector<double> weight_now;
  for (const UserProfile& u : env.users) weight_now.push_back(u.initial_weight);

  for (int week = 1; week <= rounds; ++week) {
    const std::vector<int>& pool = env.pool(week);
    const int pool_size = static_cast<int>(pool.size());
    const int offers = std::min(k, pool_size);
    for (std::size_t ui = 0; ui < env.users.size(); ++ui) {
      const UserProfile& user = env.users[ui];
      const UserContext x =
          build_user_context(user, data.weighins, data.selections, env.catalog, week);

      // contexts and true scores for the whole pool, in pool (id) order
      std::vector<ContextVector> contexts(pool_size);
      std::vector<double> true_scores(pool_size);
      for (int j = 0; j < pool_size; ++j) {
        contexts[j] = concat_context(x, item_features[pool[j]]);
        true_scores[j] = expected_reward(env.zeta, contexts[j]);
      }

      std::vector<int> top_set;  // oracle top-K, indices into `pool`
      if (policy == LoggingPolicy::kExploitOracle) {
        std::vector<int> order(pool_size);
        for (int j = 0; j < pool_size; ++j) order[j] = j;
        std::sort(order.begin(), order.end(), [&](int a, int b) {
          if (true_scores[a] != true_scores[b]) return true_scores[a] > true_scores[b];
          return env.catalog.items()[pool[a]].challenge_id <
                 env.catalog.items()[pool[b]].challenge_id;
        });
        top_set.assign(order.begin(), order.begin() + offers);
      }

      std::vector<int> offered;  // indices into `pool`
      bool exploit_branch = false;
      if (policy == LoggingPolicy::kExploitOracle)
        exploit_branch = !rng.next_bernoulli(kOracleExploreProb);
      if (exploit_branch) {
        offered = top_set;
      } else {
        std::vector<int> order(pool_size);
        for (int j = 0; j < pool_size; ++j) order[j] = j;
        for (int j = 0; j < offers; ++j) {
          const int swap_with = j + static_cast<int>(rng.next_below(pool_size - j));
          std::swap(order[j], order[swap_with]);
        }
        offered.assign(order.begin(), order.begin() + offers);
      }
      std::sort(offered.begin(), offered.end());  // reward draws in pool order
      const double uniform_p = static_cast<double>(offers) / pool_size;

      std::vector<ItemFeatures> chosen_features;
      for (int j : offered) {
        double propensity = uniform_p;
        if (policy == LoggingPolicy::kExploitOracle) {
          const bool in_top =
              std::find(top_set.begin(), top_set.end(), j) != top_set.end();
          propensity = (in_top ? 1.0 - kOracleExploreProb : 0.0) +
                       kOracleExploreProb * uniform_p;
        }
        const int reward = rng.next_bernoulli(true_scores[j]) ? 1 : 0;
        const std::string& cid = env.catalog.items()[pool[j]].challenge_id;
        data.log.push_back({user.user_id, week, cid, contexts[j], reward, propensity});
        if (reward) {
          data.selections.push_back({user.user_id, week, cid, propensity});
          chosen_features.push_back(item_features[pool[j]]);
        }
      }

      // weekly weight step from the omega outcome
      const int outcome = weight_outcome_round(x, chosen_features, env.omega, rng);
      weight_now[ui] = std::max(kMinSimWeightKg,
                                weight_now[ui] + (outcome ? -kWeightStepKg : kWeightStepKg));
      if (rng.next_bernoulli(kWeighInProb))
        data.weighins.push_back({user.user_id, week, weight_now[ui]});
    }
  }
  return data;
}

}  // namespace banditrex
