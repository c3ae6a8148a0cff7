#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "banditrex/data_io.hpp"
#include "banditrex/evaluation.hpp"
#include "banditrex/parallel.hpp"
#include "banditrex/policies.hpp"
#include "banditrex/simdata.hpp"

namespace banditrex {

inline constexpr const char* kArtifactVersion = "0.1.0";

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

struct PolicyConfig {
  std::string name;
  std::string algorithm;  // ts | ucb | eps_greedy | pure_exploit | pure_explore | cb | pmf
  bool diversity_constrained = false;
  double alpha = 1.0;
  double epsilon = 0.1;
  PmfParams pmf;
  int train_rounds = 4;    // batch warmup for pmf
  int pmf_refit_every = 0; // 0 = fixed after initial training
};

inline const std::set<std::string> kKnownAlgorithms = {
    "ts", "ucb", "eps_greedy", "pure_exploit", "pure_explore", "cb", "pmf"};
inline const std::vector<std::string> kKnownEvaluators = {
    "doubly_robust", "offline_precision", "omniscient"};
inline const std::vector<std::string> kKnownAnalyses = {
    "diversity_jsd", "user_improvement", "dynamic_users", "weight_outcome",
    "learning_curve"};

struct ExperimentConfig {
  EnvConfig environment;
  std::vector<PolicyConfig> policies;
  std::vector<std::string> evaluators;
  std::vector<std::string> analyses;
  int replications = 1;
  std::string output_dir = "results";
  std::uint64_t seed = 1;
  double propensity_clip = kDefaultPropensityClip;
  std::string user_improvement_baseline = "pmf";
  int dynamic_users_n = 30;
  LoggingPolicy logging_policy = LoggingPolicy::kUniformRandomK;

  bool has_evaluator(const std::string& name) const {
    return std::find(evaluators.begin(), evaluators.end(), name) != evaluators.end();
  }
  bool has_analysis(const std::string& name) const {
    return std::find(analyses.begin(), analyses.end(), name) != analyses.end();
  }

  void validate() const {
    environment.validate();
    if (policies.empty()) throw InvalidConfig("policies", "at least one policy required");
    std::set<std::string> names;
    for (std::size_t i = 0; i < policies.size(); ++i) {
      const PolicyConfig& p = policies[i];
      const std::string where = "policies[" + std::to_string(i) + "]";
      if (p.name.empty()) throw InvalidConfig(where + ".name", "must be non-empty");
      if (!names.insert(p.name).second)
        throw InvalidConfig(where + ".name", "duplicate policy name " + p.name);
      if (!kKnownAlgorithms.count(p.algorithm))
        throw InvalidConfig(where + ".algorithm", "unknown algorithm " + p.algorithm);
      if (p.alpha < 0) throw InvalidConfig(where + ".alpha", "must be >= 0");
      if (p.epsilon < 0 || p.epsilon > 1)
        throw InvalidConfig(where + ".epsilon", "must be in [0,1]");
      if (p.pmf.factors < 1) throw InvalidConfig(where + ".pmf.factors", "must be >= 1");
      if (p.pmf.epochs < 1) throw InvalidConfig(where + ".pmf.epochs", "must be >= 1");
      if (!(p.pmf.learning_rate > 0))
        throw InvalidConfig(where + ".pmf.learning_rate", "must be > 0");
      if (p.pmf.regularization < 0)
        throw InvalidConfig(where + ".pmf.regularization", "must be >= 0");
      if (p.train_rounds < 1)
        throw InvalidConfig(where + ".train_rounds", "must be >= 1");
      if (p.diversity_constrained &&
          (p.algorithm == "eps_greedy" || p.algorithm == "pure_explore"))
        throw InvalidConfig(where + ".diversity_constrained",
                            "not supported for sampling-based algorithm " +
                                p.algorithm);
      if (p.diversity_constrained && environment.k < kNumDimensions)
        throw InvalidConfig(where + ".diversity_constrained",
                            "needs K >= " + std::to_string(kNumDimensions) +
                                " to cover every dimension");
    }
    if (evaluators.empty() && analyses.empty())
      throw InvalidConfig("evaluators", "at least one evaluator or analysis required");
    for (const std::string& e : evaluators) {
      if (std::find(kKnownEvaluators.begin(), kKnownEvaluators.end(), e) ==
          kKnownEvaluators.end())
        throw InvalidConfig("evaluators", "unknown evaluator " + e);
    }
    for (const std::string& a : analyses) {
      if (std::find(kKnownAnalyses.begin(), kKnownAnalyses.end(), a) ==
          kKnownAnalyses.end())
        throw InvalidConfig("analyses", "unknown analysis " + a);
    }
    if (replications < 1) throw InvalidConfig("replications", "must be >= 1");
    if (output_dir.empty()) throw InvalidConfig("output_dir", "must be non-empty");
    if (!(propensity_clip > 0 && propensity_clip <= 1))
      throw InvalidConfig("propensity_clip", "must be in (0,1]");
    if (has_analysis("user_improvement") && !names.count(user_improvement_baseline))
      throw InvalidConfig("user_improvement_baseline",
                          "policy " + user_improvement_baseline + " is not configured");
    if (dynamic_users_n < 1) throw InvalidConfig("dynamic_users_n", "must be >= 1");
  }
};

inline PolicyConfig policy_config_from_json(const json& j, const std::string& where) {
  PolicyConfig p;
  try {
    if (!j.is_object() || !j.contains("name"))
      throw InvalidConfig(where + ".name", "required");
    p.name = j.at("name").get<std::string>();
    p.algorithm = j.contains("algorithm") ? j.at("algorithm").get<std::string>()
                                          : p.name;
    p.diversity_constrained = p.algorithm == "ts";
    if (j.contains("diversity_constrained"))
      p.diversity_constrained = j.at("diversity_constrained").get<bool>();
    if (j.contains("alpha")) p.alpha = j.at("alpha").get<double>();
    if (j.contains("epsilon")) p.epsilon = j.at("epsilon").get<double>();
    if (j.contains("pmf")) {
      const json& m = j.at("pmf");
      if (m.contains("factors")) p.pmf.factors = m.at("factors").get<int>();
      if (m.contains("learning_rate"))
        p.pmf.learning_rate = m.at("learning_rate").get<double>();
      if (m.contains("regularization"))
        p.pmf.regularization = m.at("regularization").get<double>();
      if (m.contains("epochs")) p.pmf.epochs = m.at("epochs").get<int>();
    }
    if (j.contains("train_rounds")) p.train_rounds = j.at("train_rounds").get<int>();
    if (j.contains("pmf_refit_every"))
      p.pmf_refit_every = j.at("pmf_refit_every").get<int>();
  } catch (const json::exception& e) {
    throw InvalidConfig(where, e.what());
  }
  return p;
}

inline ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig cfg;
  try {
    if (j.contains("environment"))
      cfg.environment = io::env_config_from_json(j.at("environment"), "environment");
    if (j.contains("policies")) {
      if (!j.at("policies").is_array())
        throw InvalidConfig("policies", "must be an array");
      for (std::size_t i = 0; i < j.at("policies").size(); ++i)
        cfg.policies.push_back(policy_config_from_json(
            j.at("policies")[i], "policies[" + std::to_string(i) + "]"));
    }
    if (j.contains("evaluators"))
      cfg.evaluators = j.at("evaluators").get<std::vector<std::string>>();
    if (j.contains("analyses"))
      cfg.analyses = j.at("analyses").get<std::vector<std::string>>();
    if (j.contains("replications")) cfg.replications = j.at("replications").get<int>();
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("propensity_clip"))
      cfg.propensity_clip = j.at("propensity_clip").get<double>();
    if (j.contains("user_improvement_baseline"))
      cfg.user_improvement_baseline =
          j.at("user_improvement_baseline").get<std::string>();
    if (j.contains("dynamic_users_n"))
      cfg.dynamic_users_n = j.at("dynamic_users_n").get<int>();
    if (j.contains("logging_policy")) {
      const std::string lp = j.at("logging_policy").get<std::string>();
      if (lp == "uniform_random_k")
        cfg.logging_policy = LoggingPolicy::kUniformRandomK;
      else if (lp == "exploit_oracle")
        cfg.logging_policy = LoggingPolicy::kExploitOracle;
      else
        throw InvalidConfig("logging_policy", "unknown logging policy " + lp);
    }
  } catch (const InvalidConfig&) {
    throw;
  } catch (const json::exception& e) {
    throw InvalidConfig("config", e.what());
  }
  cfg.validate();
  return cfg;
}

inline json experiment_config_to_json(const ExperimentConfig& cfg) {
  json policies = json::array();
  for (const PolicyConfig& p : cfg.policies) {
    policies.push_back(json{{"name", p.name},
                            {"algorithm", p.algorithm},
                            {"diversity_constrained", p.diversity_constrained},
                            {"alpha", p.alpha},
                            {"epsilon", p.epsilon},
                            {"pmf",
                             {{"factors", p.pmf.factors},
                              {"learning_rate", p.pmf.learning_rate},
                              {"regularization", p.pmf.regularization},
                              {"epochs", p.pmf.epochs}}},
                            {"train_rounds", p.train_rounds},
                            {"pmf_refit_every", p.pmf_refit_every}});
  }
  return json{{"environment", io::env_config_to_json(cfg.environment)},
              {"policies", policies},
              {"evaluators", cfg.evaluators},
              {"analyses", cfg.analyses},
              {"replications", cfg.replications},
              {"output_dir", cfg.output_dir},
              {"seed", cfg.seed},
              {"propensity_clip", cfg.propensity_clip},
              {"user_improvement_baseline", cfg.user_improvement_baseline},
              {"dynamic_users_n", cfg.dynamic_users_n},
              {"logging_policy", logging_policy_name(cfg.logging_policy)}};
}

// ---------------------------------------------------------------------------
// Policy factory

inline std::unique_ptr<Policy> make_policy(const PolicyConfig& cfg, int k,
                                           std::uint64_t pmf_seed,
                                           const WarnFn& warn = {}) {
  const DimMask required = cfg.diversity_constrained ? DimMask::all() : DimMask{};
  if (cfg.algorithm == "ts")
    return std::make_unique<TsDiversePolicy>(cfg.name, k, required, warn);
  if (cfg.algorithm == "ucb")
    return std::make_unique<UcbPolicy>(cfg.name, k, cfg.alpha, required);
  if (cfg.algorithm == "eps_greedy")
    return std::make_unique<EpsGreedyPolicy>(cfg.name, k, cfg.epsilon);
  if (cfg.algorithm == "pure_exploit")
    return std::make_unique<PureExploitPolicy>(cfg.name, k, required);
  if (cfg.algorithm == "pure_explore")
    return std::make_unique<PureExplorePolicy>(cfg.name, k);
  if (cfg.algorithm == "cb")
    return std::make_unique<CbPolicy>(cfg.name, k, required);
  if (cfg.algorithm == "pmf")
    return std::make_unique<PmfPolicy>(cfg.name, k, cfg.pmf, cfg.train_rounds,
                                       Rng(pmf_seed), cfg.pmf_refit_every, required);
  throw InvalidConfig("policies", "unknown algorithm " + cfg.algorithm);
}

// ---------------------------------------------------------------------------
// Round loops

namespace detail {

inline std::vector<ItemFeatures> catalog_features(const Catalog& catalog) {
  std::vector<ItemFeatures> out;
  out.reserve(catalog.size());
  for (const ChallengeRecord& rec : catalog.items())
    out.push_back(encode_challenge_meta(rec.meta));
  return out;
}

inline std::vector<Candidate> week_candidates(const SyntheticEnvironment& env,
                                              const std::vector<ItemFeatures>& features,
                                              int week) {
  std::vector<Candidate> out;
  const std::vector<int>& pool = env.pool(week);
  out.reserve(pool.size());
  for (int idx : pool) {
    const ChallengeRecord& rec = env.catalog.items()[idx];
    out.push_back({rec.challenge_id, features[idx], dimension_mask(rec.meta)});
  }
  return out;
}

/// Per-user event histories; build_user_context filters to weeks < t, so
/// whole histories can be handed over safely.
struct UserData {
  std::vector<WeighIn> weighins;
  std::vector<SelectionEvent> selections;
};

inline std::vector<UserData> split_by_user(const GeneratedData& data,
                                           const std::vector<UserProfile>& users) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < users.size(); ++i) index[users[i].user_id] = i;
  std::vector<UserData> out(users.size());
  for (const WeighIn& w : data.weighins) {
    auto it = index.find(w.user_id);
    if (it != index.end()) out[it->second].weighins.push_back(w);
  }
  for (const SelectionEvent& s : data.selections) {
    auto it = index.find(s.user_id);
    if (it != index.end()) out[it->second].selections.push_back(s);
  }
  return out;
}

}  // namespace detail

struct LiveRunResult {
  std::vector<std::vector<double>> per_round_rewards;
  RecommendationTable recs;  // id-only (empty contexts)
  double mean_reward = 0.0;
};

/// Live omniscient simulation: feedback for every recommended item is drawn
/// from sigmoid(zeta^T v); selections and weigh-ins evolve the simulated
/// world. Per-(user, week) rng streams make the run independent of
/// execution order.
inline LiveRunResult run_live(const SyntheticEnvironment& env,
                              const std::vector<ItemFeatures>& item_features,
                              Policy& policy, std::uint64_t stream_root) {
  const int horizon = env.config.horizon_weeks;
  const std::size_t n_users = env.users.size();
  std::vector<detail::UserData> world(n_users);
  std::vector<double> weight_now;
  for (const UserProfile& u : env.users) weight_now.push_back(u.initial_weight);

  LiveRunResult result;
  result.per_round_rewards.resize(horizon);
  double reward_sum = 0.0;
  double reward_count = 0.0;

  std::map<std::string, std::size_t> feature_index;
  for (std::size_t i = 0; i < env.catalog.size(); ++i)
    feature_index[env.catalog.items()[i].challenge_id] = i;

  for (int week = 1; week <= horizon; ++week) {
    const std::vector<Candidate> candidates =
        detail::week_candidates(env, item_features, week);

    std::vector<UserContext> contexts(n_users);
    std::vector<PolicyDecision> decisions(n_users);
    parallel_for(n_users, [&](std::size_t ui) {
      contexts[ui] = build_user_context(env.users[ui], world[ui].weighins,
                                        world[ui].selections, env.catalog, week);
      Rng rng = Rng::stream(stream_root, "recommend",
                            {static_cast<std::uint64_t>(week), ui});
      decisions[ui] = policy.recommend(env.users[ui].user_id, week, contexts[ui],
                                       candidates, rng);
    });

    std::vector<RoundOutcome> outcomes;
    for (std::size_t ui = 0; ui < n_users; ++ui) {
      Rng rng = Rng::stream(stream_root, "feedback",
                            {static_cast<std::uint64_t>(week), ui});
      std::vector<ItemFeatures> chosen;
      RecommendationSet rec_set;
      for (const ScoredItem& item : decisions[ui].items) {
        const ItemFeatures& z = item_features[feature_index.at(item.challenge_id)];
        ContextVector v = concat_context(contexts[ui], z);
        const int r = rng.next_bernoulli(expected_reward(env.zeta, v)) ? 1 : 0;
        reward_sum += r;
        reward_count += 1.0;
        result.per_round_rewards[week - 1].push_back(r);
        outcomes.push_back({env.users[ui].user_id, week, item.challenge_id,
                            std::move(v), z, r});
        rec_set.items.push_back({item.challenge_id, {}});
        if (r) {
          world[ui].selections.push_back(
              {env.users[ui].user_id, week, item.challenge_id, std::nullopt});
          chosen.push_back(z);
        }
      }
      result.recs[{env.users[ui].user_id, week}] = std::move(rec_set);

      const int outcome = weight_outcome_round(contexts[ui], chosen, env.omega, rng);
      weight_now[ui] = std::max(kMinSimWeightKg,
                                weight_now[ui] +
                                    (outcome ? -kWeightStepKg : kWeightStepKg));
      if (rng.next_bernoulli(kWeighInProb))
        world[ui].weighins.push_back({env.users[ui].user_id, week, weight_now[ui]});
    }
    policy.observe(outcomes);
  }
  result.mean_reward = reward_count == 0.0 ? 0.0 : reward_sum / reward_count;
  return result;
}

struct ReplayRunResult {
  RecommendationTable recs;  // contexts included, for the DR estimator
};

/// Replay over the logged dataset: contexts come from the data world, the
/// policy recommends for every logged (user, week), and it learns from the
/// logged rewards of matched offers only.
inline ReplayRunResult run_replay(const SyntheticEnvironment& env,
                                  const std::vector<ItemFeatures>& item_features,
                                  const GeneratedData& data,
                                  const std::vector<detail::UserData>& data_by_user,
                                  Policy& policy, std::uint64_t stream_root,
                                  int rounds) {
  const std::size_t n_users = env.users.size();

  std::map<std::string, std::size_t> user_index;
  for (std::size_t i = 0; i < n_users; ++i) user_index[env.users[i].user_id] = i;
  std::map<std::string, std::size_t> feature_index;
  for (std::size_t i = 0; i < env.catalog.size(); ++i)
    feature_index[env.catalog.items()[i].challenge_id] = i;

  // logged offers per (user, week)
  std::vector<std::vector<std::vector<const LogRecord*>>> offers(
      n_users, std::vector<std::vector<const LogRecord*>>(rounds + 1));
  for (const LogRecord& rec : data.log) {
    auto it = user_index.find(rec.user_id);
    if (it != user_index.end() && rec.week >= 1 && rec.week <= rounds)
      offers[it->second][rec.week].push_back(&rec);
  }

  ReplayRunResult result;
  for (int week = 1; week <= rounds; ++week) {
    const std::vector<Candidate> candidates =
        detail::week_candidates(env, item_features, week);

    std::vector<UserContext> contexts(n_users);
    std::vector<PolicyDecision> decisions(n_users);
    parallel_for(n_users, [&](std::size_t ui) {
      contexts[ui] = build_user_context(env.users[ui], data_by_user[ui].weighins,
                                        data_by_user[ui].selections, env.catalog,
                                        week);
      Rng rng = Rng::stream(stream_root, "recommend",
                            {static_cast<std::uint64_t>(week), ui});
      decisions[ui] = policy.recommend(env.users[ui].user_id, week, contexts[ui],
                                       candidates, rng);
    });

    std::vector<RoundOutcome> outcomes;
    for (std::size_t ui = 0; ui < n_users; ++ui) {
      RecommendationSet rec_set;
      for (const ScoredItem& item : decisions[ui].items) {
        const ItemFeatures& z = item_features[feature_index.at(item.challenge_id)];
        rec_set.items.push_back(
            {item.challenge_id, concat_context(contexts[ui], z)});
        for (const LogRecord* logged : offers[ui][week]) {
          if (logged->action == item.challenge_id) {
            outcomes.push_back({env.users[ui].user_id, week, item.challenge_id,
                                logged->context, z, logged->reward});
            break;
          }
        }
      }
      result.recs[{env.users[ui].user_id, week}] = std::move(rec_set);
    }
    policy.observe(outcomes);
  }
  return result;
}

struct WeightRunResult {
  std::vector<std::optional<int>> outcomes;  // one per (user, week)
  double weightloss_rate = 0.0;
};

/// Weight-outcome target: choices are simulated from zeta, the per-period
/// non-gain outcome from omega, and that outcome is the learning signal
/// attributed to each chosen item's context.
inline WeightRunResult run_weight(const SyntheticEnvironment& env,
                                  const std::vector<ItemFeatures>& item_features,
                                  Policy& policy, std::uint64_t stream_root) {
  const int horizon = env.config.horizon_weeks;
  const std::size_t n_users = env.users.size();
  std::vector<detail::UserData> world(n_users);
  std::vector<double> weight_now;
  for (const UserProfile& u : env.users) weight_now.push_back(u.initial_weight);

  std::map<std::string, std::size_t> feature_index;
  for (std::size_t i = 0; i < env.catalog.size(); ++i)
    feature_index[env.catalog.items()[i].challenge_id] = i;

  WeightRunResult result;
  for (int week = 1; week <= horizon; ++week) {
    const std::vector<Candidate> candidates =
        detail::week_candidates(env, item_features, week);

    std::vector<UserContext> contexts(n_users);
    std::vector<PolicyDecision> decisions(n_users);
    parallel_for(n_users, [&](std::size_t ui) {
      contexts[ui] = build_user_context(env.users[ui], world[ui].weighins,
                                        world[ui].selections, env.catalog, week);
      Rng rng = Rng::stream(stream_root, "recommend",
                            {static_cast<std::uint64_t>(week), ui});
      decisions[ui] = policy.recommend(env.users[ui].user_id, week, contexts[ui],
                                       candidates, rng);
    });

    std::vector<RoundOutcome> outcomes;
    for (std::size_t ui = 0; ui < n_users; ++ui) {
      Rng rng = Rng::stream(stream_root, "feedback",
                            {static_cast<std::uint64_t>(week), ui});
      std::vector<ItemFeatures> chosen;
      std::vector<std::pair<std::string, ContextVector>> chosen_contexts;
      for (const ScoredItem& item : decisions[ui].items) {
        const ItemFeatures& z = item_features[feature_index.at(item.challenge_id)];
        ContextVector v = concat_context(contexts[ui], z);
        if (rng.next_bernoulli(expected_reward(env.zeta, v))) {
          chosen.push_back(z);
          chosen_contexts.push_back({item.challenge_id, std::move(v)});
          world[ui].selections.push_back(
              {env.users[ui].user_id, week, item.challenge_id, std::nullopt});
        }
      }
      const int outcome = weight_outcome_round(contexts[ui], chosen, env.omega, rng);
      result.outcomes.push_back(outcome);
      for (std::size_t c = 0; c < chosen_contexts.size(); ++c) {
        const ItemFeatures& z =
            item_features[feature_index.at(chosen_contexts[c].first)];
        outcomes.push_back({env.users[ui].user_id, week, chosen_contexts[c].first,
                            std::move(chosen_contexts[c].second), z, outcome});
      }
      weight_now[ui] = std::max(kMinSimWeightKg,
                                weight_now[ui] +
                                    (outcome ? -kWeightStepKg : kWeightStepKg));
      if (rng.next_bernoulli(kWeighInProb))
        world[ui].weighins.push_back({env.users[ui].user_id, week, weight_now[ui]});
    }
    policy.observe(outcomes);
  }
  result.weightloss_rate = in_period_weightloss_rate(result.outcomes);
  return result;
}

// ---------------------------------------------------------------------------
// Experiment driver

struct MetricRow {
  std::string policy;
  std::string metric;
  int replication = 0;
  double value = 0.0;
};

struct DiversityRow {
  int replication = 0;
  std::string source;  // "data" or a policy name
  DiversityDistribution distribution;
  double jsd_vs_data = 0.0;
};

struct RunOutputs {
  std::vector<MetricRow> metrics;
  // learning curves: [policy][replication][round]
  std::map<std::string, std::vector<std::vector<double>>> curves;
  std::vector<DiversityRow> diversity;
  std::vector<std::uint64_t> replication_seeds;
};

namespace detail {

inline RecommendationTable strip_contexts(const RecommendationTable& recs) {
  RecommendationTable out;
  for (const auto& [key, set] : recs) {
    RecommendationSet s;
    for (const RecommendedItem& item : set.items)
      s.items.push_back({item.challenge_id, {}});
    out[key] = std::move(s);
  }
  return out;
}

inline InteractionLog filter_log(const InteractionLog& log,
                                 const std::set<std::string>& users) {
  InteractionLog out;
  for (const LogRecord& rec : log)
    if (users.count(rec.user_id)) out.push_back(rec);
  return out;
}

inline RecommendationTable filter_recs(const RecommendationTable& recs,
                                       const std::set<std::string>& users) {
  RecommendationTable out;
  for (const auto& [key, set] : recs)
    if (users.count(key.first)) out[key] = set;
  return out;
}

inline std::vector<std::string> rec_item_ids(const RecommendationTable& recs) {
  std::vector<std::string> ids;
  for (const auto& [key, set] : recs)
    for (const RecommendedItem& item : set.items) ids.push_back(item.challenge_id);
  return ids;
}

}  // namespace detail

/// Runs the configured experiment. All randomness hangs off cfg.seed via
/// named sub-streams keyed by (replication, policy name, run kind), so two
/// runs with the same config are bit-identical and removing one policy
/// never perturbs the others. When `env_override` is supplied (evaluate
/// mode) the environment comes from disk instead of the generator.
inline RunOutputs run_experiment(
    const ExperimentConfig& cfg,
    const std::optional<SyntheticEnvironment>& env_override = std::nullopt,
    bool quiet = true) {
  cfg.validate();
  const SyntheticEnvironment env =
      env_override ? *env_override : generate_environment(cfg.environment);
  if (env_override && !(env.config == cfg.environment))
    throw InvalidConfig("environment", "does not match the data directory's stored config");

  const std::vector<ItemFeatures> item_features = detail::catalog_features(env.catalog);
  const int k = cfg.environment.k;
  const int horizon = cfg.environment.horizon_weeks;

  const bool needs_replay = cfg.has_evaluator("doubly_robust") ||
                            cfg.has_evaluator("offline_precision") ||
                            cfg.has_analysis("diversity_jsd") ||
                            cfg.has_analysis("user_improvement") ||
                            cfg.has_analysis("dynamic_users");
  const bool needs_data = needs_replay;
  const bool needs_live =
      cfg.has_evaluator("omniscient") || cfg.has_analysis("learning_curve");
  const bool needs_weight = cfg.has_analysis("weight_outcome");
  const bool needs_dr =
      cfg.has_evaluator("doubly_robust") || cfg.has_analysis("dynamic_users");

  RunOutputs out;
  const std::size_t n_policies = cfg.policies.size();

  struct PolicyRepResult {
    std::optional<LiveRunResult> live;
    std::optional<ReplayRunResult> replay;
    std::optional<WeightRunResult> weight;
  };

  for (int rep = 0; rep < cfg.replications; ++rep) {
    const std::uint64_t rep_seed =
        Rng::derive(cfg.seed, "replication", {static_cast<std::uint64_t>(rep)});
    out.replication_seeds.push_back(rep_seed);

    GeneratedData data;
    std::vector<detail::UserData> data_by_user;
    std::optional<RewardSimulator> rho;
    if (needs_data) {
      data = generate_logs(env, cfg.logging_policy, horizon,
                           Rng::derive(rep_seed, "logs"));
      data_by_user = detail::split_by_user(data, env.users);
      if (needs_dr) rho = fit_reward_simulator(data.log);
    }

    WarnFn warn;
    if (!quiet) {
      warn = [](const std::string& message) {
        static std::mutex mu;
        std::lock_guard<std::mutex> lock(mu);
        std::cerr << "[banditrex] warning: " << message << "\n";
      };
    }

    std::vector<PolicyRepResult> results(n_policies);
    parallel_for(n_policies, [&](std::size_t pi) {
      const PolicyConfig& pc = cfg.policies[pi];
      const std::uint64_t policy_root = Rng::derive(rep_seed, pc.name);
      try {
        if (needs_live) {
          auto policy = make_policy(pc, k, Rng::derive(policy_root, "pmf-init"), warn);
          results[pi].live = run_live(env, item_features, *policy,
                                      Rng::derive(policy_root, "live"));
        }
        if (needs_replay) {
          auto policy = make_policy(pc, k, Rng::derive(policy_root, "pmf-init"), warn);
          results[pi].replay =
              run_replay(env, item_features, data, data_by_user, *policy,
                         Rng::derive(policy_root, "replay"), horizon);
        }
        if (needs_weight) {
          auto policy = make_policy(pc, k, Rng::derive(policy_root, "pmf-init"), warn);
          results[pi].weight = run_weight(env, item_features, *policy,
                                          Rng::derive(policy_root, "weight"));
        }
      } catch (const SolverFailure& e) {
        throw SolverFailure("policy " + pc.name + " replication " +
                            std::to_string(rep) + ": " + e.what());
      }
    });

    // data-side references for the analyses
    std::optional<DiversityDistribution> data_distribution;
    auto prefs = preference_sets(data.selections);
    std::set<std::string> dynamic_users;
    if (cfg.has_analysis("dynamic_users") && needs_data) {
      std::vector<std::pair<std::string, ItemFeatures>> sel_features;
      std::map<std::string, std::size_t> feature_index;
      for (std::size_t i = 0; i < env.catalog.size(); ++i)
        feature_index[env.catalog.items()[i].challenge_id] = i;
      for (const SelectionEvent& s : data.selections)
        sel_features.push_back({s.user_id, item_features[feature_index.at(s.challenge_id)]});
      for (const std::string& u : select_dynamic_users(sel_features, cfg.dynamic_users_n))
        dynamic_users.insert(u);
    }
    if (cfg.has_analysis("diversity_jsd") && needs_data) {
      std::vector<std::string> ids;
      for (const SelectionEvent& s : data.selections) ids.push_back(s.challenge_id);
      data_distribution = diversity_distribution(ids, env.catalog);
      out.diversity.push_back({rep, "data", *data_distribution, 0.0});
    }

    std::map<std::string, RecommendationTable> id_tables;  // for user_improvement
    for (std::size_t pi = 0; pi < n_policies; ++pi) {
      const PolicyConfig& pc = cfg.policies[pi];
      const PolicyRepResult& r = results[pi];

      if (cfg.has_evaluator("doubly_robust"))
        out.metrics.push_back(
            {pc.name, "doubly_robust", rep,
             doubly_robust_estimate(data.log, r.replay->recs, *rho,
                                    cfg.propensity_clip)});
      if (cfg.has_evaluator("offline_precision"))
        out.metrics.push_back({pc.name, "offline_precision", rep,
                               offline_precision(r.replay->recs, prefs)});
      if (cfg.has_evaluator("omniscient"))
        out.metrics.push_back({pc.name, "omniscient", rep, r.live->mean_reward});
      if (cfg.has_analysis("learning_curve"))
        out.curves[pc.name].push_back(learning_curve(r.live->per_round_rewards));
      if (cfg.has_analysis("diversity_jsd")) {
        const DiversityDistribution dist =
            diversity_distribution(detail::rec_item_ids(r.replay->recs), env.catalog);
        const double divergence = jsd(dist, *data_distribution);
        out.diversity.push_back({rep, pc.name, dist, divergence});
        out.metrics.push_back({pc.name, "diversity_jsd", rep, divergence});
      }
      if (cfg.has_analysis("dynamic_users")) {
        const InteractionLog dyn_log = detail::filter_log(data.log, dynamic_users);
        const RecommendationTable dyn_recs =
            detail::filter_recs(r.replay->recs, dynamic_users);
        const double dyn_dr = dyn_log.empty()
                                  ? 0.0
                                  : doubly_robust_estimate(dyn_log, dyn_recs, *rho,
                                                           cfg.propensity_clip);
        out.metrics.push_back({pc.name, "doubly_robust_dynamic", rep, dyn_dr});
        out.metrics.push_back({pc.name, "offline_precision_dynamic", rep,
                               offline_precision(dyn_recs, prefs)});
      }
      if (cfg.has_analysis("weight_outcome"))
        out.metrics.push_back(
            {pc.name, "weightloss_rate", rep, r.weight->weightloss_rate});
      if (cfg.has_analysis("user_improvement"))
        id_tables[pc.name] = detail::strip_contexts(r.replay->recs);
    }

    if (cfg.has_analysis("user_improvement")) {
      const RecommendationTable& baseline = id_tables.at(cfg.user_improvement_baseline);
      for (const PolicyConfig& pc : cfg.policies) {
        if (pc.name == cfg.user_improvement_baseline) continue;
        out.metrics.push_back(
            {pc.name, "user_improvement", rep,
             user_improvement(id_tables.at(pc.name), baseline, prefs)});
      }
    }

    if (!quiet)
      std::cerr << "[banditrex] replication " << rep + 1 << "/" << cfg.replications
                << " done\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output files

inline const std::vector<std::string> kMetricOrder = {
    "doubly_robust", "offline_precision", "omniscient", "diversity_jsd",
    "user_improvement", "doubly_robust_dynamic", "offline_precision_dynamic",
    "weightloss_rate"};

inline void write_metrics_csv(const ExperimentConfig& cfg, const RunOutputs& out,
                              const std::string& path) {
  // group by policy (config order), then metric (fixed order), then replication
  csv::Writer w(path);
  w.row({"policy", "metric", "replication", "value"});
  for (const PolicyConfig& pc : cfg.policies) {
    for (const std::string& metric : kMetricOrder) {
      for (const MetricRow& row : out.metrics) {
        if (row.policy == pc.name && row.metric == metric)
          w.row({row.policy, row.metric, std::to_string(row.replication),
                 csv::format_double(row.value)});
      }
    }
  }
}

inline void write_learning_curves_csv(const ExperimentConfig& cfg,
                                      const RunOutputs& out, const std::string& path) {
  csv::Writer w(path);
  w.row({"policy", "replication", "round", "cumulative_mean_reward"});
  for (const PolicyConfig& pc : cfg.policies) {
    auto it = out.curves.find(pc.name);
    if (it == out.curves.end()) continue;
    const auto& reps = it->second;
    for (std::size_t rep = 0; rep < reps.size(); ++rep) {
      for (std::size_t round = 0; round < reps[rep].size(); ++round)
        w.row({pc.name, std::to_string(rep), std::to_string(round + 1),
               csv::format_double(reps[rep][round])});
    }
    if (!reps.empty()) {
      const std::size_t rounds = reps.front().size();
      for (std::size_t round = 0; round < rounds; ++round) {
        double mean = 0.0;
        for (const auto& curve : reps) mean += curve[round];
        mean /= static_cast<double>(reps.size());
        w.row({pc.name, "mean", std::to_string(round + 1), csv::format_double(mean)});
      }
    }
  }
}

inline void write_diversity_csv(const RunOutputs& out, const std::string& path) {
  csv::Writer w(path);
  w.row({"replication", "source", "weight_loss", "diet", "exercise", "jsd_vs_data"});
  for (const DiversityRow& row : out.diversity) {
    w.row({std::to_string(row.replication), row.source,
           csv::format_double(row.distribution.p[0]),
           csv::format_double(row.distribution.p[1]),
           csv::format_double(row.distribution.p[2]),
           csv::format_double(row.jsd_vs_data)});
  }
}

inline std::string config_hash(const json& config) {
  const std::uint64_t h = Rng::hash(config.dump());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline void write_manifest(const ExperimentConfig& cfg, const RunOutputs& out,
                           const std::string& path) {
  std::vector<std::string> policy_names;
  for (const PolicyConfig& p : cfg.policies) policy_names.push_back(p.name);
  const json manifest{{"artifact_version", kArtifactVersion},
                      {"config_hash", config_hash(experiment_config_to_json(cfg))},
                      {"seed", cfg.seed},
                      {"replications", cfg.replications},
                      {"policies", policy_names},
                      {"evaluators", cfg.evaluators},
                      {"analyses", cfg.analyses},
                      {"replication_seeds", out.replication_seeds},
                      {"environment", io::env_config_to_json(cfg.environment)}};
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path);
  f << manifest.dump(2) << '\n';
}

inline void write_outputs(const ExperimentConfig& cfg, const RunOutputs& out,
                          const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  write_metrics_csv(cfg, out, (base / "metrics.csv").string());
  if (!out.curves.empty())
    write_learning_curves_csv(cfg, out, (base / "learning_curves.csv").string());
  if (!out.diversity.empty())
    write_diversity_csv(out, (base / "diversity.csv").string());
  write_manifest(cfg, out, (base / "run_manifest.json").string());
}

// ---------------------------------------------------------------------------
// Report

struct ReportRow {
  std::string policy;
  std::string metric;
  double mean = 0.0;
  double std_error = 0.0;
  int n = 0;
};

inline std::vector<ReportRow> summarize_metrics(const std::string& metrics_path) {
  const csv::Table t = csv::read_file(metrics_path);
  csv::expect_header(t, {"policy", "metric", "replication", "value"}, metrics_path);
  // preserve first-appearance order of (policy, metric)
  std::vector<std::pair<std::string, std::string>> order;
  std::map<std::pair<std::string, std::string>, std::vector<double>> groups;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = metrics_path + ":" + std::to_string(r + 2);
    const std::pair<std::string, std::string> key{row[0], row[1]};
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(csv::parse_double(row[3], where));
  }
  std::vector<ReportRow> out;
  for (const auto& key : order) {
    const std::vector<double>& values = groups.at(key);
    ReportRow row;
    row.policy = key.first;
    row.metric = key.second;
    row.n = static_cast<int>(values.size());
    for (double v : values) row.mean += v;
    row.mean /= static_cast<double>(values.size());
    if (values.size() > 1) {
      double ss = 0.0;
      for (double v : values) ss += (v - row.mean) * (v - row.mean);
      row.std_error = std::sqrt(ss / static_cast<double>(values.size() - 1)) /
                      std::sqrt(static_cast<double>(values.size()));
    }
    out.push_back(std::move(row));
  }
  return out;
}

inline void write_report(const std::string& results_dir, std::ostream& table_out) {
  const std::filesystem::path base(results_dir);
  const std::vector<ReportRow> rows =
      summarize_metrics((base / "metrics.csv").string());

  json seed_list = json::array();
  const std::string manifest_path = (base / "run_manifest.json").string();
  if (std::filesystem::exists(manifest_path)) {
    const json manifest = io::read_json_file(manifest_path);
    if (manifest.contains("replication_seeds"))
      seed_list = manifest.at("replication_seeds");
  }

  csv::Writer w((base / "report.csv").string());
  w.row({"policy", "metric", "mean", "std_error"});
  json report = json::array();
  for (const ReportRow& row : rows) {
    w.row({row.policy, row.metric, csv::format_double(row.mean),
           csv::format_double(row.std_error)});
    report.push_back(json{{"policy", row.policy},
                          {"metric", row.metric},
                          {"value", row.mean},
                          {"std_error", row.std_error},
                          {"n_replications", row.n},
                          {"seed_list", seed_list}});
  }
  std::ofstream jf((base / "report.json").string(), std::ios::binary);
  jf << report.dump(2) << '\n';

  table_out << "policy                metric                      mean  std_error   n\n";
  for (const ReportRow& row : rows) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-20s  %-24s  %8.4f  %9.4f  %2d\n",
                  row.policy.c_str(), row.metric.c_str(), row.mean, row.std_error,
                  row.n);
    table_out << line;
  }
}

}  // namespace banditrex
