#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "banditrex/interaction_log.hpp"
#include "banditrex/reward_model.hpp"
#include "banditrex/rng.hpp"
#include "banditrex/selector.hpp"

namespace banditrex {

struct ScoredItem {
  std::string challenge_id;
  double score = 0.0;
};

/// Recommendation for one (user, week): up to K items, ordered by
/// descending predicted score (ties by ascending id).
struct PolicyDecision {
  std::string user_id;
  int week = 0;
  std::vector<ScoredItem> items;
};

/// A recommendable item for one round: its id, raw features z_k and
/// dimension membership. Policies assemble v = [1, x, z] themselves.
struct Candidate {
  std::string challenge_id;
  ItemFeatures features;
  DimMask mask;
};

namespace detail {

inline PolicyDecision make_decision(const std::string& user_id, int week,
                                    std::vector<ScoredItem> items) {
  std::sort(items.begin(), items.end(), [](const ScoredItem& a, const ScoredItem& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.challenge_id < b.challenge_id;
  });
  return PolicyDecision{user_id, week, std::move(items)};
}

/// Top-k by score with ties broken by ascending id.
inline PolicyDecision scored_topk(const std::string& user_id, int week,
                                  std::vector<ScoredItem> scored, int k) {
  std::sort(scored.begin(), scored.end(), [](const ScoredItem& a, const ScoredItem& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.challenge_id < b.challenge_id;
  });
  if (static_cast<int>(scored.size()) > k) scored.resize(k);
  return PolicyDecision{user_id, week, std::move(scored)};
}

/// Scores every candidate with the given coefficient vector.
inline std::vector<ScoredItem> score_with(std::span<const double> theta,
                                          const UserContext& user_ctx,
                                          std::span<const Candidate> candidates) {
  std::vector<ScoredItem> scored;
  scored.reserve(candidates.size());
  for (const Candidate& c : candidates) {
    const ContextVector v = concat_context(user_ctx, c.features);
    scored.push_back({c.challenge_id, expected_reward(theta, v)});
  }
  return scored;
}

/// Reorders a decision's scored items back into candidate order.
inline std::vector<ScoredItem> align_scores(std::span<const Candidate> candidates,
                                            const std::vector<ScoredItem>& scored) {
  std::unordered_map<std::string, double> by_id;
  for (const ScoredItem& s : scored) by_id[s.challenge_id] = s.score;
  std::vector<ScoredItem> out;
  out.reserve(candidates.size());
  for (const Candidate& c : candidates)
    out.push_back({c.challenge_id, by_id.at(c.challenge_id)});
  return out;
}

inline PolicyDecision constrained_select(const std::string& user_id, int week,
                                         std::span<const Candidate> candidates,
                                         std::vector<ScoredItem> scored, int k,
                                         DimMask required, const WarnFn& warn) {
  SelectionProblem problem;
  problem.k = k;
  problem.required = required;
  std::unordered_map<std::string, double> score_of;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    problem.candidates.push_back(
        {candidates[i].challenge_id, scored[i].score, candidates[i].mask});
    score_of[scored[i].challenge_id] = scored[i].score;
  }
  std::vector<ScoredItem> chosen;
  for (const std::string& id : solve_constrained_topk(problem, warn))
    chosen.push_back({id, score_of.at(id)});
  return make_decision(user_id, week, std::move(chosen));
}

}  // namespace detail

/// The proposed policy: draw one theta per (user, round) from the
/// posterior, score every available item with the sampled coefficients and
/// solve the diversity-constrained top-K problem exactly.
inline PolicyDecision recommend_ts_diverse(const GaussianPosterior& post,
                                           const UserContext& user_ctx,
                                           std::span<const Candidate> candidates,
                                           int k, DimMask required, Rng& rng,
                                           const std::string& user_id = {},
                                           int week = 0, const WarnFn& warn = {}) {
  const std::vector<double> theta = sample_params(post, rng);
  std::vector<ScoredItem> scored = detail::score_with(theta, user_ctx, candidates);
  return detail::constrained_select(user_id, week, candidates, std::move(scored), k,
                                    required, warn);
}

/// UCB over the same logistic model: score_k = sigmoid(m^T v_k +
/// alpha * sqrt(sum_j v_j v_{k,j}^2)), unconstrained top-K.
inline PolicyDecision recommend_ucb(const GaussianPosterior& post,
                                    const UserContext& user_ctx,
                                    std::span<const Candidate> candidates, int k,
                                    double alpha, const std::string& user_id = {},
                                    int week = 0) {
  if (alpha < 0) throw InvalidArgument("recommend_ucb: alpha must be >= 0");
  std::vector<ScoredItem> scored;
  scored.reserve(candidates.size());
  for (const Candidate& c : candidates) {
    const ContextVector v = concat_context(user_ctx, c.features);
    if (v.size() != post.mean.size())
      throw LengthMismatch("recommend_ucb: context/posterior dimension mismatch");
    double logit = 0.0;
    double bonus_sq = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) {
      logit += post.mean[j] * v[j];
      bonus_sq += post.variance[j] * v[j] * v[j];
    }
    scored.push_back({c.challenge_id, stable_sigmoid(logit + alpha * std::sqrt(bonus_sq))});
  }
  return detail::scored_topk(user_id, week, std::move(scored), k);
}

/// Per-slot epsilon-greedy: each of the K slots independently explores a
/// uniform remaining candidate with probability epsilon, otherwise takes
/// the best remaining posterior-mean score.
inline PolicyDecision recommend_eps_greedy(const GaussianPosterior& post,
                                           const UserContext& user_ctx,
                                           std::span<const Candidate> candidates,
                                           int k, double epsilon, Rng& rng,
                                           const std::string& user_id = {},
                                           int week = 0) {
  if (epsilon < 0.0 || epsilon > 1.0)
    throw InvalidArgument("recommend_eps_greedy: epsilon must be in [0,1]");
  std::vector<ScoredItem> remaining =
      detail::score_with(post.mean, user_ctx, candidates);
  std::sort(remaining.begin(), remaining.end(),
            [](const ScoredItem& a, const ScoredItem& b) {
              return a.challenge_id < b.challenge_id;
            });
  std::vector<ScoredItem> chosen;
  const int slots = std::min<int>(k, remaining.size());
  for (int slot = 0; slot < slots; ++slot) {
    std::size_t pick;
    if (rng.next_bernoulli(epsilon)) {
      pick = rng.next_below(remaining.size());
    } else {
      pick = 0;
      for (std::size_t i = 1; i < remaining.size(); ++i) {
        if (remaining[i].score > remaining[pick].score) pick = i;
      }
    }
    chosen.push_back(remaining[pick]);
    remaining.erase(remaining.begin() + pick);
  }
  return detail::make_decision(user_id, week, std::move(chosen));
}

/// Greedy on the posterior mean, no exploration.
inline PolicyDecision recommend_pure_exploit(const GaussianPosterior& post,
                                             const UserContext& user_ctx,
                                             std::span<const Candidate> candidates,
                                             int k, const std::string& user_id = {},
                                             int week = 0) {
  return detail::scored_topk(user_id, week,
                             detail::score_with(post.mean, user_ctx, candidates), k);
}

/// Uniform random K-subset; scores are recorded as the uninformed 0.5.
inline PolicyDecision recommend_pure_explore(std::span<const Candidate> candidates,
                                             int k, Rng& rng,
                                             const std::string& user_id = {},
                                             int week = 0) {
  std::vector<std::string> ids;
  ids.reserve(candidates.size());
  for (const Candidate& c : candidates) ids.push_back(c.challenge_id);
  std::sort(ids.begin(), ids.end());
  const std::size_t take = std::min<std::size_t>(k, ids.size());
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + rng.next_below(ids.size() - i);
    std::swap(ids[i], ids[j]);
  }
  std::vector<ScoredItem> chosen;
  for (std::size_t i = 0; i < take; ++i) chosen.push_back({ids[i], 0.5});
  return detail::make_decision(user_id, week, std::move(chosen));
}

/// Content-based filtering: profile = mean feature vector of the user's
/// past selections (zero vector if none); score = cosine similarity, with
/// 0 whenever either vector is zero. Top-K, ties by id.
inline PolicyDecision recommend_cb(const std::string& user_id, int week,
                                   std::span<const ItemFeatures> history,
                                   std::span<const Candidate> candidates, int k) {
  std::vector<double> profile;
  if (!history.empty()) {
    profile.assign(history.front().size(), 0.0);
    for (const ItemFeatures& z : history) {
      if (z.size() != profile.size())
        throw LengthMismatch("recommend_cb: inconsistent history feature lengths");
      for (std::size_t j = 0; j < z.size(); ++j) profile[j] += z[j];
    }
    for (double& p : profile) p /= static_cast<double>(history.size());
  }
  const double profile_norm =
      profile.empty() ? 0.0 : std::sqrt(detail::dot(profile, profile));

  std::vector<ScoredItem> scored;
  scored.reserve(candidates.size());
  for (const Candidate& c : candidates) {
    double score = 0.0;
    if (profile_norm > 0.0) {
      const double z_norm = std::sqrt(detail::dot(c.features, c.features));
      if (z_norm > 0.0 && c.features.size() == profile.size())
        score = detail::dot(profile, c.features) / (profile_norm * z_norm);
    }
    scored.push_back({c.challenge_id, score});
  }
  return detail::scored_topk(user_id, week, std::move(scored), k);
}

// ---------------------------------------------------------------------------
// Probabilistic matrix factorization

struct PmfParams {
  int factors = 8;
  double learning_rate = 0.05;
  double regularization = 0.1;
  int epochs = 50;
};

struct PmfModel {
  PmfParams params;
  std::vector<std::string> users;
  std::vector<std::string> items;
  std::unordered_map<std::string, int> user_index;
  std::unordered_map<std::string, int> item_index;
  std::vector<std::vector<double>> user_factors;
  std::vector<std::vector<double>> item_factors;
  std::vector<double> epoch_loss;  // mean squared objective per epoch

  double predict(const std::string& user, const std::string& item) const {
    auto u = user_index.find(user);
    auto i = item_index.find(item);
    if (u == user_index.end() || i == item_index.end()) return 0.0;  // cold fallback
    double s = 0.0;
    const auto& uf = user_factors[u->second];
    const auto& vf = item_factors[i->second];
    for (int f = 0; f < params.factors; ++f) s += uf[f] * vf[f];
    return s;
  }

  double frobenius_norm_users() const {
    double s = 0.0;
    for (const auto& row : user_factors)
      for (double x : row) s += x * x;
    return std::sqrt(s);
  }
};

/// SGD fit of r ~ U_i^T V_k over observed binary rewards (selected = 1,
/// offered-not-selected = 0) with L2 regularization.
inline PmfModel fit_pmf(const InteractionLog& log, const PmfParams& params, Rng& rng) {
  if (log.empty()) throw EmptyLog("fit_pmf: empty interaction log");
  if (params.factors < 1) throw InvalidArgument("fit_pmf: factors must be >= 1");

  PmfModel model;
  model.params = params;
  for (const LogRecord& rec : log) {
    if (model.user_index.emplace(rec.user_id, model.users.size()).second)
      model.users.push_back(rec.user_id);
    if (model.item_index.emplace(rec.action, model.items.size()).second)
      model.items.push_back(rec.action);
  }
  auto init = [&](std::size_t n) {
    std::vector<std::vector<double>> m(n, std::vector<double>(params.factors));
    for (auto& row : m)
      for (double& x : row) x = 0.1 * rng.next_normal();
    return m;
  };
  model.user_factors = init(model.users.size());
  model.item_factors = init(model.items.size());

  std::vector<std::size_t> order(log.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      const std::size_t j = i + rng.next_below(order.size() - i);
      std::swap(order[i], order[j]);
    }
    double loss = 0.0;
    for (std::size_t pos : order) {
      const LogRecord& rec = log[pos];
      auto& uf = model.user_factors[model.user_index.at(rec.user_id)];
      auto& vf = model.item_factors[model.item_index.at(rec.action)];
      double pred = 0.0;
      for (int f = 0; f < params.factors; ++f) pred += uf[f] * vf[f];
      const double err = rec.reward - pred;
      double reg_term = 0.0;
      for (int f = 0; f < params.factors; ++f) {
        const double u_old = uf[f];
        uf[f] += params.learning_rate * (err * vf[f] - params.regularization * uf[f]);
        vf[f] += params.learning_rate * (err * u_old - params.regularization * vf[f]);
        reg_term += u_old * u_old + vf[f] * vf[f];
      }
      loss += err * err + params.regularization * reg_term;
    }
    model.epoch_loss.push_back(loss / static_cast<double>(log.size()));
  }
  return model;
}

/// Scores = U_i^T V_k; unknown users or items fall back to score 0.
inline PolicyDecision recommend_pmf(const PmfModel& model, const std::string& user_id,
                                    int week, std::span<const Candidate> candidates,
                                    int k) {
  std::vector<ScoredItem> scored;
  scored.reserve(candidates.size());
  for (const Candidate& c : candidates)
    scored.push_back({c.challenge_id, model.predict(user_id, c.challenge_id)});
  return detail::scored_topk(user_id, week, std::move(scored), k);
}

// ---------------------------------------------------------------------------
// Uniform policy interface used by the experiment runner

/// One offered item's outcome, as delivered to observe() once per round.
struct RoundOutcome {
  std::string user_id;
  int week = 0;
  std::string challenge_id;
  ContextVector context;
  ItemFeatures features;
  int reward = 0;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual const std::string& name() const = 0;
  virtual PolicyDecision recommend(const std::string& user_id, int week,
                                   const UserContext& user_ctx,
                                   std::span<const Candidate> candidates,
                                   Rng& rng) = 0;
  virtual void observe(std::span<const RoundOutcome> batch) = 0;
};

namespace detail {

inline void require_candidates(std::span<const Candidate> candidates) {
  if (candidates.empty()) throw EmptyCandidates("policy: no candidates this round");
}

/// Shared logistic posterior state for the bandit policies. The posterior
/// dimension is fixed by the first context seen; observe() runs one Laplace
/// update per round (the round-t posterior becomes the round-t+1 prior).
class LogisticBanditPolicy : public Policy {
 public:
  explicit LogisticBanditPolicy(std::string name) : name_(std::move(name)) {}

  const std::string& name() const override { return name_; }

  void observe(std::span<const RoundOutcome> batch) override {
    if (batch.empty()) return;
    FeedbackBatch fb;
    fb.reserve(batch.size());
    for (const RoundOutcome& o : batch) fb.push_back({o.context, o.reward});
    ensure_posterior(fb.front().context.size());
    posterior_ = update_posterior(posterior_, fb);
  }

  const GaussianPosterior& posterior() const { return posterior_; }
  void set_posterior(GaussianPosterior p) { posterior_ = std::move(p); }

 protected:
  // recommend() runs concurrently across users against a posterior
  // snapshot; lazy initialization must therefore be synchronized
  void ensure_posterior(std::size_t dim) {
    std::call_once(init_once_, [&] {
      if (posterior_.mean.empty())
        posterior_ = GaussianPosterior::standard(static_cast<int>(dim));
    });
  }

  GaussianPosterior posterior_;

 private:
  std::string name_;
  std::once_flag init_once_;
};

}  // namespace detail

class TsDiversePolicy : public detail::LogisticBanditPolicy {
 public:
  TsDiversePolicy(std::string name, int k, DimMask required, WarnFn warn = {})
      : LogisticBanditPolicy(std::move(name)), k_(k), required_(required),
        warn_(std::move(warn)) {}

  PolicyDecision recommend(const std::string& user_id, int week,
                           const UserContext& user_ctx,
                           std::span<const Candidate> candidates, Rng& rng) override {
    detail::require_candidates(candidates);
    ensure_posterior(concat_context(user_ctx, candidates.front().features).size());
    return recommend_ts_diverse(posterior_, user_ctx, candidates, k_, required_, rng,
                                user_id, week, warn_);
  }

 private:
  int k_;
  DimMask required_;
  WarnFn warn_;
};

class UcbPolicy : public detail::LogisticBanditPolicy {
 public:
  UcbPolicy(std::string name, int k, double alpha, DimMask required = {})
      : LogisticBanditPolicy(std::move(name)), k_(k), alpha_(alpha),
        required_(required) {}

  PolicyDecision recommend(const std::string& user_id, int week,
                           const UserContext& user_ctx,
                           std::span<const Candidate> candidates, Rng&) override {
    detail::require_candidates(candidates);
    ensure_posterior(concat_context(user_ctx, candidates.front().features).size());
    PolicyDecision d = recommend_ucb(posterior_, user_ctx, candidates,
                                     required_.empty() ? k_ : static_cast<int>(candidates.size()),
                                     alpha_, user_id, week);
    if (required_.empty()) return d;
    return detail::constrained_select(user_id, week, candidates,
                                      detail::align_scores(candidates, d.items), k_,
                                      required_, {});
  }

 private:
  int k_;
  double alpha_;
  DimMask required_;
};

class EpsGreedyPolicy : public detail::LogisticBanditPolicy {
 public:
  EpsGreedyPolicy(std::string name, int k, double epsilon)
      : LogisticBanditPolicy(std::move(name)), k_(k), epsilon_(epsilon) {}

  PolicyDecision recommend(const std::string& user_id, int week,
                           const UserContext& user_ctx,
                           std::span<const Candidate> candidates, Rng& rng) override {
    detail::require_candidates(candidates);
    ensure_posterior(concat_context(user_ctx, candidates.front().features).size());
    return recommend_eps_greedy(posterior_, user_ctx, candidates, k_, epsilon_, rng,
                                user_id, week);
  }

 private:
  int k_;
  double epsilon_;
};

class PureExploitPolicy : public detail::LogisticBanditPolicy {
 public:
  PureExploitPolicy(std::string name, int k, DimMask required = {})
      : LogisticBanditPolicy(std::move(name)), k_(k), required_(required) {}

  PolicyDecision recommend(const std::string& user_id, int week,
                           const UserContext& user_ctx,
                           std::span<const Candidate> candidates, Rng&) override {
    detail::require_candidates(candidates);
    ensure_posterior(concat_context(user_ctx, candidates.front().features).size());
    if (required_.empty())
      return recommend_pure_exploit(posterior_, user_ctx, candidates, k_, user_id, week);
    return detail::constrained_select(
        user_id, week, candidates,
        detail::score_with(posterior_.mean, user_ctx, candidates), k_, required_, {});
  }

 private:
  int k_;
  DimMask required_;
};

class PureExplorePolicy : public Policy {
 public:
  PureExplorePolicy(std::string name, int k) : name_(std::move(name)), k_(k) {}

  const std::string& name() const override { return name_; }

  PolicyDecision recommend(const std::string& user_id, int week, const UserContext&,
                           std::span<const Candidate> candidates, Rng& rng) override {
    return recommend_pure_explore(candidates, k_, rng, user_id, week);
  }

  void observe(std::span<const RoundOutcome>) override {}  // never learns

 private:
  std::string name_;
  int k_;
};

/// Content-based policy; the per-user profile is the running mean of the
/// feature vectors of selected items.
class CbPolicy : public Policy {
 public:
  CbPolicy(std::string name, int k, DimMask required = {})
      : name_(std::move(name)), k_(k), required_(required) {}

  const std::string& name() const override { return name_; }

  PolicyDecision recommend(const std::string& user_id, int week, const UserContext&,
                           std::span<const Candidate> candidates, Rng&) override {
    detail::require_candidates(candidates);
    auto it = history_.find(user_id);
    static const std::vector<ItemFeatures> kEmpty;
    const auto& hist = it == history_.end() ? kEmpty : it->second;
    if (required_.empty()) return recommend_cb(user_id, week, hist, candidates, k_);
    PolicyDecision all = recommend_cb(user_id, week, hist, candidates,
                                      static_cast<int>(candidates.size()));
    return detail::constrained_select(user_id, week, candidates,
                                      detail::align_scores(candidates, all.items), k_,
                                      required_, {});
  }

  void observe(std::span<const RoundOutcome> batch) override {
    for (const RoundOutcome& o : batch) {
      if (o.reward) history_[o.user_id].push_back(o.features);
    }
  }

  const std::vector<ItemFeatures>& history(const std::string& user) const {
    static const std::vector<ItemFeatures> kEmpty;
    auto it = history_.find(user);
    return it == history_.end() ? kEmpty : it->second;
  }

 private:
  std::string name_;
  int k_;
  DimMask required_;
  std::unordered_map<std::string, std::vector<ItemFeatures>> history_;
};

/// PMF policy, batch-trained: accumulates observations and fits once after
/// `train_rounds` observed rounds ("first learn, then earn"); afterwards the
/// model stays fixed unless refit_every > 0.
class PmfPolicy : public Policy {
 public:
  PmfPolicy(std::string name, int k, PmfParams params, int train_rounds, Rng rng,
            int refit_every = 0, DimMask required = {})
      : name_(std::move(name)), k_(k), params_(params), train_rounds_(train_rounds),
        refit_every_(refit_every), rng_(rng), required_(required) {}

  const std::string& name() const override { return name_; }

  PolicyDecision recommend(const std::string& user_id, int week, const UserContext&,
                           std::span<const Candidate> candidates, Rng&) override {
    detail::require_candidates(candidates);
    std::vector<ScoredItem> scored;
    scored.reserve(candidates.size());
    for (const Candidate& c : candidates)
      scored.push_back({c.challenge_id, model_ ? model_->predict(user_id, c.challenge_id) : 0.0});
    if (required_.empty())
      return detail::scored_topk(user_id, week, std::move(scored), k_);
    return detail::constrained_select(user_id, week, candidates, std::move(scored), k_,
                                      required_, {});
  }

  void observe(std::span<const RoundOutcome> batch) override {
    ++rounds_seen_;
    for (const RoundOutcome& o : batch)
      log_.push_back({o.user_id, o.week, o.challenge_id, {}, o.reward, 1.0});
    const bool initial_fit = !model_ && rounds_seen_ >= train_rounds_;
    const bool refit = model_ && refit_every_ > 0 &&
                       (rounds_seen_ - train_rounds_) % refit_every_ == 0;
    if ((initial_fit || refit) && !log_.empty())
      model_ = fit_pmf(log_, params_, rng_);
  }

  const PmfModel* model() const { return model_ ? &*model_ : nullptr; }

 private:
  std::string name_;
  int k_;
  PmfParams params_;
  int train_rounds_;
  int refit_every_;
  Rng rng_;
  DimMask required_;
  InteractionLog log_;
  std::optional<PmfModel> model_;
  int rounds_seen_ = 0;
};

}  // namespace banditrex
