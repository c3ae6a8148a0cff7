#include "catch_amalgamated.hpp"

#include <cmath>
#include <set>

#include "banditrex/policies.hpp"
#include "banditrex/rng.hpp"

using namespace banditrex;

namespace {

std::vector<Candidate> three_dim_candidates() {
  auto mask = [](std::uint8_t bits) { return DimMask::from_bits(bits); };
  // z features: one coordinate per dimension plus a bias-ish coordinate
  return {
      {"cd", {1, 0, 0, 1}, mask(1 << 1)},   // diet
      {"ce", {0, 1, 0, 1}, mask(1 << 2)},   // exercise
      {"cw", {0, 0, 1, 1}, mask(1 << 0)},   // weight loss
  };
}

std::vector<Candidate> plain_candidates(int n, int dim, Rng& rng) {
  std::vector<Candidate> out;
  for (int i = 0; i < n; ++i) {
    char id[8];
    std::snprintf(id, sizeof(id), "c%02d", i);
    ItemFeatures z(dim);
    for (double& x : z) x = rng.next_double();
    out.push_back({id, std::move(z), DimMask::from_bits(
                                         static_cast<std::uint8_t>(1 + rng.next_below(7)))});
  }
  return out;
}

std::set<std::string> ids_of(const PolicyDecision& d) {
  std::set<std::string> out;
  for (const auto& item : d.items) out.insert(item.challenge_id);
  return out;
}

}  // namespace

TEST_CASE("ts with degenerate posterior equals constrained exploitation", "[policies]") {
  auto candidates = three_dim_candidates();
  candidates.push_back({"cm", {1, 1, 0, 0}, DimMask::from_bits((1 << 1) | (1 << 2))});
  candidates.push_back({"cn", {0.2, 0.4, 0.8, 0}, DimMask::all()});
  const UserContext x(2, 0.5);
  GaussianPosterior post = GaussianPosterior::standard(1 + 2 + 4);
  Rng prior_rng(9);
  for (double& m : post.mean) m = prior_rng.next_normal();
  for (double& v : post.variance) v = 1e-12;

  Rng rng(4);
  const auto ts = recommend_ts_diverse(post, x, candidates, 3, DimMask::all(), rng);

  // mean-exploitation scores with the diversity constraint applied directly
  SelectionProblem problem;
  problem.k = 3;
  problem.required = DimMask::all();
  for (const auto& c : candidates) {
    const auto v = concat_context(x, c.features);
    problem.candidates.push_back({c.challenge_id, expected_reward(post.mean, v), c.mask});
  }
  const auto expected = solve_constrained_topk(problem);
  REQUIRE(ids_of(ts) == std::set<std::string>(expected.begin(), expected.end()));
}

TEST_CASE("ts decisions are reproducible under a fixed seed", "[policies]") {
  const auto candidates = three_dim_candidates();
  const UserContext x(2, 0.25);
  const GaussianPosterior post = GaussianPosterior::standard(7);
  Rng a(123), b(123);
  const auto d1 = recommend_ts_diverse(post, x, candidates, 3, DimMask::all(), a);
  const auto d2 = recommend_ts_diverse(post, x, candidates, 3, DimMask::all(), b);
  REQUIRE(ids_of(d1) == ids_of(d2));
  for (std::size_t i = 0; i < d1.items.size(); ++i) {
    REQUIRE(d1.items[i].challenge_id == d2.items[i].challenge_id);
    REQUIRE(d1.items[i].score == d2.items[i].score);
  }
}

TEST_CASE("ts coverage is forced when each dim has one coverer", "[policies]") {
  const auto candidates = three_dim_candidates();
  const UserContext x(2, 0.9);
  const GaussianPosterior post = GaussianPosterior::standard(7);
  Rng rng(5);
  for (int draw = 0; draw < 20; ++draw) {
    const auto d = recommend_ts_diverse(post, x, candidates, 3, DimMask::all(), rng);
    REQUIRE(ids_of(d) == std::set<std::string>{"cd", "ce", "cw"});
  }
}

TEST_CASE("ucb ranking and bonus arithmetic", "[policies]") {
  SECTION("alpha 0 equals mean exploitation") {
    Rng rng(21);
    const auto candidates = plain_candidates(8, 4, rng);
    const UserContext x(3, 0.5);
    GaussianPosterior post = GaussianPosterior::standard(8);
    for (double& m : post.mean) m = rng.next_normal();
    const auto ucb = recommend_ucb(post, x, candidates, 4, 0.0);
    const auto exploit = recommend_pure_exploit(post, x, candidates, 4);
    REQUIRE(ids_of(ucb) == ids_of(exploit));
  }
  SECTION("larger variance-weighted norm ranks first at equal mean logit") {
    // d = 3: intercept + one user coord + one item coord
    GaussianPosterior post;
    post.mean = {0.0, 0.0, 0.0};
    post.variance = {1e-12, 1e-12, 4.0};
    const UserContext x = {0.5};
    const std::vector<Candidate> candidates = {
        {"low", {0.1}, DimMask{}},   // small item coordinate, small bonus
        {"high", {0.9}, DimMask{}},  // same mean logit (0), larger bonus
    };
    const auto d = recommend_ucb(post, x, candidates, 1, 1.0);
    REQUIRE(d.items.front().challenge_id == "high");
  }
  SECTION("hand-computed score at alpha 1") {
    GaussianPosterior post;
    post.mean = {0.0, 0.0};
    post.variance = {1.0, 1.0};
    const UserContext x = {1.0};
    const std::vector<Candidate> candidates = {{"a", {}, DimMask{}}};
    // v = [1, 1]: bonus = sqrt(1 + 1) = sqrt(2), score = sigmoid(sqrt(2))
    const auto d = recommend_ucb(post, x, candidates, 1, 1.0);
    REQUIRE(d.items.front().score == Catch::Approx(0.8044).margin(5e-5));
  }
  SECTION("negative alpha is rejected") {
    const GaussianPosterior post = GaussianPosterior::standard(7);
    const auto candidates = three_dim_candidates();
    REQUIRE_THROWS_AS(recommend_ucb(post, UserContext(2, 0.0), candidates, 1, -0.1),
                      InvalidArgument);
  }
}

TEST_CASE("eps greedy endpoints", "[policies]") {
  Rng init(3);
  const auto candidates = plain_candidates(10, 3, init);
  const UserContext x(2, 0.5);
  GaussianPosterior post = GaussianPosterior::standard(6);
  for (double& m : post.mean) m = init.next_normal();

  SECTION("epsilon 0 is exact greedy") {
    Rng rng(1);
    const auto greedy = recommend_eps_greedy(post, x, candidates, 4, 0.0, rng);
    const auto exploit = recommend_pure_exploit(post, x, candidates, 4);
    REQUIRE(ids_of(greedy) == ids_of(exploit));
  }
  SECTION("epsilon 1 inclusion frequencies are uniform") {
    const int trials = 10000;
    const int k = 3;
    std::map<std::string, int> counts;
    Rng rng(77);
    for (int t = 0; t < trials; ++t) {
      const auto d = recommend_eps_greedy(post, x, candidates, k, 1.0, rng);
      for (const auto& item : d.items) counts[item.challenge_id]++;
    }
    const double p = static_cast<double>(k) / candidates.size();
    const double sigma = std::sqrt(trials * p * (1 - p));
    for (const auto& c : candidates)
      REQUIRE(std::abs(counts[c.challenge_id] - trials * p) <= 3 * sigma);
  }
  SECTION("fixed seed reproduces the decision") {
    Rng a(5), b(5);
    const auto d1 = recommend_eps_greedy(post, x, candidates, 4, 0.1, a);
    const auto d2 = recommend_eps_greedy(post, x, candidates, 4, 0.1, b);
    REQUIRE(ids_of(d1) == ids_of(d2));
  }
}

TEST_CASE("pure exploitation follows the item coordinate", "[policies]") {
  // d = 2 (intercept + item coordinate), posterior mean [0, 1]: ranking by z
  GaussianPosterior post;
  post.mean = {0.0, 1.0};
  post.variance = {1.0, 1.0};
  const UserContext x = {};
  std::vector<Candidate> candidates = {
      {"a", {0.3}, DimMask{}}, {"b", {0.9}, DimMask{}}, {"c", {0.5}, DimMask{}}};
  const auto d = recommend_pure_exploit(post, x, candidates, 3);
  REQUIRE(d.items[0].challenge_id == "b");
  REQUIRE(d.items[1].challenge_id == "c");
  REQUIRE(d.items[2].challenge_id == "a");

  const auto again = recommend_pure_exploit(post, x, candidates, 3);
  REQUIRE(ids_of(d) == ids_of(again));
}

TEST_CASE("pure exploration is uniform", "[policies]") {
  Rng init(8);
  const auto candidates = plain_candidates(12, 3, init);
  const int trials = 10000;
  const int k = 4;
  std::map<std::string, int> counts;
  Rng rng(31);
  for (int t = 0; t < trials; ++t) {
    const auto d = recommend_pure_explore(candidates, k, rng);
    REQUIRE(d.items.size() == static_cast<std::size_t>(k));
    for (const auto& item : d.items) counts[item.challenge_id]++;
  }
  const double p = static_cast<double>(k) / candidates.size();
  const double sigma = std::sqrt(trials * p * (1 - p));
  for (const auto& c : candidates)
    REQUIRE(std::abs(counts[c.challenge_id] - trials * p) <= 3 * sigma);
}

TEST_CASE("collapsed policies agree on the argmax set", "[policies]") {
  Rng rng(101);
  const auto candidates = plain_candidates(15, 4, rng);
  const UserContext x(3, 0.4);
  GaussianPosterior post = GaussianPosterior::standard(8);
  for (double& m : post.mean) m = rng.next_normal();
  for (double& v : post.variance) v = 1e-12;

  Rng ts_rng(1);
  const auto ts = recommend_ts_diverse(post, x, candidates, 5, DimMask{}, ts_rng);
  const auto ucb = recommend_ucb(post, x, candidates, 5, 0.0);
  const auto exploit = recommend_pure_exploit(post, x, candidates, 5);
  REQUIRE(ids_of(ts) == ids_of(exploit));
  REQUIRE(ids_of(ucb) == ids_of(exploit));
}

TEST_CASE("content-based scoring", "[policies]") {
  const auto candidates = three_dim_candidates();
  SECTION("no history scores everything 0 and falls back to id order") {
    const auto d = recommend_cb("u1", 1, {}, candidates, 2);
    REQUIRE(d.items.size() == 2);
    REQUIRE(d.items[0].challenge_id == "cd");
    REQUIRE(d.items[1].challenge_id == "ce");
    for (const auto& item : d.items) REQUIRE(item.score == 0.0);
  }
  SECTION("identical item scores cosine 1") {
    const std::vector<ItemFeatures> history = {{1, 0, 0, 1}};  // equals cd
    const auto d = recommend_cb("u1", 1, history, candidates, 1);
    REQUIRE(d.items.front().challenge_id == "cd");
    REQUIRE(d.items.front().score == Catch::Approx(1.0).margin(1e-12));
  }
  SECTION("orthogonal vectors score 0") {
    const std::vector<ItemFeatures> history = {{1, 0}};
    const std::vector<Candidate> cands = {{"o", {0, 1}, DimMask{}}};
    const auto d = recommend_cb("u1", 1, history, cands, 1);
    REQUIRE(d.items.front().score == 0.0);
  }
}

TEST_CASE("pmf recovers a rank-1 structure", "[policies]") {
  Rng rng(606);
  const int n_users = 20, n_items = 15;
  std::vector<double> u(n_users), v(n_items);
  for (double& x : u) x = rng.next_double();
  for (double& x : v) x = rng.next_double();

  InteractionLog log;
  for (int i = 0; i < n_users; ++i) {
    for (int k = 0; k < n_items; ++k) {
      const int r = u[i] * v[k] > 0.25 ? 1 : 0;  // thresholded rank-1 matrix
      log.push_back({"u" + std::to_string(i), 1, "c" + std::to_string(k), {}, r, 1.0});
    }
  }
  PmfParams params;
  params.factors = 1;
  params.epochs = 120;
  Rng fit_rng(7);
  const PmfModel model = fit_pmf(log, params, fit_rng);

  double sq = 0.0;
  for (const LogRecord& rec : log) {
    const double err = rec.reward - model.predict(rec.user_id, rec.action);
    sq += err * err;
  }
  REQUIRE(std::sqrt(sq / log.size()) <= 0.25);
}

TEST_CASE("pmf regularization shrinks the factors", "[policies]") {
  Rng rng(11);
  InteractionLog log;
  for (int i = 0; i < 10; ++i)
    for (int k = 0; k < 8; ++k)
      log.push_back({"u" + std::to_string(i), 1, "c" + std::to_string(k), {},
                     static_cast<int>(rng.next_below(2)), 1.0});
  PmfParams loose;
  loose.regularization = 0.0;
  PmfParams tight;
  tight.regularization = 1000.0;
  tight.learning_rate = 0.001;  // keep the strongly regularized run stable
  Rng a(5), b(5);
  const PmfModel free_fit = fit_pmf(log, loose, a);
  const PmfModel ridge_fit = fit_pmf(log, tight, b);
  REQUIRE(ridge_fit.frobenius_norm_users() < free_fit.frobenius_norm_users());
}

TEST_CASE("pmf epoch loss is non-increasing up to sgd noise", "[policies]") {
  Rng rng(17);
  InteractionLog log;
  for (int i = 0; i < 30; ++i)
    for (int k = 0; k < 10; ++k)
      log.push_back({"u" + std::to_string(i), 1, "c" + std::to_string(k), {},
                     static_cast<int>(rng.next_below(2)), 1.0});
  PmfParams params;
  Rng fit_rng(23);
  const PmfModel model = fit_pmf(log, params, fit_rng);
  REQUIRE(model.epoch_loss.size() == static_cast<std::size_t>(params.epochs));
  for (std::size_t e = 1; e < model.epoch_loss.size(); ++e)
    REQUIRE(model.epoch_loss[e] <= model.epoch_loss[e - 1] + 0.02);
}

TEST_CASE("pmf cold start falls back to the first k ids", "[policies]") {
  InteractionLog log = {{"u1", 1, "c1", {}, 1, 1.0}};
  Rng rng(1);
  const PmfModel model = fit_pmf(log, PmfParams{}, rng);
  const auto candidates = three_dim_candidates();
  const auto d = recommend_pmf(model, "stranger", 1, candidates, 2);
  REQUIRE(d.items[0].challenge_id == "cd");
  REQUIRE(d.items[1].challenge_id == "ce");
  for (const auto& item : d.items) REQUIRE(item.score == 0.0);

  REQUIRE_THROWS_AS(fit_pmf({}, PmfParams{}, rng), EmptyLog);
}

TEST_CASE("observe_feedback state transitions", "[policies]") {
  SECTION("empty batch leaves state unchanged") {
    TsDiversePolicy policy("ts", 3, DimMask::all());
    const auto candidates = three_dim_candidates();
    const UserContext x(2, 0.5);
    Rng rng(1);
    policy.recommend("u1", 1, x, candidates, rng);  // initializes the posterior
    const GaussianPosterior before = policy.posterior();
    policy.observe({});
    REQUIRE(policy.posterior() == before);
  }
  SECTION("ts precision never decreases across observes") {
    TsDiversePolicy policy("ts", 3, DimMask::all());
    const auto candidates = three_dim_candidates();
    const UserContext x(2, 0.5);
    Rng rng(2);
    policy.recommend("u1", 1, x, candidates, rng);
    GaussianPosterior prev = policy.posterior();
    for (int round = 0; round < 3; ++round) {
      std::vector<RoundOutcome> batch;
      for (const auto& c : candidates) {
        batch.push_back({"u1", round + 1, c.challenge_id,
                         concat_context(x, c.features), c.features,
                         static_cast<int>(rng.next_below(2))});
      }
      policy.observe(batch);
      for (int j = 0; j < prev.dim(); ++j)
        REQUIRE(1.0 / policy.posterior().variance[j] >= 1.0 / prev.variance[j] - 1e-12);
      prev = policy.posterior();
    }
  }
  SECTION("cb profile is the running mean of selections") {
    CbPolicy policy("cb", 2);
    std::vector<RoundOutcome> batch = {
        {"u1", 1, "cd", {}, {1, 0, 0, 1}, 1},
        {"u1", 1, "ce", {}, {0, 1, 0, 1}, 0},  // not selected, must be ignored
        {"u1", 1, "cw", {}, {0, 0, 1, 1}, 1},
    };
    policy.observe(batch);
    REQUIRE(policy.history("u1").size() == 2);
    // scoring a candidate equal to the profile mean gives cosine 1
    const ItemFeatures mean = {0.5, 0, 0.5, 1};
    const std::vector<Candidate> cands = {{"m", mean, DimMask{}}};
    Rng rng(1);
    const auto d = policy.recommend("u1", 2, {}, cands, rng);
    REQUIRE(d.items.front().score == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("policy decisions respect availability and size", "[policies]") {
  Rng rng(55);
  const UserContext x(2, 0.5);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 3 + static_cast<int>(rng.next_below(20));
    const auto candidates = plain_candidates(n, 3, rng);
    std::set<std::string> available;
    for (const auto& c : candidates) available.insert(c.challenge_id);
    const int k = 3 + static_cast<int>(rng.next_below(6));

    GaussianPosterior post = GaussianPosterior::standard(6);
    std::vector<PolicyDecision> decisions;
    Rng r1(trial), r2(trial + 1), r3(trial + 2);
    decisions.push_back(recommend_ts_diverse(post, x, candidates, k, DimMask::all(), r1));
    decisions.push_back(recommend_ucb(post, x, candidates, k, 1.0));
    decisions.push_back(recommend_eps_greedy(post, x, candidates, k, 0.3, r2));
    decisions.push_back(recommend_pure_exploit(post, x, candidates, k));
    decisions.push_back(recommend_pure_explore(candidates, k, r3));

    for (const auto& d : decisions) {
      REQUIRE(d.items.size() <= static_cast<std::size_t>(k));
      std::set<std::string> seen;
      for (const auto& item : d.items) {
        REQUIRE(available.count(item.challenge_id) == 1);
        REQUIRE(seen.insert(item.challenge_id).second);  // no duplicates
      }
    }
  }
}
