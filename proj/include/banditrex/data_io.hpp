#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "banditrex/csv.hpp"
#include "banditrex/domain.hpp"
#include "banditrex/reward_model.hpp"
#include "banditrex/simdata.hpp"

namespace banditrex::io {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Domain CSV schemas. Headers are fixed; doubles round-trip exactly via
// shortest-representation formatting.

inline const std::vector<std::string> kChallengesHeader = {
    "challenge_id", "title", "description", "specific", "measurable", "diet",
    "intensity_diet", "activity", "intensity_activity", "weight_loss",
    "intensity_weight_loss", "motivational", "self_monitoring",
    "duration_weeks", "start_week", "end_week"};

inline const std::vector<std::string> kUsersHeader = {
    "user_id", "gender", "age", "initial_weight", "membership_weeks",
    "friends", "posts"};

inline const std::vector<std::string> kWeighinsHeader = {"user_id", "week", "weight"};

inline const std::vector<std::string> kSelectionsHeader = {
    "user_id", "week", "challenge_id", "propensity"};

inline void save_challenges(const Catalog& catalog, const std::string& path) {
  csv::Writer w(path);
  w.row(kChallengesHeader);
  for (const ChallengeRecord& c : catalog.items()) {
    const ChallengeMeta& m = c.meta;
    w.row({c.challenge_id, c.title, c.description,
           m.specific ? "1" : "0", m.measurable ? "1" : "0", m.diet ? "1" : "0",
           intensity_name(m.intensity_diet), m.activity ? "1" : "0",
           intensity_name(m.intensity_activity), m.weight_loss ? "1" : "0",
           intensity_name(m.intensity_weight_loss), m.motivational ? "1" : "0",
           m.self_monitoring ? "1" : "0", std::to_string(m.duration_weeks),
           std::to_string(c.start_week), std::to_string(c.end_week)});
  }
}

inline bool parse_flag(const std::string& s, const std::string& where) {
  if (s == "0") return false;
  if (s == "1") return true;
  throw ParseError(where + ": flag must be 0 or 1, got '" + s + "'");
}

inline Catalog load_challenges(const std::string& path) {
  const csv::Table t = csv::read_file(path);
  csv::expect_header(t, kChallengesHeader, path);
  std::vector<ChallengeRecord> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = path + ":" + std::to_string(r + 2);
    ChallengeRecord rec;
    rec.challenge_id = row[0];
    rec.title = row[1];
    rec.description = row[2];
    ChallengeMeta& m = rec.meta;
    m.specific = parse_flag(row[3], where);
    m.measurable = parse_flag(row[4], where);
    m.diet = parse_flag(row[5], where);
    m.intensity_diet = parse_intensity(row[6], where);
    m.activity = parse_flag(row[7], where);
    m.intensity_activity = parse_intensity(row[8], where);
    m.weight_loss = parse_flag(row[9], where);
    m.intensity_weight_loss = parse_intensity(row[10], where);
    m.motivational = parse_flag(row[11], where);
    m.self_monitoring = parse_flag(row[12], where);
    m.duration_weeks = static_cast<int>(csv::parse_int(row[13], where));
    rec.start_week = static_cast<int>(csv::parse_int(row[14], where));
    rec.end_week = static_cast<int>(csv::parse_int(row[15], where));
    out.push_back(std::move(rec));
  }
  return Catalog(std::move(out));
}

inline void save_users(const std::vector<UserProfile>& users, const std::string& path) {
  csv::Writer w(path);
  w.row(kUsersHeader);
  for (const UserProfile& u : users) {
    w.row({u.user_id, u.gender ? "1" : "0", csv::format_double(u.age),
           csv::format_double(u.initial_weight), std::to_string(u.membership_weeks),
           std::to_string(u.friends), std::to_string(u.posts)});
  }
}

inline std::vector<UserProfile> load_users(const std::string& path) {
  const csv::Table t = csv::read_file(path);
  csv::expect_header(t, kUsersHeader, path);
  std::vector<UserProfile> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = path + ":" + std::to_string(r + 2);
    UserProfile u;
    u.user_id = row[0];
    u.gender = parse_flag(row[1], where);
    u.age = csv::parse_double(row[2], where);
    u.initial_weight = csv::parse_double(row[3], where);
    u.membership_weeks = static_cast<int>(csv::parse_int(row[4], where));
    u.friends = csv::parse_int(row[5], where);
    u.posts = csv::parse_int(row[6], where);
    u.validate();
    out.push_back(std::move(u));
  }
  return out;
}

inline void save_weighins(const std::vector<WeighIn>& rows, const std::string& path) {
  csv::Writer w(path);
  w.row(kWeighinsHeader);
  for (const WeighIn& r : rows)
    w.row({r.user_id, std::to_string(r.week), csv::format_double(r.weight)});
}

inline std::vector<WeighIn> load_weighins(const std::string& path) {
  const csv::Table t = csv::read_file(path);
  csv::expect_header(t, kWeighinsHeader, path);
  std::vector<WeighIn> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = path + ":" + std::to_string(r + 2);
    WeighIn w;
    w.user_id = row[0];
    w.week = static_cast<int>(csv::parse_int(row[1], where));
    w.weight = csv::parse_double(row[2], where);
    w.validate();
    out.push_back(std::move(w));
  }
  return out;
}

inline void save_selections(const std::vector<SelectionEvent>& rows,
                            const std::string& path) {
  csv::Writer w(path);
  w.row(kSelectionsHeader);
  for (const SelectionEvent& r : rows) {
    w.row({r.user_id, std::to_string(r.week), r.challenge_id,
           r.propensity ? csv::format_double(*r.propensity) : ""});
  }
}

inline std::vector<SelectionEvent> load_selections(const std::string& path) {
  const csv::Table t = csv::read_file(path);
  csv::expect_header(t, kSelectionsHeader, path);
  std::vector<SelectionEvent> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = path + ":" + std::to_string(r + 2);
    SelectionEvent s;
    s.user_id = row[0];
    s.week = static_cast<int>(csv::parse_int(row[1], where));
    s.challenge_id = row[2];
    if (!row[3].empty()) s.propensity = csv::parse_double(row[3], where);
    s.validate();
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON documents

inline json env_config_to_json(const EnvConfig& cfg) {
  return json{{"n_users", cfg.n_users},
              {"n_challenges", cfg.n_challenges},
              {"horizon_weeks", cfg.horizon_weeks},
              {"weekly_pool", cfg.weekly_pool},
              {"K", cfg.k},
              {"seed", cfg.seed},
              {"ground_truth_sigma", cfg.ground_truth_sigma},
              {"type_mix",
               {{"weight_loss", cfg.type_mix.weight_loss},
                {"diet", cfg.type_mix.diet},
                {"exercise", cfg.type_mix.exercise}}}};
}

inline EnvConfig env_config_from_json(const json& j, const std::string& where) {
  EnvConfig cfg;
  try {
    if (j.contains("n_users")) cfg.n_users = j.at("n_users").get<int>();
    if (j.contains("n_challenges")) cfg.n_challenges = j.at("n_challenges").get<int>();
    if (j.contains("horizon_weeks"))
      cfg.horizon_weeks = j.at("horizon_weeks").get<int>();
    if (j.contains("weekly_pool")) cfg.weekly_pool = j.at("weekly_pool").get<int>();
    if (j.contains("K")) cfg.k = j.at("K").get<int>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("ground_truth_sigma"))
      cfg.ground_truth_sigma = j.at("ground_truth_sigma").get<double>();
    if (j.contains("type_mix")) {
      const json& tm = j.at("type_mix");
      if (tm.contains("weight_loss"))
        cfg.type_mix.weight_loss = tm.at("weight_loss").get<double>();
      if (tm.contains("diet")) cfg.type_mix.diet = tm.at("diet").get<double>();
      if (tm.contains("exercise"))
        cfg.type_mix.exercise = tm.at("exercise").get<double>();
    }
  } catch (const json::exception& e) {
    throw InvalidConfig(where, e.what());
  }
  cfg.validate();
  return cfg;
}

inline constexpr int kGroundTruthVersion = 1;
inline constexpr int kPosteriorVersion = 1;

inline void save_ground_truth(const SyntheticEnvironment& env, const std::string& path) {
  json j{{"version", kGroundTruthVersion},
         {"seed", env.config.seed},
         {"config", env_config_to_json(env.config)},
         {"zeta", env.zeta},
         {"omega", env.omega}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << j.dump(2) << '\n';
}

/// Serializes the posterior as the versioned document {version, d, m, v}.
inline json posterior_to_json(const GaussianPosterior& post) {
  return json{{"version", kPosteriorVersion},
              {"d", post.dim()},
              {"m", post.mean},
              {"v", post.variance}};
}

inline GaussianPosterior posterior_from_json(const json& j) {
  if (!j.is_object() || !j.contains("version"))
    throw ParseError("posterior: not a versioned document");
  if (j.at("version").get<int>() != kPosteriorVersion)
    throw ParseError("posterior: unsupported version " +
                     j.at("version").dump());
  GaussianPosterior post;
  post.mean = j.at("m").get<std::vector<double>>();
  post.variance = j.at("v").get<std::vector<double>>();
  if (j.at("d").get<int>() != post.dim())
    throw ParseError("posterior: d does not match m length");
  post.validate();
  return post;
}

// ---------------------------------------------------------------------------
// Whole-environment persistence

inline void save_environment(const SyntheticEnvironment& env, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  save_challenges(env.catalog, (base / "challenges.csv").string());
  save_users(env.users, (base / "users.csv").string());
  save_ground_truth(env, (base / "ground_truth.json").string());
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingDataFile("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return j;
}

/// Rebuilds the environment from challenges.csv, users.csv and
/// ground_truth.json; weekly pools are re-derived from the availability
/// windows, so a saved environment loads back bit-identically.
inline SyntheticEnvironment load_environment(const std::string& dir) {
  const std::filesystem::path base(dir);
  const json gt = read_json_file((base / "ground_truth.json").string());
  if (!gt.contains("version") || gt.at("version").get<int>() != kGroundTruthVersion)
    throw ParseError(dir + "/ground_truth.json: unsupported version");

  SyntheticEnvironment env;
  env.config = env_config_from_json(gt.at("config"), dir + "/ground_truth.json");
  env.zeta = gt.at("zeta").get<std::vector<double>>();
  env.omega = gt.at("omega").get<std::vector<double>>();
  env.catalog = load_challenges((base / "challenges.csv").string());
  env.users = load_users((base / "users.csv").string());

  env.weekly_pools.assign(env.config.horizon_weeks, {});
  for (int w = 1; w <= env.config.horizon_weeks; ++w) {
    for (std::size_t i = 0; i < env.catalog.size(); ++i) {
      if (env.catalog.items()[i].available(w))
        env.weekly_pools[w - 1].push_back(static_cast<int>(i));
    }
  }
  return env;
}

inline void save_generated_data(const GeneratedData& data, const std::string& dir) {
  const std::filesystem::path base(dir);
  save_weighins(data.weighins, (base / "weighins.csv").string());
  save_selections(data.selections, (base / "selections.csv").string());
}

}  // namespace banditrex::io
