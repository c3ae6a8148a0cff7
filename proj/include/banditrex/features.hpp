#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "banditrex/csv.hpp"
#include "banditrex/domain.hpp"
#include "banditrex/errors.hpp"

namespace banditrex {

using FeatureVector = std::vector<double>;

/// User context x_it, length 12:
/// [gender, age/100, initial_weight/150, membership_weeks/520,
///  ewma_weight_delta, weighin_rate_4w, ln(1+friends)/10, ln(1+posts)/10,
///  sel_rate_weightloss_4w, sel_rate_diet_4w, sel_rate_exercise_4w,
///  weeks_since_last_selection/16]
/// All entries except ewma_weight_delta are clamped to [0,1].
using UserContext = FeatureVector;

/// Item features z_k: either the 11-dim meta encoding or an embedding row.
using ItemFeatures = FeatureVector;

/// Concatenated model input v = [1, x_it, z_k].
using ContextVector = FeatureVector;

inline constexpr int kUserContextDim = 12;
inline constexpr double kEwmaLambda = 0.5;
inline constexpr int kTrailingWindowWeeks = 4;

namespace detail {
inline double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }
}  // namespace detail

/// Builds x_it from strictly past data. Entries at week >= `week` are
/// ignored, so perturbing future events can never change the output.
/// Trailing-window statistics use weeks [week-4, week-1].
inline UserContext build_user_context(const UserProfile& profile,
                                      std::span<const WeighIn> weighins,
                                      std::span<const SelectionEvent> selections,
                                      const Catalog& catalog, int week) {
  using detail::clamp01;
  UserContext x(kUserContextDim, 0.0);
  x[0] = profile.gender ? 1.0 : 0.0;
  x[1] = clamp01(profile.age / 100.0);
  x[2] = clamp01(profile.initial_weight / 150.0);
  x[3] = clamp01(profile.membership_weeks / 520.0);

  // Weekly weight trajectory: one weight per past week, later rows win.
  std::map<int, double> weight_by_week;
  for (const WeighIn& w : weighins) {
    if (w.user_id == profile.user_id && w.week < week)
      weight_by_week[w.week] = w.weight;
  }
  if (weight_by_week.size() >= 2) {
    double ewma = 0.0;
    bool first_delta = true;
    auto it = weight_by_week.begin();
    double prev = it->second;
    for (++it; it != weight_by_week.end(); ++it) {
      const double delta = it->second - prev;
      ewma = first_delta ? delta : kEwmaLambda * delta + (1.0 - kEwmaLambda) * ewma;
      first_delta = false;
      prev = it->second;
    }
    x[4] = ewma;
  }

  int weighin_weeks = 0;
  for (int w = week - kTrailingWindowWeeks; w <= week - 1; ++w) {
    if (weight_by_week.count(w)) ++weighin_weeks;
  }
  x[5] = static_cast<double>(weighin_weeks) / kTrailingWindowWeeks;

  x[6] = clamp01(std::log1p(static_cast<double>(profile.friends)) / 10.0);
  x[7] = clamp01(std::log1p(static_cast<double>(profile.posts)) / 10.0);

  int dim_counts[kNumDimensions] = {0, 0, 0};
  int last_selection_week = -1;
  for (const SelectionEvent& s : selections) {
    if (s.user_id != profile.user_id || s.week >= week) continue;
    last_selection_week = std::max(last_selection_week, s.week);
    if (s.week >= week - kTrailingWindowWeeks) {
      const ChallengeRecord* rec = catalog.find(s.challenge_id);
      if (!rec) continue;
      const DimMask mask = dimension_mask(rec->meta);
      for (int d = 0; d < kNumDimensions; ++d) {
        if (mask.has(static_cast<Dimension>(d))) ++dim_counts[d];
      }
    }
  }
  x[8] = clamp01(dim_counts[static_cast<int>(Dimension::kWeightLoss)] /
                 static_cast<double>(kTrailingWindowWeeks));
  x[9] = clamp01(dim_counts[static_cast<int>(Dimension::kDiet)] /
                 static_cast<double>(kTrailingWindowWeeks));
  x[10] = clamp01(dim_counts[static_cast<int>(Dimension::kExercise)] /
                  static_cast<double>(kTrailingWindowWeeks));

  x[11] = last_selection_week < 0
              ? 1.0
              : clamp01((week - last_selection_week) / 16.0);
  return x;
}

/// Table of externally computed embedding rows, keyed by entity id and
/// optionally by week. All rows have the same length.
class EmbeddingTable {
 public:
  EmbeddingTable(int dim, bool keyed_by_week)
      : dim_(dim), keyed_by_week_(keyed_by_week) {
    if (dim < 1) throw InvalidArgument("EmbeddingTable: dim must be >= 1");
  }

  void insert(const std::string& id, std::optional<int> week,
              std::vector<double> row) {
    if (static_cast<int>(row.size()) != dim_)
      throw DimensionMismatch("EmbeddingTable: row for " + id + " has length " +
                              std::to_string(row.size()) + ", expected " +
                              std::to_string(dim_));
    if (keyed_by_week_ != week.has_value())
      throw InvalidArgument("EmbeddingTable: week key mismatch for " + id);
    auto [it, inserted] = rows_.emplace(key(id, week), std::move(row));
    if (!inserted)
      throw DuplicateKey("EmbeddingTable: duplicate key (" + id +
                         (week ? ", " + std::to_string(*week) : "") + ")");
  }

  const std::vector<double>* find(const std::string& id,
                                  std::optional<int> week = std::nullopt) const {
    auto it = rows_.find(key(id, week));
    return it == rows_.end() ? nullptr : &it->second;
  }

  int dim() const { return dim_; }
  bool keyed_by_week() const { return keyed_by_week_; }
  std::size_t size() const { return rows_.size(); }

 private:
  static std::string key(const std::string& id, std::optional<int> week) {
    return week ? id + '\x1f' + std::to_string(*week) : id;
  }

  int dim_;
  bool keyed_by_week_;
  std::unordered_map<std::string, std::vector<double>> rows_;
};

/// Item features: embedding row when a table is supplied, otherwise the
/// deterministic meta encoding.
inline ItemFeatures build_item_features(const ChallengeRecord& challenge,
                                        const EmbeddingTable* table = nullptr) {
  if (!table) return encode_challenge_meta(challenge.meta);
  const std::vector<double>* row = table->find(challenge.challenge_id);
  if (!row)
    throw MissingEmbedding("no embedding row for challenge " +
                           challenge.challenge_id);
  return *row;
}

/// Loads an embedding CSV. Two schemas are accepted:
///   challenge_embeddings.csv: challenge_id,e_0,...,e_{d-1}
///   user_embeddings.csv:      user_id,week,e_0,...,e_{d-1}
/// The week-keyed form is detected from the second header column.
inline EmbeddingTable load_embeddings(const std::string& path, int expected_dim) {
  const csv::Table table = csv::read_file(path);
  const bool keyed_by_week = table.header.size() >= 2 && table.header[1] == "week";
  const std::size_t value_offset = keyed_by_week ? 2 : 1;
  EmbeddingTable out(expected_dim, keyed_by_week);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string where = path + ":" + std::to_string(r + 2);
    if (static_cast<int>(row.size() - value_offset) != expected_dim)
      throw DimensionMismatch(where + ": row has " +
                              std::to_string(row.size() - value_offset) +
                              " values, expected " + std::to_string(expected_dim));
    std::vector<double> values(expected_dim);
    for (int j = 0; j < expected_dim; ++j)
      values[j] = csv::parse_double(row[value_offset + j], where);
    std::optional<int> week;
    if (keyed_by_week) week = static_cast<int>(csv::parse_int(row[1], where));
    out.insert(row[0], week, std::move(values));
  }
  return out;
}

/// v = [1, x..., z...]. The leading 1 subsumes an intercept.
inline ContextVector concat_context(const UserContext& x, const ItemFeatures& z) {
  ContextVector v;
  v.reserve(1 + x.size() + z.size());
  v.push_back(1.0);
  v.insert(v.end(), x.begin(), x.end());
  v.insert(v.end(), z.begin(), z.end());
  return v;
}

}  // namespace banditrex
