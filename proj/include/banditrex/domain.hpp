#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "banditrex/errors.hpp"

namespace banditrex {

/// Intensity level of a challenge along one behavioral axis. kNA means the
/// challenge does not touch that axis at all.
enum class Intensity : std::uint8_t { kNA = 0, kLow, kMedium, kHigh };

inline double intensity_level(Intensity it) {
  switch (it) {
    case Intensity::kNA: return 0.0;
    case Intensity::kLow: return 1.0 / 3.0;
    case Intensity::kMedium: return 2.0 / 3.0;
    case Intensity::kHigh: return 1.0;
  }
  return 0.0;
}

inline std::string intensity_name(Intensity it) {
  switch (it) {
    case Intensity::kNA: return "NA";
    case Intensity::kLow: return "L";
    case Intensity::kMedium: return "M";
    case Intensity::kHigh: return "H";
  }
  return "NA";
}

inline Intensity parse_intensity(std::string_view s, const std::string& where) {
  if (s == "NA") return Intensity::kNA;
  if (s == "L") return Intensity::kLow;
  if (s == "M") return Intensity::kMedium;
  if (s == "H") return Intensity::kHigh;
  throw ParseError(where + ": bad intensity '" + std::string(s) +
                   "' (expected NA|L|M|H)");
}

/// The three health-management dimensions, in canonical order.
enum class Dimension : int { kWeightLoss = 0, kDiet = 1, kExercise = 2 };

inline constexpr int kNumDimensions = 3;

inline std::string dimension_name(Dimension d) {
  switch (d) {
    case Dimension::kWeightLoss: return "weight_loss";
    case Dimension::kDiet: return "diet";
    case Dimension::kExercise: return "exercise";
  }
  return "?";
}

/// Bit set over the dimension taxonomy. A challenge may cover several
/// dimensions at once, or none.
class DimMask {
 public:
  constexpr DimMask() = default;

  static constexpr DimMask all() { return from_bits((1u << kNumDimensions) - 1); }
  static constexpr DimMask from_bits(std::uint8_t bits) {
    DimMask m;
    m.bits_ = static_cast<std::uint8_t>(bits & ((1u << kNumDimensions) - 1));
    return m;
  }

  constexpr void set(Dimension d) { bits_ |= bit(d); }
  constexpr bool has(Dimension d) const { return (bits_ & bit(d)) != 0; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr int count() const {
    int n = 0;
    for (std::uint8_t b = bits_; b; b >>= 1) n += b & 1;
    return n;
  }
  constexpr std::uint8_t bits() const { return bits_; }
  constexpr bool covers(DimMask other) const {
    return (bits_ & other.bits_) == other.bits_;
  }

  friend constexpr bool operator==(DimMask a, DimMask b) {
    return a.bits_ == b.bits_;
  }

 private:
  static constexpr std::uint8_t bit(Dimension d) {
    return static_cast<std::uint8_t>(1u << static_cast<int>(d));
  }
  std::uint8_t bits_ = 0;
};

/// SMART-style meta attributes annotated on a challenge. Each intensity is
/// NA exactly when its flag is 0.
struct ChallengeMeta {
  bool specific = false;
  bool measurable = false;
  bool diet = false;
  Intensity intensity_diet = Intensity::kNA;
  bool activity = false;
  Intensity intensity_activity = Intensity::kNA;
  bool weight_loss = false;
  Intensity intensity_weight_loss = Intensity::kNA;
  bool motivational = false;
  bool self_monitoring = false;
  int duration_weeks = 1;

  void validate() const {
    auto check = [](bool flag, Intensity it, const char* name) {
      if (flag == (it == Intensity::kNA))
        throw InvalidArgument(std::string("ChallengeMeta: intensity_") + name +
                              " must be NA exactly when " + name + " flag is 0");
    };
    check(diet, intensity_diet, "diet");
    check(activity, intensity_activity, "activity");
    check(weight_loss, intensity_weight_loss, "weight_loss");
    if (duration_weeks < 1)
      throw InvalidArgument("ChallengeMeta: duration_weeks must be >= 1");
  }

  friend bool operator==(const ChallengeMeta&, const ChallengeMeta&) = default;
};

/// An intervention item with its availability window (weeks, inclusive).
struct ChallengeRecord {
  std::string challenge_id;
  std::string title;
  std::string description;
  ChallengeMeta meta;
  int start_week = 1;
  int end_week = 1;

  bool available(int week) const { return start_week <= week && week <= end_week; }

  void validate() const {
    if (challenge_id.empty())
      throw InvalidArgument("ChallengeRecord: empty challenge_id");
    if (start_week > end_week)
      throw InvalidArgument("ChallengeRecord " + challenge_id +
                            ": start_week > end_week");
    meta.validate();
  }

  friend bool operator==(const ChallengeRecord&, const ChallengeRecord&) = default;
};

struct UserProfile {
  std::string user_id;
  bool gender = false;
  double age = 0.0;
  double initial_weight = 0.0;
  int membership_weeks = 0;
  long long friends = 0;
  long long posts = 0;

  void validate() const {
    if (user_id.empty()) throw InvalidArgument("UserProfile: empty user_id");
    if (!(age > 0)) throw InvalidArgument("UserProfile " + user_id + ": age must be > 0");
    if (!(initial_weight > 0))
      throw InvalidArgument("UserProfile " + user_id + ": initial_weight must be > 0");
    if (membership_weeks < 0 || friends < 0 || posts < 0)
      throw InvalidArgument("UserProfile " + user_id + ": counts must be >= 0");
  }

  friend bool operator==(const UserProfile&, const UserProfile&) = default;
};

struct WeighIn {
  std::string user_id;
  int week = 0;
  double weight = 0.0;

  void validate() const {
    if (!(weight > 0)) throw InvalidArgument("WeighIn: weight must be > 0");
  }

  friend bool operator==(const WeighIn&, const WeighIn&) = default;
};

/// One logged challenge selection. The propensity, when present, is the
/// probability that the platform offered this challenge in that week.
struct SelectionEvent {
  std::string user_id;
  int week = 0;
  std::string challenge_id;
  std::optional<double> propensity;

  void validate() const {
    if (propensity && !(*propensity > 0.0 && *propensity <= 1.0))
      throw InvalidArgument("SelectionEvent: propensity must be in (0,1]");
  }

  friend bool operator==(const SelectionEvent&, const SelectionEvent&) = default;
};

inline constexpr int kMetaFeatureCount = 11;
inline constexpr double kDurationHorizonWeeks = 16.0;

/// Deterministic encoding of the meta attributes into an 11-vector:
/// [specific, measurable, diet, enc(intensity_diet), activity,
///  enc(intensity_activity), weight_loss, enc(intensity_weight_loss),
///  motivational, self_monitoring, min(duration_weeks,16)/16]
/// where enc(NA)=0, enc(L)=1/3, enc(M)=2/3, enc(H)=1. All coordinates lie
/// in [0,1].
inline std::vector<double> encode_challenge_meta(const ChallengeMeta& meta) {
  std::vector<double> out(kMetaFeatureCount);
  out[0] = meta.specific ? 1.0 : 0.0;
  out[1] = meta.measurable ? 1.0 : 0.0;
  out[2] = meta.diet ? 1.0 : 0.0;
  out[3] = intensity_level(meta.intensity_diet);
  out[4] = meta.activity ? 1.0 : 0.0;
  out[5] = intensity_level(meta.intensity_activity);
  out[6] = meta.weight_loss ? 1.0 : 0.0;
  out[7] = intensity_level(meta.intensity_weight_loss);
  out[8] = meta.motivational ? 1.0 : 0.0;
  out[9] = meta.self_monitoring ? 1.0 : 0.0;
  out[10] = std::min<double>(meta.duration_weeks, kDurationHorizonWeeks) /
            kDurationHorizonWeeks;
  return out;
}

/// Offsets of the dimension flags inside the encoded meta vector.
inline constexpr int kMetaDietFlagIndex = 2;
inline constexpr int kMetaActivityFlagIndex = 4;
inline constexpr int kMetaWeightLossFlagIndex = 6;

inline DimMask dimension_mask(const ChallengeMeta& meta) {
  DimMask mask;
  if (meta.weight_loss) mask.set(Dimension::kWeightLoss);
  if (meta.diet) mask.set(Dimension::kDiet);
  if (meta.activity) mask.set(Dimension::kExercise);
  return mask;
}

/// Immutable challenge catalog with unique ids.
class Catalog {
 public:
  Catalog() = default;

  explicit Catalog(std::vector<ChallengeRecord> items) : items_(std::move(items)) {
    for (std::size_t i = 0; i < items_.size(); ++i) {
      items_[i].validate();
      auto [it, inserted] = index_.emplace(items_[i].challenge_id, i);
      if (!inserted)
        throw DuplicateKey("Catalog: duplicate challenge_id " +
                           items_[i].challenge_id);
    }
  }

  const ChallengeRecord* find(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &items_[it->second];
  }

  const ChallengeRecord& at(const std::string& id) const {
    const ChallengeRecord* rec = find(id);
    if (!rec) throw InvalidArgument("Catalog: unknown challenge_id " + id);
    return *rec;
  }

  std::size_t size() const { return items_.size(); }
  const std::vector<ChallengeRecord>& items() const { return items_; }

  friend bool operator==(const Catalog& a, const Catalog& b) {
    return a.items_ == b.items_;
  }

 private:
  std::vector<ChallengeRecord> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace banditrex
