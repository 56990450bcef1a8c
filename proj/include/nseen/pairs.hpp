/* SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "nseen/refset.hpp"

namespace nseen {

class EmbeddingIndex;
struct EncoderModel;

enum class PairSource : std::uint8_t {
  positive = 0,
  random_negative = 1,
  same_name_variant = 2,
  family_variant = 3,
  hard_negative = 4,
};

inline constexpr std::size_t kPairSourceCount = 5;

std::string_view to_string(PairSource s);
std::optional<PairSource> parse_pair_source(std::string_view s);

/// A labelled name pair fed to the contrastive loss. y = 1 pulls the two
/// embeddings together, y = 0 pushes them at least a margin apart.
struct TrainingPair {
  std::string name_a;
  std::string name_b;
  double y = 0.0;
  PairSource source = PairSource::positive;

  bool operator==(const TrainingPair&) const = default;
};

/// Insertion-ordered pair collection. Rejects exact duplicates (the two
/// names taken as an unordered pair, together with label and source) and
/// same-string pairs labelled below 1.
class PairSet {
 public:
  /// Returns false when the pair was rejected.
  bool add(TrainingPair pair);
  /// Adds every pair of `other`; returns how many were accepted.
  std::size_t merge(const PairSet& other);

  const std::vector<TrainingPair>& pairs() const noexcept { return pairs_; }
  std::size_t size() const noexcept { return pairs_.size(); }
  bool empty() const noexcept { return pairs_.empty(); }
  std::size_t count(PairSource s) const noexcept { return counts_[static_cast<std::size_t>(s)]; }

  auto begin() const { return pairs_.begin(); }
  auto end() const { return pairs_.end(); }

 private:
  using Key = std::tuple<std::string, std::string, double, PairSource>;

  std::vector<TrainingPair> pairs_;
  std::set<Key> keys_;
  std::array<std::size_t, kPairSourceCount> counts_{};
};

/// Writes `name_a<TAB>name_b<TAB>y<TAB>source` lines, y at 17 significant
/// digits.
void write_pairs(const PairSet& pairs, std::ostream& out);
PairSet read_pairs(std::istream& in);

/// family id -> member entities.
using FamilyMap = std::map<std::string, std::set<EntityId>>;

/// Reads `family_id<TAB>entity_id` lines. Every entity must exist in `r`.
FamilyMap parse_family_map(std::istream& in, const ReferenceSet& r);

/// All unordered within-entity name pairs labelled 1. An entity whose
/// cross product exceeds `cap_per_entity` contributes a seeded uniform
/// subsample of exactly that size.
PairSet generate_positive_pairs(const ReferenceSet& r, std::size_t cap_per_entity, std::uint64_t seed);

/// `count` pairs: two distinct entities, one name from each, labelled 0.
/// Draws whose strings are equal (or that share an entity through an
/// ambiguous name) are redrawn. Throws std::invalid_argument with fewer
/// than two entities.
PairSet sample_negative_pairs(const ReferenceSet& r, std::size_t count, std::uint64_t seed);

/// Whitespace removed, non-alphanumerics removed, upper-cased, lower-cased;
/// deduplicated, excluding empty results and the input itself.
std::vector<std::string> generate_same_name_variants(std::string_view name);

struct VariationOptions {
  /// Number of cross-entity same-family name pairs sampled; each yields up
  /// to three labelled pairs.
  std::size_t family_pair_budget = 1000;
};

/// Canonical name / variant pairs and sampled same-family name pairs, one
/// copy per string measure with y set to that measure's score.
PairSet generate_variation_pairs(const ReferenceSet& r, const FamilyMap& families, std::uint64_t seed,
                                 const VariationOptions& options = {});

/// For every indexed reference name, the k nearest other rows that belong
/// to a different entity become label-0 pairs. Throws CompatibilityError
/// when the index dimension differs from the model's output size.
PairSet mine_hard_negatives(const EncoderModel& model, const ReferenceSet& r, const EmbeddingIndex& index,
                            std::size_t k);

/// True when some entity of `r` carries both names.
bool share_entity(const ReferenceSet& r, std::string_view a, std::string_view b);

}  // namespace nseen
