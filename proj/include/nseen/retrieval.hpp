/* SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "nseen/ann_index.hpp"
#include "nseen/encoder.hpp"
#include "nseen/refset.hpp"

namespace nseen {

/// A reference set embedded by one model, indexed for retrieval. The
/// index carries the fingerprint of the model that produced it.
using EmbeddedReference = EmbeddingIndex;

struct Candidate {
  EntityId entity_id;
  std::string name;  // the entity's closest name
  double distance = 0.0;

  bool operator==(const Candidate&) const = default;
};

struct RetrievalResult {
  std::string mention;
  std::vector<Candidate> candidates;  // ascending distance, one per entity

  bool operator==(const RetrievalResult&) const = default;
};

struct RetrievalOptions {
  /// Raw neighbors fetched per requested entity before entity dedup.
  std::size_t overfetch = 5;
};

/// Embeds every (entity, name) pair of `r` and builds its forest.
EmbeddedReference embed_reference(const EncoderModel& model, const ReferenceSet& r, const IndexConfig& config);

/// Throws CompatibilityError when `e` was built by a different model.
void check_fingerprint(const EmbeddedReference& e, const EncoderModel& model);

/// Top-k entities for a mention, each at its minimum-distance name.
RetrievalResult retrieve(const EmbeddedReference& e, const EncoderModel& model, std::string_view mention,
                         std::size_t k, const RetrievalOptions& options = {});

struct QueryOutcome {
  std::string mention;
  EntityId gold_id;
  long rank = -1;  // 1-based rank of gold among retrieved entities, -1 on a miss
  bool gold_in_reference = true;
  EntityId top1_id;
  double top1_distance = 0.0;
};

struct HitsReport {
  std::vector<std::size_t> ks;
  std::vector<double> hits;  // parallel to ks
  std::vector<QueryOutcome> queries;
  std::size_t missing_gold = 0;  // queries whose gold entity is not indexed
};

/// Fraction of queries whose gold entity is among the top-k, for every k.
/// Queries with an unknown gold id count as misses and are flagged.
HitsReport evaluate_hits_at_k(const EmbeddedReference& e, const EncoderModel& model,
                              const std::vector<QueryRecord>& queries, std::vector<std::size_t> ks,
                              const RetrievalOptions& options = {});

/// `k<TAB>hits` rows.
void write_hits_table(const HitsReport& report, std::ostream& out);

/// `mention<TAB>gold<TAB>rank_or_-1<TAB>top1_id<TAB>top1_distance` rows.
void write_query_details(const HitsReport& report, std::ostream& out);

/// `entity_id<TAB>name<TAB>v_0,...,v_{d-1}` rows of the stored vectors at
/// 17 significant digits.
void dump_embeddings(const EmbeddedReference& e, std::ostream& out);

}  // namespace nseen
