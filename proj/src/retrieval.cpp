/* SPDX-License-Identifier: Apache-2.0 */

#include "nseen/retrieval.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <set>
#include <stdexcept>

#include "nseen/error.hpp"
#include "nseen/training.hpp"

namespace nseen {

namespace {

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

EmbeddedReference embed_reference(const EncoderModel& model, const ReferenceSet& r, const IndexConfig& config) {
  if (r.empty()) throw std::invalid_argument("cannot embed an empty reference set");
  return make_index(embed_names(model, r), config, model_fingerprint(model));
}

void check_fingerprint(const EmbeddedReference& e, const EncoderModel& model) {
  const auto fp = model_fingerprint(model);
  if (fp != e.model_fingerprint) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "index was built by model %08x but model %08x was given", e.model_fingerprint, fp);
    throw CompatibilityError(buf);
  }
}

RetrievalResult retrieve(const EmbeddedReference& e, const EncoderModel& model, std::string_view mention,
                         std::size_t k, const RetrievalOptions& options) {
  if (k == 0) throw std::invalid_argument("k must be at least 1");
  if (mention.empty()) throw std::invalid_argument("mention must not be empty");
  if (options.overfetch == 0) throw std::invalid_argument("overfetch must be positive");
  if (e.dimension() != model.config.output_dim) throw CompatibilityError("index and model dimensions differ");

  RetrievalResult out;
  out.mention = std::string(mention);
  const auto v = model.embed(mention);
  const auto raw = e.nearest(v, k * options.overfetch);
  std::set<EntityId> seen;
  for (const auto& n : raw) {
    if (!seen.insert(n.entity_id).second) continue;
    out.candidates.push_back(Candidate{n.entity_id, n.name, n.distance});
    if (out.candidates.size() == k) break;
  }
  return out;
}

HitsReport evaluate_hits_at_k(const EmbeddedReference& e, const EncoderModel& model,
                              const std::vector<QueryRecord>& queries, std::vector<std::size_t> ks,
                              const RetrievalOptions& options) {
  if (queries.empty()) throw std::invalid_argument("query set is empty");
  if (ks.empty()) throw std::invalid_argument("no k values given");
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  if (ks.front() == 0) throw std::invalid_argument("k must be at least 1");

  std::set<EntityId> indexed;
  for (std::size_t row = 0; row < e.store.size(); ++row) indexed.insert(e.store.entity_id(row));

  HitsReport report;
  report.ks = ks;
  std::vector<std::size_t> hit_counts(ks.size(), 0);
  for (const auto& q : queries) {
    const auto result = retrieve(e, model, q.mention, ks.back(), options);
    QueryOutcome o;
    o.mention = q.mention;
    o.gold_id = q.gold_id;
    o.gold_in_reference = indexed.count(q.gold_id) > 0;
    if (!o.gold_in_reference) ++report.missing_gold;
    for (std::size_t i = 0; i < result.candidates.size(); ++i) {
      if (result.candidates[i].entity_id == q.gold_id) {
        o.rank = static_cast<long>(i + 1);
        break;
      }
    }
    if (!result.candidates.empty()) {
      o.top1_id = result.candidates.front().entity_id;
      o.top1_distance = result.candidates.front().distance;
    }
    for (std::size_t i = 0; i < ks.size(); ++i) {
      if (o.rank > 0 && static_cast<std::size_t>(o.rank) <= ks[i]) ++hit_counts[i];
    }
    report.queries.push_back(std::move(o));
  }
  for (auto c : hit_counts) report.hits.push_back(static_cast<double>(c) / static_cast<double>(queries.size()));
  return report;
}

void write_hits_table(const HitsReport& report, std::ostream& out) {
  for (std::size_t i = 0; i < report.ks.size(); ++i) out << report.ks[i] << '\t' << format_real(report.hits[i]) << '\n';
}

void write_query_details(const HitsReport& report, std::ostream& out) {
  for (const auto& q : report.queries) {
    out << q.mention << '\t' << q.gold_id.str() << '\t' << q.rank << '\t' << q.top1_id.str() << '\t'
        << format_real(q.top1_distance) << '\n';
  }
}

void dump_embeddings(const EmbeddedReference& e, std::ostream& out) {
  for (std::size_t row = 0; row < e.store.size(); ++row) {
    out << e.store.entity_id(row).str() << '\t' << e.store.name(row) << '\t';
    const auto v = e.store.vector(row);
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (i) out << ',';
      out << format_real(v[i]);
    }
    out << '\n';
  }
  if (!out) throw Error("failed to write embeddings");
}

}  // namespace nseen
