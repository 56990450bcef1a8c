/* SPDX-License-Identifier: Apache-2.0 */

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nseen/ann_index.hpp"
#include "nseen/encoder.hpp"
#include "nseen/loss.hpp"
#include "nseen/pairs.hpp"
#include "nseen/retrieval.hpp"
#include "nseen/strsim.hpp"
#include "nseen/training.hpp"
#include "synthetic.hpp"

namespace {

using namespace nseen;
using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(int id, const char* title, const std::function<Verdict()>& check) {
  const auto start = Clock::now();
  Verdict v;
  try {
    v = check();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  std::printf("criterion %d: %s  %s (%s; %.1fs)\n", id, v.pass ? "PASS" : "FAIL", title, v.detail.c_str(), secs);
  std::fflush(stdout);
  if (!v.pass) ++failures;
}

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

// 1 -------------------------------------------------------------------------

Verdict loss_minimizer() {
  Verdict v;
  for (double y : {0.0, 0.25, 0.5, 0.7, 1.0}) {
    double best = 0.0, best_loss = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 1000; ++i) {
      const double d = i * 1e-3;
      const double l = contrastive_loss(d, y, 1.0);
      if (l < best_loss) best_loss = l, best = d;
    }
    const bool ok = std::abs(best - (1.0 - y)) <= 1e-3 + 1e-12;
    v.pass &= ok;
    v.detail += (v.detail.empty() ? "" : " ") + fmt("y=%g", y) + fmt("->%.3f", best);
  }
  return v;
}

// 2 -------------------------------------------------------------------------

double relative_error(const EncoderParams& a, const EncoderParams& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a.values()[i] - b.values()[i]) * (a.values()[i] - b.values()[i]);
    na += a.values()[i] * a.values()[i];
    nb += b.values()[i] * b.values()[i];
  }
  const double denom = std::sqrt(na) + std::sqrt(nb);
  return denom == 0.0 ? 0.0 : std::sqrt(diff) / denom;
}

Verdict gradient_check() {
  auto shape = [](std::size_t e, std::size_t h, std::size_t l, std::size_t o, Pooling p) {
    EncoderConfig c;
    c.char_embed_dim = e;
    c.hidden_dim = h;
    c.num_recurrent_layers = l;
    c.output_dim = o;
    c.max_sequence_length = 16;
    c.pooling = p;
    return c;
  };
  const EncoderConfig shapes[] = {shape(3, 4, 1, 3, Pooling::last_state), shape(4, 3, 2, 5, Pooling::mean),
                                  shape(2, 2, 4, 3, Pooling::last_state)};
  std::vector<std::string> names{"FOX P2", "foxp2γ-"};
  const auto vocab = build_vocab(names, 16);
  struct Regime {
    double y;
    double (*margin)(double);
  };
  const Regime regimes[] = {{1.0, [](double) { return 1.0; }},
                            {0.0, [](double d) { return d + 0.5; }},
                            {0.0, [](double d) { return 0.5 * d; }},
                            {0.5, [](double) { return 1.0; }}};
  double worst = 0.0;
  int cases = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (const auto& s : shapes) {
      const auto params = init_params(s, vocab, seed);
      const double delta = cosine_distance(forward(params, vocab, names[0]), forward(params, vocab, names[1]));
      for (const auto& r : regimes) {
        const TrainingPair pair{names[0], names[1], r.y, PairSource::positive};
        const double m = r.margin(delta);
        const auto analytic = backward(params, vocab, pair, m);
        const auto numeric = numerical_gradient(params, vocab, pair, m, 1e-5);
        worst = std::max(worst, relative_error(analytic.gradient, numeric));
        ++cases;
      }
    }
  }
  return {worst < 1e-4, std::to_string(cases) + " cases, max relative error " + fmt("%.2e", worst)};
}

// 3 -------------------------------------------------------------------------

struct StringCase {
  const char* a;
  const char* b;
  std::size_t lev;
  double jw;
  double tri;
};

// Frozen from an independent implementation of the three measures.
const StringCase kStringCases[] = {
    {"kitten", "sitting", 3, 0.74603174603174605, 0.125},
    {"FOXP2", "FOXP2", 0, 1.0, 1.0},
    {"FOX P2", "FOXP2", 1, 0.96111111111111114, 0.16666666666666666},
    {"ab", "xy", 2, 0.0, 0.0},
    {"MARTHA", "MARHTA", 2, 0.96111111111111114, 0.14285714285714285},
    {"FOXP2", "FOX-P2", 1, 0.96111111111111114, 0.16666666666666666},
    {"abc", "def", 3, 0.0, 0.0},
    {"abc", "xyz", 3, 0.0, 0.0},
    {"DWAYNE", "DUANE", 2, 0.84000000000000008, 0.0},
    {"DIXON", "DICKSONX", 4, 0.81333333333333324, 0.0},
    {"Ras", "RAS", 2, 0.59999999999999987, 0.0},
    {"Ras", "ras", 1, 0.77777777777777768, 0.0},
    {"", "", 0, 1.0, 1.0},
    {"", "abc", 3, 0.0, 0.0},
    {"flaw", "lawn", 2, 0.83333333333333337, 0.33333333333333331},
    {"PLCγ2", "PLCG2", 1, 0.90666666666666673, 0.2},
    {"a", "a", 0, 1.0, 1.0},
    {"ab", "ab", 0, 1.0, 1.0},
    {"saturday", "sunday", 3, 0.77750000000000008, 0.1111111111111111},
    {"CRATE", "TRACE", 2, 0.73333333333333339, 0.0},
};

Verdict string_metrics() {
  int bad = 0;
  std::string first_bad;
  for (const auto& c : kStringCases) {
    const bool ok = strsim::levenshtein_distance(c.a, c.b) == c.lev &&
                    std::abs(strsim::jaro_winkler_sim(c.a, c.b) - c.jw) <= 1e-12 &&
                    std::abs(strsim::trigram_jaccard_sim(c.a, c.b) - c.tri) <= 1e-12;
    if (!ok && bad++ == 0) first_bad = std::string(c.a) + "/" + c.b;
  }
  // Headline values with their stated tolerances.
  const bool headline = strsim::levenshtein_distance("kitten", "sitting") == 3 &&
                        std::abs(strsim::trigram_jaccard_sim("FOXP2", "FOX-P2") - 1.0 / 6.0) <= 1e-12 &&
                        std::abs(strsim::jaro_winkler_sim("MARTHA", "MARHTA") - 0.9611) <= 1e-3;
  std::string detail = std::to_string(std::size(kStringCases) - bad) + "/" + std::to_string(std::size(kStringCases)) +
                       " cases";
  if (bad) detail += ", first mismatch " + first_bad;
  return {bad == 0 && headline, detail};
}

// 4 -------------------------------------------------------------------------

Verdict ann_oracle() {
  constexpr std::size_t kN = 5000, kDim = 64, kQueries = 200;
  std::mt19937_64 rng(20240601);
  std::normal_distribution<double> normal;
  VectorStore store(kDim);
  Eigen::VectorXd v(kDim);
  for (std::size_t i = 0; i < kN; ++i) {
    for (auto& x : v) x = normal(rng);
    store.add(EntityId("E" + std::to_string(i)), "n" + std::to_string(i), v);
  }
  const auto forest = build_index(store, 50, 16, 99);

  double recall = 0.0;
  bool exact = true;
  for (std::size_t i = 0; i < kQueries; ++i) {
    for (auto& x : v) x = normal(rng);
    const auto truth = brute_force_query(store, v, 10);
    std::set<std::size_t> ids;
    for (const auto& n : truth) ids.insert(n.row_id);
    for (const auto& n : query(forest, store, v, 10, 2000)) recall += double(ids.count(n.row_id)) / 10.0;
    if (i < 20) exact &= query(forest, store, v, 10, kN) == truth;
  }
  recall /= double(kQueries);

  double worst_self = 0.0;
  bool self_first = true;
  for (int i = 0; i < 100; ++i) {
    const std::size_t row = rng() % kN;
    const auto hits = query(forest, store, store.vector(row), 1, 2000);
    self_first &= !hits.empty() && hits[0].row_id == row;
    if (!hits.empty()) worst_self = std::max(worst_self, hits[0].distance);
  }
  const bool pass = recall >= 0.95 && self_first && worst_self <= 1e-9 && exact;
  return {pass, "recall@10 " + fmt("%.4f", recall) + ", self distance max " + fmt("%.1e", worst_self) +
                    (self_first ? "" : ", self not first") + (exact ? ", budget>=N exact" : ", budget>=N differs")};
}

// 5, 6, 8 -------------------------------------------------------------------

// Encoder and schedule for the synthetic benchmark; see README.
// One wide recurrent layer: on a single core the four-layer default cannot
// train enough epochs inside the time limit, and scored lower when it did.
EncoderConfig benchmark_encoder() {
  EncoderConfig c;
  c.char_embed_dim = 32;
  c.hidden_dim = 96;
  c.num_recurrent_layers = 1;
  c.output_dim = 128;
  c.max_sequence_length = 48;
  c.pooling = Pooling::last_state;
  return c;
}

TrainConfig benchmark_training(std::uint64_t seed) {
  TrainConfig t;
  t.rounds = 3;
  t.hard_neg_k = 10;
  t.epochs_per_round = 5;
  t.batch_size = 32;
  t.learning_rate = 3e-3;
  t.seed = seed;
  return t;
}

struct BenchmarkRun {
  TrainResult trained;
  EmbeddedReference index;
  HitsReport hits;
  std::string hits_table;
  std::string details;
  std::uint32_t fingerprint = 0;
  double seconds = 0.0;
};

BenchmarkRun run_benchmark(const testing::SyntheticCorpus& corpus, std::uint64_t seed) {
  const auto start = Clock::now();
  BenchmarkRun run;
  auto domain = generate_variation_pairs(corpus.reference, {}, derive_seed(seed, 4));
  // typing noise is part of the domain knowledge; query mentions stay unseen
  std::vector<std::string> held_out;
  for (const auto& q : corpus.queries) held_out.push_back(q.mention);
  domain.merge(testing::make_typo_pairs(corpus.reference, 2, derive_seed(seed, 5), held_out));
  run.trained = train_similarity(corpus.reference, domain, benchmark_training(seed), benchmark_encoder());
  IndexConfig ic;
  ic.seed = derive_seed(seed, 77);
  run.index = embed_reference(run.trained.model, corpus.reference, ic);
  run.hits = evaluate_hits_at_k(run.index, run.trained.model, corpus.queries, {1, 3, 5, 10});
  std::ostringstream t, d;
  write_hits_table(run.hits, t);
  write_query_details(run.hits, d);
  run.hits_table = t.str();
  run.details = d.str();
  run.fingerprint = model_fingerprint(run.trained.model);
  run.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return run;
}

double hits_at(const HitsReport& r, std::size_t k) {
  for (std::size_t i = 0; i < r.ks.size(); ++i) {
    if (r.ks[i] == k) return r.hits[i];
  }
  return -1.0;
}

Verdict benchmark_quality(const BenchmarkRun& run) {
  const auto& h = run.hits.hits;
  bool monotone = true;
  for (std::size_t i = 1; i < h.size(); ++i) monotone &= h[i - 1] <= h[i];
  const double h1 = hits_at(run.hits, 1), h10 = hits_at(run.hits, 10);
  std::string detail;
  for (std::size_t i = 0; i < h.size(); ++i) detail += fmt("Hits@%g ", double(run.hits.ks[i])) + fmt("%.4f ", h[i]);
  detail += fmt("over %g queries, ", double(run.hits.queries.size())) + fmt("train+eval %.0fs", run.seconds);
  return {h1 >= 0.80 && h10 >= 0.95 && monotone && run.seconds < 15 * 60, detail};
}

Verdict hard_negative_gap(const BenchmarkRun& run) {
  Verdict v{false, ""};
  bool any = false;
  bool all = true;
  for (const auto& r : run.trained.rounds) {
    if (r.round < 2 || r.mined == 0) continue;
    any = true;
    const double gap = r.random_mean_distance - r.mined_mean_distance;
    all &= gap > 0.05;
    v.detail += fmt("round %g: ", double(r.round)) + fmt("mined %.4f", r.mined_mean_distance) +
                fmt(" vs random %.4f", r.random_mean_distance) + fmt(" (gap %.4f) ", gap);
  }
  v.pass = any && all;
  if (!any) v.detail = "no mining at round >= 2";
  return v;
}

Verdict determinism(const BenchmarkRun& a, const BenchmarkRun& b) {
  bool losses = a.trained.rounds.size() == b.trained.rounds.size();
  for (std::size_t r = 0; losses && r < a.trained.rounds.size(); ++r) {
    const auto& ea = a.trained.rounds[r].epochs;
    const auto& eb = b.trained.rounds[r].epochs;
    losses = ea.size() == eb.size();
    for (std::size_t e = 0; losses && e < ea.size(); ++e) {
      losses = ea[e].mean_loss == eb[e].mean_loss && ea[e].pair_count == eb[e].pair_count;
    }
  }
  const bool table = a.hits_table == b.hits_table && a.details == b.details;
  const bool checksum = a.fingerprint == b.fingerprint;
  char fp[32];
  std::snprintf(fp, sizeof fp, "%08x", a.fingerprint);
  return {losses && table && checksum, std::string("checkpoint ") + fp + (checksum ? " both runs" : " differs") +
                                           (table ? ", hits tables identical" : ", hits tables differ") +
                                           (losses ? ", loss trajectories identical" : ", losses differ")};
}

// 7 -------------------------------------------------------------------------

Verdict exact_name_fidelity(const testing::SyntheticCorpus& corpus, const EncoderModel& model) {
  const auto& r = corpus.reference;
  IndexConfig ic;
  ic.seed = 5;
  ic.search_budget_factor = r.name_count();  // budget >= every row
  const auto index = embed_reference(model, r, ic);

  std::vector<std::pair<std::string, EntityId>> names;
  for (const auto& e : r.entities()) {
    for (const auto& n : e.names) {
      if (r.ids_for_name(n).size() == 1) names.emplace_back(n, e.id);
    }
  }
  std::mt19937_64 rng(7);
  std::shuffle(names.begin(), names.end(), rng);
  names.resize(std::min<std::size_t>(100, names.size()));

  std::size_t ok = 0;
  double worst = 0.0;
  for (const auto& [name, id] : names) {
    const auto res = retrieve(index, model, name, 1);
    if (res.candidates.empty()) continue;
    worst = std::max(worst, res.candidates[0].distance);
    ok += res.candidates[0].entity_id == id && res.candidates[0].distance <= 1e-9;
  }
  return {names.size() == 100 && ok == 100,
          std::to_string(ok) + "/" + std::to_string(names.size()) + " at rank 1, max distance " + fmt("%.1e", worst)};
}

}  // namespace

int main() {
  constexpr std::uint64_t kSeed = 20240611;
  report(1, "loss minimizer at 1-y", loss_minimizer);
  report(2, "analytic gradient vs central differences", gradient_check);
  report(3, "string-metric oracle cases", string_metrics);
  report(4, "ANN forest vs brute force", ann_oracle);

  const auto corpus = testing::make_synthetic_corpus({});
  BenchmarkRun first;
  bool trained = false;
  report(5, "synthetic end-to-end Hits@k", [&] {
    first = run_benchmark(corpus, kSeed);
    trained = true;
    return benchmark_quality(first);
  });
  report(6, "hard negatives closer than random negatives", [&] {
    if (!trained) return Verdict{false, "benchmark did not run"};
    return hard_negative_gap(first);
  });
  report(7, "verbatim reference names retrieve themselves", [&] {
    if (!trained) return Verdict{false, "benchmark did not run"};
    return exact_name_fidelity(corpus, first.trained.model);
  });
  report(8, "same seed reproduces metrics and checkpoint", [&] {
    if (!trained) return Verdict{false, "benchmark did not run"};
    return determinism(first, run_benchmark(corpus, kSeed));
  });

  std::printf("%s: %d of 8 criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
