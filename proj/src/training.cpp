/* SPDX-License-Identifier: Apache-2.0 */

#include "nseen/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include "nseen/error.hpp"

namespace nseen {

void TrainConfig::validate() const {
  if (!(margin > 0.0)) throw std::invalid_argument("margin must be positive");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (batch_size == 0 || epochs_per_round == 0 || rounds == 0) {
    throw std::invalid_argument("batch size, epochs and rounds must be positive");
  }
  if (cap_per_entity == 0) throw std::invalid_argument("cap_per_entity must be positive");
  if (!(negative_ratio >= 0.0)) throw std::invalid_argument("negative_ratio must be non-negative");
  if (threads == 0) throw std::invalid_argument("threads must be positive");
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master ^ (0x9E3779B97F4A7C15ull * (stream + 0x632BE59BD9B4E019ull));
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

AdamOptimizer::AdamOptimizer(const EncoderParams& like) : m_(like.size(), 0.0), v_(like.size(), 0.0) {}

void AdamOptimizer::step(EncoderParams& params, const EncoderParams& gradient, double learning_rate) {
  if (m_.size() != params.size() || gradient.size() != params.size()) {
    throw CompatibilityError("optimizer state does not match parameters");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  auto theta = params.values();
  const auto g = gradient.values();
  for (std::size_t i = 0; i < theta.size(); ++i) {
    m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * g[i];
    v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * g[i] * g[i];
    theta[i] -= learning_rate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + kEpsilon);
  }
}

namespace {

struct BatchOutcome {
  double loss_sum = 0.0;
  std::size_t bad_pair = SIZE_MAX;  // index into batch of the first non-finite loss
};

/// Sums per-pair gradients of `batch` into `gradient`. With several
/// workers every worker owns a fixed contiguous slice and the partial sums
/// are added in worker order.
BatchOutcome batch_gradient(const EncoderModel& model, const std::vector<const TrainingPair*>& batch, double margin,
                            std::size_t threads, EncoderParams& gradient, std::vector<EncoderParams>& scratch) {
  gradient.set_zero();
  const std::size_t workers = std::min(threads, batch.size());
  BatchOutcome out;
  if (workers <= 1) {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const double loss = accumulate_gradient(model.params, model.vocab, *batch[i], margin, gradient);
      if (!std::isfinite(loss) && out.bad_pair == SIZE_MAX) out.bad_pair = i;
      out.loss_sum += loss;
    }
    return out;
  }

  scratch.resize(workers, EncoderParams(model.params.config(), model.params.vocab_size()));
  std::vector<double> losses(batch.size(), 0.0);
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  const std::size_t chunk = (batch.size() + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        scratch[w].set_zero();
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(batch.size(), lo + chunk);
        for (std::size_t i = lo; i < hi; ++i) {
          losses[i] = accumulate_gradient(model.params, model.vocab, *batch[i], margin, scratch[w]);
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  auto g = gradient.values();
  for (std::size_t w = 0; w < workers; ++w) {
    const auto part = scratch[w].values();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += part[i];
  }
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!std::isfinite(losses[i]) && out.bad_pair == SIZE_MAX) out.bad_pair = i;
    out.loss_sum += losses[i];
  }
  return out;
}

[[noreturn]] void fail_numeric(std::size_t batch_index, const TrainingPair& pair, std::string_view what) {
  std::ostringstream msg;
  msg << "non-finite " << what << " in batch " << batch_index << " at pair (" << pair.name_a << ", " << pair.name_b
      << ", y=" << pair.y << ", " << to_string(pair.source) << ")";
  throw NumericError(msg.str());
}

}  // namespace

EpochResult train_epoch(EncoderModel& model, const PairSet& pairs, const TrainConfig& config,
                        AdamOptimizer& optimizer, std::uint64_t shuffle_seed) {
  config.validate();
  if (pairs.empty()) throw std::invalid_argument("cannot train on an empty pair set");
  std::vector<const TrainingPair*> order;
  order.reserve(pairs.size());
  for (const auto& p : pairs) order.push_back(&p);
  std::mt19937_64 rng(shuffle_seed);
  std::shuffle(order.begin(), order.end(), rng);

  EncoderParams gradient(model.params.config(), model.params.vocab_size());
  std::vector<EncoderParams> scratch;
  std::vector<const TrainingPair*> batch;
  double total = 0.0;
  std::size_t batch_index = 0;
  for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
    const std::size_t end = std::min(order.size(), start + config.batch_size);
    batch.assign(order.begin() + std::ptrdiff_t(start), order.begin() + std::ptrdiff_t(end));
    const auto outcome = batch_gradient(model, batch, config.margin, config.threads, gradient, scratch);
    if (outcome.bad_pair != SIZE_MAX) fail_numeric(batch_index, *batch[outcome.bad_pair], "loss");
    if (!gradient.all_finite()) {
      // Locate the offending pair.
      for (const auto* p : batch) {
        if (!backward(model.params, model.vocab, *p, config.margin).gradient.all_finite()) {
          fail_numeric(batch_index, *p, "gradient");
        }
      }
      fail_numeric(batch_index, *batch.front(), "gradient");
    }
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (auto& g : gradient.values()) g *= scale;
    optimizer.step(model.params, gradient, config.learning_rate);
    total += outcome.loss_sum;
  }
  return EpochResult{total / static_cast<double>(pairs.size()), pairs.size()};
}

CharVocab build_training_vocab(const ReferenceSet& r, const PairSet& pairs, std::size_t max_len) {
  std::vector<std::string> names;
  for (const auto& e : r.entities()) names.insert(names.end(), e.names.begin(), e.names.end());
  for (const auto& p : pairs) {
    names.push_back(p.name_a);
    names.push_back(p.name_b);
  }
  return build_vocab(names, max_len);
}

PairSet initial_pairs(const ReferenceSet& r, const TrainConfig& config) {
  PairSet d = generate_positive_pairs(r, config.cap_per_entity, derive_seed(config.seed, 1));
  if (r.size() >= 2 && config.negative_ratio > 0.0) {
    // Single-name references have no positives; size negatives by entity
    // count so the initial set is never empty.
    const std::size_t base = std::max(d.size(), r.size());
    const auto count = static_cast<std::size_t>(std::llround(config.negative_ratio * static_cast<double>(base)));
    d.merge(sample_negative_pairs(r, std::max<std::size_t>(count, 1), derive_seed(config.seed, 2)));
  }
  return d;
}

VectorStore embed_names(const EncoderModel& model, const ReferenceSet& r) {
  if (r.empty()) throw std::invalid_argument("cannot embed an empty reference set");
  VectorStore store(model.config.output_dim);
  for (const auto& e : r.entities()) {
    for (const auto& n : e.names) store.add(e.id, n, model.embed(n));
  }
  return store;
}

namespace {

double mean_pair_distance(const PairSet& pairs, const EncoderModel& model,
                          std::unordered_map<std::string, Embedding>& cache) {
  if (pairs.empty()) return 0.0;
  const auto embed = [&](const std::string& s) -> const Embedding& {
    auto it = cache.find(s);
    if (it == cache.end()) it = cache.emplace(s, model.embed(s)).first;
    return it->second;
  };
  double sum = 0.0;
  for (const auto& p : pairs) sum += cosine_distance(embed(p.name_a), embed(p.name_b));
  return sum / static_cast<double>(pairs.size());
}

}  // namespace

TrainResult train_similarity(const ReferenceSet& r, const PairSet& domain_pairs, const TrainConfig& config,
                             const EncoderConfig& encoder_config, std::ostream* metrics_log) {
  config.validate();
  encoder_config.validate();
  if (r.empty()) throw std::invalid_argument("reference set is empty");

  TrainResult result;
  result.data = initial_pairs(r, config);
  result.data.merge(domain_pairs);

  result.model.config = encoder_config;
  result.model.vocab = build_training_vocab(r, result.data, encoder_config.max_sequence_length);
  result.model.params = init_params(encoder_config, result.model.vocab, derive_seed(config.seed, 3));
  AdamOptimizer optimizer(result.model.params);

  if (metrics_log) *metrics_log << "round,epoch,mean_loss,pair_count,wall_ms\n";
  for (std::size_t round = 1; round <= config.rounds; ++round) {
    RoundReport report;
    report.round = round;
    report.pairs_before = result.data.size();
    for (std::size_t s = 0; s < kPairSourceCount; ++s) report.source_counts[s] = result.data.count(PairSource(s));
    if (metrics_log) {
      *metrics_log << "# round=" << round;
      for (std::size_t s = 0; s < kPairSourceCount; ++s) {
        *metrics_log << ' ' << to_string(PairSource(s)) << '=' << report.source_counts[s];
      }
      *metrics_log << '\n';
    }

    for (std::size_t epoch = 1; epoch <= config.epochs_per_round; ++epoch) {
      const auto start = std::chrono::steady_clock::now();
      const auto stats = train_epoch(result.model, result.data, config, optimizer,
                                     derive_seed(config.seed, 1000 + round * 10007 + epoch));
      report.epochs.push_back(stats);
      const auto ms =
          std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
      if (metrics_log) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", stats.mean_loss);
        *metrics_log << round << ',' << epoch << ',' << buf << ',' << stats.pair_count << ',' << ms << '\n';
      }
    }

    if (config.hard_neg_k > 0) {
      IndexConfig mining = config.mining_index;
      mining.seed = derive_seed(config.seed, 2000 + round);
      const auto index = make_index(embed_names(result.model, r), mining);
      const PairSet mined = mine_hard_negatives(result.model, r, index, config.hard_neg_k);
      report.mined = mined.size();
      std::unordered_map<std::string, Embedding> cache;
      report.mined_mean_distance = mean_pair_distance(mined, result.model, cache);
      if (!mined.empty() && r.size() >= 2) {
        const auto fresh = sample_negative_pairs(r, mined.size(), derive_seed(config.seed, 3000 + round));
        report.random_mean_distance = mean_pair_distance(fresh, result.model, cache);
      }
      report.mined_added = result.data.merge(mined);
      if (metrics_log) {
        *metrics_log << "# round=" << round << " mined=" << report.mined << " added=" << report.mined_added
                     << " mined_mean_distance=" << report.mined_mean_distance
                     << " random_mean_distance=" << report.random_mean_distance << '\n';
      }
    }
    result.rounds.push_back(std::move(report));
  }
  return result;
}

}  // namespace nseen
