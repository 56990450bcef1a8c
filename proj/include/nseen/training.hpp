/* SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "nseen/ann_index.hpp"
#include "nseen/encoder.hpp"
#include "nseen/loss.hpp"
#include "nseen/pairs.hpp"
#include "nseen/refset.hpp"

namespace nseen {

struct TrainConfig {
  double margin = 1.0;
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::size_t epochs_per_round = 5;
  std::size_t rounds = 3;
  std::size_t hard_neg_k = 10;
  std::uint64_t seed = 0;

  std::size_t cap_per_entity = 100;
  /// Random negatives drawn per positive pair for the initial set.
  double negative_ratio = 1.0;
  /// Forest used to find neighbors while mining.
  IndexConfig mining_index{};
  /// Worker threads for per-pair gradients. Results depend only on this
  /// count, never on scheduling.
  std::size_t threads = 1;

  void validate() const;
};

/// Adaptive moment estimation over the flat parameter buffer.
class AdamOptimizer {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  AdamOptimizer() = default;
  explicit AdamOptimizer(const EncoderParams& like);

  void step(EncoderParams& params, const EncoderParams& gradient, double learning_rate);
  std::uint64_t steps() const noexcept { return t_; }

 private:
  std::vector<double> m_;
  std::vector<double> v_;
  std::uint64_t t_ = 0;
};

struct EpochResult {
  double mean_loss = 0.0;
  std::size_t pair_count = 0;
};

/// One pass over `pairs` in seeded shuffled mini-batches. Each batch
/// gradient is the mean of its per-pair gradients. Throws NumericError
/// naming the batch and pair when a loss or gradient goes non-finite.
EpochResult train_epoch(EncoderModel& model, const PairSet& pairs, const TrainConfig& config,
                        AdamOptimizer& optimizer, std::uint64_t shuffle_seed);

/// Per-round diagnostics of the hard-negative loop.
struct RoundReport {
  std::size_t round = 0;  // 1-based
  std::size_t pairs_before = 0;
  std::array<std::size_t, kPairSourceCount> source_counts{};  // composition trained on
  std::vector<EpochResult> epochs;
  std::size_t mined = 0;        // hard negatives found this round
  std::size_t mined_added = 0;  // of which new to the training data
  double mined_mean_distance = 0.0;
  double random_mean_distance = 0.0;  // equal-size fresh random negatives
};

struct TrainResult {
  EncoderModel model;
  PairSet data;
  std::vector<RoundReport> rounds;
};

/// Training-data vocabulary: every character of the reference names and of
/// every string in `pairs`.
CharVocab build_training_vocab(const ReferenceSet& r, const PairSet& pairs, std::size_t max_len);

/// Initial semantic pairs: capped within-entity positives plus random
/// negatives at `negative_ratio`.
PairSet initial_pairs(const ReferenceSet& r, const TrainConfig& config);

/// Full similarity-learning loop: initial pairs plus `domain_pairs`, then
/// `rounds` times train, embed the reference, mine hard negatives and add
/// them. Metrics lines go to `metrics_log` when given.
TrainResult train_similarity(const ReferenceSet& r, const PairSet& domain_pairs, const TrainConfig& config,
                             const EncoderConfig& encoder_config = {}, std::ostream* metrics_log = nullptr);

/// Embeds every reference name (one row per (entity, name) pair).
VectorStore embed_names(const EncoderModel& model, const ReferenceSet& r);

/// Derives independent stream seeds from one master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

}  // namespace nseen
