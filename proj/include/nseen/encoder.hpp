/* SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nseen/loss.hpp"
#include "nseen/refset.hpp"

namespace nseen {

struct TrainingPair;

/// How the top recurrent layer is reduced to a fixed-size vector before the
/// dense output layer.
enum class Pooling : std::uint8_t {
  last_state = 0,  // [final forward state ; final backward state]
  mean = 1,        // time-average of the top layer's outputs
};

struct EncoderConfig {
  std::size_t char_embed_dim = 32;
  std::size_t hidden_dim = 64;  // per direction
  std::size_t num_recurrent_layers = 4;
  std::size_t output_dim = 128;
  std::size_t max_sequence_length = 128;
  Pooling pooling = Pooling::last_state;

  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

/// Character → dense index map. Index 0 is the unknown token; known
/// characters follow in code point order.
class CharVocab {
 public:
  static constexpr std::int32_t kUnknown = 0;

  CharVocab() = default;
  CharVocab(std::vector<char32_t> chars, std::size_t max_sequence_length);

  std::size_t size() const noexcept { return chars_.size() + 1; }
  std::size_t max_sequence_length() const noexcept { return max_len_; }
  const std::vector<char32_t>& chars() const noexcept { return chars_; }

  std::int32_t index(char32_t c) const;

  /// Indices of the first max_sequence_length characters of `name`.
  std::vector<std::int32_t> encode(std::string_view name) const;

  bool operator==(const CharVocab&) const = default;

 private:
  std::vector<char32_t> chars_;  // sorted, unique
  std::map<char32_t, std::int32_t> index_;
  std::size_t max_len_ = 0;
};

CharVocab build_vocab(const ReferenceSet& r, std::size_t max_len);
CharVocab build_vocab(std::span<const std::string> names, std::size_t max_len);

/// All trainable values in one flat buffer, addressed through typed views.
/// The same type holds gradients and optimizer moments.
///
/// Layout: embedding table (E x V), then per layer and direction the input
/// weights W (4H x I), recurrent weights U (4H x H) and bias b (4H), then
/// the dense weights (O x 2H) and bias (O). Gate rows are ordered input,
/// forget, candidate, output. Matrices are column-major.
class EncoderParams {
 public:
  using MatrixView = Eigen::Map<Eigen::MatrixXd>;
  using ConstMatrixView = Eigen::Map<const Eigen::MatrixXd>;
  using VectorView = Eigen::Map<Eigen::VectorXd>;
  using ConstVectorView = Eigen::Map<const Eigen::VectorXd>;

  EncoderParams() = default;
  EncoderParams(const EncoderConfig& config, std::size_t vocab_size);  // zero-filled

  const EncoderConfig& config() const noexcept { return config_; }
  std::size_t vocab_size() const noexcept { return vocab_size_; }

  static std::size_t count(const EncoderConfig& config, std::size_t vocab_size);
  std::size_t size() const noexcept { return values_.size(); }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  MatrixView embedding();
  ConstMatrixView embedding() const;
  MatrixView input_weights(std::size_t layer, int direction);
  ConstMatrixView input_weights(std::size_t layer, int direction) const;
  MatrixView recurrent_weights(std::size_t layer, int direction);
  ConstMatrixView recurrent_weights(std::size_t layer, int direction) const;
  VectorView bias(std::size_t layer, int direction);
  ConstVectorView bias(std::size_t layer, int direction) const;
  MatrixView dense_weights();
  ConstMatrixView dense_weights() const;
  VectorView dense_bias();
  ConstVectorView dense_bias() const;

  /// Input width of a recurrent layer: E for the first, 2H above it.
  std::size_t layer_input_dim(std::size_t layer) const;

  void set_zero();
  bool all_finite() const;

  bool operator==(const EncoderParams& other) const;

  /// One labelled block per weight matrix or bias, for init and tests.
  struct Block {
    std::string name;
    std::size_t offset;
    std::size_t rows;
    std::size_t cols;
  };
  std::vector<Block> blocks() const;

 private:
  std::size_t layer_offset(std::size_t layer, int direction) const;
  std::size_t dense_offset() const;

  EncoderConfig config_;
  std::size_t vocab_size_ = 0;
  std::vector<double, Eigen::aligned_allocator<double>> values_;  // fixed alignment keeps products bitwise reproducible
};

/// Glorot-uniform weights (bound sqrt(6 / (fan_in + fan_out)) per matrix),
/// zero biases except forget gates at 1. Deterministic for a seed.
EncoderParams init_params(const EncoderConfig& config, const CharVocab& vocab, std::uint64_t seed);

/// Scaling bound used by init_params for a rows x cols matrix.
double init_bound(std::size_t rows, std::size_t cols);

/// Maps a name to its embedding. Names longer than max_sequence_length are
/// truncated; an empty name throws std::invalid_argument.
Embedding forward(const EncoderParams& params, const CharVocab& vocab, std::string_view name);

struct PairGradient {
  EncoderParams gradient;
  double loss = 0.0;
  double distance = 0.0;
};

/// Exact gradient of the contrastive loss of one pair. Both towers share
/// `params`, so their contributions are summed.
PairGradient backward(const EncoderParams& params, const CharVocab& vocab, const TrainingPair& pair,
                      double margin);

/// As backward(), but adds into `gradient` (already shaped like params).
/// Returns the pair loss; `distance` receives the pair's cosine distance.
double accumulate_gradient(const EncoderParams& params, const CharVocab& vocab, const TrainingPair& pair,
                           double margin, EncoderParams& gradient, double* distance = nullptr);

/// Contrastive loss of one pair under `params`.
double pair_loss(const EncoderParams& params, const CharVocab& vocab, const TrainingPair& pair, double margin);

/// Central-difference gradient estimate, one parameter at a time.
EncoderParams numerical_gradient(const EncoderParams& params, const CharVocab& vocab, const TrainingPair& pair,
                                 double margin, double epsilon);

/// Everything needed to embed names: shapes, vocabulary and weights.
struct EncoderModel {
  EncoderConfig config;
  CharVocab vocab;
  EncoderParams params;

  Embedding embed(std::string_view name) const { return forward(params, vocab, name); }
  bool operator==(const EncoderModel&) const = default;
};

inline constexpr std::uint32_t kModelFormatVersion = 1;

/// Serialized checkpoint bytes (`NSE1` framing). Little-endian, checksummed.
std::string serialize_model(const EncoderModel& model);
EncoderModel deserialize_model(std::string_view bytes);

void save_model(const EncoderModel& model, std::ostream& out);
EncoderModel load_model(std::istream& in);

/// Checksum of the serialized checkpoint; identifies a model in index files.
std::uint32_t model_fingerprint(const EncoderModel& model);

}  // namespace nseen
