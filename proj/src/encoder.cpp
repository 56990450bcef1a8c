/* SPDX-License-Identifier: Apache-2.0 */

#include "nseen/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <set>
#include <stdexcept>

#include "nseen/binary_io.hpp"
#include "nseen/error.hpp"
#include "nseen/pairs.hpp"
#include "nseen/utf8.hpp"

namespace nseen {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void EncoderConfig::validate() const {
  if (char_embed_dim == 0 || hidden_dim == 0 || num_recurrent_layers == 0 || output_dim == 0 ||
      max_sequence_length == 0) {
    throw std::invalid_argument("encoder dimensions must all be at least 1");
  }
  if (pooling != Pooling::last_state && pooling != Pooling::mean) throw std::invalid_argument("unknown pooling");
}

// ---------------------------------------------------------------------------
// Vocabulary

CharVocab::CharVocab(std::vector<char32_t> chars, std::size_t max_sequence_length)
    : chars_(std::move(chars)), max_len_(max_sequence_length) {
  if (max_len_ == 0) throw std::invalid_argument("max_sequence_length must be positive");
  std::sort(chars_.begin(), chars_.end());
  chars_.erase(std::unique(chars_.begin(), chars_.end()), chars_.end());
  for (std::size_t i = 0; i < chars_.size(); ++i) index_.emplace(chars_[i], static_cast<std::int32_t>(i + 1));
}

std::int32_t CharVocab::index(char32_t c) const {
  const auto it = index_.find(c);
  return it == index_.end() ? kUnknown : it->second;
}

std::vector<std::int32_t> CharVocab::encode(std::string_view name) const {
  const auto text = utf8::decode(name);
  const std::size_t n = std::min(text.size(), max_len_);
  std::vector<std::int32_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = index(text[i]);
  return out;
}

CharVocab build_vocab(std::span<const std::string> names, std::size_t max_len) {
  std::set<char32_t> seen;
  for (const auto& n : names) {
    for (char32_t c : utf8::decode(n)) seen.insert(c);
  }
  return CharVocab(std::vector<char32_t>(seen.begin(), seen.end()), max_len);
}

CharVocab build_vocab(const ReferenceSet& r, std::size_t max_len) {
  std::vector<std::string> names;
  names.reserve(r.name_count());
  for (const auto& e : r.entities()) names.insert(names.end(), e.names.begin(), e.names.end());
  return build_vocab(names, max_len);
}

// ---------------------------------------------------------------------------
// Parameter layout

namespace {

std::size_t layer_block_size(std::size_t input_dim, std::size_t hidden) {
  return 4 * hidden * input_dim + 4 * hidden * hidden + 4 * hidden;
}

}  // namespace

EncoderParams::EncoderParams(const EncoderConfig& config, std::size_t vocab_size)
    : config_(config), vocab_size_(vocab_size) {
  config_.validate();
  if (vocab_size == 0) throw std::invalid_argument("vocabulary must not be empty");
  values_.assign(count(config_, vocab_size_), 0.0);
}

std::size_t EncoderParams::count(const EncoderConfig& c, std::size_t vocab_size) {
  std::size_t n = c.char_embed_dim * vocab_size;
  for (std::size_t l = 0; l < c.num_recurrent_layers; ++l) {
    const std::size_t in = l == 0 ? c.char_embed_dim : 2 * c.hidden_dim;
    n += 2 * layer_block_size(in, c.hidden_dim);
  }
  n += c.output_dim * 2 * c.hidden_dim + c.output_dim;
  return n;
}

std::size_t EncoderParams::layer_input_dim(std::size_t layer) const {
  return layer == 0 ? config_.char_embed_dim : 2 * config_.hidden_dim;
}

std::size_t EncoderParams::layer_offset(std::size_t layer, int direction) const {
  std::size_t off = config_.char_embed_dim * vocab_size_;
  for (std::size_t l = 0; l < layer; ++l) off += 2 * layer_block_size(layer_input_dim(l), config_.hidden_dim);
  if (direction != 0) off += layer_block_size(layer_input_dim(layer), config_.hidden_dim);
  return off;
}

std::size_t EncoderParams::dense_offset() const { return layer_offset(config_.num_recurrent_layers, 0); }

EncoderParams::MatrixView EncoderParams::embedding() {
  return {values_.data(), Eigen::Index(config_.char_embed_dim), Eigen::Index(vocab_size_)};
}
EncoderParams::ConstMatrixView EncoderParams::embedding() const {
  return {values_.data(), Eigen::Index(config_.char_embed_dim), Eigen::Index(vocab_size_)};
}

EncoderParams::MatrixView EncoderParams::input_weights(std::size_t layer, int direction) {
  const auto h4 = Eigen::Index(4 * config_.hidden_dim);
  return {values_.data() + layer_offset(layer, direction), h4, Eigen::Index(layer_input_dim(layer))};
}
EncoderParams::ConstMatrixView EncoderParams::input_weights(std::size_t layer, int direction) const {
  const auto h4 = Eigen::Index(4 * config_.hidden_dim);
  return {values_.data() + layer_offset(layer, direction), h4, Eigen::Index(layer_input_dim(layer))};
}

EncoderParams::MatrixView EncoderParams::recurrent_weights(std::size_t layer, int direction) {
  const std::size_t h = config_.hidden_dim;
  return {values_.data() + layer_offset(layer, direction) + 4 * h * layer_input_dim(layer), Eigen::Index(4 * h),
          Eigen::Index(h)};
}
EncoderParams::ConstMatrixView EncoderParams::recurrent_weights(std::size_t layer, int direction) const {
  const std::size_t h = config_.hidden_dim;
  return {values_.data() + layer_offset(layer, direction) + 4 * h * layer_input_dim(layer), Eigen::Index(4 * h),
          Eigen::Index(h)};
}

EncoderParams::VectorView EncoderParams::bias(std::size_t layer, int direction) {
  const std::size_t h = config_.hidden_dim;
  return {values_.data() + layer_offset(layer, direction) + 4 * h * layer_input_dim(layer) + 4 * h * h,
          Eigen::Index(4 * h)};
}
EncoderParams::ConstVectorView EncoderParams::bias(std::size_t layer, int direction) const {
  const std::size_t h = config_.hidden_dim;
  return {values_.data() + layer_offset(layer, direction) + 4 * h * layer_input_dim(layer) + 4 * h * h,
          Eigen::Index(4 * h)};
}

EncoderParams::MatrixView EncoderParams::dense_weights() {
  return {values_.data() + dense_offset(), Eigen::Index(config_.output_dim), Eigen::Index(2 * config_.hidden_dim)};
}
EncoderParams::ConstMatrixView EncoderParams::dense_weights() const {
  return {values_.data() + dense_offset(), Eigen::Index(config_.output_dim), Eigen::Index(2 * config_.hidden_dim)};
}

EncoderParams::VectorView EncoderParams::dense_bias() {
  return {values_.data() + dense_offset() + config_.output_dim * 2 * config_.hidden_dim,
          Eigen::Index(config_.output_dim)};
}
EncoderParams::ConstVectorView EncoderParams::dense_bias() const {
  return {values_.data() + dense_offset() + config_.output_dim * 2 * config_.hidden_dim,
          Eigen::Index(config_.output_dim)};
}

void EncoderParams::set_zero() { std::fill(values_.begin(), values_.end(), 0.0); }

bool EncoderParams::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

bool EncoderParams::operator==(const EncoderParams& other) const {
  return config_ == other.config_ && vocab_size_ == other.vocab_size_ && values_ == other.values_;
}

std::vector<EncoderParams::Block> EncoderParams::blocks() const {
  std::vector<Block> out;
  const std::size_t h = config_.hidden_dim;
  out.push_back({"embedding", 0, config_.char_embed_dim, vocab_size_});
  for (std::size_t l = 0; l < config_.num_recurrent_layers; ++l) {
    for (int d = 0; d < 2; ++d) {
      const std::string tag = "layer" + std::to_string(l) + (d == 0 ? ".fwd" : ".bwd");
      const std::size_t off = layer_offset(l, d);
      const std::size_t in = layer_input_dim(l);
      out.push_back({tag + ".W", off, 4 * h, in});
      out.push_back({tag + ".U", off + 4 * h * in, 4 * h, h});
      out.push_back({tag + ".b", off + 4 * h * in + 4 * h * h, 4 * h, 1});
    }
  }
  out.push_back({"dense.W", dense_offset(), config_.output_dim, 2 * h});
  out.push_back({"dense.b", dense_offset() + config_.output_dim * 2 * h, config_.output_dim, 1});
  return out;
}

double init_bound(std::size_t rows, std::size_t cols) {
  return std::sqrt(6.0 / static_cast<double>(rows + cols));
}

EncoderParams init_params(const EncoderConfig& config, const CharVocab& vocab, std::uint64_t seed) {
  EncoderParams p(config, vocab.size());
  std::mt19937_64 rng(seed);
  const std::size_t h = config.hidden_dim;
  for (const auto& block : p.blocks()) {
    auto values = p.values().subspan(block.offset, block.rows * block.cols);
    if (block.cols == 1) {
      // Biases: zero, forget-gate slice of recurrent biases at 1.
      if (block.name.starts_with("layer")) {
        for (std::size_t i = h; i < 2 * h; ++i) values[i] = 1.0;
      }
      continue;
    }
    const double bound = init_bound(block.rows, block.cols);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : values) v = dist(rng);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Activations of one direction of one layer, indexed by time step.
struct DirectionTape {
  MatrixXd gates;  // 4H x T, post-activation (i, f, g, o)
  MatrixXd cell;   // H x T
  MatrixXd tanh_cell;
  MatrixXd hidden;  // H x T
};

/// Everything a tower needs to replay its forward pass backwards.
struct Tape {
  std::vector<std::int32_t> tokens;
  std::vector<MatrixXd> inputs;  // per layer, I x T
  std::vector<DirectionTape> dirs;  // layer * 2 + direction
  MatrixXd top;  // 2H x T, top layer outputs
  VectorXd pooled;  // 2H
  VectorXd output;
};

void run_direction(const EncoderParams& p, std::size_t layer, int dir, const MatrixXd& x, DirectionTape& tape) {
  const auto T = x.cols();
  const auto H = Eigen::Index(p.config().hidden_dim);
  const auto W = p.input_weights(layer, dir);
  const auto U = p.recurrent_weights(layer, dir);
  const auto b = p.bias(layer, dir);

  tape.gates.noalias() = W * x;
  tape.gates.colwise() += b;
  tape.cell.resize(H, T);
  tape.tanh_cell.resize(H, T);
  tape.hidden.resize(H, T);

  VectorXd h_prev = VectorXd::Zero(H);
  VectorXd c_prev = VectorXd::Zero(H);
  VectorXd z(4 * H);
  for (Eigen::Index s = 0; s < T; ++s) {
    const Eigen::Index t = dir == 0 ? s : T - 1 - s;
    z.noalias() = tape.gates.col(t);
    z.noalias() += U * h_prev;
    auto g = tape.gates.col(t);
    for (Eigen::Index k = 0; k < H; ++k) {
      g[k] = sigmoid(z[k]);
      g[H + k] = sigmoid(z[H + k]);
      g[2 * H + k] = std::tanh(z[2 * H + k]);
      g[3 * H + k] = sigmoid(z[3 * H + k]);
    }
    for (Eigen::Index k = 0; k < H; ++k) {
      const double c = g[H + k] * c_prev[k] + g[k] * g[2 * H + k];
      const double tc = std::tanh(c);
      tape.cell(k, t) = c;
      tape.tanh_cell(k, t) = tc;
      tape.hidden(k, t) = g[3 * H + k] * tc;
    }
    h_prev = tape.hidden.col(t);
    c_prev = tape.cell.col(t);
  }
}

void run_forward(const EncoderParams& p, const CharVocab& vocab, std::string_view name, Tape& tape) {
  const auto& cfg = p.config();
  if (vocab.size() != p.vocab_size()) throw CompatibilityError("vocabulary size does not match parameters");
  tape.tokens = vocab.encode(name);
  if (tape.tokens.empty()) throw std::invalid_argument("cannot embed an empty name");
  const auto T = Eigen::Index(tape.tokens.size());
  const auto H = Eigen::Index(cfg.hidden_dim);
  const auto L = cfg.num_recurrent_layers;

  tape.inputs.resize(L);
  tape.dirs.resize(2 * L);
  const auto E = p.embedding();
  tape.inputs[0].resize(Eigen::Index(cfg.char_embed_dim), T);
  for (Eigen::Index t = 0; t < T; ++t) tape.inputs[0].col(t) = E.col(tape.tokens[std::size_t(t)]);

  for (std::size_t l = 0; l < L; ++l) {
    run_direction(p, l, 0, tape.inputs[l], tape.dirs[2 * l]);
    run_direction(p, l, 1, tape.inputs[l], tape.dirs[2 * l + 1]);
    MatrixXd& out = l + 1 < L ? tape.inputs[l + 1] : tape.top;
    out.resize(2 * H, T);
    out.topRows(H) = tape.dirs[2 * l].hidden;
    out.bottomRows(H) = tape.dirs[2 * l + 1].hidden;
  }

  tape.pooled.resize(2 * H);
  if (cfg.pooling == Pooling::last_state) {
    tape.pooled.head(H) = tape.top.col(T - 1).head(H);
    tape.pooled.tail(H) = tape.top.col(0).tail(H);
  } else {
    tape.pooled = tape.top.rowwise().mean();
  }
  tape.output.noalias() = p.dense_weights() * tape.pooled;
  tape.output += p.dense_bias();
}

/// Backpropagation through time for one direction. `d_hidden` is the
/// upstream gradient on this direction's outputs; returns nothing but adds
/// to the weight gradients and to `d_input`.
void backprop_direction(const EncoderParams& p, std::size_t layer, int dir, const MatrixXd& x,
                        const DirectionTape& tape, const MatrixXd& d_hidden, EncoderParams& grad,
                        MatrixXd& d_input) {
  const auto T = x.cols();
  const auto H = Eigen::Index(p.config().hidden_dim);
  const auto W = p.input_weights(layer, dir);
  const auto U = p.recurrent_weights(layer, dir);

  MatrixXd dz(4 * H, T);
  MatrixXd h_prev_cols = MatrixXd::Zero(H, T);  // h_{t-1} in processing order, per time index
  VectorXd dh_next = VectorXd::Zero(H);
  VectorXd dc_next = VectorXd::Zero(H);

  for (Eigen::Index s = T - 1; s >= 0; --s) {
    const Eigen::Index t = dir == 0 ? s : T - 1 - s;
    const bool has_prev = s > 0;
    const Eigen::Index tp = dir == 0 ? t - 1 : t + 1;
    const auto g = tape.gates.col(t);
    auto z = dz.col(t);
    for (Eigen::Index k = 0; k < H; ++k) {
      const double i = g[k], f = g[H + k], cand = g[2 * H + k], o = g[3 * H + k];
      const double tc = tape.tanh_cell(k, t);
      const double c_prev = has_prev ? tape.cell(k, tp) : 0.0;
      const double dh = d_hidden(k, t) + dh_next[k];
      const double dc = dh * o * (1.0 - tc * tc) + dc_next[k];
      z[k] = dc * cand * i * (1.0 - i);
      z[H + k] = dc * c_prev * f * (1.0 - f);
      z[2 * H + k] = dc * i * (1.0 - cand * cand);
      z[3 * H + k] = dh * tc * o * (1.0 - o);
      dc_next[k] = dc * f;
    }
    if (has_prev) h_prev_cols.col(t) = tape.hidden.col(tp);
    dh_next.noalias() = U.transpose() * z;
  }

  grad.input_weights(layer, dir).noalias() += dz * x.transpose();
  grad.recurrent_weights(layer, dir).noalias() += dz * h_prev_cols.transpose();
  grad.bias(layer, dir) += dz.rowwise().sum();
  d_input.noalias() += W.transpose() * dz;
}

/// Pushes dL/d(output) of one tower back into `grad`.
void run_backward(const EncoderParams& p, const Tape& tape, const VectorXd& d_output, EncoderParams& grad) {
  const auto& cfg = p.config();
  const auto T = Eigen::Index(tape.tokens.size());
  const auto H = Eigen::Index(cfg.hidden_dim);
  const auto L = cfg.num_recurrent_layers;

  grad.dense_weights().noalias() += d_output * tape.pooled.transpose();
  grad.dense_bias() += d_output;
  const VectorXd d_pooled = p.dense_weights().transpose() * d_output;

  MatrixXd d_layer_out = MatrixXd::Zero(2 * H, T);
  if (cfg.pooling == Pooling::last_state) {
    d_layer_out.col(T - 1).head(H) += d_pooled.head(H);
    d_layer_out.col(0).tail(H) += d_pooled.tail(H);
  } else {
    d_layer_out.colwise() += d_pooled / static_cast<double>(T);
  }

  for (std::size_t l = L; l-- > 0;) {
    const MatrixXd& x = tape.inputs[l];
    MatrixXd d_input = MatrixXd::Zero(x.rows(), T);
    const MatrixXd d_fwd = d_layer_out.topRows(H);
    const MatrixXd d_bwd = d_layer_out.bottomRows(H);
    backprop_direction(p, l, 0, x, tape.dirs[2 * l], d_fwd, grad, d_input);
    backprop_direction(p, l, 1, x, tape.dirs[2 * l + 1], d_bwd, grad, d_input);
    d_layer_out = std::move(d_input);
  }

  auto dE = grad.embedding();
  for (Eigen::Index t = 0; t < T; ++t) dE.col(tape.tokens[std::size_t(t)]) += d_layer_out.col(t);
}

/// d(cosine distance)/du for fixed v.
VectorXd cosine_distance_grad(const VectorXd& u, const VectorXd& v) {
  const double nu = u.norm();
  const double nv = v.norm();
  const double cos = u.dot(v) / (nu * nv);
  return -(v / (nu * nv) - cos * u / (nu * nu));
}

thread_local Tape tls_tape_a;
thread_local Tape tls_tape_b;

void check_pair(const TrainingPair& pair) {
  if (!(pair.y >= 0.0 && pair.y <= 1.0)) throw std::invalid_argument("pair label must lie in [0, 1]");
}

}  // namespace

Embedding forward(const EncoderParams& params, const CharVocab& vocab, std::string_view name) {
  Tape tape;
  run_forward(params, vocab, name, tape);
  return std::move(tape.output);
}

double accumulate_gradient(const EncoderParams& params, const CharVocab& vocab, const TrainingPair& pair,
                           double margin, EncoderParams& gradient, double* distance) {
  check_pair(pair);
  if (gradient.size() != params.size()) throw CompatibilityError("gradient buffer does not match parameters");
  Tape& a = tls_tape_a;
  Tape& b = tls_tape_b;
  run_forward(params, vocab, pair.name_a, a);
  run_forward(params, vocab, pair.name_b, b);
  if (a.output.squaredNorm() == 0.0 || b.output.squaredNorm() == 0.0) {
    throw NumericError("zero embedding in pair (" + pair.name_a + ", " + pair.name_b + ")");
  }
  const double delta = cosine_distance(a.output, b.output);
  if (distance) *distance = delta;
  const double loss = contrastive_loss(delta, pair.y, margin);
  const double slope = contrastive_loss_slope(delta, pair.y, margin);
  if (slope == 0.0) return loss;
  run_backward(params, a, slope * cosine_distance_grad(a.output, b.output), gradient);
  run_backward(params, b, slope * cosine_distance_grad(b.output, a.output), gradient);
  return loss;
}

PairGradient backward(const EncoderParams& params, const CharVocab& vocab, const TrainingPair& pair,
                      double margin) {
  PairGradient out{EncoderParams(params.config(), params.vocab_size()), 0.0, 0.0};
  out.loss = accumulate_gradient(params, vocab, pair, margin, out.gradient, &out.distance);
  return out;
}

double pair_loss(const EncoderParams& params, const CharVocab& vocab, const TrainingPair& pair, double margin) {
  check_pair(pair);
  const auto a = forward(params, vocab, pair.name_a);
  const auto b = forward(params, vocab, pair.name_b);
  return contrastive_loss(cosine_distance(a, b), pair.y, margin);
}

EncoderParams numerical_gradient(const EncoderParams& params, const CharVocab& vocab, const TrainingPair& pair,
                                 double margin, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  EncoderParams probe = params;
  EncoderParams grad(params.config(), params.vocab_size());
  auto theta = probe.values();
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    theta[i] = saved + epsilon;
    const double up = pair_loss(probe, vocab, pair, margin);
    theta[i] = saved - epsilon;
    const double down = pair_loss(probe, vocab, pair, margin);
    theta[i] = saved;
    grad.values()[i] = (up - down) / (2.0 * epsilon);
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr std::string_view kModelMagic = "NSE1";

}  // namespace

std::string serialize_model(const EncoderModel& model) {
  const auto& c = model.config;
  if (model.params.config() != c || model.params.vocab_size() != model.vocab.size()) {
    throw CompatibilityError("model parameters do not match its config/vocabulary");
  }
  binio::Writer w;
  w.u64(c.char_embed_dim);
  w.u64(c.hidden_dim);
  w.u64(c.num_recurrent_layers);
  w.u64(c.output_dim);
  w.u64(c.max_sequence_length);
  w.u8(static_cast<std::uint8_t>(c.pooling));
  w.u64(model.vocab.max_sequence_length());
  w.u64(model.vocab.chars().size());
  for (char32_t ch : model.vocab.chars()) w.u32(static_cast<std::uint32_t>(ch));
  w.u64(model.params.size());
  w.f64s(model.params.values());
  return binio::frame(kModelMagic, kModelFormatVersion, w.bytes());
}

EncoderModel deserialize_model(std::string_view bytes) {
  const auto payload = binio::unframe(bytes, kModelMagic, kModelFormatVersion);
  binio::Reader r(payload);
  EncoderModel m;
  m.config.char_embed_dim = r.u64();
  m.config.hidden_dim = r.u64();
  m.config.num_recurrent_layers = r.u64();
  m.config.output_dim = r.u64();
  m.config.max_sequence_length = r.u64();
  m.config.pooling = static_cast<Pooling>(r.u8());
  try {
    m.config.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("invalid encoder config in checkpoint: ") + e.what());
  }
  const auto max_len = r.u64();
  const auto n_chars = r.u64();
  if (n_chars > r.remaining() / 4) throw FormatError("vocabulary larger than payload");
  std::vector<char32_t> chars(n_chars);
  for (auto& ch : chars) ch = static_cast<char32_t>(r.u32());
  if (!std::is_sorted(chars.begin(), chars.end()) || std::adjacent_find(chars.begin(), chars.end()) != chars.end() ||
      max_len == 0) {
    throw FormatError("malformed vocabulary in checkpoint");
  }
  m.vocab = CharVocab(std::move(chars), max_len);
  const auto n_params = r.u64();
  if (n_params != EncoderParams::count(m.config, m.vocab.size())) {
    throw FormatError("parameter count does not match encoder shape");
  }
  m.params = EncoderParams(m.config, m.vocab.size());
  r.f64s(m.params.values());
  if (!r.done()) throw FormatError("trailing bytes in checkpoint payload");
  return m;
}

void save_model(const EncoderModel& model, std::ostream& out) {
  const auto bytes = serialize_model(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed to write model checkpoint");
}

EncoderModel load_model(std::istream& in) { return deserialize_model(binio::read_all(in)); }

std::uint32_t model_fingerprint(const EncoderModel& model) {
  const auto bytes = serialize_model(model);
  binio::Reader tail(std::string_view(bytes).substr(bytes.size() - 4));
  return tail.u32();
}

}  // namespace nseen
