/* SPDX-License-Identifier: Apache-2.0 */

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "nseen/encoder.hpp"
#include "nseen/error.hpp"
#include "nseen/loss.hpp"
#include "nseen/pairs.hpp"

namespace nseen {
namespace {

EncoderConfig small_config(std::size_t e, std::size_t h, std::size_t l, std::size_t o,
                           Pooling pooling = Pooling::last_state) {
  EncoderConfig c;
  c.char_embed_dim = e;
  c.hidden_dim = h;
  c.num_recurrent_layers = l;
  c.output_dim = o;
  c.max_sequence_length = 16;
  c.pooling = pooling;
  return c;
}

CharVocab vocab_of(std::initializer_list<std::string> names, std::size_t max_len = 16) {
  std::vector<std::string> v(names);
  return build_vocab(v, max_len);
}

// Norm-wise relative error; zero when both gradients vanish.
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

TEST(vocab, indices_and_unknown) {
  const auto v = vocab_of({"ab", "bc"});
  EXPECT_EQ(v.size(), 4u);
  EXPECT_EQ(v.index(U'a'), 1);
  EXPECT_EQ(v.index(U'c'), 3);
  EXPECT_EQ(v.index(U'z'), CharVocab::kUnknown);
  EXPECT_EQ(v.encode("cab?"), (std::vector<std::int32_t>{3, 1, 2, 0}));
}

TEST(vocab, truncates_to_max_length) {
  const auto v = vocab_of({"abc"}, 2);
  EXPECT_EQ(v.encode("abcabc").size(), 2u);
  EXPECT_EQ(vocab_of({"γ"}).encode("γγ").size(), 2u);  // code points, not bytes
}

TEST(params, count_and_layout) {
  const auto c = small_config(2, 3, 1, 2);
  // 2*4 embedding + 2 * (12*2 + 12*3 + 12) + 2*6 + 2
  EXPECT_EQ(EncoderParams::count(c, 4), 166u);
  EncoderParams p(c, 4);
  EXPECT_EQ(p.size(), 166u);
  std::size_t covered = 0;
  for (const auto& b : p.blocks()) {
    EXPECT_EQ(b.offset, covered) << b.name;
    covered += b.rows * b.cols;
  }
  EXPECT_EQ(covered, p.size());
  EXPECT_EQ(p.layer_input_dim(0), 2u);

  const auto deep = small_config(2, 3, 3, 2);
  EncoderParams q(deep, 4);
  EXPECT_EQ(q.layer_input_dim(2), 6u);
  EXPECT_EQ(q.input_weights(1, 1).rows(), 12);
  EXPECT_EQ(q.input_weights(1, 1).cols(), 6);
}

TEST(params, init_is_deterministic_and_bounded) {
  const auto c = small_config(4, 5, 2, 3);
  const auto v = vocab_of({"abcdef"});
  const auto a = init_params(c, v, 42);
  EXPECT_EQ(a, init_params(c, v, 42));
  EXPECT_FALSE(a == init_params(c, v, 43));
  EXPECT_NEAR(init_bound(20, 4), std::sqrt(6.0 / 24.0), 1e-15);

  for (std::size_t l = 0; l < 2; ++l) {
    for (int d = 0; d < 2; ++d) {
      const auto w = a.input_weights(l, d);
      EXPECT_LE(w.cwiseAbs().maxCoeff(), init_bound(w.rows(), w.cols()));
      const auto b = a.bias(l, d);
      EXPECT_TRUE(b.segment(5, 5).isConstant(1.0));  // forget gate
      EXPECT_TRUE(b.head(5).isZero());
      EXPECT_TRUE(b.tail(10).isZero());
    }
  }
  EXPECT_TRUE(a.dense_bias().isZero());
}

TEST(forward, shape_purity_and_truncation) {
  auto c = small_config(3, 4, 2, 5);
  c.max_sequence_length = 4;
  const auto v = vocab_of({"abcdef"}, 4);
  const auto p = init_params(c, v, 1);
  const auto e = forward(p, v, "abcd");
  EXPECT_EQ(e.size(), 5);
  EXPECT_EQ(e, forward(p, v, "abcd"));
  EXPECT_EQ(e, forward(p, v, "abcdxyz"));  // truncated to the same prefix
  EXPECT_NE(e, forward(p, v, "abce"));
  EXPECT_THROW(forward(p, v, ""), std::invalid_argument);
}

TEST(forward, unknown_characters_embed) {
  const auto c = small_config(3, 4, 1, 5);
  const auto v = vocab_of({"ab"});
  const auto p = init_params(c, v, 1);
  EXPECT_EQ(forward(p, v, "xyz"), forward(p, v, "zzz"));  // all map to the unknown row
  EXPECT_TRUE(forward(p, v, "xyz").allFinite());
}

struct Regime {
  const char* label;
  double y;
  // Margin as a function of the pair's current distance.
  double (*margin)(double delta);
};

// Gradient check across seeds, shapes and every loss regime.
TEST(gradient, matches_central_differences) {
  const Regime regimes[] = {
      {"y=1", 1.0, [](double) { return 1.0; }},
      {"y=0 inside margin", 0.0, [](double d) { return d + 0.5; }},
      {"y=0 outside margin", 0.0, [](double d) { return d * 0.5; }},
      {"y=0.5", 0.5, [](double) { return 1.0; }},
  };
  const EncoderConfig shapes[] = {
      small_config(3, 4, 1, 3),
      small_config(4, 3, 2, 5, Pooling::mean),
      small_config(2, 2, 4, 3),
  };
  const auto v = vocab_of({"FOXP2", "fox-p2 γ"});
  const TrainingPair base{"FOX P2", "foxp2γ-", 0.0, PairSource::positive};

  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (const auto& shape : shapes) {
      const auto params = init_params(shape, v, seed);
      const double delta = cosine_distance(forward(params, v, base.name_a), forward(params, v, base.name_b));
      for (const auto& r : regimes) {
        TrainingPair pair = base;
        pair.y = r.y;
        const double margin = r.margin(delta);
        const auto analytic = backward(params, v, pair, margin);
        const auto numeric = numerical_gradient(params, v, pair, margin, 1e-5);
        const double err = relative_error(analytic.gradient, numeric);
        worst = std::max(worst, err);
        EXPECT_LT(err, 1e-4) << r.label << " seed " << seed << " layers " << shape.num_recurrent_layers;
        EXPECT_NEAR(analytic.loss, contrastive_loss(delta, r.y, margin), 1e-12);
        if (r.y == 0.0 && margin < delta) {
          EXPECT_TRUE(std::all_of(analytic.gradient.values().begin(), analytic.gradient.values().end(),
                                  [](double g) { return g == 0.0; }));
        }
      }
    }
  }
  RecordProperty("worst_relative_error", std::to_string(worst));
}

TEST(gradient, symmetric_in_pair_order) {
  const auto c = small_config(3, 4, 2, 3);
  const auto v = vocab_of({"abcde"});
  const auto p = init_params(c, v, 9);
  const auto g1 = backward(p, v, TrainingPair{"abc", "dea", 0.3, PairSource::positive}, 1.0);
  const auto g2 = backward(p, v, TrainingPair{"dea", "abc", 0.3, PairSource::positive}, 1.0);
  EXPECT_NEAR(g1.loss, g2.loss, 1e-15);
  EXPECT_LT(relative_error(g1.gradient, g2.gradient), 1e-12);
}

TEST(gradient, accumulate_adds_into_buffer) {
  const auto c = small_config(3, 4, 1, 3);
  const auto v = vocab_of({"abcde"});
  const auto p = init_params(c, v, 2);
  const TrainingPair pair{"abc", "ed", 1.0, PairSource::positive};
  const auto single = backward(p, v, pair, 1.0);
  EncoderParams acc(c, v.size());
  double d = -1.0;
  accumulate_gradient(p, v, pair, 1.0, acc, &d);
  accumulate_gradient(p, v, pair, 1.0, acc);
  EXPECT_NEAR(d, single.distance, 1e-15);
  for (std::size_t i = 0; i < acc.size(); ++i) EXPECT_NEAR(acc.values()[i], 2 * single.gradient.values()[i], 1e-12);
}

// Central differences have O(eps^2) truncation error: halving eps on a
// smooth function cuts the error by about four.
TEST(gradient, central_difference_order_on_quadratic_loss) {
  auto f = [](double d) { return contrastive_loss(d, 1.0, 1.0) + d * d * d; };
  auto exact = [](double d) { return d + 3 * d * d; };
  const double x = 0.4;
  auto err = [&](double eps) { return std::abs((f(x + eps) - f(x - eps)) / (2 * eps) - exact(x)); };
  const double ratio = err(1e-2) / err(5e-3);
  EXPECT_NEAR(ratio, 4.0, 0.1);
}

TEST(checkpoint, round_trip_is_exact) {
  const auto c = small_config(3, 4, 2, 5, Pooling::mean);
  const auto v = vocab_of({"abcγ"});
  EncoderModel m{c, v, init_params(c, v, 5)};
  std::stringstream buf;
  save_model(m, buf);
  const auto back = load_model(buf);
  EXPECT_EQ(back, m);
  EXPECT_EQ(back.embed("abγ"), m.embed("abγ"));
  EXPECT_EQ(model_fingerprint(back), model_fingerprint(m));
}

TEST(checkpoint, corruption_is_detected) {
  const auto c = small_config(2, 3, 1, 2);
  const auto v = vocab_of({"ab"});
  const auto bytes = serialize_model(EncoderModel{c, v, init_params(c, v, 5)});

  EXPECT_THROW(deserialize_model(bytes.substr(0, bytes.size() - 9)), FormatError);
  EXPECT_THROW(deserialize_model(""), FormatError);

  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  EXPECT_THROW(deserialize_model(flipped), IntegrityError);

  auto magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(deserialize_model(magic), FormatError);

  auto version = bytes;
  version[4] = 9;
  EXPECT_THROW(deserialize_model(version), FormatError);
}

}  // namespace
}  // namespace nseen
