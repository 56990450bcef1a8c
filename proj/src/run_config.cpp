/* SPDX-License-Identifier: Apache-2.0 */

#include "nseen/run_config.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>

#include "nseen/error.hpp"
#include "nseen/utf8.hpp"

namespace nseen {

namespace {

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw std::invalid_argument("bad value '" + std::string(value) + "' for " + std::string(key));
  }
  return out;
}

std::vector<std::size_t> parse_list(std::string_view key, std::string_view value) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= value.size()) {
    auto comma = value.find(',', start);
    if (comma == std::string_view::npos) comma = value.size();
    out.push_back(parse_number<std::size_t>(key, utf8::trim(value.substr(start, comma - start))));
    start = comma + 1;
  }
  return out;
}

using Setter = std::function<void(RunConfig&, std::string_view, std::string_view)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Field {
  Setter set;
  Getter get;
};

template <typename T>
Field number_field(T RunConfig::*outer) {
  return {[outer](RunConfig& c, std::string_view k, std::string_view v) { c.*outer = parse_number<T>(k, v); },
          [outer](const RunConfig& c) { return std::to_string(c.*outer); }};
}

template <typename S, typename T>
Field nested_number(S RunConfig::*outer, T S::*inner) {
  return {[=](RunConfig& c, std::string_view k, std::string_view v) { (c.*outer).*inner = parse_number<T>(k, v); },
          [=](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              char buf[32];
              std::snprintf(buf, sizeof buf, "%.17g", (c.*outer).*inner);
              return std::string(buf);
            } else {
              return std::to_string((c.*outer).*inner);
            }
          }};
}

Field string_field(std::string RunConfig::*member) {
  return {[member](RunConfig& c, std::string_view, std::string_view v) { c.*member = std::string(v); },
          [member](const RunConfig& c) { return c.*member; }};
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = [] {
    std::vector<std::pair<std::string, Field>> t;
    t.emplace_back("reference", string_field(&RunConfig::reference_path));
    t.emplace_back("queries", string_field(&RunConfig::queries_path));
    t.emplace_back("families", string_field(&RunConfig::families_path));
    t.emplace_back("domain_pairs", string_field(&RunConfig::domain_pairs_path));
    t.emplace_back("model", string_field(&RunConfig::model_path));
    t.emplace_back("index", string_field(&RunConfig::index_path));
    t.emplace_back("output_dir", string_field(&RunConfig::output_dir));
    t.emplace_back("seed", Field{[](RunConfig& c, std::string_view k, std::string_view v) {
                                   c.seed = parse_number<std::uint64_t>(k, v);
                                   c.seed_set = true;
                                 },
                                 [](const RunConfig& c) { return std::to_string(c.seed); }});
    t.emplace_back("threads", number_field(&RunConfig::threads));
    t.emplace_back("ks", Field{[](RunConfig& c, std::string_view k, std::string_view v) { c.ks = parse_list(k, v); },
                               [](const RunConfig& c) {
                                 std::string s;
                                 for (auto k : c.ks) s += (s.empty() ? "" : ",") + std::to_string(k);
                                 return s;
                               }});
    t.emplace_back("margin", nested_number(&RunConfig::train, &TrainConfig::margin));
    t.emplace_back("learning_rate", nested_number(&RunConfig::train, &TrainConfig::learning_rate));
    t.emplace_back("batch_size", nested_number(&RunConfig::train, &TrainConfig::batch_size));
    t.emplace_back("epochs_per_round", nested_number(&RunConfig::train, &TrainConfig::epochs_per_round));
    t.emplace_back("rounds", nested_number(&RunConfig::train, &TrainConfig::rounds));
    t.emplace_back("hard_neg_k", nested_number(&RunConfig::train, &TrainConfig::hard_neg_k));
    t.emplace_back("cap_per_entity", nested_number(&RunConfig::train, &TrainConfig::cap_per_entity));
    t.emplace_back("negative_ratio", nested_number(&RunConfig::train, &TrainConfig::negative_ratio));
    t.emplace_back("family_pair_budget", nested_number(&RunConfig::variation, &VariationOptions::family_pair_budget));
    t.emplace_back("char_embed_dim", nested_number(&RunConfig::encoder, &EncoderConfig::char_embed_dim));
    t.emplace_back("hidden_dim", nested_number(&RunConfig::encoder, &EncoderConfig::hidden_dim));
    t.emplace_back("num_recurrent_layers", nested_number(&RunConfig::encoder, &EncoderConfig::num_recurrent_layers));
    t.emplace_back("output_dim", nested_number(&RunConfig::encoder, &EncoderConfig::output_dim));
    t.emplace_back("max_sequence_length", nested_number(&RunConfig::encoder, &EncoderConfig::max_sequence_length));
    t.emplace_back("pooling", Field{[](RunConfig& c, std::string_view, std::string_view v) {
                                      if (v == "last_state") {
                                        c.encoder.pooling = Pooling::last_state;
                                      } else if (v == "mean") {
                                        c.encoder.pooling = Pooling::mean;
                                      } else {
                                        throw std::invalid_argument("pooling must be last_state or mean");
                                      }
                                    },
                                    [](const RunConfig& c) {
                                      return std::string(c.encoder.pooling == Pooling::mean ? "mean" : "last_state");
                                    }});
    t.emplace_back("n_trees", nested_number(&RunConfig::index, &IndexConfig::n_trees));
    t.emplace_back("max_leaf_size", nested_number(&RunConfig::index, &IndexConfig::max_leaf_size));
    t.emplace_back("search_budget_factor", nested_number(&RunConfig::index, &IndexConfig::search_budget_factor));
    t.emplace_back("overfetch", nested_number(&RunConfig::retrieval, &RetrievalOptions::overfetch));
    return t;
  }();
  return table;
}

}  // namespace

void RunConfig::propagate_seed() {
  train.seed = seed;
  train.threads = threads;
  train.mining_index.n_trees = index.n_trees;
  train.mining_index.max_leaf_size = index.max_leaf_size;
  train.mining_index.search_budget_factor = index.search_budget_factor;
  index.seed = derive_seed(seed, 77);
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, _] : fields()) k.push_back(name);
    return k;
  }();
  return keys;
}

void apply_setting(RunConfig& config, std::string_view key, std::string_view value) {
  for (const auto& [name, field] : fields()) {
    if (name == key) {
      field.set(config, key, value);
      return;
    }
  }
  throw std::invalid_argument("unknown config key '" + std::string(key) + "'");
}

void read_config(std::istream& in, RunConfig& config) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = utf8::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, "expected key = value");
    try {
      apply_setting(config, utf8::trim(std::string_view(t).substr(0, eq)), utf8::trim(std::string_view(t).substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw ParseError(line_no, e.what());
    }
  }
}

void write_config(const RunConfig& config, std::ostream& out) {
  for (const auto& [name, field] : fields()) out << name << " = " << field.get(config) << '\n';
}

}  // namespace nseen
