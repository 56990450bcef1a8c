/* SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "nseen/ann_index.hpp"
#include "nseen/encoder.hpp"
#include "nseen/pairs.hpp"
#include "nseen/retrieval.hpp"
#include "nseen/training.hpp"

namespace nseen {

/// Everything a pipeline command needs. Built from a flat `key = value`
/// file, then overridden by command-line flags.
struct RunConfig {
  std::string reference_path;
  std::string queries_path;
  std::string families_path;
  std::string domain_pairs_path;  // extra labelled domain pairs, pairs TSV
  std::string model_path;
  std::string index_path;
  std::string output_dir = ".";

  std::uint64_t seed = 0;
  bool seed_set = false;  // explicitly given by file or flag

  TrainConfig train;
  EncoderConfig encoder;
  IndexConfig index;
  RetrievalOptions retrieval;
  VariationOptions variation;

  std::size_t threads = 1;
  std::vector<std::size_t> ks{1, 3, 5, 10};

  /// Seeds every stochastic component from `seed`.
  void propagate_seed();
};

/// Recognized keys, in documentation order.
const std::vector<std::string>& config_keys();

/// Sets one key. Throws std::invalid_argument on an unknown key or a value
/// that does not parse.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);

/// Reads `key = value` lines (`#` comments, blank lines allowed) into
/// `config`. Throws ParseError with the line number on bad lines.
void read_config(std::istream& in, RunConfig& config);

void write_config(const RunConfig& config, std::ostream& out);

}  // namespace nseen
