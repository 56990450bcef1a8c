/* SPDX-License-Identifier: Apache-2.0 */

#include "nseen/commands.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "nseen/ann_index.hpp"
#include "nseen/encoder.hpp"
#include "nseen/pairs.hpp"
#include "nseen/refset.hpp"
#include "nseen/retrieval.hpp"
#include "nseen/training.hpp"

namespace nseen::cli {

namespace fs = std::filesystem;

namespace {

const std::string& require_path(const std::string& path, const char* key) {
  if (path.empty()) throw UsageError(std::string("missing required setting '") + key + "'");
  return path;
}

std::ifstream open_input(const std::string& path, const char* key, std::ios::openmode mode = std::ios::in) {
  require_path(path, key);
  if (!fs::is_regular_file(path)) throw UsageError(std::string(key) + " file not found: " + path);
  std::ifstream in(path, mode);
  if (!in) throw UsageError(std::string("cannot open ") + key + " file: " + path);
  return in;
}

std::ofstream open_output(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

ReferenceSet load_reference(const RunConfig& c) {
  auto in = open_input(c.reference_path, "reference");
  return parse_reference_set(in);
}

EncoderModel load_checkpoint(const RunConfig& c) {
  auto in = open_input(c.model_path, "model", std::ios::binary);
  return load_model(in);
}

EmbeddingIndex load_index_file(const RunConfig& c) {
  auto in = open_input(c.index_path, "index", std::ios::binary);
  return load_index(in);
}

/// Model + index pair whose fingerprints agree.
std::pair<EncoderModel, EmbeddingIndex> load_artifacts(const RunConfig& c) {
  auto model = load_checkpoint(c);
  auto index = load_index_file(c);
  check_fingerprint(index, model);
  return {std::move(model), std::move(index)};
}

}  // namespace

void cmd_ingest_check(const RunConfig& config, std::ostream& out) {
  const auto r = load_reference(config);
  const auto stats = reference_stats(r);
  out << "entities\t" << stats.entities << '\n' << "name_pairs\t" << stats.name_pairs << '\n';
  for (const auto& [names, entities] : stats.names_per_entity) out << "names_per_entity\t" << names << '\t' << entities << '\n';
  std::size_t ambiguous = 0;
  for (const auto& [name, ids] : r.name_lookup()) ambiguous += ids.size() > 1 ? 1 : 0;
  out << "ambiguous_names\t" << ambiguous << '\n';
  if (!config.queries_path.empty()) {
    auto in = open_input(config.queries_path, "queries");
    const auto queries = parse_query_set(in);
    std::size_t missing = 0;
    for (const auto& q : queries) missing += r.contains(q.gold_id) ? 0 : 1;
    out << "queries\t" << queries.size() << '\n' << "queries_missing_gold\t" << missing << '\n';
  }
  if (!config.families_path.empty()) {
    auto in = open_input(config.families_path, "families");
    const auto families = parse_family_map(in, r);
    out << "families\t" << families.size() << '\n';
  }
}

void cmd_train(const RunConfig& config, std::ostream& out) {
  const auto& model_path = require_path(config.model_path, "model");
  const auto r = load_reference(config);
  FamilyMap families;
  if (!config.families_path.empty()) {
    auto in = open_input(config.families_path, "families");
    families = parse_family_map(in, r);
  }
  auto domain = generate_variation_pairs(r, families, derive_seed(config.seed, 4), config.variation);
  if (!config.domain_pairs_path.empty()) {
    auto in = open_input(config.domain_pairs_path, "domain pairs");
    domain.merge(read_pairs(in));
  }

  auto log = open_output(fs::path(config.output_dir) / "metrics.log");
  const auto result = train_similarity(r, domain, config.train, config.encoder, &log);

  auto model_out = open_output(model_path, std::ios::binary);
  save_model(result.model, model_out);
  model_out.close();
  if (!model_out) throw Error("failed to write " + model_path);

  char fp[16];
  std::snprintf(fp, sizeof fp, "%08x", model_fingerprint(result.model));
  out << "pairs\t" << result.data.size() << '\n';
  for (std::size_t s = 0; s < kPairSourceCount; ++s) {
    out << "pairs." << to_string(PairSource(s)) << '\t' << result.data.count(PairSource(s)) << '\n';
  }
  out << "model\t" << model_path << '\n' << "fingerprint\t" << fp << '\n';
}

void cmd_build_index(const RunConfig& config, std::ostream& out) {
  const auto& index_path = require_path(config.index_path, "index");
  const auto model = load_checkpoint(config);
  const auto r = load_reference(config);
  const auto index = embed_reference(model, r, config.index);
  auto file = open_output(index_path, std::ios::binary);
  save_index(index, file);
  file.close();
  if (!file) throw Error("failed to write " + index_path);
  out << "rows\t" << index.store.size() << '\n' << "name_pairs\t" << r.name_count() << '\n';
}

void cmd_query(const RunConfig& config, const std::string& mention, std::size_t k, std::ostream& out) {
  if (mention.empty()) throw UsageError("mention must not be empty");
  if (k == 0) throw UsageError("k must be at least 1");
  const auto [model, index] = load_artifacts(config);
  const auto result = retrieve(index, model, mention, k, config.retrieval);
  char dist[32];
  for (std::size_t i = 0; i < result.candidates.size(); ++i) {
    const auto& c = result.candidates[i];
    std::snprintf(dist, sizeof dist, "%.17g", c.distance);
    out << (i + 1) << '\t' << c.entity_id.str() << '\t' << c.name << '\t' << dist << '\n';
  }
}

void cmd_evaluate(const RunConfig& config, std::ostream& out) {
  auto qin = open_input(config.queries_path, "queries");
  const auto queries = parse_query_set(qin);
  if (queries.empty()) throw UsageError("query file has no records: " + config.queries_path);
  const auto [model, index] = load_artifacts(config);
  const auto report = evaluate_hits_at_k(index, model, queries, config.ks, config.retrieval);

  const fs::path dir(config.output_dir);
  auto hits = open_output(dir / "hits.tsv");
  write_hits_table(report, hits);
  auto details = open_output(dir / "query_details.tsv");
  write_query_details(report, details);

  write_hits_table(report, out);
  out << "queries\t" << report.queries.size() << '\n' << "missing_gold\t" << report.missing_gold << '\n';
}

void cmd_dump_embeddings(const RunConfig& config, const std::string& path, std::ostream& out) {
  const auto [model, index] = load_artifacts(config);
  if (path.empty()) {
    dump_embeddings(index, out);
    return;
  }
  auto file = open_output(path);
  dump_embeddings(index, file);
}

namespace {

std::string flag_name(const std::string& key) {
  std::string f = key;
  for (auto& ch : f) {
    if (ch == '_') ch = '-';
  }
  return "--" + f;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Entity-name normalization with learned character embeddings", "nseen"};
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::string config_file;
  app.add_option("--config", config_file, "Flat key = value config file (flags override it)");
  std::map<std::string, std::string> overrides;
  for (const auto& key : config_keys()) app.add_option(flag_name(key), overrides[key], "Override '" + key + "'");

  auto* ingest = app.add_subcommand("ingest-check", "Validate input files and print reference statistics");
  auto* train = app.add_subcommand("train", "Train the encoder with hard-negative rounds");
  auto* build = app.add_subcommand("build-index", "Embed the reference set and write the index");
  auto* query = app.add_subcommand("query", "Rank reference entities for one mention");
  std::string mention;
  std::size_t k = 10;
  bool mention_given = false;
  query->add_option("mention", mention, "Mention text")->required();
  query->add_option("-k", k, "Number of entities to return");
  auto* evaluate = app.add_subcommand("evaluate", "Hits@k over a gold query set");
  auto* dump = app.add_subcommand("dump-embeddings", "Write stored reference embeddings as TSV");
  std::string dump_path;
  dump->add_option("--out", dump_path, "Output file (default: standard output)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o;
    std::ostringstream eo;
    const int code = app.exit(e, o, eo);
    out << o.str();
    err << eo.str();
    return code == 0 ? kOk : kUsageError;
  }
  mention_given = query->parsed();

  try {
    RunConfig config;
    if (!config_file.empty()) {
      auto in = open_input(config_file, "config");
      read_config(in, config);
    }
    for (const auto& [key, value] : overrides) {
      if (app.count(flag_name(key)) > 0) apply_setting(config, key, value);
    }
    if (!config.seed_set) {
      if (const char* env = std::getenv("NSEEN_SEED")) apply_setting(config, "seed", env);
    }
    config.propagate_seed();

    if (ingest->parsed()) {
      cmd_ingest_check(config, out);
    } else if (train->parsed()) {
      cmd_train(config, out);
    } else if (build->parsed()) {
      cmd_build_index(config, out);
    } else if (mention_given) {
      cmd_query(config, mention, k, out);
    } else if (evaluate->parsed()) {
      cmd_evaluate(config, out);
    } else if (dump->parsed()) {
      cmd_dump_embeddings(config, dump_path, out);
    }
    return kOk;
  } catch (const CompatibilityError& e) {
    err << "nseen: incompatible artifacts: " << e.what() << '\n';
    return kCompatibilityError;
  } catch (const UsageError& e) {
    err << "nseen: " << e.what() << '\n';
    return kUsageError;
  } catch (const ParseError& e) {
    err << "nseen: parse error: " << e.what() << '\n';
    return kUsageError;
  } catch (const FormatError& e) {
    err << "nseen: bad artifact: " << e.what() << '\n';
    return kUsageError;
  } catch (const IntegrityError& e) {
    err << "nseen: corrupt artifact: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::invalid_argument& e) {
    err << "nseen: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    err << "nseen: " << e.what() << '\n';
    return kRuntimeFailure;
  }
}

}  // namespace nseen::cli
