/* SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "nseen/error.hpp"
#include "nseen/run_config.hpp"

namespace nseen::cli {

/// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kRuntimeFailure = 1,
  kUsageError = 2,
  kCompatibilityError = 3,
};

/// Bad invocation or missing input file (exit code 2).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Parses reference (and, when configured, query and family files) and
/// prints reference statistics.
void cmd_ingest_check(const RunConfig& config, std::ostream& out);

/// Trains a model, writes the checkpoint to model_path and the metrics log
/// to <output_dir>/metrics.log.
void cmd_train(const RunConfig& config, std::ostream& out);

/// Embeds the reference with the checkpoint and writes index_path.
void cmd_build_index(const RunConfig& config, std::ostream& out);

/// Prints `rank<TAB>entity_id<TAB>name<TAB>distance` lines.
void cmd_query(const RunConfig& config, const std::string& mention, std::size_t k, std::ostream& out);

/// Writes <output_dir>/hits.tsv and <output_dir>/query_details.tsv and
/// echoes the hits table.
void cmd_evaluate(const RunConfig& config, std::ostream& out);

/// Writes the embedding dump to `path`, or to `out` when path is empty.
void cmd_dump_embeddings(const RunConfig& config, const std::string& path, std::ostream& out);

/// Full command-line entry point. Never throws; returns an ExitCode.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace nseen::cli
