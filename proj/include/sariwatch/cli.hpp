#pragma once

#include <iosfwd>

namespace sariwatch::cli {

enum ExitCode : int {
  success = 0,
  config_error = 1,
  ingestion_error = 2,
  partial = 3,
};

/// Entry point of the `sariwatch` tool: subcommands `events`, `estimate`, `ingest`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sariwatch::cli
