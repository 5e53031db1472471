#pragma once

#include <CLI11.hpp>

namespace tsr::cli {

/// Registers every subcommand on `app`. Each registered callback throws
/// tsr::Error on runtime failure.
void register_commands(CLI::App& app);

}  // namespace tsr::cli
