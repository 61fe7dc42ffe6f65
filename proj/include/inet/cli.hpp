#pragma once

#include <ostream>

#include "inet/common.hpp"

namespace inet {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

int exit_code_for(const Error& error);

/// Parses argv, runs one subcommand and maps failures to exit codes. Failures print one
/// line "error: kind=<config|data|numerical> message=<json string>" to err.
int command_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace inet
