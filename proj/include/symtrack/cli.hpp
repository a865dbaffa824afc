#pragma once

#include <iosfwd>
#include <string>

#include "symtrack/geom.hpp"

namespace symtrack {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `symtrack` command: gen, gradcheck, fit, track.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Loads an OBJ file, or a built-in shape given as builtin:box,
/// builtin:cylinder or builtin:icosphere.
TriMesh load_mesh_arg(const std::string& spec);

}  // namespace symtrack
