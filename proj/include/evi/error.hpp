#pragma once

#include <stdexcept>
#include <string>

namespace evi {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Argument outside the supported range (mesh level, index bounds).
struct BoundsError : Error {
  using Error::Error;
};

/// Inconsistent mesh/vector structure (non-nested meshes, size mismatch).
struct StructureError : Error {
  using Error::Error;
};

/// A scalar field produced a non-finite value where one was required.
struct EvaluationError : Error {
  using Error::Error;
};

/// Unknown problem case or registry key.
struct LookupError : Error {
  using Error::Error;
};

/// Instance too large for the requested (enumerative) algorithm.
struct SizeError : Error {
  using Error::Error;
};

/// Iterative solver failed to reach its tolerance.
struct SolverError : Error {
  double residual;
  int iterations;
  SolverError(const std::string& msg, double res, int iters)
      : Error(msg), residual(res), iterations(iters) {}
};

}  // namespace evi
