#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sfv {

// Invalid run configuration (schema violation, out-of-range value).  The CLI
// maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Inadmissible hydrodynamic state (non-positive density or pressure) met
// during flux evaluation.  Carries the offending cell so the abort message
// can point at it.  The CLI maps this to exit code 3.
class PositivityError : public std::runtime_error {
 public:
  PositivityError(const std::string& what, std::uint32_t cell_id)
      : std::runtime_error(what), cell(cell_id) {}
  std::uint32_t cell = 0;
};

// A mesh operation produced a cell whose stochastic slab carries no
// probability mass, so measure-weighted averages are undefined on it.
class DegenerateCellError : public std::runtime_error {
 public:
  explicit DegenerateCellError(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace sfv
