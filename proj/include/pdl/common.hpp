#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace pdl {

// Error taxonomy. The CLI maps these onto process exit codes
// (config 2, data 3, numeric 4), everything else is 1.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operand shapes do not conform.
struct dim_error : error {
  using error::error;
};

// A NaN/Inf appeared; message names the producing operation.
struct numeric_error : error {
  explicit numeric_error(const std::string& op_tag, const std::string& what)
      : error("numeric error in '" + op_tag + "': " + what), op(op_tag) {}
  std::string op;
};

// API misuse (e.g. backward on a non-scalar root).
struct contract_error : error {
  using error::error;
};

struct config_error : error {
  using error::error;
};

struct data_error : error {
  using error::error;
};

// Malformed file contents; message carries offset or line info.
struct parse_error : error {
  using error::error;
};

struct version_error : error {
  using error::error;
};

// Work size exceeds a hard enumeration/iteration budget.
struct budget_error : error {
  using error::error;
};

// Random data generation failed its own retry budget.
struct generation_error : error {
  using error::error;
};

struct io_error : error {
  using error::error;
};

}  // namespace pdl
