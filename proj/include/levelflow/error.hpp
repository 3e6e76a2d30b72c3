#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace levelflow {

enum class Errc {
  invalid_dimension,
  invalid_scale,
  invalid_argument,
  out_of_range,
  invalid_order,
  eigensolver_failure,
  stencil_crossing,
  near_degeneracy,
  edge_proximity,
  empty_batch,
  zero_velocity_variance,
  degenerate_batch,
  invalid_gamma,
  invalid_edges,
  no_minimum_in_bracket,
  insufficient_bins,
  empty_input,
  insufficient_tail_data,
  parse_error,
  io_error,
};

// Broad failure classes; the CLI maps these onto its exit status.
enum class ErrorClass { validation = 1, numerical = 2, io = 3 };

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_dimension: return "invalid-dimension";
    case Errc::invalid_scale: return "invalid-scale";
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::out_of_range: return "out-of-range";
    case Errc::invalid_order: return "invalid-order";
    case Errc::eigensolver_failure: return "eigensolver-failure";
    case Errc::stencil_crossing: return "stencil-crossing";
    case Errc::near_degeneracy: return "near-degeneracy";
    case Errc::edge_proximity: return "edge-proximity";
    case Errc::empty_batch: return "empty-batch";
    case Errc::zero_velocity_variance: return "zero-velocity-variance";
    case Errc::degenerate_batch: return "degenerate-batch";
    case Errc::invalid_gamma: return "invalid-gamma";
    case Errc::invalid_edges: return "invalid-edges";
    case Errc::no_minimum_in_bracket: return "no-minimum-in-bracket";
    case Errc::insufficient_bins: return "insufficient-bins";
    case Errc::empty_input: return "empty-input";
    case Errc::insufficient_tail_data: return "insufficient-tail-data";
    case Errc::parse_error: return "parse-error";
    case Errc::io_error: return "io-error";
  }
  return "unknown";
}

constexpr ErrorClass error_class(Errc code) noexcept {
  switch (code) {
    case Errc::eigensolver_failure:
    case Errc::stencil_crossing:
    case Errc::near_degeneracy:
    case Errc::edge_proximity:
    case Errc::zero_velocity_variance:
    case Errc::degenerate_batch:
    case Errc::no_minimum_in_bracket:
      return ErrorClass::numerical;
    case Errc::io_error:
      return ErrorClass::io;
    default:
      return ErrorClass::validation;
  }
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }
  ErrorClass error_class() const noexcept { return levelflow::error_class(code_); }

 private:
  Errc code_;
};

}  // namespace levelflow
