#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pacdnn {

/// Failure categories raised by the library. Every throw site uses one of these.
enum class Errc {
  invalid_argument,
  invalid_kernel,
  dimension_mismatch,
  non_unique_stationary,
  zero_stationary_mass,
  eigen_failure,
  not_mixed_within_cap,
  unvisited_state,
  architecture_too_large,
  empty_dataset,
  out_of_support,
  invalid_class,
  no_draws,
  theta_out_of_range,
  lambda_out_of_range,
  too_few_points,
  mismatched_effective_size,
  io_error,
  config_error,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace pacdnn
