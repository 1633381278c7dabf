#pragma once

#include <stdexcept>
#include <string>

namespace sae {

/// Invalid configuration or inconsistent input dimensions.
class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed input file. Carries the 1-based data row when known (0 otherwise).
class ParseError : public std::runtime_error {
  public:
    ParseError(const std::string &message, std::size_t row = 0)
        : std::runtime_error{row == 0 ? message : "row " + std::to_string(row) + ": " + message},
          row_{row} {}

    [[nodiscard]] std::size_t row() const noexcept { return row_; }

  private:
    std::size_t row_;
};

/// Sampling design cannot be realised (e.g. n > N).
class DesignError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

/// Numerical breakdown: singular systems, failed factorisations, non-finite densities.
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

} // namespace sae
