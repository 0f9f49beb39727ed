#pragma once

#include <stdexcept>

namespace sariwatch {

/// An index, count, or window falls outside the data it addresses.
struct BoundsError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

/// Input is well-formed but mathematically unusable (empty sample, label mismatch, ...).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// A file could not be read or does not match the expected schema.
struct IngestionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A key (week, state, column) is absent from a table.
struct LookupError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

}  // namespace sariwatch
