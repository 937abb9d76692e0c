#pragma once

#include <stdexcept>
#include <string>

namespace aafwi {

/// Operation called on an object whose state does not permit it
/// (e.g. dropping a column from an empty QR window).
class InvalidState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Explicit time step violates the CFL bound, or a run produced non-finite values.
class StabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File format failures. `kind()` distinguishes the cases callers can act on.
class FormatError : public std::runtime_error {
 public:
  enum class Kind { io, header_mismatch, size_mismatch };

  FormatError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace aafwi
