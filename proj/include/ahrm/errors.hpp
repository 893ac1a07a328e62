#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ahrm {

// Raised when an operation is called in a state that does not permit it
// (stepping a terminated episode, averaging an empty table, ...).
class InvalidState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class ShapeMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ahrm
