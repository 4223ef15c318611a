#pragma once

#include <stdexcept>
#include <string>

namespace attnet {

// Base for every recoverable failure raised by the library. Precondition
// violations on plain values (bad box coordinates, invalid configs) use
// std::invalid_argument instead.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GridMiss : public Error {
 public:
  using Error::Error;
};

class CanvasTooSmall : public Error {
 public:
  using Error::Error;
};

class Unsatisfiable : public Error {
 public:
  using Error::Error;
};

class IndivisibleBatch : public Error {
 public:
  using Error::Error;
};

class LawUnsatisfiable : public Error {
 public:
  using Error::Error;
};

// Malformed input documents (scene, detection, grid, config files).
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace attnet
