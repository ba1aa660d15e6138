#pragma once

#include <stdexcept>
#include <string>

namespace prcnn {

// A caller broke an operation's precondition (e.g. voxelizing an uncropped point).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Tensor shapes or axes do not line up.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid or inconsistent configuration values.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed, truncated or incompatible file contents.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Annotation content that cannot be turned into targets.
class AnnotationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Synthetic scene generation gave up (e.g. too many persons for the floor area).
class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace prcnn
