#pragma once

#include <stdexcept>
#include <string>

namespace terraincl {

// Invalid terrain/env/ppo parameters. The message names the violated constraint.
class ParamError : public std::invalid_argument {
 public:
  explicit ParamError(const std::string& what) : std::invalid_argument(what) {}
};

// Bad configuration: unknown names, unknown keys, unparsable values, missing files.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Runtime fault inside a module (shape mismatch, non-finite parameters, missing
// bootstrap values, out-of-range iteration).
class Fault : public std::runtime_error {
 public:
  explicit Fault(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace terraincl
