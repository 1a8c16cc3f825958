#pragma once

#include <stdexcept>
#include <string>

namespace synlungs {

// Base for everything the library throws on purpose.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& msg) : Error(msg) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// place_lesion exhausted max_attempts: lesion too large or lung too crowded.
class NoValidPlacement : public Error {
 public:
  explicit NoValidPlacement(const std::string& msg) : Error(msg) {}
};

class NonConvergence : public Error {
 public:
  explicit NonConvergence(const std::string& msg) : Error(msg) {}
};

class DegenerateData : public Error {
 public:
  explicit DegenerateData(const std::string& msg) : Error(msg) {}
};

}  // namespace synlungs
