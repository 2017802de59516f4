#pragma once

#include <stdexcept>
#include <string>

namespace hamavg {

// Base for every domain error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error { using Error::Error; };
class CriticalSeed : public Error { using Error::Error; };
class NoClosure : public Error { using Error::Error; };
class EdgeStraddle : public Error { using Error::Error; };
class DegenerateCritical : public Error { using Error::Error; };
class ResolutionTooCoarse : public Error { using Error::Error; };
class OutOfDomain : public Error { using Error::Error; };
class MissingSnapshot : public Error { using Error::Error; };
class WeightMismatch : public Error { using Error::Error; };
class InconclusiveClassification : public Error { using Error::Error; };

}  // namespace hamavg
