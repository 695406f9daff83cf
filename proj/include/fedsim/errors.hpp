#pragma once

#include <stdexcept>
#include <string>

namespace fedsim {

// Bad user-supplied configuration; message names the offending field.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite loss/gradient during local training; carries round context
// when raised inside the round driver.
struct TrainingFault : std::runtime_error {
  explicit TrainingFault(const std::string& what) : std::runtime_error(what) {}
};

struct AggregationFault : std::runtime_error {
  explicit AggregationFault(const std::string& what) : std::runtime_error(what) {}
};

struct AccountingFault : std::runtime_error {
  explicit AccountingFault(const std::string& what) : std::runtime_error(what) {}
};

struct TunerFault : std::runtime_error {
  explicit TunerFault(const std::string& what) : std::runtime_error(what) {}
};

struct ComparisonFault : TunerFault {
  explicit ComparisonFault(const std::string& what) : TunerFault(what) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fedsim
