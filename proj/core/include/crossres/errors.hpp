#pragma once

#include <stdexcept>
#include <string>

namespace crossres {

struct TrainingDivergedError : std::runtime_error {
  TrainingDivergedError(const std::string& msg, long step)
      : std::runtime_error(msg + " (step " + std::to_string(step) + ")"),
        step(step) {}
  long step;
};

struct DegenerateTemplateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ProtocolViolationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace crossres
