// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace vflux {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration: bad grid, unknown key, violated parameter bound.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg, std::string key = {}, int line = 0)
      : Error(format(msg, key, line)), message_(msg), key_(std::move(key)), line_(line) {}

  /// Message without the key / line prefix.
  const std::string& message() const noexcept { return message_; }
  const std::string& key() const noexcept { return key_; }
  int line() const noexcept { return line_; }

 private:
  static std::string format(const std::string& msg, const std::string& key, int line) {
    std::string out;
    if (!key.empty()) out += "key '" + key + "'";
    if (line > 0) out += (out.empty() ? "" : " ") + std::string("(line ") + std::to_string(line) + ")";
    if (!out.empty()) out += ": ";
    return out + msg;
  }

  std::string message_;
  std::string key_;
  int line_;
};

/// Input data violating a model assumption (negative inflow data, sign pattern drift).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Linear solve finished above the requested residual.
class SolverError : public Error {
 public:
  SolverError(const std::string& msg, double residual)
      : Error(msg + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Explicit transport step rejected by the positivity bound.
class StepRefused : public Error {
 public:
  StepRefused(double requested, double admissible)
      : Error("time step " + std::to_string(requested) + " exceeds admissible " +
              std::to_string(admissible)),
        requested_(requested),
        admissible_(admissible) {}
  double requested() const noexcept { return requested_; }
  double admissible() const noexcept { return admissible_; }

 private:
  double requested_;
  double admissible_;
};

/// Fixed-point loop did not reach tolerance; carries the increment history.
class PicardError : public Error {
 public:
  PicardError(double time, std::vector<double> history)
      : Error("fixed-point iteration did not converge at t = " + std::to_string(time)),
        time_(time),
        history_(std::move(history)) {}
  double time() const noexcept { return time_; }
  const std::vector<double>& history() const noexcept { return history_; }

 private:
  double time_;
  std::vector<double> history_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace vflux
