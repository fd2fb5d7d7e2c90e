#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace bbm {

inline constexpr double kSqrt2 = 1.4142135623730951;
inline constexpr double kPi = 3.14159265358979323846;

// Fail-fast caps so a runaway experiment dies with a message instead of OOM.
inline constexpr std::size_t kDefaultAtomCap = 100'000'000;
inline constexpr std::size_t kDefaultPopulationCap = 20'000'000;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PopulationCapError : public Error {
 public:
  PopulationCapError(std::size_t cap, double time_reached)
      : Error("population cap " + std::to_string(cap) +
              " exceeded at t=" + std::to_string(time_reached)),
        time_reached_(time_reached) {}
  double time_reached() const { return time_reached_; }

 private:
  double time_reached_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace bbm
