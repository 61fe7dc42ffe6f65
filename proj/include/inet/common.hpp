#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace inet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

/// Base of every error raised by the library. The kind drives the CLI exit code.
class Error : public std::runtime_error {
 public:
  enum class Kind { config, data, numerical };

  Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(Kind::config, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(Kind::data, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(Kind::numerical, what) {}
};

// splitmix64 finalizer; used to fan one master seed out to independent streams.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based seed derivation: (master, stream, index) -> seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index) {
  return mix64(mix64(mix64(master) ^ stream) ^ index);
}

// Named streams for derive_seed.
namespace streams {
inline constexpr std::uint64_t dataset = 0x11;
inline constexpr std::uint64_t lambda_train = 0x12;
inline constexpr std::uint64_t inet_train = 0x13;
inline constexpr std::uint64_t query = 0x14;
inline constexpr std::uint64_t sdt = 0x15;
inline constexpr std::uint64_t ingest = 0x16;
}  // namespace streams

/// Probabilities fed into logarithms are clamped to [kProbEps, 1 - kProbEps].
inline constexpr double kProbEps = 1e-7;

}  // namespace inet
