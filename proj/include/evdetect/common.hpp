#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace evdetect {

/// Dense row-major matrix; one row per document or point.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file or stream.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Caller violated an operation's precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Bad or incomplete configuration (missing key, missing path, missing API key).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure inside an algorithm (non-PD covariance, constant scale).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// FNV-1a, 64-bit. Used for cache keys, mock seeds and seed derivation.
constexpr std::uint64_t fnv1a64(std::string_view data,
                                std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed for a named pipeline stage: splitmix64(seed ^ fnv1a64(stage)).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stage);

/// Replaces each "{name}" in text with its value.
std::string fill_template(std::string_view text,
                          const std::vector<std::pair<std::string, std::string>>& values);

/// Splits on runs of whitespace.
std::vector<std::string> split_words(std::string_view text);

/// 16 lowercase hex digits.
std::string to_hex(std::uint64_t value);

}  // namespace evdetect
