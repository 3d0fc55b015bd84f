#pragma once
// Shared basics: scalar aliases, error categories, logging, stable sigmoid math.

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace hetembed {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Malformed or inconsistent input data / configuration.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values or divergence during optimization.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Verbosity from HETEMBED_LOG: quiet|0, info|1 (default), debug|2.
inline int log_level() {
  static const int level = [] {
    const char* env = std::getenv("HETEMBED_LOG");
    if (!env) return 1;
    const std::string v(env);
    if (v == "quiet" || v == "0") return 0;
    if (v == "debug" || v == "2") return 2;
    return 1;
  }();
  return level;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// log(sigmoid(x)), branch-split on the sign of x so large |x| cannot overflow.
inline double log_sigmoid(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

// FNV-1a over a byte range; used to assert parameter immutability.
inline uint64_t hash_bytes(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace hetembed
