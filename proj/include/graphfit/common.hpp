// Shared error types and the deterministic RNG used across the library.

#ifndef GRAPHFIT_COMMON_HPP
#define GRAPHFIT_COMMON_HPP

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace graphfit {

// Base of all library errors. Subtypes distinguish failure classes so
// callers (and tests) can react to the category, not the message text.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Input collections too small / index out of range.
class SizeError : public Error {
 public:
  using Error::Error;
};

// Geometric input admits no answer (coincident or collinear points).
class DegeneracyError : public Error {
 public:
  using Error::Error;
};

// Linear system unsolvable even after regularization.
class ConditioningError : public Error {
 public:
  using Error::Error;
};

// Tensor shape mismatch; the message carries both shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Malformed text input; the message carries the line number.
class ParseError : public Error {
 public:
  using Error::Error;
};

class BoundsError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Checkpoint-specific load failures.
class VersionError : public IoError {
 public:
  using IoError::IoError;
};

class TruncationError : public IoError {
 public:
  using IoError::IoError;
};

// splitmix64; used to derive independent seeds from (seed, tag...) tuples.
inline std::uint64_t hash_mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  return hash_mix(seed ^ hash_mix(tag));
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag_a,
                                 std::uint64_t tag_b) {
  return hash_mix(derive_seed(seed, tag_a) ^ hash_mix(tag_b + 0x51ed270b9ULL));
}

// Deterministic generator. All draws are built from raw 64-bit outputs of
// a splitmix64 stream, so sequences are reproducible bit-for-bit across
// platforms and the whole state is a single word (trivial to checkpoint).
// Gaussian draws use Box-Muller with no cached spare.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    // Rejection-free modulo is fine here: n is tiny next to 2^64.
    return next_u64() % n;
  }

  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  std::uint64_t state() const { return state_; }
  void set_state(std::uint64_t s) { state_ = s; }

 private:
  std::uint64_t state_;
};

template <typename T>
std::string shape_string(const T& dims) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) os << ",";
    os << dims[i];
  }
  os << ")";
  return os.str();
}

}  // namespace graphfit

#endif  // GRAPHFIT_COMMON_HPP
