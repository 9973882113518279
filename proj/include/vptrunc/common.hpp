// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vptrunc {

/// Invalid argument or out-of-range parameter. CLI maps this to exit code 2.
class ParamError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Violated data contract (malformed input, unmet precondition).
/// CLI maps this to exit code 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major matrix of doubles. Rows are samples, columns are
/// components unless a caller documents otherwise.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) {
    assert(i < rows && j < cols);
    return data[i * cols + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    assert(i < rows && j < cols);
    return data[i * cols + j];
  }

  std::span<double> row(std::size_t i) {
    assert(i < rows);
    return {data.data() + i * cols, cols};
  }
  std::span<const double> row(std::size_t i) const {
    assert(i < rows);
    return {data.data() + i * cols, cols};
  }

  /// Copy of column j (contiguous access for sorting-based statistics).
  std::vector<double> column(std::size_t j) const {
    assert(j < cols);
    std::vector<double> out(rows);
    for (std::size_t i = 0; i < rows; ++i) out[i] = data[i * cols + j];
    return out;
  }

  bool same_shape(const Matrix& o) const {
    return rows == o.rows && cols == o.cols;
  }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace detail

/// Deterministically derives a child seed from (seed, salt). Used to give
/// independent streams to sub-tasks (per-step noise, subsampling, inits)
/// without shared mutable state.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  return detail::splitmix64(seed ^ detail::splitmix64(salt));
}

/// Seeded random generator with explicit, reproducible draw order.
/// Identical seeds produce bit-identical streams on a given platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  /// Uniform draw in [0, 1) with 53 random mantissa bits.
  double uniform01() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; the spare deviate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform01();  // (0, 1], keeps log finite
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  void fill_normal(std::span<double> out) {
    for (double& v : out) v = normal();
  }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    assert(n > 0);
    // Rejection-free modulo is fine here; n is tiny relative to 2^64.
    return eng_() % n;
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Provenance stamp attached to every generated or noised batch.
struct Provenance {
  std::uint64_t seed = 0;
  std::string schedule_fingerprint;
  int start_step = 0;
  std::string denoiser_id;
};

/// A batch of samples plus the information needed to reproduce it.
struct SampleBatch {
  Matrix values;
  Provenance prov;
};

}  // namespace vptrunc
