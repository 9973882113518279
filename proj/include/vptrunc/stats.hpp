// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "vptrunc/common.hpp"
#include "vptrunc/schedule.hpp"

namespace vptrunc {

enum class Modality { euclidean_points, onehot_categorical, generic };

inline const char* to_string(Modality m) {
  switch (m) {
    case Modality::euclidean_points: return "euclidean-points";
    case Modality::onehot_categorical: return "one-hot-categorical";
    case Modality::generic: return "generic";
  }
  return "generic";
}

inline Modality modality_from_string(const std::string& s) {
  if (s == "euclidean-points") return Modality::euclidean_points;
  if (s == "one-hot-categorical") return Modality::onehot_categorical;
  if (s == "generic") return Modality::generic;
  throw ParamError("unknown modality: " + s);
}

/// n x d data matrix; rows are samples.
struct Dataset {
  Matrix values;
  Modality modality = Modality::generic;
};

inline void validate_dataset(const Dataset& ds) {
  if (ds.values.rows < 2 || ds.values.cols < 2)
    throw DataError("dataset needs n >= 2 and d >= 2");
  if (!ds.values.all_finite()) throw DataError("dataset has non-finite entries");
}

/// Per-sample first and second moments plus their dataset averages.
struct DatasetStats {
  std::vector<double> per_sample_mean;
  std::vector<double> per_sample_var;  // divisor d, population form
  double avg_var = 0.0;                // v hat
  double mean_residual = 0.0;          // max_i |mean_i|
  bool centered = false;
};

/// Reference variance of the noised data at each step, v_tilde[0..T].
struct VariancePath {
  std::vector<double> v_tilde;
  std::string schedule_fingerprint;

  double at(int t) const {
    if (t < 0 || t >= static_cast<int>(v_tilde.size()))
      throw ParamError("variance path index out of range");
    return v_tilde[static_cast<std::size_t>(t)];
  }
};

/// Removes the redundant mean direction from each sample.
///
/// For one-hot data the batch mean is subtracted instead (every row sums to
/// the same constant, so rows still end up exactly zero-mean and the active
/// class stays identified by the maximal entry).
inline Dataset center(const Dataset& ds) {
  Dataset out = ds;
  Matrix& m = out.values;
  if (ds.modality == Modality::onehot_categorical) {
    std::vector<double> col_mean(m.cols, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i)
      for (std::size_t j = 0; j < m.cols; ++j) col_mean[j] += m(i, j);
    for (double& v : col_mean) v /= static_cast<double>(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i)
      for (std::size_t j = 0; j < m.cols; ++j) m(i, j) -= col_mean[j];
  } else {
    for (std::size_t i = 0; i < m.rows; ++i) {
      auto r = m.row(i);
      const double mu =
          std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(m.cols);
      for (double& v : r) v -= mu;
    }
  }
  return out;
}

/// Subtracts the per-column mean (the centroid when rows are points).
inline Matrix center_columns(const Matrix& m) {
  Matrix out = m;
  for (std::size_t j = 0; j < m.cols; ++j) {
    double mu = 0.0;
    for (std::size_t i = 0; i < m.rows; ++i) mu += m(i, j);
    mu /= static_cast<double>(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) out(i, j) -= mu;
  }
  return out;
}

inline DatasetStats compute_stats(const Dataset& ds) {
  validate_dataset(ds);
  const Matrix& m = ds.values;
  DatasetStats st;
  st.per_sample_mean.resize(m.rows);
  st.per_sample_var.resize(m.rows);
  const double d = static_cast<double>(m.cols);
  double var_sum = 0.0;
  double residual = 0.0;
  for (std::size_t i = 0; i < m.rows; ++i) {
    auto r = m.row(i);
    const double mu = std::accumulate(r.begin(), r.end(), 0.0) / d;
    double v = 0.0;
    for (double x : r) v += (x - mu) * (x - mu);
    v /= d;
    st.per_sample_mean[i] = mu;
    st.per_sample_var[i] = v;
    var_sum += v;
    residual = std::max(residual, std::abs(mu));
  }
  st.avg_var = var_sum / static_cast<double>(m.rows);
  st.mean_residual = residual;
  st.centered = residual <= 1e-10;
  return st;
}

/// v_tilde_t = 1 - alpha_bar_t (1 - v_hat) for t = 0..T. Requires centered
/// input because the formula assumes the mean path is identically zero.
inline VariancePath propagate_variance(const DatasetStats& stats,
                                       const NoiseSchedule& schedule) {
  if (!stats.centered)
    throw DataError("propagate_variance: dataset must be centered first");
  VariancePath path;
  path.schedule_fingerprint = schedule.fingerprint();
  path.v_tilde.resize(schedule.alpha_bar.size());
  for (std::size_t t = 0; t < schedule.alpha_bar.size(); ++t)
    path.v_tilde[t] = 1.0 - schedule.alpha_bar[t] * (1.0 - stats.avg_var);
  return path;
}

/// Max absolute change of any pairwise Euclidean distance between two point
/// sets of identical shape (rows are points).
inline double check_distance_invariance(const Dataset& before,
                                        const Dataset& after) {
  const Matrix& a = before.values;
  const Matrix& b = after.values;
  if (!a.same_shape(b))
    throw ParamError("check_distance_invariance: shape mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = i + 1; j < a.rows; ++j) {
      double da = 0.0, db = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) {
        const double xa = a(i, k) - a(j, k);
        const double xb = b(i, k) - b(j, k);
        da += xa * xa;
        db += xb * xb;
      }
      worst = std::max(worst, std::abs(std::sqrt(da) - std::sqrt(db)));
    }
  }
  return worst;
}

struct ArgmaxReport {
  double fraction = 0.0;        // samples whose active index stays maximal
  bool degenerate_uniform = false;  // batch class frequencies exactly uniform
};

/// Centers a one-hot batch by its batch mean and reports how many samples
/// keep their active index as a maximal entry. Ties count as preserved; the
/// exactly-uniform frequency case is flagged instead of being treated as a
/// failure.
inline ArgmaxReport check_argmax_preservation(const Dataset& onehot) {
  const Matrix& m = onehot.values;
  if (m.rows == 0 || m.cols == 0) throw DataError("empty one-hot batch");
  std::vector<std::size_t> active(m.rows);
  std::vector<std::size_t> counts(m.cols, 0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    std::size_t ones = 0, idx = 0;
    for (std::size_t j = 0; j < m.cols; ++j) {
      const double v = m(i, j);
      if (v == 1.0) {
        ones++;
        idx = j;
      } else if (v != 0.0) {
        throw DataError("row is not one-hot");
      }
    }
    if (ones != 1) throw DataError("row is not one-hot");
    active[i] = idx;
    counts[idx]++;
  }
  ArgmaxReport rep;
  rep.degenerate_uniform =
      std::all_of(counts.begin(), counts.end(),
                  [&](std::size_t c) { return c == counts[0]; });
  std::vector<double> mean(m.cols);
  for (std::size_t j = 0; j < m.cols; ++j)
    mean[j] = static_cast<double>(counts[j]) / static_cast<double>(m.rows);
  std::size_t kept = 0;
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double own = 1.0 - mean[active[i]];
    bool still_max = true;
    for (std::size_t j = 0; j < m.cols; ++j) {
      if (j == active[i]) continue;
      if (-mean[j] > own) {
        still_max = false;
        break;
      }
    }
    if (still_max) kept++;
  }
  rep.fraction = static_cast<double>(kept) / static_cast<double>(m.rows);
  return rep;
}

}  // namespace vptrunc
