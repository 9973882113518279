// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "vptrunc/common.hpp"
#include "vptrunc/schedule.hpp"
#include "vptrunc/stats.hpp"

namespace vptrunc {

/// Dimension-wise one-sample Kolmogorov-Smirnov result against a zero-mean
/// Gaussian reference with fixed variance.
struct KsResult {
  std::vector<double> per_dim_D;
  double mean_D = 0.0;
  double pass_fraction = 0.0;  // dimensions with D strictly below critical
  double critical_value = 0.0;
  std::size_t n_used = 0;
};

/// Averaged pairwise mutual information, in nats.
///
/// mi_rows measures dependence between components within samples (column
/// pairs observed across the n rows); mi_cols measures dependence between
/// samples (row pairs observed across the d components). Raw plug-in
/// estimates, no bias subtraction.
struct MiResult {
  double mi_rows = 0.0;
  double mi_cols = 0.0;
  std::size_t pairs_rows = 0;
  std::size_t pairs_cols = 0;
  std::size_t skipped_pairs = 0;  // pairs dropped for a degenerate axis
  std::string estimator_tag = "binned-plugin";
};

/// Mean standardized third / fourth cumulant magnitudes across dimensions.
struct CumulantTrace {
  double k3 = 0.0;
  double k4 = 0.0;
};

/// CDF of N(0, variance).
inline double normal_cdf(double x, double variance) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0 * variance));
}

/// Asymptotic one-sample KS critical value sqrt(-ln(a/2) / (2n)).
inline double ks_critical_value(std::size_t n, double significance) {
  return std::sqrt(-std::log(significance / 2.0) /
                   (2.0 * static_cast<double>(n)));
}

namespace detail {

/// Exact sup-distance of the empirical CDF of `sorted` against N(0, var):
/// at each order statistic both one-sided gaps are taken.
inline double ks_sup_sorted(const std::vector<double>& sorted, double var) {
  const double n = static_cast<double>(sorted.size());
  double sup = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double phi = normal_cdf(sorted[i], var);
    const double hi = (static_cast<double>(i) + 1.0) / n - phi;
    const double lo = phi - static_cast<double>(i) / n;
    sup = std::max({sup, hi, lo});
  }
  return sup;
}

}  // namespace detail

/// Per-dimension one-sample KS test of `samples` against N(0, target_variance).
inline KsResult ks_statistic(const Matrix& samples, double target_variance,
                             double significance) {
  if (!(target_variance > 0.0))
    throw ParamError("ks_statistic: target variance must be positive");
  if (!(significance > 0.0 && significance < 1.0))
    throw ParamError("ks_statistic: significance must be in (0,1)");
  if (samples.rows < 50)
    throw DataError("ks_statistic: need at least 50 samples per dimension");
  KsResult res;
  res.n_used = samples.rows;
  res.critical_value = ks_critical_value(samples.rows, significance);
  res.per_dim_D.resize(samples.cols);
  std::size_t passed = 0;
  double sum = 0.0;
  for (std::size_t j = 0; j < samples.cols; ++j) {
    std::vector<double> col = samples.column(j);
    std::sort(col.begin(), col.end());
    const double d = detail::ks_sup_sorted(col, target_variance);
    res.per_dim_D[j] = d;
    sum += d;
    if (d < res.critical_value) passed++;
  }
  res.mean_D = sum / static_cast<double>(samples.cols);
  res.pass_fraction =
      static_cast<double>(passed) / static_cast<double>(samples.cols);
  return res;
}

inline KsResult ks_statistic(const SampleBatch& samples, double target_variance,
                             double significance) {
  return ks_statistic(samples.values, target_variance, significance);
}

/// Two-sample KS sup-distance between two one-dimensional samples.
inline double two_sample_ks(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ParamError("two_sample_ks: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t ia = 0, ib = 0;
  double sup = 0.0;
  while (ia < a.size() && ib < b.size()) {
    const double x = std::min(a[ia], b[ib]);
    while (ia < a.size() && a[ia] <= x) ia++;
    while (ib < b.size() && b[ib] <= x) ib++;
    sup = std::max(sup, std::abs(static_cast<double>(ia) / na -
                                 static_cast<double>(ib) / nb));
  }
  return sup;
}

/// Column-wise two-sample KS distances between equally shaped batches.
inline std::vector<double> two_sample_ks_per_dim(const Matrix& a,
                                                 const Matrix& b) {
  if (a.cols != b.cols) throw ParamError("two_sample_ks: column mismatch");
  std::vector<double> out(a.cols);
  for (std::size_t j = 0; j < a.cols; ++j)
    out[j] = two_sample_ks(a.column(j), b.column(j));
  return out;
}

namespace detail {

/// Equal-frequency rank binning: observation ranks are split into `bins`
/// groups of near-equal size. Ties are broken by original index, which keeps
/// the estimator deterministic.
inline std::vector<int> rank_bins(const std::vector<double>& x, int bins) {
  const std::size_t m = x.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<int> bin(m);
  for (std::size_t r = 0; r < m; ++r) {
    int b = static_cast<int>((r * static_cast<std::size_t>(bins)) / m);
    bin[order[r]] = std::min(b, bins - 1);
  }
  return bin;
}

inline bool is_constant(const std::vector<double>& x) {
  return std::all_of(x.begin(), x.end(),
                     [&](double v) { return v == x.front(); });
}

/// Plug-in MI (nats) of two equally sized observation vectors from a
/// bins x bins contingency table.
inline double binned_mi(const std::vector<double>& x,
                        const std::vector<double>& y, int bins) {
  const std::size_t m = x.size();
  const std::vector<int> bx = rank_bins(x, bins);
  const std::vector<int> by = rank_bins(y, bins);
  std::vector<double> joint(static_cast<std::size_t>(bins) * bins, 0.0);
  std::vector<double> px(bins, 0.0), py(bins, 0.0);
  const double w = 1.0 / static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i) {
    joint[static_cast<std::size_t>(bx[i]) * bins + by[i]] += w;
    px[static_cast<std::size_t>(bx[i])] += w;
    py[static_cast<std::size_t>(by[i])] += w;
  }
  double mi = 0.0;
  for (int a = 0; a < bins; ++a)
    for (int b = 0; b < bins; ++b) {
      const double p = joint[static_cast<std::size_t>(a) * bins + b];
      if (p > 0.0) mi += p * std::log(p / (px[a] * py[b]));
    }
  return std::max(mi, 0.0);
}

/// Deterministic sample of `want` distinct index pairs from {0..count-1}.
inline std::vector<std::pair<std::size_t, std::size_t>> sample_pairs(
    std::size_t count, std::size_t want, std::uint64_t seed) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  const std::size_t total = count * (count - 1) / 2;
  if (total <= want) {
    pairs.reserve(total);
    for (std::size_t i = 0; i < count; ++i)
      for (std::size_t j = i + 1; j < count; ++j) pairs.emplace_back(i, j);
    return pairs;
  }
  Rng rng(seed);
  pairs.reserve(want);
  while (pairs.size() < want) {
    const auto i = static_cast<std::size_t>(rng.below(count));
    const auto j = static_cast<std::size_t>(rng.below(count));
    if (i == j) continue;
    pairs.emplace_back(std::min(i, j), std::max(i, j));
  }
  return pairs;
}

}  // namespace detail

constexpr std::size_t kMiMaxPairs = 256;
constexpr std::uint64_t kMiPairSeed = 0x6d692d7061697273ULL;  // "mi-pairs"

/// Averaged pairwise plug-in MI with ceil(m^(1/3)) equal-frequency bins per
/// axis, where m is the number of joint observations available for the
/// direction (n for column pairs, d for row pairs). At most 256 pairs per
/// direction, chosen deterministically.
inline MiResult mutual_information(const Matrix& samples,
                                   std::uint64_t pair_seed = kMiPairSeed) {
  if (samples.rows < 1000)
    throw DataError("mutual_information: need n >= 1000");
  if (samples.cols < 2) throw DataError("mutual_information: need d >= 2");

  MiResult res;
  const int bins_cols = static_cast<int>(
      std::ceil(std::cbrt(static_cast<double>(samples.rows))));
  const int bins_rows = static_cast<int>(
      std::ceil(std::cbrt(static_cast<double>(samples.cols))));

  // Dependence among components: column pairs, n observations each.
  {
    auto pairs = detail::sample_pairs(samples.cols, kMiMaxPairs,
                                      mix_seed(pair_seed, 1));
    double sum = 0.0;
    std::size_t used = 0;
    for (auto [a, b] : pairs) {
      auto xa = samples.column(a);
      auto xb = samples.column(b);
      if (detail::is_constant(xa) || detail::is_constant(xb)) {
        res.skipped_pairs++;
        continue;
      }
      sum += detail::binned_mi(xa, xb, bins_cols);
      used++;
    }
    res.mi_rows = used ? sum / static_cast<double>(used) : 0.0;
    res.pairs_rows = used;
  }

  // Dependence among samples: row pairs, d observations each.
  {
    auto pairs = detail::sample_pairs(samples.rows, kMiMaxPairs,
                                      mix_seed(pair_seed, 2));
    double sum = 0.0;
    std::size_t used = 0;
    for (auto [a, b] : pairs) {
      auto ra = samples.row(a);
      auto rb = samples.row(b);
      std::vector<double> xa(ra.begin(), ra.end());
      std::vector<double> xb(rb.begin(), rb.end());
      if (detail::is_constant(xa) || detail::is_constant(xb)) {
        res.skipped_pairs++;
        continue;
      }
      sum += detail::binned_mi(xa, xb, bins_rows);
      used++;
    }
    res.mi_cols = used ? sum / static_cast<double>(used) : 0.0;
    res.pairs_cols = used;
  }
  return res;
}

inline MiResult mutual_information(const SampleBatch& samples,
                                   std::uint64_t pair_seed = kMiPairSeed) {
  return mutual_information(samples.values, pair_seed);
}

namespace detail {

/// Unbiased cumulant estimators (k-statistics) of orders 2..4 for one column.
struct KStats {
  double k2 = 0.0, k3 = 0.0, k4 = 0.0;
};

inline KStats k_statistics(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double c = v - mean;
    const double c2 = c * c;
    m2 += c2;
    m3 += c2 * c;
    m4 += c2 * c2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  KStats k;
  k.k2 = n / (n - 1.0) * m2;
  k.k3 = n * n / ((n - 1.0) * (n - 2.0)) * m3;
  k.k4 = n * n *
         ((n + 1.0) * m4 - 3.0 * (n - 1.0) * m2 * m2) /
         ((n - 1.0) * (n - 2.0) * (n - 3.0));
  return k;
}

}  // namespace detail

/// Mean over dimensions of |k3|/s^3 and |k4|/s^4 (s^2 the unbiased variance).
inline CumulantTrace cumulants(const Matrix& samples) {
  if (samples.rows < 10000)
    throw DataError("cumulants: need n >= 1e4 for stable k-statistics");
  CumulantTrace tr;
  for (std::size_t j = 0; j < samples.cols; ++j) {
    const auto k = detail::k_statistics(samples.column(j));
    if (!(k.k2 > 0.0)) throw DataError("cumulants: zero-variance dimension");
    tr.k3 += std::abs(k.k3) / std::pow(k.k2, 1.5);
    tr.k4 += std::abs(k.k4) / (k.k2 * k.k2);
  }
  tr.k3 /= static_cast<double>(samples.cols);
  tr.k4 /= static_cast<double>(samples.cols);
  return tr;
}

inline CumulantTrace cumulants(const SampleBatch& samples) {
  return cumulants(samples.values);
}

/// One probed step of a Gaussianity curve.
struct GaussianityPoint {
  int t = 0;
  double v_tilde = 0.0;
  KsResult ks;
  MiResult mi;
  CumulantTrace cumulant;
};

struct GaussianityReport {
  std::vector<GaussianityPoint> points;
  std::uint64_t seed = 0;
  std::string schedule_fingerprint;
  double significance = 0.05;
};

/// Noises the dataset at each probe step and runs all three Gaussianity
/// tests against the propagated reference variance. One noise realization
/// (derived from `seed`) is shared across probe steps, so the reported curve
/// varies only through the schedule, not through re-rolled noise.
inline GaussianityReport gaussianity_curve(const Dataset& dataset,
                                           const NoiseSchedule& schedule,
                                           const VariancePath& variance_path,
                                           const std::vector<int>& probe_steps,
                                           std::uint64_t seed,
                                           double significance = 0.05) {
  if (!compute_stats(dataset).centered)
    throw DataError("gaussianity_curve: dataset must be centered");
  GaussianityReport rep;
  rep.seed = seed;
  rep.schedule_fingerprint = schedule.fingerprint();
  rep.significance = significance;
  const std::uint64_t noise_seed = mix_seed(seed, 0x63757276ULL);  // "curv"
  for (int t : probe_steps) {
    if (t < 1 || t > schedule.T)
      throw ParamError("gaussianity_curve: probe step out of range");
    GaussianityPoint pt;
    pt.t = t;
    pt.v_tilde = variance_path.at(t);
    const SampleBatch noised =
        forward_marginal(schedule, dataset.values, t, noise_seed);
    pt.ks = ks_statistic(noised.values, pt.v_tilde, significance);
    pt.mi = mutual_information(noised.values);
    pt.cumulant = cumulants(noised.values);
    rep.points.push_back(std::move(pt));
  }
  return rep;
}

}  // namespace vptrunc
