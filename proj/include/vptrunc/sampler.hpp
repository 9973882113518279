// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

#include "vptrunc/common.hpp"
#include "vptrunc/schedule.hpp"
#include "vptrunc/stats.hpp"
#include "vptrunc/truncation.hpp"

namespace vptrunc {

/// Isotropic Gaussian mixture used as a tractable data law. Component means
/// must be zero-mean across their components so that samples stay (almost)
/// zero-mean and centering loses nothing.
struct GmmSpec {
  std::vector<double> weights;
  Matrix means;                   // K x d
  std::vector<double> variances;  // K isotropic variances
};

inline void validate_gmm(const GmmSpec& g) {
  const std::size_t k = g.weights.size();
  if (k == 0 || g.means.rows != k || g.variances.size() != k)
    throw ParamError("gmm: inconsistent component counts");
  double wsum = 0.0;
  for (double w : g.weights) {
    if (!(w >= 0.0)) throw ParamError("gmm: negative weight");
    wsum += w;
  }
  if (std::abs(wsum - 1.0) > 1e-12)
    throw ParamError("gmm: weights must sum to 1");
  for (double v : g.variances)
    if (!(v >= 0.0)) throw ParamError("gmm: negative variance");
  for (std::size_t i = 0; i < g.means.rows; ++i) {
    auto r = g.means.row(i);
    const double mu = std::accumulate(r.begin(), r.end(), 0.0) /
                      static_cast<double>(g.means.cols);
    if (std::abs(mu) > 1e-9)
      throw ParamError("gmm: component means must be zero-mean");
  }
}

struct GmmDenoiser {
  GmmSpec spec;
};

/// Per-step scalar map x0_hat = c_t * x_t; unfitted steps are NaN.
struct LinearDenoiser {
  std::vector<double> coeff;  // index t in 1..T, coeff[0] unused
};

struct ZeroDenoiser {};

/// Plug-in estimator of x0 from (x_t, t).
struct Denoiser {
  std::variant<GmmDenoiser, LinearDenoiser, ZeroDenoiser> impl;
  std::string id;  // "gmm-analytic", "linear-per-step", "zero"
};

inline Denoiser make_gmm_denoiser(GmmSpec spec) {
  validate_gmm(spec);
  return {GmmDenoiser{std::move(spec)}, "gmm-analytic"};
}

inline Denoiser make_zero_denoiser() { return {ZeroDenoiser{}, "zero"}; }

/// Coefficients of the exact reverse posterior
/// q(x_{t-1} | x_t, x0) = N(mean_x0 * x0 + mean_xt * x_t, var I).
struct ReverseStepParams {
  double posterior_mean_coeff_x0 = 0.0;
  double posterior_mean_coeff_xt = 0.0;
  double posterior_var = 0.0;
};

inline ReverseStepParams posterior_params(const NoiseSchedule& s, int t) {
  if (t < 1 || t > s.T) throw ParamError("posterior_params: t out of range");
  const double ab_t = s.alpha_bar_at(t);
  const double ab_prev = s.alpha_bar_at(t - 1);
  const double alpha_t = ab_t / ab_prev;
  const double denom = 1.0 - ab_t;
  ReverseStepParams p;
  p.posterior_mean_coeff_x0 = std::sqrt(ab_prev) * (1.0 - alpha_t) / denom;
  p.posterior_mean_coeff_xt =
      std::sqrt(alpha_t) * (1.0 - ab_prev) / denom;
  p.posterior_var = (1.0 - ab_prev) * (1.0 - alpha_t) / denom;
  return p;
}

namespace detail {

/// Exact conditional mean E[x0 | x_t] under the mixture: responsibilities of
/// the noised components (log-sum-exp stabilized) weighting per-component
/// linear-Gaussian posterior means.
inline void gmm_denoise_row(const GmmSpec& g, std::span<const double> xt,
                            double alpha_bar, std::span<double> out) {
  const std::size_t k = g.weights.size();
  const std::size_t d = xt.size();
  const double sa = std::sqrt(alpha_bar);
  thread_local std::vector<double> logp;
  logp.assign(k, -std::numeric_limits<double>::infinity());
  for (std::size_t c = 0; c < k; ++c) {
    if (g.weights[c] == 0.0) continue;
    const double comp_var = alpha_bar * g.variances[c] + (1.0 - alpha_bar);
    auto mu = g.means.row(c);
    double q = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double r = xt[j] - sa * mu[j];
      q += r * r;
    }
    logp[c] = std::log(g.weights[c]) -
              0.5 * static_cast<double>(d) * std::log(comp_var) -
              0.5 * q / comp_var;
  }
  const double lmax = *std::max_element(logp.begin(), logp.end());
  double norm = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    logp[c] = std::exp(logp[c] - lmax);
    norm += logp[c];
  }
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    const double resp = logp[c] / norm;
    if (resp == 0.0) continue;
    const double comp_var = alpha_bar * g.variances[c] + (1.0 - alpha_bar);
    const double gain = sa * g.variances[c] / comp_var;
    auto mu = g.means.row(c);
    for (std::size_t j = 0; j < d; ++j)
      out[j] += resp * (mu[j] + gain * (xt[j] - sa * mu[j]));
  }
}

}  // namespace detail

/// Applies the denoiser to a batch at step t, producing x0_hat.
inline Matrix denoise(const Denoiser& den, const Matrix& x_t, int t,
                      const NoiseSchedule& schedule) {
  if (t < 1 || t > schedule.T) throw ParamError("denoise: t out of range");
  Matrix out(x_t.rows, x_t.cols);
  if (const auto* g = std::get_if<GmmDenoiser>(&den.impl)) {
    if (g->spec.means.cols != x_t.cols)
      throw ParamError("denoise: gmm dimensionality mismatch");
    const double ab = schedule.alpha_bar_at(t);
    for (std::size_t i = 0; i < x_t.rows; ++i)
      detail::gmm_denoise_row(g->spec, x_t.row(i), ab, out.row(i));
  } else if (const auto* l = std::get_if<LinearDenoiser>(&den.impl)) {
    if (static_cast<std::size_t>(t) >= l->coeff.size() ||
        std::isnan(l->coeff[static_cast<std::size_t>(t)]))
      throw DataError("denoise: linear coefficient not fitted for this step");
    const double c = l->coeff[static_cast<std::size_t>(t)];
    for (std::size_t i = 0; i < x_t.data.size(); ++i)
      out.data[i] = c * x_t.data[i];
  }
  // ZeroDenoiser leaves the zero initialization in place.
  return out;
}

/// Fits c_t = E<x0, x_t> / E|x_t|^2 per requested step by simulating noised
/// pairs from the dataset (at least `min_pairs` per step).
inline Denoiser fit_linear_denoiser(const Dataset& dataset,
                                    const NoiseSchedule& schedule,
                                    const std::vector<int>& steps,
                                    std::uint64_t seed,
                                    std::size_t min_pairs = 100000) {
  if (steps.empty()) throw ParamError("fit_linear_denoiser: no steps given");
  if (!compute_stats(dataset).centered)
    throw DataError("fit_linear_denoiser: dataset must be centered");
  const Matrix& x0 = dataset.values;
  const std::size_t passes =
      (min_pairs + x0.rows - 1) / x0.rows;  // ceil
  LinearDenoiser lin;
  lin.coeff.assign(static_cast<std::size_t>(schedule.T) + 1,
                   std::numeric_limits<double>::quiet_NaN());
  for (int t : steps) {
    if (t < 1 || t > schedule.T)
      throw ParamError("fit_linear_denoiser: step out of range");
    const double ab = schedule.alpha_bar_at(t);
    const double sa = std::sqrt(ab);
    const double sn = std::sqrt(1.0 - ab);
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(t)));
    double num = 0.0, den = 0.0;
    for (std::size_t p = 0; p < passes; ++p) {
      for (std::size_t i = 0; i < x0.rows; ++i) {
        auto r = x0.row(i);
        for (double v : r) {
          const double xt = sa * v + sn * rng.normal();
          num += v * xt;
          den += xt * xt;
        }
      }
    }
    lin.coeff[static_cast<std::size_t>(t)] = num / den;
  }
  return {std::move(lin), "linear-per-step"};
}

/// Ancestral sampling from start_step down to 1. Per-step noise streams are
/// keyed by (seed, t): two runs sharing a seed use identical noise on their
/// common steps regardless of where they start, and the degenerate
/// comparison at t_star = T is bit-identical.
inline SampleBatch ancestral_sample(const Denoiser& den,
                                    const NoiseSchedule& schedule,
                                    int start_step, const SampleBatch& initial,
                                    std::uint64_t seed) {
  if (start_step < 1 || start_step > schedule.T)
    throw ParamError("ancestral_sample: start step out of range");
  if (const auto* g = std::get_if<GmmDenoiser>(&den.impl))
    if (g->spec.means.cols != initial.values.cols)
      throw ParamError("ancestral_sample: shape mismatch with denoiser");
  Matrix x = initial.values;
  for (int t = start_step; t >= 1; --t) {
    const Matrix x0_hat = denoise(den, x, t, schedule);
    const ReverseStepParams p = posterior_params(schedule, t);
    const double sd = std::sqrt(p.posterior_var);
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(t)));
    for (std::size_t i = 0; i < x.data.size(); ++i) {
      double v = p.posterior_mean_coeff_x0 * x0_hat.data[i] +
                 p.posterior_mean_coeff_xt * x.data[i];
      if (t > 1) v += sd * rng.normal();
      x.data[i] = v;
    }
  }
  SampleBatch out;
  out.values = std::move(x);
  out.prov = {seed, schedule.fingerprint(), start_step, den.id};
  return out;
}

/// Quality and timing comparison between the full reverse trajectory and the
/// truncated one.
struct CompareReport {
  bool skipped = false;
  std::string skip_reason;
  std::size_t n = 0;
  std::vector<double> per_dim_ks;     // two-sample KS, full vs truncated
  double max_ks = 0.0;
  double max_mean_gap = 0.0;          // per-dim first-moment gap
  double max_var_gap = 0.0;           // per-dim second-moment gap
  double wall_full_per_sample = 0.0;  // seconds, median over repetitions
  double wall_trunc_per_sample = 0.0;
  double speedup = 0.0;
  int t_star = 0;
  int full_steps = 0;
  std::uint64_t seed = 0;
  std::string schedule_fingerprint;
};

namespace detail {

inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline std::vector<double> column_means(const Matrix& m) {
  std::vector<double> mu(m.cols, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) mu[j] += m(i, j);
  for (double& v : mu) v /= static_cast<double>(m.rows);
  return mu;
}

inline std::vector<double> column_vars(const Matrix& m) {
  const auto mu = column_means(m);
  std::vector<double> var(m.cols, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) {
      const double c = m(i, j) - mu[j];
      var[j] += c * c;
    }
  for (double& v : var) v /= static_cast<double>(m.rows);
  return var;
}

}  // namespace detail

/// Runs ancestral sampling from T and from t_star (the latter seeded by the
/// truncated prior) with shared per-step noise, and reports per-dimension
/// two-sample KS distances, moment gaps and per-sample wall-clock times.
inline CompareReport compare_full_vs_truncated(const Denoiser& den,
                                               const NoiseSchedule& schedule,
                                               const TruncationDecision& dec,
                                               const VariancePath& vpath,
                                               std::size_t n, std::size_t d,
                                               std::uint64_t seed,
                                               int timing_reps = 5) {
  CompareReport rep;
  rep.seed = seed;
  rep.schedule_fingerprint = schedule.fingerprint();
  rep.t_star = dec.t_star;
  rep.full_steps = schedule.T;
  rep.n = n;
  if (dec.fallback) {
    rep.skipped = true;
    rep.skip_reason = "fallback decision: no truncation step qualified";
    return rep;
  }
  if (n == 0) return rep;

  const std::uint64_t init_seed = mix_seed(seed, 0x696e6974ULL);
  const std::uint64_t step_seed = mix_seed(seed, 0x73746570ULL);
  const SampleBatch init_full =
      truncated_prior(vpath, schedule.T, n, d, init_seed);
  const SampleBatch init_trunc =
      truncated_prior(vpath, dec.t_star, n, d, init_seed);

  SampleBatch full, trunc;
  std::vector<double> wall_full, wall_trunc;
  using clock = std::chrono::steady_clock;
  for (int r = 0; r < std::max(timing_reps, 1); ++r) {
    auto t0 = clock::now();
    full = ancestral_sample(den, schedule, schedule.T, init_full, step_seed);
    auto t1 = clock::now();
    trunc = ancestral_sample(den, schedule, dec.t_star, init_trunc, step_seed);
    auto t2 = clock::now();
    wall_full.push_back(std::chrono::duration<double>(t1 - t0).count());
    wall_trunc.push_back(std::chrono::duration<double>(t2 - t1).count());
  }
  rep.wall_full_per_sample =
      detail::median_of(wall_full) / static_cast<double>(n);
  rep.wall_trunc_per_sample =
      detail::median_of(wall_trunc) / static_cast<double>(n);
  rep.speedup = rep.wall_full_per_sample / rep.wall_trunc_per_sample;

  rep.per_dim_ks = two_sample_ks_per_dim(full.values, trunc.values);
  rep.max_ks = *std::max_element(rep.per_dim_ks.begin(), rep.per_dim_ks.end());
  const auto mu_f = detail::column_means(full.values);
  const auto mu_t = detail::column_means(trunc.values);
  const auto var_f = detail::column_vars(full.values);
  const auto var_t = detail::column_vars(trunc.values);
  for (std::size_t j = 0; j < d; ++j) {
    rep.max_mean_gap = std::max(rep.max_mean_gap, std::abs(mu_f[j] - mu_t[j]));
    rep.max_var_gap = std::max(rep.max_var_gap, std::abs(var_f[j] - var_t[j]));
  }
  return rep;
}

}  // namespace vptrunc
