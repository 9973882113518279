// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "vptrunc/common.hpp"

namespace vptrunc {

/// Variance-preserving noise schedule over T discrete steps.
///
/// Conventions:
///   beta[t-1]        is the per-step noise rate for step t in 1..T,
///   alpha_bar[t]     is the cumulative signal coefficient, alpha_bar[0] = 1,
///   sigma_bar_sq[t]  is 1 - alpha_bar[t] exactly (variance preservation).
///
/// Instances are immutable after construction and safe to share across
/// threads; every sampling operation takes an explicit seed.
struct NoiseSchedule {
  int T = 0;
  std::vector<double> beta;
  std::vector<double> alpha_bar;
  std::vector<double> sigma_bar_sq;

  double beta_at(int t) const {  // t in 1..T
    if (t < 1 || t > T) throw ParamError("beta index out of range");
    return beta[static_cast<std::size_t>(t) - 1];
  }
  double alpha_bar_at(int t) const {  // t in 0..T
    if (t < 0 || t > T) throw ParamError("alpha_bar index out of range");
    return alpha_bar[static_cast<std::size_t>(t)];
  }
  /// Per-step retention factor alpha_t = alpha_bar[t] / alpha_bar[t-1].
  double alpha_step(int t) const {
    if (t < 1 || t > T) throw ParamError("alpha index out of range");
    return alpha_bar[static_cast<std::size_t>(t)] /
           alpha_bar[static_cast<std::size_t>(t) - 1];
  }
  /// Conditional signal coefficient alpha_bar[s] / alpha_bar[t] for s >= t.
  double alpha_bar_cond(int s, int t) const {
    if (t < 0 || s < t || s > T) throw ParamError("conditional index out of range");
    return alpha_bar[static_cast<std::size_t>(s)] /
           alpha_bar[static_cast<std::size_t>(t)];
  }

  /// Stable 64-bit FNV-1a hash over (T, beta); used as a reproducibility
  /// stamp in reports so downstream artifacts can verify provenance.
  std::string fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](const char* p, std::size_t len) {
      for (std::size_t i = 0; i < len; ++i) {
        h ^= static_cast<unsigned char>(p[i]);
        h *= 0x100000001b3ULL;
      }
    };
    char buf[64];
    int len = std::snprintf(buf, sizeof(buf), "T=%d", T);
    feed(buf, static_cast<std::size_t>(len));
    for (double b : beta) {
      len = std::snprintf(buf, sizeof(buf), "|%.17g", b);
      feed(buf, static_cast<std::size_t>(len));
    }
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx",
                  static_cast<unsigned long long>(h));
    return std::string(out);
  }
};

namespace detail {

inline NoiseSchedule from_betas(int T, std::vector<double> betas) {
  NoiseSchedule s;
  s.T = T;
  s.beta = std::move(betas);
  s.alpha_bar.resize(static_cast<std::size_t>(T) + 1);
  s.sigma_bar_sq.resize(static_cast<std::size_t>(T) + 1);
  s.alpha_bar[0] = 1.0;
  for (int t = 1; t <= T; ++t) {
    const auto u = static_cast<std::size_t>(t);
    s.alpha_bar[u] = s.alpha_bar[u - 1] * (1.0 - s.beta[u - 1]);
  }
  for (std::size_t u = 0; u < s.alpha_bar.size(); ++u)
    s.sigma_bar_sq[u] = 1.0 - s.alpha_bar[u];
  return s;
}

}  // namespace detail

/// Linear beta ramp from beta_start at t=1 to beta_end at t=T (the usual
/// discrete-time convention; default elsewhere is 1e-4 .. 0.02, T=1000).
inline NoiseSchedule make_linear_schedule(int T, double beta_start,
                                          double beta_end) {
  if (T < 2) throw ParamError("schedule needs T >= 2");
  if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
    throw ParamError("require 0 < beta_start <= beta_end < 1");
  std::vector<double> betas(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t)
    betas[static_cast<std::size_t>(t)] =
        beta_start + (beta_end - beta_start) * static_cast<double>(t) /
                         static_cast<double>(T - 1);
  return detail::from_betas(T, std::move(betas));
}

/// Squared-cosine alpha_bar profile with the customary small offset; betas
/// are clipped at 0.999 to keep every factor positive.
inline NoiseSchedule make_cosine_schedule(int T, double offset = 0.008) {
  if (T < 2) throw ParamError("schedule needs T >= 2");
  if (!(offset > 0.0) || offset >= 1.0) throw ParamError("bad cosine offset");
  auto f = [&](double u) {
    const double x = (u + offset) / (1.0 + offset) * M_PI / 2.0;
    const double c = std::cos(x);
    return c * c;
  };
  const double f0 = f(0.0);
  std::vector<double> betas(static_cast<std::size_t>(T));
  double prev = 1.0;
  for (int t = 1; t <= T; ++t) {
    const double ab = f(static_cast<double>(t) / T) / f0;
    double b = 1.0 - ab / prev;
    b = std::clamp(b, 1e-8, 0.999);
    betas[static_cast<std::size_t>(t) - 1] = b;
    prev *= 1.0 - b;
  }
  return detail::from_betas(T, std::move(betas));
}

inline NoiseSchedule default_schedule() {
  return make_linear_schedule(1000, 1e-4, 0.02);
}

/// Checks the structural invariants of a schedule; throws DataError with a
/// description of the first violation.
inline void validate_schedule(const NoiseSchedule& s) {
  if (s.T < 2 || s.beta.size() != static_cast<std::size_t>(s.T) ||
      s.alpha_bar.size() != static_cast<std::size_t>(s.T) + 1 ||
      s.sigma_bar_sq.size() != static_cast<std::size_t>(s.T) + 1)
    throw DataError("schedule: inconsistent sizes");
  if (!(s.alpha_bar[0] >= 1.0 - 1e-6 && s.alpha_bar[0] <= 1.0))
    throw DataError("schedule: alpha_bar[0] must be ~1");
  double prod = 1.0;
  for (int t = 1; t <= s.T; ++t) {
    const auto u = static_cast<std::size_t>(t);
    if (!(s.alpha_bar[u] < s.alpha_bar[u - 1]))
      throw DataError("schedule: alpha_bar not strictly decreasing");
    prod *= 1.0 - s.beta[u - 1];
    if (std::abs(s.alpha_bar[u] - prod) > 1e-12 * std::abs(prod))
      throw DataError("schedule: alpha_bar disagrees with beta product");
    if (s.sigma_bar_sq[u] != 1.0 - s.alpha_bar[u])
      throw DataError("schedule: sigma_bar_sq must equal 1 - alpha_bar");
  }
}

/// Forward marginal x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps.
///
/// Reusing one seed across different t reuses the same noise realization
/// (useful for comparing probe steps with common random numbers); pass
/// distinct seeds for independent draws.
inline SampleBatch forward_marginal(const NoiseSchedule& s, const Matrix& x0,
                                    int t, std::uint64_t seed) {
  if (t < 1 || t > s.T) throw ParamError("forward_marginal: t out of range");
  if (!x0.all_finite()) throw DataError("forward_marginal: non-finite input");
  const double ab = s.alpha_bar_at(t);
  const double sig = std::sqrt(ab);
  const double noise = std::sqrt(1.0 - ab);
  SampleBatch out;
  out.values = Matrix(x0.rows, x0.cols);
  Rng rng(seed);
  for (std::size_t i = 0; i < x0.data.size(); ++i)
    out.values.data[i] = sig * x0.data[i] + noise * rng.normal();
  out.prov = {seed, s.fingerprint(), t, ""};
  return out;
}

/// One Markov step x_t | x_{t-1}. The per-step noise stream is keyed by
/// (seed, t) so that iterating t = 1..k from a single seed composes into a
/// draw from the marginal at k.
inline SampleBatch forward_step(const NoiseSchedule& s, const Matrix& x_prev,
                                int t, std::uint64_t seed) {
  if (t < 1 || t > s.T) throw ParamError("forward_step: t out of range");
  const double cond = s.alpha_bar_cond(t, t - 1);
  const double sig = std::sqrt(cond);
  const double noise = std::sqrt(1.0 - cond);
  SampleBatch out;
  out.values = Matrix(x_prev.rows, x_prev.cols);
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(t)));
  for (std::size_t i = 0; i < x_prev.data.size(); ++i)
    out.values.data[i] = sig * x_prev.data[i] + noise * rng.normal();
  out.prov = {seed, s.fingerprint(), t, ""};
  return out;
}

}  // namespace vptrunc
