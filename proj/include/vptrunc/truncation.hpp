// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "vptrunc/common.hpp"
#include "vptrunc/gaussianity.hpp"
#include "vptrunc/schedule.hpp"
#include "vptrunc/stats.hpp"

namespace vptrunc {

/// Parameters of the stopping rule. Defaults: look-ahead 25 steps, 5%
/// significance, 95% of dimensions must pass, scan stride 10, probe batches
/// capped at 1e4 samples.
struct TStarParams {
  int tau = 25;
  double significance = 0.05;
  double pass_threshold = 0.95;
  int stride = 10;
  std::size_t max_probe_samples = 10000;
};

/// KS summary of one evaluated step in a scan.
struct ProbeRecord {
  int t = 0;
  double mean_D = 0.0;
  double pass_fraction = 0.0;
  bool passed = false;
};

/// Outcome of the truncation-step search, with the evidence that triggered
/// acceptance and the full probe table for later monotonicity checks.
struct TruncationDecision {
  int t_star = 0;
  int tau = 25;
  double significance = 0.05;
  double pass_threshold = 0.95;
  int stride = 10;
  bool fallback = false;  // no step qualified; t_star = T
  KsResult evidence_at_t;
  KsResult evidence_at_t_tau;
  std::vector<ProbeRecord> probes;  // every evaluated step, ascending t
  std::string schedule_fingerprint;
  std::uint64_t seed = 0;
  std::size_t probe_samples = 0;
};

namespace detail {

inline Matrix subsample_rows(const Matrix& m, std::size_t cap,
                             std::uint64_t seed) {
  if (m.rows <= cap) return m;
  std::vector<std::size_t> idx(m.rows);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < cap; ++i) {
    const std::size_t j =
        i + static_cast<std::size_t>(rng.below(m.rows - i));
    std::swap(idx[i], idx[j]);
  }
  Matrix out(cap, m.cols);
  for (std::size_t i = 0; i < cap; ++i) {
    auto src = m.row(idx[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace detail

/// Scans t = stride, 2*stride, ... <= T - tau and returns the smallest t at
/// which the KS criterion holds at both t and t + tau; falls back to
/// t_star = T when no step qualifies.
///
/// All probe steps share one subsample and one noise realization (common
/// random numbers), so pass/fail outcomes across steps reflect the schedule
/// rather than independent noise re-rolls, and refining the stride can only
/// move the decision earlier.
inline TruncationDecision select_t_star(const Dataset& dataset,
                                        const NoiseSchedule& schedule,
                                        const VariancePath& variance_path,
                                        const TStarParams& params,
                                        std::uint64_t seed) {
  if (params.tau < 1) throw ParamError("select_t_star: tau must be >= 1");
  if (params.tau >= schedule.T)
    throw ParamError("select_t_star: tau must be smaller than T");
  if (params.stride < 1) throw ParamError("select_t_star: stride must be >= 1");
  if (!(params.pass_threshold > 0.0 && params.pass_threshold <= 1.0))
    throw ParamError("select_t_star: pass threshold must be in (0,1]");
  if (!compute_stats(dataset).centered)
    throw DataError("select_t_star: dataset must be centered");

  const Matrix probe_set = detail::subsample_rows(
      dataset.values, params.max_probe_samples, mix_seed(seed, 0x73756273ULL));
  const std::uint64_t noise_seed = mix_seed(seed, 0x6e6f6973ULL);

  std::map<int, KsResult> cache;
  auto evaluate = [&](int t) -> const KsResult& {
    auto it = cache.find(t);
    if (it == cache.end()) {
      const SampleBatch noised =
          forward_marginal(schedule, probe_set, t, noise_seed);
      it = cache
               .emplace(t, ks_statistic(noised.values, variance_path.at(t),
                                        params.significance))
               .first;
    }
    return it->second;
  };
  auto passes = [&](const KsResult& ks) {
    return ks.pass_fraction >= params.pass_threshold;
  };

  TruncationDecision dec;
  dec.tau = params.tau;
  dec.significance = params.significance;
  dec.pass_threshold = params.pass_threshold;
  dec.stride = params.stride;
  dec.schedule_fingerprint = schedule.fingerprint();
  dec.seed = seed;
  dec.probe_samples = probe_set.rows;

  int found = -1;
  for (int t = params.stride; t <= schedule.T - params.tau;
       t += params.stride) {
    const KsResult& at_t = evaluate(t);
    const KsResult& at_tau = evaluate(t + params.tau);
    if (found < 0 && passes(at_t) && passes(at_tau)) {
      found = t;
      dec.evidence_at_t = at_t;
      dec.evidence_at_t_tau = at_tau;
    }
  }
  for (const auto& [t, ks] : cache)
    dec.probes.push_back({t, ks.mean_D, ks.pass_fraction, passes(ks)});

  if (found < 0) {
    dec.fallback = true;
    dec.t_star = schedule.T;
    if (!dec.probes.empty()) {
      // Keep the last evaluated pair around as diagnostic evidence.
      dec.evidence_at_t_tau = cache.rbegin()->second;
      dec.evidence_at_t = std::next(cache.rbegin()) == cache.rend()
                              ? cache.rbegin()->second
                              : std::next(cache.rbegin())->second;
    }
  } else {
    dec.fallback = false;
    dec.t_star = found;
  }
  return dec;
}

/// Draws n x d iid samples from N(0, v_tilde_{t_star} I).
inline SampleBatch truncated_prior(const VariancePath& variance_path,
                                   int t_star, std::size_t n, std::size_t d,
                                   std::uint64_t seed) {
  if (t_star < 1 || t_star >= static_cast<int>(variance_path.v_tilde.size()))
    throw ParamError("truncated_prior: t_star out of range");
  const double sd = std::sqrt(variance_path.at(t_star));
  SampleBatch out;
  out.values = Matrix(n, d);
  Rng rng(seed);
  for (double& v : out.values.data) v = sd * rng.normal();
  out.prov = {seed, variance_path.schedule_fingerprint, t_star,
              "truncated-prior"};
  return out;
}

}  // namespace vptrunc
