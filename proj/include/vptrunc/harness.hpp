// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "vptrunc/common.hpp"
#include "vptrunc/gaussianity.hpp"
#include "vptrunc/sampler.hpp"
#include "vptrunc/schedule.hpp"
#include "vptrunc/stats.hpp"
#include "vptrunc/truncation.hpp"

namespace vptrunc {

enum class Family { gmm, point_cloud, onehot_categorical, smooth_field };

inline const char* to_string(Family f) {
  switch (f) {
    case Family::gmm: return "gmm";
    case Family::point_cloud: return "point-cloud";
    case Family::onehot_categorical: return "onehot-categorical";
    case Family::smooth_field: return "smooth-field";
  }
  return "gmm";
}

inline Family family_from_string(const std::string& s) {
  if (s == "gmm") return Family::gmm;
  if (s == "point-cloud") return Family::point_cloud;
  if (s == "onehot-categorical") return Family::onehot_categorical;
  if (s == "smooth-field") return Family::smooth_field;
  throw ParamError("unknown family: " + s);
}

enum class FieldSquash { none, tanh_squash, exp_squash };

/// Synthetic data generator configuration. Every family produces datasets
/// that are zero-mean invariant by construction.
struct SyntheticSpec {
  Family family = Family::gmm;
  std::size_t n = 10000;
  std::size_t d = 8;
  std::uint64_t seed = 0;

  // gmm
  GmmSpec gmm;

  // point-cloud: d = coord_dims * points per cloud
  std::size_t cloud_points = 8;
  std::size_t cloud_coord_dims = 3;
  std::size_t cloud_shapes = 4;    // size of the template shape library
  double cloud_jitter = 0.15;      // per-coordinate Gaussian jitter

  // onehot-categorical
  std::vector<double> onehot_freqs;  // empty = uniform over d classes
  double onehot_scale = 1.0;

  // smooth-field: Gaussian process on a 1-D grid of d points
  double field_corr_len = 0.0;  // 0 = default d/4
  FieldSquash field_squash = FieldSquash::exp_squash;
  double field_gain = 1.0;
};

/// Default two-component zero-mean mixture in dimension d: means follow an
/// alternating +/- pattern, the second component mirrors the first so the
/// mixture mean is zero.
inline GmmSpec default_gmm(std::size_t d, double separation = 0.8,
                           double variance = 0.25,
                           double weight_first = 0.6) {
  GmmSpec g;
  g.weights = {weight_first, 1.0 - weight_first};
  g.means = Matrix(2, d);
  const double mirror = -weight_first / (1.0 - weight_first);
  for (std::size_t j = 0; j < d; ++j) {
    const double u = (j % 2 == 0) ? separation : -separation;
    g.means(0, j) = u;
    g.means(1, j) = mirror * u;
  }
  g.variances = {variance, variance};
  return g;
}

/// Draws n samples from the mixture.
inline Matrix sample_gmm(const GmmSpec& g, std::size_t n, std::uint64_t seed) {
  validate_gmm(g);
  Matrix out(n, g.means.cols);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform01();
    std::size_t k = 0;
    double acc = 0.0;
    for (; k + 1 < g.weights.size(); ++k) {
      acc += g.weights[k];
      if (u < acc) break;
    }
    const double sd = std::sqrt(g.variances[k]);
    auto mu = g.means.row(k);
    auto row = out.row(i);
    for (std::size_t j = 0; j < out.cols; ++j)
      row[j] = mu[j] + sd * rng.normal();
  }
  return out;
}

namespace detail {

/// In-place lower Cholesky of a small SPD matrix (row-major d x d).
inline void cholesky(std::vector<double>& a, std::size_t d) {
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a[i * d + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * d + k] * a[j * d + k];
      if (i == j) {
        if (s <= 0.0) throw DataError("cholesky: matrix not positive definite");
        a[i * d + j] = std::sqrt(s);
      } else {
        a[i * d + j] = s / a[j * d + j];
      }
    }
    for (std::size_t j = i + 1; j < d; ++j) a[i * d + j] = 0.0;
  }
}

inline std::vector<double> rbf_cholesky(std::size_t d, double corr_len) {
  std::vector<double> k(d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double r = static_cast<double>(i) - static_cast<double>(j);
      k[i * d + j] = std::exp(-0.5 * r * r / (corr_len * corr_len));
    }
  for (std::size_t i = 0; i < d; ++i) k[i * d + i] += 1e-8;
  cholesky(k, d);
  return k;
}

}  // namespace detail

/// Generates a synthetic dataset; deterministic given spec.seed.
inline Dataset generate(const SyntheticSpec& spec) {
  if (spec.n < 2 || spec.d < 2) throw ParamError("generate: need n,d >= 2");
  Dataset ds;
  Rng rng(spec.seed);
  switch (spec.family) {
    case Family::gmm: {
      GmmSpec g = spec.gmm.weights.empty() ? default_gmm(spec.d) : spec.gmm;
      if (g.means.cols != spec.d)
        throw ParamError("generate: gmm dimension does not match d");
      ds.values = sample_gmm(g, spec.n, spec.seed);
      ds.modality = Modality::generic;
      break;
    }
    case Family::point_cloud: {
      const std::size_t m = spec.cloud_points;
      const std::size_t c = spec.cloud_coord_dims;
      if (m * c != spec.d)
        throw ParamError("generate: point cloud needs d = points * coords");
      if (spec.cloud_shapes == 0) throw ParamError("generate: empty shape library");
      // Template library: centroid-centered Gaussian shapes, unit RMS radius.
      std::vector<Matrix> shapes;
      for (std::size_t s = 0; s < spec.cloud_shapes; ++s) {
        Matrix sh(m, c);
        for (double& v : sh.data) v = rng.normal();
        sh = center_columns(sh);
        double rms = 0.0;
        for (double v : sh.data) rms += v * v;
        rms = std::sqrt(rms / static_cast<double>(sh.data.size()));
        for (double& v : sh.data) v /= rms;
        shapes.push_back(std::move(sh));
      }
      ds.values = Matrix(spec.n, spec.d);
      for (std::size_t i = 0; i < spec.n; ++i) {
        const auto& sh = shapes[rng.below(shapes.size())];
        Matrix cloud = sh;
        for (double& v : cloud.data) v += spec.cloud_jitter * rng.normal();
        cloud = center_columns(cloud);  // exact zero mean per axis
        std::copy(cloud.data.begin(), cloud.data.end(),
                  ds.values.row(i).begin());
      }
      ds.modality = Modality::euclidean_points;
      break;
    }
    case Family::onehot_categorical: {
      std::vector<double> p = spec.onehot_freqs;
      if (p.empty())
        p.assign(spec.d, 1.0 / static_cast<double>(spec.d));
      if (p.size() != spec.d)
        throw ParamError("generate: frequency vector must have d entries");
      double sum = std::accumulate(p.begin(), p.end(), 0.0);
      if (std::abs(sum - 1.0) > 1e-9)
        throw ParamError("generate: frequencies must sum to 1");
      ds.values = Matrix(spec.n, spec.d, 0.0);
      for (std::size_t i = 0; i < spec.n; ++i) {
        const double u = rng.uniform01();
        double acc = 0.0;
        std::size_t cls = spec.d - 1;
        for (std::size_t j = 0; j < spec.d; ++j) {
          acc += p[j];
          if (u < acc) {
            cls = j;
            break;
          }
        }
        ds.values(i, cls) = spec.onehot_scale;
      }
      ds.modality = Modality::onehot_categorical;
      break;
    }
    case Family::smooth_field: {
      const double len =
          spec.field_corr_len > 0.0 ? spec.field_corr_len
                                    : static_cast<double>(spec.d) / 4.0;
      const auto chol = detail::rbf_cholesky(spec.d, len);
      ds.values = Matrix(spec.n, spec.d);
      std::vector<double> z(spec.d);
      for (std::size_t i = 0; i < spec.n; ++i) {
        for (double& v : z) v = rng.normal();
        auto row = ds.values.row(i);
        for (std::size_t a = 0; a < spec.d; ++a) {
          double s = 0.0;
          for (std::size_t b = 0; b <= a; ++b) s += chol[a * spec.d + b] * z[b];
          switch (spec.field_squash) {
            case FieldSquash::none: row[a] = spec.field_gain * s; break;
            case FieldSquash::tanh_squash:
              row[a] = std::tanh(spec.field_gain * s);
              break;
            case FieldSquash::exp_squash:
              row[a] = std::exp(spec.field_gain * s);
              break;
          }
        }
        const double mu = std::accumulate(row.begin(), row.end(), 0.0) /
                          static_cast<double>(spec.d);
        for (double& v : row) v -= mu;  // centered per sample at generation
      }
      ds.modality = Modality::generic;
      break;
    }
  }
  return ds;
}

enum class DenoiserKind { gmm_analytic, linear_per_step, zero };

inline DenoiserKind denoiser_kind_from_string(const std::string& s) {
  if (s == "gmm-analytic" || s == "gmm") return DenoiserKind::gmm_analytic;
  if (s == "linear-per-step" || s == "linear")
    return DenoiserKind::linear_per_step;
  if (s == "zero") return DenoiserKind::zero;
  throw ParamError("unknown denoiser: " + s);
}

struct PipelineParams {
  // schedule
  std::string schedule_kind = "linear";  // or "cosine"
  int T = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  // truncation
  TStarParams tstar;
  // sampling; sample_n = 0 skips the paired-sampling stage
  DenoiserKind denoiser = DenoiserKind::gmm_analytic;
  std::size_t sample_n = 10000;
  int timing_reps = 5;
  std::size_t fit_pairs = 100000;
  std::uint64_t seed = 42;
};

struct BenchmarkReport {
  TruncationDecision decision;
  CompareReport compare;
  VariancePath variance_path;
  double v_hat = 0.0;
  double mean_residual = 0.0;
  std::size_t n = 0;
  std::size_t d = 0;
  std::string family;
  std::string denoiser_id;
  std::string schedule_fingerprint;
  std::uint64_t data_seed = 0;
  std::uint64_t pipeline_seed = 0;
};

namespace detail {

template <typename F>
auto run_stage(const char* name, F&& fn) {
  try {
    return fn();
  } catch (const ParamError& e) {
    throw ParamError(std::string("stage ") + name + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(std::string("stage ") + name + ": " + e.what());
  }
}

}  // namespace detail

/// Full benchmark: generate, center, estimate, propagate, select T*, set up
/// the denoiser and run the paired full/truncated comparison. Errors are
/// re-thrown with the failing stage name prefixed.
inline BenchmarkReport run_pipeline(const SyntheticSpec& spec,
                                    const PipelineParams& params) {
  BenchmarkReport rep;
  rep.family = to_string(spec.family);
  rep.n = spec.n;
  rep.d = spec.d;
  rep.data_seed = spec.seed;
  rep.pipeline_seed = params.seed;

  const NoiseSchedule schedule = detail::run_stage("schedule", [&] {
    return params.schedule_kind == "cosine"
               ? make_cosine_schedule(params.T)
               : make_linear_schedule(params.T, params.beta_start,
                                      params.beta_end);
  });
  rep.schedule_fingerprint = schedule.fingerprint();

  const Dataset raw = detail::run_stage("generate", [&] { return generate(spec); });
  const Dataset centered = detail::run_stage("center", [&] { return center(raw); });
  const DatasetStats stats =
      detail::run_stage("stats", [&] { return compute_stats(centered); });
  rep.v_hat = stats.avg_var;
  rep.mean_residual = stats.mean_residual;
  const VariancePath vpath = detail::run_stage(
      "variance-path", [&] { return propagate_variance(stats, schedule); });
  rep.variance_path = vpath;
  rep.decision = detail::run_stage("tstar", [&] {
    return select_t_star(centered, schedule, vpath, params.tstar,
                         mix_seed(params.seed, 0x74737461ULL));
  });

  if (params.sample_n == 0) {
    rep.compare.skipped = true;
    rep.compare.skip_reason = "sampling disabled (sample_n = 0)";
    rep.compare.t_star = rep.decision.t_star;
    rep.compare.schedule_fingerprint = rep.schedule_fingerprint;
    return rep;
  }

  const Denoiser den = detail::run_stage("denoiser", [&]() -> Denoiser {
    switch (params.denoiser) {
      case DenoiserKind::gmm_analytic: {
        GmmSpec g = spec.gmm.weights.empty() ? default_gmm(spec.d) : spec.gmm;
        if (spec.family != Family::gmm)
          throw ParamError("gmm-analytic denoiser requires the gmm family");
        return make_gmm_denoiser(std::move(g));
      }
      case DenoiserKind::linear_per_step: {
        std::vector<int> steps(static_cast<std::size_t>(schedule.T));
        std::iota(steps.begin(), steps.end(), 1);
        return fit_linear_denoiser(centered, schedule, steps,
                                   mix_seed(params.seed, 0x666974ULL),
                                   params.fit_pairs);
      }
      case DenoiserKind::zero: return make_zero_denoiser();
    }
    throw ParamError("unknown denoiser kind");
  });
  rep.denoiser_id = den.id;

  rep.compare = detail::run_stage("compare", [&] {
    return compare_full_vs_truncated(den, schedule, rep.decision, vpath,
                                     params.sample_n, spec.d,
                                     mix_seed(params.seed, 0x636d70ULL),
                                     params.timing_reps);
  });
  if (rep.compare.schedule_fingerprint != rep.decision.schedule_fingerprint)
    throw DataError("stage compare: schedule fingerprint mismatch");
  return rep;
}

}  // namespace vptrunc
