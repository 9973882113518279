// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vptrunc/common.hpp"
#include "vptrunc/gaussianity.hpp"
#include "vptrunc/harness.hpp"
#include "vptrunc/sampler.hpp"
#include "vptrunc/schedule.hpp"
#include "vptrunc/stats.hpp"
#include "vptrunc/truncation.hpp"

namespace vptrunc {

using json = nlohmann::json;

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Dataset formats: CSV (first line holds d, one sample per line) and raw
// binary ("TDFD", u32 n, u32 d, little-endian f64 row-major).
// ---------------------------------------------------------------------------

inline void write_dataset_csv(std::ostream& os, const Matrix& m) {
  os << m.cols << "\r\n";
  for (std::size_t i = 0; i < m.rows; ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < m.cols; ++j) {
      if (j) os << ',';
      os << detail::format_double(r[j]);
    }
    os << "\r\n";
  }
}

inline void write_dataset_csv(const std::string& path, const Matrix& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path);
  write_dataset_csv(os, m);
}

inline Matrix read_dataset_csv(std::istream& is) {
  std::string line;
  auto next_line = [&](std::string& out) {
    if (!std::getline(is, out)) return false;
    while (!out.empty() && (out.back() == '\r' || out.back() == '\n'))
      out.pop_back();
    return true;
  };
  if (!next_line(line)) throw DataError("csv: missing header row");
  std::size_t d = 0;
  try {
    d = static_cast<std::size_t>(std::stoul(line));
  } catch (...) {
    throw DataError("csv: header row must contain the column count");
  }
  if (d == 0) throw DataError("csv: zero columns");
  std::vector<double> values;
  std::size_t rows = 0;
  while (next_line(line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t got = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (...) {
        throw DataError("csv: bad numeric cell '" + cell + "'");
      }
      got++;
    }
    if (got != d) throw DataError("csv: row with wrong number of columns");
    rows++;
  }
  Matrix m(rows, d);
  m.data = std::move(values);
  return m;
}

inline Matrix read_dataset_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open: " + path);
  return read_dataset_csv(is);
}

inline void write_dataset_bin(const std::string& path, const Matrix& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path);
  os.write("TDFD", 4);
  const auto n32 = static_cast<std::uint32_t>(m.rows);
  const auto d32 = static_cast<std::uint32_t>(m.cols);
  os.write(reinterpret_cast<const char*>(&n32), 4);
  os.write(reinterpret_cast<const char*>(&d32), 4);
  os.write(reinterpret_cast<const char*>(m.data.data()),
           static_cast<std::streamsize>(m.data.size() * sizeof(double)));
}

inline Matrix read_dataset_bin(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "TDFD", 4) != 0)
    throw DataError("binary dataset: bad magic");
  std::uint32_t n32 = 0, d32 = 0;
  is.read(reinterpret_cast<char*>(&n32), 4);
  is.read(reinterpret_cast<char*>(&d32), 4);
  if (!is) throw DataError("binary dataset: truncated header");
  Matrix m(n32, d32);
  is.read(reinterpret_cast<char*>(m.data.data()),
          static_cast<std::streamsize>(m.data.size() * sizeof(double)));
  if (!is) throw DataError("binary dataset: truncated payload");
  return m;
}

// ---------------------------------------------------------------------------
// JSON serialization
// ---------------------------------------------------------------------------

inline json to_json(const NoiseSchedule& s) {
  return json{{"T", s.T}, {"beta", s.beta}, {"alpha_bar", s.alpha_bar}};
}

/// Rebuilds a schedule from {T, beta[]}; a stored alpha_bar, if present, is
/// verified against the recomputed product.
inline NoiseSchedule schedule_from_json(const json& j) {
  const int T = j.at("T").get<int>();
  auto betas = j.at("beta").get<std::vector<double>>();
  if (static_cast<int>(betas.size()) != T)
    throw DataError("schedule json: beta length mismatch");
  NoiseSchedule s = detail::from_betas(T, std::move(betas));
  if (j.contains("alpha_bar")) {
    const auto stored = j.at("alpha_bar").get<std::vector<double>>();
    if (stored.size() != s.alpha_bar.size())
      throw DataError("schedule json: alpha_bar length mismatch");
    for (std::size_t i = 0; i < stored.size(); ++i)
      if (std::abs(stored[i] - s.alpha_bar[i]) >
          1e-12 * std::max(1.0, std::abs(stored[i])))
        throw DataError("schedule json: alpha_bar disagrees with beta");
  }
  return s;
}

inline json to_json(const DatasetStats& st) {
  return json{{"avg_var", st.avg_var},
              {"mean_residual", st.mean_residual},
              {"centered", st.centered},
              {"n", st.per_sample_mean.size()}};
}

inline json to_json(const VariancePath& p) {
  return json{{"v_tilde", p.v_tilde},
              {"schedule_fingerprint", p.schedule_fingerprint}};
}

inline json to_json(const KsResult& k) {
  return json{{"per_dim_D", k.per_dim_D},
              {"mean_D", k.mean_D},
              {"pass_fraction", k.pass_fraction},
              {"critical_value", k.critical_value},
              {"n_used", k.n_used}};
}

inline json to_json(const MiResult& m) {
  return json{{"mi_rows", m.mi_rows},
              {"mi_cols", m.mi_cols},
              {"pairs_rows", m.pairs_rows},
              {"pairs_cols", m.pairs_cols},
              {"skipped_pairs", m.skipped_pairs},
              {"estimator", m.estimator_tag}};
}

inline json to_json(const CumulantTrace& c) {
  return json{{"k3", c.k3}, {"k4", c.k4}};
}

inline json to_json(const GaussianityReport& rep) {
  json points = json::array();
  for (const auto& pt : rep.points)
    points.push_back(json{{"t", pt.t},
                          {"v_tilde", pt.v_tilde},
                          {"ks", to_json(pt.ks)},
                          {"mi", to_json(pt.mi)},
                          {"cumulants", to_json(pt.cumulant)}});
  return json{{"points", points},
              {"seed", rep.seed},
              {"schedule_fingerprint", rep.schedule_fingerprint},
              {"significance", rep.significance}};
}

/// Long-form CSV of a Gaussianity curve, one probed step per row.
inline void write_gaussianity_csv(std::ostream& os,
                                  const GaussianityReport& rep) {
  os << "t,mean_D,pass_fraction,mi_rows,mi_cols,k3,k4,v_tilde\r\n";
  for (const auto& pt : rep.points) {
    os << pt.t << ',' << detail::format_double(pt.ks.mean_D) << ','
       << detail::format_double(pt.ks.pass_fraction) << ','
       << detail::format_double(pt.mi.mi_rows) << ','
       << detail::format_double(pt.mi.mi_cols) << ','
       << detail::format_double(pt.cumulant.k3) << ','
       << detail::format_double(pt.cumulant.k4) << ','
       << detail::format_double(pt.v_tilde) << "\r\n";
  }
}

inline json to_json(const TruncationDecision& d) {
  json probes = json::array();
  for (const auto& p : d.probes)
    probes.push_back(json{{"t", p.t},
                          {"mean_D", p.mean_D},
                          {"pass_fraction", p.pass_fraction},
                          {"passed", p.passed}});
  return json{{"t_star", d.t_star},
              {"tau", d.tau},
              {"significance", d.significance},
              {"pass_threshold", d.pass_threshold},
              {"stride", d.stride},
              {"fallback", d.fallback},
              {"evidence_at_t", to_json(d.evidence_at_t)},
              {"evidence_at_t_tau", to_json(d.evidence_at_t_tau)},
              {"probes", probes},
              {"schedule_fingerprint", d.schedule_fingerprint},
              {"seed", d.seed},
              {"probe_samples", d.probe_samples}};
}

inline json to_json(const Provenance& p) {
  return json{{"seed", p.seed},
              {"schedule_fingerprint", p.schedule_fingerprint},
              {"start_step", p.start_step},
              {"denoiser_id", p.denoiser_id}};
}

inline json to_json(const CompareReport& r) {
  return json{{"skipped", r.skipped},
              {"skip_reason", r.skip_reason},
              {"n", r.n},
              {"per_dim_ks", r.per_dim_ks},
              {"max_ks", r.max_ks},
              {"max_mean_gap", r.max_mean_gap},
              {"max_var_gap", r.max_var_gap},
              {"wall_full_per_sample", r.wall_full_per_sample},
              {"wall_trunc_per_sample", r.wall_trunc_per_sample},
              {"speedup", r.speedup},
              {"t_star", r.t_star},
              {"full_steps", r.full_steps},
              {"seed", r.seed},
              {"schedule_fingerprint", r.schedule_fingerprint}};
}

inline json to_json(const BenchmarkReport& r) {
  return json{{"decision", to_json(r.decision)},
              {"compare", to_json(r.compare)},
              {"v_hat", r.v_hat},
              {"mean_residual", r.mean_residual},
              {"n", r.n},
              {"d", r.d},
              {"family", r.family},
              {"denoiser_id", r.denoiser_id},
              {"schedule_fingerprint", r.schedule_fingerprint},
              {"data_seed", r.data_seed},
              {"pipeline_seed", r.pipeline_seed}};
}

inline void write_json(const std::string& path, const json& j) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path);
  os << j.dump(2) << '\n';
}

inline json read_json(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw DataError(std::string("bad json in ") + path + ": " + e.what());
  }
  return j;
}

}  // namespace vptrunc
