// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "test_helpers.hpp"
#include "vptrunc/gaussianity.hpp"
#include "vptrunc/schedule.hpp"

using namespace vptrunc;

TEST_CASE("degenerate all-zero sample has sup distance one half",
          "[gaussianity][ks]") {
  const Matrix zeros(100, 3, 0.0);
  const auto res = ks_statistic(zeros, 1.0, 0.05);
  for (double d : res.per_dim_D) CHECK(d == Catch::Approx(0.5));
  CHECK(res.mean_D == Catch::Approx(0.5));
  CHECK(res.pass_fraction == 0.0);
}

TEST_CASE("ks parameter and contract errors", "[gaussianity][ks]") {
  const Matrix m(100, 2, 0.0);
  CHECK_THROWS_AS(ks_statistic(m, 0.0, 0.05), ParamError);
  CHECK_THROWS_AS(ks_statistic(m, -1.0, 0.05), ParamError);
  CHECK_THROWS_AS(ks_statistic(m, 1.0, 0.0), ParamError);
  CHECK_THROWS_AS(ks_statistic(Matrix(49, 2, 0.0), 1.0, 0.05), DataError);
}

TEST_CASE("ks critical value follows the asymptotic formula",
          "[gaussianity][ks]") {
  const auto res = ks_statistic(testutil::iid_normal(100, 2, 3), 1.0, 0.05);
  CHECK(res.critical_value ==
        Catch::Approx(std::sqrt(-std::log(0.025) / 200.0)));
}

TEST_CASE("most dimensions pass under the null", "[gaussianity][ks]") {
  const auto samples = testutil::iid_normal(10000, 100, 17, 2.0);
  const auto res = ks_statistic(samples, 4.0, 0.05);
  CHECK(res.pass_fraction >= 0.93);
}

TEST_CASE("per-dimension rejection rate is calibrated", "[gaussianity][ks]") {
  // 1000 null dimensions at n = 1e4; expect a 5% rejection rate.
  const auto samples = testutil::iid_normal(10000, 1000, 19);
  const auto res = ks_statistic(samples, 1.0, 0.05);
  const double reject = 1.0 - res.pass_fraction;
  CHECK(reject > 0.03);
  CHECK(reject < 0.07);
}

TEST_CASE("uniform samples against the variance-matched Gaussian",
          "[gaussianity][ks]") {
  // Dense-grid oracle for sup |F_uniform(-1,1) - Phi_{1/3}|.
  double oracle = 0.0;
  for (int i = 0; i <= 1000000; ++i) {
    const double x = -1.2 + 2.4 * i / 1000000.0;
    const double fu = std::clamp((x + 1.0) / 2.0, 0.0, 1.0);
    oracle = std::max(oracle, std::abs(fu - normal_cdf(x, 1.0 / 3.0)));
  }
  CHECK(oracle == Catch::Approx(0.0572).margin(0.0005));

  Matrix m(100000, 4);
  Rng rng(23);
  for (double& v : m.data) v = 2.0 * rng.uniform01() - 1.0;
  const auto res = ks_statistic(m, 1.0 / 3.0, 0.05);
  CHECK(res.mean_D == Catch::Approx(oracle).margin(0.01));
  CHECK(res.pass_fraction == 0.0);
}

TEST_CASE("two-sample ks distinguishes equal and shifted laws",
          "[gaussianity][ks]") {
  const auto a = testutil::iid_normal(20000, 1, 29);
  const auto b = testutil::iid_normal(20000, 1, 31);
  CHECK(two_sample_ks(a.column(0), b.column(0)) < 0.02);
  auto shifted = b.column(0);
  for (double& v : shifted) v += 0.5;
  CHECK(two_sample_ks(a.column(0), shifted) > 0.15);
}

TEST_CASE("independent entries give near-zero feature MI",
          "[gaussianity][mi]") {
  const auto res = mutual_information(testutil::iid_normal(50000, 12, 37));
  CHECK(res.mi_rows <= 0.02);
  CHECK(res.pairs_rows == 66);
  CHECK(res.skipped_pairs == 0);
}

TEST_CASE("independent entries give near-zero sample MI", "[gaussianity][mi]") {
  // Row pairs only see d observations, so the raw plug-in needs a wide
  // matrix before its bias drops under the 0.02 nat threshold.
  const auto res = mutual_information(testutil::iid_normal(1000, 24389, 41));
  CHECK(res.mi_cols <= 0.02);
  CHECK(res.pairs_cols == 256);
}

TEST_CASE("duplicated column saturates the estimator", "[gaussianity][mi]") {
  Matrix m(10000, 2);
  Rng rng(43);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double v = rng.normal();
    m(i, 0) = v;
    m(i, 1) = v;
  }
  CHECK(mutual_information(m).mi_rows > 2.0);
}

TEST_CASE("correlated Gaussian matches the closed-form MI",
          "[gaussianity][mi]") {
  const double rho = 0.9;
  const double truth = -0.5 * std::log(1.0 - rho * rho);  // 0.8304 nats
  Matrix m(10000, 2);
  Rng rng(47);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double z1 = rng.normal(), z2 = rng.normal();
    m(i, 0) = z1;
    m(i, 1) = rho * z1 + std::sqrt(1.0 - rho * rho) * z2;
  }
  CHECK(mutual_information(m).mi_rows == Catch::Approx(truth).epsilon(0.10));
}

TEST_CASE("constant dimensions are skipped and counted", "[gaussianity][mi]") {
  Matrix m = testutil::iid_normal(2000, 3, 53);
  for (std::size_t i = 0; i < m.rows; ++i) m(i, 1) = 7.0;
  const auto res = mutual_information(m);
  CHECK(res.pairs_rows == 1);      // only the (0,2) pair survives
  CHECK(res.skipped_pairs == 2);
  CHECK(res.mi_rows <= 0.05);
}

TEST_CASE("mi preconditions", "[gaussianity][mi]") {
  CHECK_THROWS_AS(mutual_information(testutil::iid_normal(999, 4, 1)),
                  DataError);
}

TEST_CASE("Gaussian cumulants vanish", "[gaussianity][cumulants]") {
  const auto tr = cumulants(testutil::iid_normal(1000000, 1, 59));
  CHECK(tr.k3 <= 0.01);
  CHECK(tr.k4 <= 0.03);
}

TEST_CASE("standardized exponential cumulants", "[gaussianity][cumulants]") {
  const auto data = testutil::iid_std_exponential(1000000, 1, 61);
  const auto tr = cumulants(data);
  CHECK(tr.k3 == Catch::Approx(2.0).epsilon(0.05));
  CHECK(tr.k4 == Catch::Approx(6.0).epsilon(0.05));
}

TEST_CASE("Gaussian mixing attenuates the third cumulant by a^3",
          "[gaussianity][cumulants]") {
  const double a = 0.5;
  const auto base = testutil::iid_std_exponential(1000000, 1, 67);
  Matrix mixed = base;
  Rng rng(71);
  for (double& v : mixed.data)
    v = a * v + std::sqrt(1.0 - a * a) * rng.normal();
  const auto tr = cumulants(mixed);
  CHECK(tr.k3 == Catch::Approx(a * a * a * 2.0).epsilon(0.10));
}

TEST_CASE("cumulants reject tiny or degenerate samples",
          "[gaussianity][cumulants]") {
  CHECK_THROWS_AS(cumulants(testutil::iid_normal(9999, 2, 73)), DataError);
  CHECK_THROWS_AS(cumulants(Matrix(10000, 2, 3.0)), DataError);
}

TEST_CASE("cumulant decay along the schedule follows the conditional"
          " coefficient",
          "[gaussianity][cumulants][property]") {
  const auto s = default_schedule();
  const int t = 100, u = 300;
  Dataset ds;
  ds.values = testutil::iid_std_exponential(250000, 4, 79);
  const std::uint64_t noise_seed = 83;  // shared across both steps
  const auto xt = forward_marginal(s, ds.values, t, noise_seed);
  const auto xu = forward_marginal(s, ds.values, u, noise_seed);
  const double k3_t = cumulants(xt.values).k3;
  const double k3_u = cumulants(xu.values).k3;
  REQUIRE(k3_t > 0.2);
  const double expected = std::pow(s.alpha_bar_cond(u, t), 1.5);
  CHECK(k3_u / k3_t == Catch::Approx(expected).epsilon(0.10));
}

TEST_CASE("gaussianity curve on already-Gaussian data", "[gaussianity][curve]") {
  const auto s = default_schedule();
  Dataset ds;
  ds.values = testutil::iid_normal(30000, 100, 89);
  const auto centered = center(ds);
  const auto stats = compute_stats(centered);
  const auto vpath = propagate_variance(stats, s);
  const auto rep =
      gaussianity_curve(centered, s, vpath, {1, 250, 500, 1000}, 97);
  REQUIRE(rep.points.size() == 4);
  for (const auto& pt : rep.points) CHECK(pt.ks.pass_fraction >= 0.93);
  // x_T is indistinguishable from iid noise.
  CHECK(rep.points.back().mi.mi_rows <= 0.02);
}

TEST_CASE("feature MI decays monotonically along the curve",
          "[gaussianity][curve][property]") {
  // Strongly dependent columns from a shared phase and amplitude; cosine
  // patterns sum to zero over the grid, so centering keeps the structure.
  const std::size_t n = 30000, d = 16;
  Matrix m(n, d);
  Rng rng(101);
  for (std::size_t i = 0; i < n; ++i) {
    const double amp = 0.8 + 0.8 * rng.uniform01();
    const double phase = 2.0 * M_PI * rng.uniform01();
    for (std::size_t j = 0; j < d; ++j)
      m(i, j) = amp * std::cos(2.0 * M_PI * static_cast<double>(j) / d + phase) +
                0.3 * rng.normal();
  }
  Dataset ds;
  ds.values = std::move(m);
  const auto centered = center(ds);
  const auto s = default_schedule();
  const auto vpath = propagate_variance(compute_stats(centered), s);
  const auto rep =
      gaussianity_curve(centered, s, vpath, {50, 200, 400, 700, 1000}, 103);
  for (std::size_t i = 1; i < rep.points.size(); ++i)
    CHECK(rep.points[i].mi.mi_rows <=
          rep.points[i - 1].mi.mi_rows + 0.02);
  CHECK(rep.points.front().mi.mi_rows > 0.1);  // structure visible early
}

TEST_CASE("pass fraction does not degrade beyond the crossing",
          "[gaussianity][curve][property]") {
  const auto s = default_schedule();
  Dataset ds;
  ds.values = testutil::iid_std_exponential(20000, 100, 107);
  const auto centered = center(ds);
  const auto vpath = propagate_variance(compute_stats(centered), s);
  std::vector<int> probes;
  for (int t = 100; t <= 1000; t += 100) probes.push_back(t);
  const auto rep = gaussianity_curve(centered, s, vpath, probes, 109);
  double crossed_at = -1.0;
  for (const auto& pt : rep.points) {
    if (crossed_at >= 0.0)
      CHECK(pt.ks.pass_fraction >= crossed_at - 0.02);
    else if (pt.ks.pass_fraction >= 0.95)
      crossed_at = pt.ks.pass_fraction;
  }
  CHECK(crossed_at >= 0.95);  // exponential data does cross under default T
}

TEST_CASE("curve requires centered data and in-range probes",
          "[gaussianity][curve]") {
  const auto s = default_schedule();
  Dataset ds;
  ds.values = testutil::iid_normal(2000, 4, 113);
  for (double& v : ds.values.data) v += 5.0;  // uncentered
  DatasetStats st;
  st.centered = true;
  st.avg_var = 1.0;
  const auto vpath = propagate_variance(st, s);
  CHECK_THROWS_AS(gaussianity_curve(ds, s, vpath, {10}, 1), DataError);
  const auto centered = center(ds);
  CHECK_THROWS_AS(gaussianity_curve(centered, s, vpath, {0}, 1), ParamError);
  CHECK_THROWS_AS(gaussianity_curve(centered, s, vpath, {1001}, 1),
                  ParamError);
}
