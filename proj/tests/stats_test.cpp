// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "test_helpers.hpp"
#include "vptrunc/schedule.hpp"
#include "vptrunc/stats.hpp"

using namespace vptrunc;

namespace {

Dataset make_dataset(std::vector<std::vector<double>> rows,
                     Modality m = Modality::generic) {
  Dataset ds;
  ds.modality = m;
  ds.values = Matrix(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      ds.values(i, j) = rows[i][j];
  return ds;
}

}  // namespace

TEST_CASE("per-sample centering", "[stats]") {
  const auto c = center(make_dataset({{1.0, -1.0}, {3.0, 1.0}}));
  CHECK(c.values(0, 0) == 1.0);
  CHECK(c.values(0, 1) == -1.0);

  const auto d2 = center(make_dataset({{0.0, 0.0, 3.0}, {0.0, 0.0, 0.0}}));
  CHECK(d2.values(0, 0) == Catch::Approx(-1.0));
  CHECK(d2.values(0, 1) == Catch::Approx(-1.0));
  CHECK(d2.values(0, 2) == Catch::Approx(2.0));
}

TEST_CASE("one-hot centering subtracts the batch mean", "[stats]") {
  // Frequencies (0.5, 0.3, 0.2) over ten rows.
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 5; ++i) rows.push_back({1, 0, 0});
  for (int i = 0; i < 3; ++i) rows.push_back({0, 1, 0});
  for (int i = 0; i < 2; ++i) rows.push_back({0, 0, 1});
  const auto c = center(make_dataset(rows, Modality::onehot_categorical));
  CHECK(c.values(0, 0) == Catch::Approx(0.5));
  CHECK(c.values(0, 1) == Catch::Approx(-0.3));
  CHECK(c.values(0, 2) == Catch::Approx(-0.2));
  // Active class still carries the maximal entry.
  for (std::size_t i = 0; i < c.values.rows; ++i) {
    auto r = c.values.row(i);
    const std::size_t argmax =
        std::max_element(r.begin(), r.end()) - r.begin();
    auto orig = rows[i];
    const std::size_t expect =
        std::max_element(orig.begin(), orig.end()) - orig.begin();
    CHECK(argmax == expect);
  }
  const auto st = compute_stats(c);
  CHECK(st.centered);
  CHECK(st.mean_residual <= 1e-12);
}

TEST_CASE("centering is idempotent bitwise up to 1e-15", "[stats]") {
  Dataset ds;
  ds.values = testutil::iid_normal(500, 16, 33);
  const auto once = center(ds);
  const auto twice = center(once);
  for (std::size_t i = 0; i < once.values.data.size(); ++i)
    CHECK(std::abs(once.values.data[i] - twice.values.data[i]) <= 1e-15);
}

TEST_CASE("compute_stats matches the closed-form examples", "[stats]") {
  const auto st1 = compute_stats(make_dataset({{1.0, -1.0}, {1.0, -1.0}}));
  CHECK(st1.per_sample_mean[0] == 0.0);
  CHECK(st1.per_sample_var[0] == 1.0);

  const auto st2 = compute_stats(make_dataset({{0.0, 0.0, 3.0}, {0, 0, 0}}));
  CHECK(st2.per_sample_mean[0] == Catch::Approx(1.0));
  CHECK(st2.per_sample_var[0] == Catch::Approx(2.0));
}

TEST_CASE("avg_var estimates the population per-sample variance", "[stats]") {
  // iid N(0, 4) entries: expected per-sample variance 4 (d-1)/d.
  const std::size_t n = 100000, d = 16;
  Dataset ds;
  ds.values = testutil::iid_normal(n, d, 55, 2.0);
  const auto st = compute_stats(ds);
  const double expected = 4.0 * (static_cast<double>(d) - 1.0) / d;
  CHECK(st.avg_var == Catch::Approx(expected).epsilon(0.01));
  CHECK(st.avg_var > 3.96 * (static_cast<double>(d) - 1.0) / d);
}

TEST_CASE("avg_var is an unbiased estimator", "[stats][property]") {
  // 50 replicate datasets from a law with known expected per-sample variance.
  const std::size_t reps = 50, n = 1000, d = 16;
  const double truth = 1.0 * (static_cast<double>(d) - 1.0) / d;
  std::vector<double> vhats;
  for (std::size_t r = 0; r < reps; ++r) {
    Dataset ds;
    ds.values = testutil::iid_normal(n, d, 1000 + r);
    vhats.push_back(compute_stats(ds).avg_var);
  }
  const double mean = testutil::mean_of(vhats);
  const double se =
      std::sqrt(testutil::var_of(vhats) / static_cast<double>(reps));
  CHECK(std::abs(mean - truth) < 3.0 * se);
}

TEST_CASE("variance propagation follows the closed form", "[stats]") {
  const auto s = default_schedule();
  DatasetStats st;
  st.centered = true;

  st.avg_var = 1.0;
  auto p = propagate_variance(st, s);
  for (int t : {0, 100, 500, 1000}) CHECK(p.at(t) == Catch::Approx(1.0));

  st.avg_var = 0.0;
  p = propagate_variance(st, s);
  CHECK(p.at(0) == Catch::Approx(0.0));
  // v = 0 and alpha_bar = 0.5 gives 0.5; check against the actual coefficient.
  for (int t = 1; t <= s.T; ++t)
    CHECK(p.at(t) == Catch::Approx(1.0 - s.alpha_bar_at(t)));

  st.avg_var = 0.5;
  p = propagate_variance(st, s);
  for (int t = 0; t <= s.T; ++t)
    CHECK(p.at(t) ==
          Catch::Approx(1.0 - s.alpha_bar_at(t) * 0.5).epsilon(1e-12));
  CHECK(p.at(0) == Catch::Approx(0.5));
  CHECK(std::abs(p.at(s.T) - 1.0) < 1e-4);
  for (int t = 1; t <= s.T; ++t) CHECK(p.at(t) > p.at(t - 1));  // monotone
}

TEST_CASE("variance propagation rejects uncentered stats", "[stats]") {
  DatasetStats st;
  st.centered = false;
  st.avg_var = 1.0;
  CHECK_THROWS_AS(propagate_variance(st, default_schedule()), DataError);
}

TEST_CASE("pairwise distances are invariant under centroid centering",
          "[stats]") {
  const auto pts = make_dataset({{0.0, 0.0}, {3.0, 4.0}});
  Dataset centered_pts = pts;
  centered_pts.values = center_columns(pts.values);
  CHECK(check_distance_invariance(pts, centered_pts) == 0.0);

  Rng rng(77);
  for (int rep = 0; rep < 20; ++rep) {
    Dataset cloud;
    cloud.values = testutil::iid_normal(100, 3, 500 + rep, 2.5);
    Dataset shifted = cloud;
    shifted.values = center_columns(cloud.values);
    CHECK(check_distance_invariance(cloud, shifted) < 1e-12);
  }

  // Degenerate repeated point: all distances are zero before and after.
  const auto rep_pt = make_dataset({{1.0, 2.0}, {1.0, 2.0}, {1.0, 2.0}});
  Dataset rep_centered = rep_pt;
  rep_centered.values = center_columns(rep_pt.values);
  CHECK(check_distance_invariance(rep_pt, rep_centered) == 0.0);
}

TEST_CASE("distance check rejects shape mismatch", "[stats]") {
  const auto a = make_dataset({{0.0, 0.0}, {1.0, 1.0}});
  const auto b = make_dataset({{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}});
  CHECK_THROWS_AS(check_distance_invariance(a, b), ParamError);
}

TEST_CASE("argmax preservation over non-uniform one-hot batches", "[stats]") {
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 50; ++i) rows.push_back({1, 0, 0});
  for (int i = 0; i < 30; ++i) rows.push_back({0, 1, 0});
  for (int i = 0; i < 20; ++i) rows.push_back({0, 0, 1});
  const auto rep =
      check_argmax_preservation(make_dataset(rows, Modality::onehot_categorical));
  CHECK(rep.fraction == 1.0);
  CHECK_FALSE(rep.degenerate_uniform);
}

TEST_CASE("uniform frequencies are flagged as degenerate", "[stats]") {
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 10; ++i) {
    rows.push_back({1, 0, 0});
    rows.push_back({0, 1, 0});
    rows.push_back({0, 0, 1});
  }
  const auto rep =
      check_argmax_preservation(make_dataset(rows, Modality::onehot_categorical));
  CHECK(rep.degenerate_uniform);
  CHECK(rep.fraction == 1.0);  // ties still keep the active entry maximal
}

TEST_CASE("single-class batches keep their argmax", "[stats]") {
  std::vector<std::vector<double>> rows(8, {0.0, 1.0, 0.0});
  const auto rep =
      check_argmax_preservation(make_dataset(rows, Modality::onehot_categorical));
  CHECK(rep.fraction == 1.0);
}

TEST_CASE("argmax check rejects non-one-hot rows", "[stats]") {
  CHECK_THROWS_AS(
      check_argmax_preservation(make_dataset({{0.5, 0.5}, {1, 0}})),
      DataError);
  CHECK_THROWS_AS(check_argmax_preservation(make_dataset({{1, 1}, {1, 0}})),
                  DataError);
}
