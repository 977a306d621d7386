// Copyright 2026 The dramtol Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dramtol/error.hpp"
#include "dramtol/model_fit.hpp"
#include "dramtol/rng.hpp"

using namespace dramtol;

namespace {

FitResult fake_fit(int family, ErrorModel m, double ll) {
  FitResult f;
  f.family = family;
  f.model = std::move(m);
  f.log_likelihood = ll;
  f.parameter_count = 2;
  f.observations = 1000;
  return f;
}

}  // namespace

TEST_CASE("zero-flip trace") {
  const auto t = simulate_trace(UniformModel{0.0, 0.0}, {1, 16, 64}, 10, 1, 2);
  for (int fam = 0; fam < 4; ++fam) {
    const auto r = fit_params(t, fam);
    CHECK(expected_ber(r.model) == 0.0);
    CHECK(r.log_likelihood == 0.0);
  }
  const auto u = std::get<UniformModel>(fit_params(t, 0).model);
  CHECK(u.weak_fraction == 0.0);
  CHECK(u.flip_probability == 0.0);
}

TEST_CASE("rejected and degenerate traces") {
  ErrorTrace empty;
  CHECK_THROWS_AS(fit_params(empty, 0), Error);
  const auto t = simulate_trace(UniformModel{0.1, 0.1}, {1, 4, 16}, 4, 1, 2);
  CHECK_THROWS_AS(fit_params(t, 4), Error);
  const auto all = simulate_trace(UniformModel{1.0, 1.0}, {1, 4, 16}, 4, 1, 2);
  const auto r = fit_params(all, 0);
  CHECK(r.degenerate);
  CHECK(std::get<UniformModel>(r.model).weak_fraction == 1.0);
  CHECK(std::get<UniformModel>(r.model).flip_probability == 1.0);
}

TEST_CASE("EM0 parameter recovery") {
  const auto t = simulate_trace(UniformModel{0.01, 0.3}, {1, 200, 1000}, 100, 11, 12);
  const auto m = std::get<UniformModel>(fit_params(t, 0).model);
  CHECK(m.weak_fraction == doctest::Approx(0.01).epsilon(0.10));
  CHECK(m.flip_probability == doctest::Approx(0.3).epsilon(0.10));
}

TEST_CASE("EM3 flip ratio recovery") {
  const auto t =
      simulate_trace(DataDependentModel{0.05, 0.05, 0.20}, {1, 200, 1000}, 100, 13, 14);
  const auto m = std::get<DataDependentModel>(fit_params(t, 3).model);
  CHECK(m.flip_probability_one / m.flip_probability_zero == doctest::Approx(4.0).epsilon(0.15));
  CHECK(m.weak_fraction == doctest::Approx(0.05).epsilon(0.10));
}

TEST_CASE("per-line recovery") {
  BitlineModel b;
  for (int i = 0; i < 256; ++i) {
    b.weak_fraction.push_back(0.1);
    b.flip_probability.push_back(0.2 + 0.4 * (i % 2));
  }
  const auto t = simulate_trace(b, {1, 1024, 256}, 100, 1, 2);
  const auto fit = std::get<BitlineModel>(fit_params(t, 1).model);
  double err = 0.0;
  for (int i = 0; i < 256; ++i) {
    err = std::max(err, std::abs(fit.flip_probability[i] - b.flip_probability[i]) /
                            b.flip_probability[i]);
  }
  CHECK(err < 0.25);
  CHECK(expected_ber(fit) == doctest::Approx(expected_ber(b)).epsilon(0.05));
}

TEST_CASE("selection rules") {
  SUBCASE("uniform bitline fit is demoted") {
    BitlineModel b{std::vector<double>(8, 0.02), {0.30, 0.31, 0.305, 0.30, 0.31, 0.30, 0.31, 0.3}};
    const std::vector<FitResult> fits = {fake_fit(0, UniformModel{0.02, 0.3}, -5000),
                                         fake_fit(1, b, -4000)};
    SelectionOptions o;
    o.penalize = false;
    const auto s = select_model(fits, o);
    CHECK(s.family == 0);
    CHECK(s.demoted);
    CHECK(s.best_scoring_family == 1);
    CHECK(approximates_uniform(b));
    const auto u = uniform_approximation(b);
    CHECK(expected_ber(u) == doctest::Approx(expected_ber(b)));
  }
  SUBCASE("spread at or above 0.05 is kept") {
    BitlineModel b{std::vector<double>(2, 0.02), {0.30, 0.36}};
    CHECK_FALSE(approximates_uniform(b));
    BitlineModel p{{0.02, 0.03}, {0.3, 0.3}};
    CHECK_FALSE(approximates_uniform(p));
  }
  SUBCASE("identical likelihoods prefer EM0") {
    const std::vector<FitResult> fits = {fake_fit(2, WordlineModel{{0.1}, {0.9}}, -100),
                                         fake_fit(0, UniformModel{0.1, 0.5}, -100)};
    CHECK(select_model(fits).family == 0);
  }
  SUBCASE("within the tie window EM0 still wins") {
    const std::vector<FitResult> fits = {fake_fit(0, UniformModel{0.1, 0.5}, -101.5),
                                         fake_fit(3, DataDependentModel{0.1, 0.2, 0.5}, -100)};
    SelectionOptions o;
    o.penalize = false;
    const auto s = select_model(fits, o);
    CHECK(s.family == 0);
    CHECK(s.tie_preferred_uniform);
  }
  SUBCASE("exact ties without EM0 break by family order") {
    const std::vector<FitResult> fits = {fake_fit(3, DataDependentModel{0.1, 0.2, 0.5}, -100),
                                         fake_fit(2, WordlineModel{{0.1, 0.1}, {0.2, 0.9}}, -100)};
    CHECK(select_model(fits).family == 2);
  }
  SUBCASE("a clear winner stays") {
    const std::vector<FitResult> fits = {fake_fit(0, UniformModel{0.1, 0.5}, -200),
                                         fake_fit(3, DataDependentModel{0.1, 0.2, 0.5}, -100)};
    CHECK(select_model(fits).family == 3);
  }
  SUBCASE("no fits") {
    CHECK_THROWS_AS(select_model(std::vector<FitResult>{}), Error);
  }
}

TEST_CASE("strongly varying wordlines select EM2") {
  WordlineModel w;
  for (int r = 0; r < 256; ++r) {
    w.weak_fraction.push_back(0.05);
    w.flip_probability.push_back(r % 2 ? 0.5 : 0.1);
  }
  const auto t = simulate_trace(w, {1, 256, 1024}, 50, 5, 6);
  const auto fits = fit_all(t);
  const auto s = select_model(fits);
  CHECK(s.family == 2);
  CHECK(select_model(fits).family == s.family);
}

TEST_CASE("generating family has the best likelihood") {
  const DramGeometry g{1, 128, 512};
  BitlineModel b;
  WordlineModel w;
  StreamEngine eng(8);
  for (std::uint32_t i = 0; i < g.bits_per_row; ++i) {
    b.weak_fraction.push_back(0.02 + 0.1 * eng.uniform());
    b.flip_probability.push_back(0.1 + 0.8 * eng.uniform());
  }
  for (std::uint32_t i = 0; i < g.rows_per_bank; ++i) {
    w.weak_fraction.push_back(0.02 + 0.1 * eng.uniform());
    w.flip_probability.push_back(0.1 + 0.8 * eng.uniform());
  }
  const std::vector<ErrorModel> models = {UniformModel{0.05, 0.3}, b, w,
                                          DataDependentModel{0.05, 0.05, 0.4}};
  for (int fam = 0; fam < 4; ++fam) {
    CAPTURE(fam);
    const auto t = simulate_trace(models[fam], g, 40, 100 + fam, 200 + fam);
    const auto fits = fit_all(t);
    const auto s = select_model(fits);
    CHECK(s.family == fam);
  }
}
