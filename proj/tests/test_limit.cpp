#include <doctest.h>

#include <random>

#include "golden.hpp"
#include "ope_meso/errors.hpp"
#include "ope_meso/limit.hpp"

using namespace ope;
using cd = std::complex<double>;

namespace {

const double kPi = std::acos(-1.0);

ResolventTestFunction random_rational(std::mt19937_64& rng, int M) {
  std::uniform_real_distribution<double> u(-1, 1), h(0.3, 2.0);
  std::vector<cd> poles, weights;
  for (int r = 0; r < M; ++r) {
    poles.emplace_back(2 * u(rng), h(rng));
    weights.emplace_back(u(rng), u(rng));
  }
  return ResolventTestFunction(poles, weights);
}

}  // namespace

TEST_CASE("variance constants 3/32 and 1/32") {
  const auto im = parse_test_function("im:1/(x-i)"), re = parse_test_function("re:1/(x-i)");
  const auto qi = sigma2_quadrature(as_function(im), Side::Right);
  const auto qr = sigma2_quadrature(as_function(re), Side::Right);
  CHECK(std::abs(qi.value - 3.0 / 32) < 1e-6);
  CHECK(std::abs(qr.value - 1.0 / 32) < 1e-6);
  CHECK(qi.est_error < 1e-6);
  CHECK(qi.method == VarianceMethod::Quadrature);
  CHECK(std::abs(sigma2_residue(im, Side::Right).value - 3.0 / 32) < 1e-12);
  CHECK(std::abs(sigma2_residue(re, Side::Right).value - 1.0 / 32) < 1e-12);
  const auto j = to_json(qi);
  CHECK(j["method"] == "quadrature");
  CHECK(j["side"] == "right");
}

TEST_CASE("residue and quadrature agree on random rational functions") {
  std::mt19937_64 rng(41);
  double worst = 0;
  for (int t = 0; t < 50; ++t) {
    const auto f = random_rational(rng, 1 + t % 3);
    for (Side s : {Side::Left, Side::Right}) {
      const auto r = sigma2_residue(f, s);
      const auto q = sigma2_quadrature(as_function(f), s);
      worst = std::max(worst, std::abs(r.value - q.value));
      CHECK(r.value >= -1e-15);
      CHECK(std::abs(r.value - q.value) <= r.est_error + q.est_error + 1e-9);
    }
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("residue sum is symmetric and left/right swap under reflection") {
  std::mt19937_64 rng(43);
  for (int t = 0; t < 10; ++t) {
    const auto f = random_rational(rng, 3);
    CHECK(sigma2_residue(f, Side::Left).value ==
          doctest::Approx(sigma2_residue(f.reflected(), Side::Right).value).epsilon(1e-12));
  }
}

TEST_CASE("variance is invariant under f(a^2 x)") {
  const auto f = parse_test_function("im:1/(x-(0.5+i)) + re:0.3/(x-2i)");
  for (Side s : {Side::Left, Side::Right}) {
    const double base = sigma2_quadrature(as_function(f), s).value;
    for (double a : {0.5, 2.0, 3.0}) {
      const double v = sigma2_quadrature(as_function(f.dilated(a * a)), s).value;
      CHECK(std::abs(v - base) <= 1e-8);
      CHECK(sigma2_residue(f.dilated(a * a), s).value == doctest::Approx(base).epsilon(1e-9));
    }
  }
}

TEST_CASE("pi squared integral") {
  CHECK(std::abs(pi_squared_check() - kPi * kPi) <= 1e-6);
  const double a = pi_squared_check(1000.0), b = pi_squared_check(500.0);
  CHECK(std::abs(a - b) > 1e-6);
  CHECK(a < kPi * kPi);
  CHECK(b < a);
}

TEST_CASE("weighted Lipschitz norm") {
  CHECK(weighted_lipschitz_norm([](double) { return 0.0; }) == 0.0);
  const auto f = as_function(parse_test_function("im:1/(x-i)"));
  const double v = weighted_lipschitz_norm(f);
  check_golden("lipschitz_norm_im_resolvent_i", v, 1e-9);
  CHECK(std::isfinite(v));
  // nondecreasing under nested refinement
  double prev = 0;
  for (int level = 0; level <= 3; ++level) {
    GridSpec g;
    g.base_points = 200;
    g.level = level;
    const double w = weighted_lipschitz_norm(f, g);
    CHECK(w >= prev);
    prev = w;
  }
  const auto fd = as_function(parse_test_function("im:1/(x-i)").dilated(4.0));
  CHECK(std::abs(weighted_lipschitz_norm(fd) - v) > 0.1);
}

TEST_CASE("Cauchy-Schwarz bound by the Lipschitz norm") {
  std::mt19937_64 rng(47);
  for (int t = 0; t < 10; ++t) {
    const auto f = random_rational(rng, 2);
    const double L = weighted_lipschitz_norm(as_function(f));
    for (Side s : {Side::Left, Side::Right}) CHECK(sigma2_residue(f, s).value <= L * L / 8 * (1 + 1e-9));
  }
  for (const auto& g : {hat_function(0, 1), smooth_bump(-1, 1)}) {
    const double L = weighted_lipschitz_norm(g);
    CHECK(sigma2_for_c1(g, Side::Left, {-1, 0, 0.5, 1}).value <= L * L / 8);
  }
}

TEST_CASE("resolvent fit") {
  SUBCASE("exactly representable") {
    // poles on the grid the fitter uses for support [-1, 1] and M = 5
    std::vector<cd> poles, weights;
    for (int r = 0; r < 5; ++r) {
      poles.emplace_back(-1.5 + 0.75 * r, 0.5);
      weights.emplace_back(r % 2 ? 0.3 : -0.2, 0.0);
    }
    const ResolventTestFunction g(poles, weights);
    const auto fit = fit_resolvent_approximation(as_function(g), 5, 0.5, -1, 1);
    CHECK(fit.achieved_norm <= 1e-8);
  }
  SUBCASE("smooth bump") {
    const auto bump = smooth_bump(-1, 1);
    const double L = weighted_lipschitz_norm(bump);
    double prev = 1e300;
    for (int M : {10, 20, 40}) {
      const auto fit = fit_resolvent_approximation(bump, M, 0.25, -1, 1);
      CHECK(fit.achieved_norm <= prev);
      prev = fit.achieved_norm;
      if (M == 20) check_golden("bump_fit_M20_h0.25_norm", fit.achieved_norm, 1e-6);
      if (M == 40) CHECK(fit.achieved_norm <= 0.1 * L);
    }
  }
  SUBCASE("ill-conditioned") {
    CHECK_THROWS_AS(fit_resolvent_approximation(smooth_bump(-1, 1), 200, 5.0, -1, 1), Error);
    try {
      fit_resolvent_approximation(smooth_bump(-1, 1), 200, 5.0, -1, 1);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::IllConditioned);
    }
  }
  SUBCASE("variance approximation chain") {
    const auto bump = smooth_bump(-1, 1);
    const auto fit = fit_resolvent_approximation(bump, 40, 0.25, -1, 1);
    const auto h = as_function(fit.h);
    const double sum = weighted_lipschitz_norm([&](double x) { return bump(x) + h(x); });
    for (Side s : {Side::Left, Side::Right}) {
      const double vf = sigma2_for_c1(bump, s, {-1, 1}).value;
      const double vh = sigma2_residue(fit.h, s).value;
      CHECK(std::abs(vf - vh) <= variance_difference_bound(fit.achieved_norm, sum));
    }
  }
}

TEST_CASE("C1 variance") {
  const auto hat = hat_function(0, 1);
  const auto v = sigma2_for_c1(hat, Side::Left, {0, 0.5, 1});
  check_golden("hat_0_1_left_sigma2", v.value, 1e-8);
  CHECK(v.value > 0);
  CHECK(v.est_error < 1e-8);
  const auto shifted = sigma2_for_c1(hat_function(1, 2), Side::Left, {1, 1.5, 2});
  CHECK(std::abs(shifted.value - v.value) > 1e-3);
  // the right edge sees f on the negative axis only
  CHECK(sigma2_for_c1(hat, Side::Right, {0, 0.5, 1}).value == doctest::Approx(0.0).epsilon(1e-12));
  // rational f through the C1 path matches the residue form
  const auto f = parse_test_function("im:1/(x-i)");
  CHECK(sigma2_for_c1(as_function(f), Side::Right).value == doctest::Approx(3.0 / 32).epsilon(1e-9));
}

TEST_CASE("quadrature reports non-convergence") {
  QuadratureOptions opt;
  opt.tol = 1e-14;
  opt.max_cells = 50;
  CHECK_THROWS_AS(edge_double_integral(hat_function(0, 1), opt), Error);
}
