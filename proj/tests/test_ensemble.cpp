#include <doctest.h>

#include <cmath>
#include <cstring>

#include "ope_meso/ensemble.hpp"
#include "ope_meso/errors.hpp"
#include "ope_meso/tridiagonal.hpp"

using namespace ope;

TEST_CASE("recurrence closed forms") {
  auto c = recurrence(make_ensemble(Family::Chebyshev2), 5, 17);
  CHECK(c.a == 1.0);
  CHECK(c.b == 0.0);

  c = recurrence(make_ensemble(Family::Laguerre, {{"gamma", 0.0}}), 4, 2);
  CHECK(c.a == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(c.b == doctest::Approx(4.5).epsilon(1e-15));

  for (long n : {3L, 100L, 1000L}) {
    c = recurrence(make_ensemble(Family::Hermite), n, n);
    CHECK(c.a == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(c.b == 0.0);
  }

  const auto kr = make_ensemble(Family::Krawtchouk, {{"p", 0.3}, {"K", 10}});
  CHECK_THROWS_AS(recurrence(kr, 11, 5), Error);
  CHECK_NOTHROW(recurrence(kr, 10, 5));
}

TEST_CASE("non-varying families ignore n") {
  for (auto spec : {make_ensemble(Family::Chebyshev2),
                    make_ensemble(Family::ModifiedJacobi, {{"gamma1", 0.3}, {"gamma2", -0.4}}),
                    make_ensemble(Family::LogSingular)}) {
    CHECK_FALSE(spec.varying);
    for (long j : {1L, 7L, 40L}) {
      const auto a = recurrence(spec, j, 10), b = recurrence(spec, j, 5000);
      CHECK(a.a == b.a);
      CHECK(a.b == b.b);
    }
  }
}

TEST_CASE("recurrence is bit-exact on repeat") {
  const auto spec = make_ensemble(Family::Hahn, {{"t1", 0.4}, {"t2", 0.9}, {"t3", 3}});
  for (long j = 0; j < 50; ++j) {
    const auto a = recurrence(spec, j, 37), b = recurrence(spec, j, 37);
    CHECK(std::memcmp(&a, &b, sizeof(a)) == 0);
  }
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(make_ensemble(Family::Laguerre, {{"gamma", -1.0}}), Error);
  CHECK_THROWS_AS(make_ensemble(Family::ModifiedJacobi, {{"gamma1", -1.5}, {"gamma2", 0}}), Error);
  CHECK_THROWS_AS(make_ensemble(Family::Freud, {{"gamma", 0}}), Error);
  CHECK_THROWS_AS(make_ensemble(Family::TricomiCarlitz, {{"gamma", 1}}), Error);
  CHECK_THROWS_AS(make_ensemble(Family::Krawtchouk, {{"p", 1.0}, {"K", 5}}), Error);
  CHECK_THROWS_AS(make_ensemble(Family::Krawtchouk, {{"p", 0.5}, {"K", 5}, {"t", 2}}), Error);
  CHECK_THROWS_AS(make_ensemble(Family::Hahn, {{"t1", 1}, {"t2", 1}, {"t3", 0.5}}), Error);
  CHECK_THROWS_AS(make_ensemble(Family::Hermite, {{"gamma", 1}}), Error);
  try {
    make_ensemble(Family::Laguerre, {{"gamma", -2.0}});
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidParams);
  }
}

TEST_CASE("edge locations") {
  CHECK(edge_location(make_ensemble(Family::Chebyshev2), 100, Side::Right) == 2.0);
  CHECK(edge_location(make_ensemble(Family::Laguerre, {{"gamma", 0}}), 10, Side::Left) ==
        doctest::Approx(1.9 - 2 * std::sqrt(0.9)).epsilon(1e-13));
  CHECK(edge_location(make_ensemble(Family::Laguerre, {{"gamma", 0}}), 10, Side::Left) ==
        doctest::Approx(0.0026334).epsilon(1e-4));
  CHECK(edge_location(make_ensemble(Family::Hermite), 100, Side::Right) ==
        doctest::Approx(2 * std::pow(0.99, 0.25)).epsilon(1e-14));
  CHECK(edge_location(make_ensemble(Family::Hermite), 100, Side::Right) == doctest::Approx(1.9949811).epsilon(1e-7));
}

TEST_CASE("edge width equals four geometric-mean off-diagonals") {
  const std::vector<EnsembleSpec> specs = {
      make_ensemble(Family::Hermite), make_ensemble(Family::Laguerre, {{"gamma", 1.5}}),
      make_ensemble(Family::Freud, {{"gamma", 4}}), make_ensemble(Family::TricomiCarlitz, {{"gamma", 2.5}}),
      make_ensemble(Family::Krawtchouk, {{"p", 0.3}, {"t", 2}}),
      make_ensemble(Family::ModifiedJacobi, {{"gamma1", 0.5}, {"gamma2", 0.5}})};
  for (const auto& s : specs)
    for (long n : {5L, 60L, 999L}) {
      const double w = edge_location(s, n, Side::Right) - edge_location(s, n, Side::Left);
      const double r = 4 * std::sqrt(std::abs(recurrence(s, n, n).a * recurrence(s, n - 1, n).a));
      CHECK(w == doctest::Approx(r).epsilon(1e-14));
    }
}

TEST_CASE("hypotheses: laguerre curvature vanishes at the hard edge") {
  const auto lag = make_ensemble(Family::Laguerre, {{"gamma", 0}});
  EdgeSpec e;
  e.side = Side::Left;
  e.x0 = 0.0;
  e.alpha = 0.5;
  e.epsilon = 0.1;
  for (long n : {200L, 1000L, 4000L}) {
    const auto r = check_hypotheses(lag, n, e);
    REQUIRE_FALSE(r.curvature.empty());
    for (double q : r.curvature) CHECK(q == 0.0);
    CHECK(r.item("curvature").value == 0.0);
  }
}

TEST_CASE("hypotheses: chebyshev reports zeros at any alpha, epsilon") {
  const auto ch = make_ensemble(Family::Chebyshev2);
  for (double alpha : {0.3, 0.5, 1.2})
    for (double eps : {0.05, 0.2}) {
      if (eps >= 1 - alpha / 2) continue;
      const auto e = make_edge(ch, 500, Side::Right, alpha, eps);
      const auto r = check_hypotheses(ch, 500, e);
      for (const auto& it : r.items) CHECK(it.value == 0.0);
      CHECK(r.all_pass());
    }
}

TEST_CASE("hypotheses: hermite first differences scale like 1/(2n)") {
  const auto h = make_ensemble(Family::Hermite);
  const auto r = check_hypotheses(h, 1000, make_edge(h, 1000, Side::Right, 0.5));
  double brute = 0;
  for (long j = r.j_low; j <= r.j_high; ++j)
    brute = std::max(brute, std::sqrt(double(j) / 1000) - std::sqrt(double(j - 1) / 1000));
  CHECK(r.item("diff_a").value == doctest::Approx(brute * 1000).epsilon(1e-12));
  CHECK(r.item("diff_a").value == doctest::Approx(0.5).epsilon(0.05));
  CHECK(r.all_pass());
}

TEST_CASE("hypothesis window outside a discrete support") {
  const auto kr = make_ensemble(Family::Krawtchouk, {{"p", 0.5}, {"K", 100}});
  CHECK_THROWS_AS(check_hypotheses(kr, 100, make_edge(kr, 100, Side::Right, 0.5)), Error);
}

TEST_CASE("freud determinacy metadata") {
  CHECK(moment_problem_determinate(make_ensemble(Family::Freud, {{"gamma", 1.0}})));
  CHECK(moment_problem_determinate(make_ensemble(Family::Freud, {{"gamma", 4.0}})));
  CHECK_FALSE(moment_problem_determinate(make_ensemble(Family::Freud, {{"gamma", 0.5}})));
  const auto custom = make_custom([](long, long) { return Coefficients{1.0, 0.0}; });
  CHECK_THROWS_AS(moment_problem_determinate(custom), Error);
}

TEST_CASE("custom family uses the callback") {
  const auto custom = make_custom([](long j, long n) { return Coefficients{1.0 + double(j) / double(n), 0.25}; });
  const auto c = recurrence(custom, 3, 10);
  CHECK(c.a == doctest::Approx(1.3));
  CHECK(c.b == 0.25);
}

TEST_CASE("ensemble JSON") {
  const auto s = ensemble_from_json(nlohmann::json::parse(R"({"family": "laguerre", "params": {"gamma": 2}})"));
  CHECK(s.family == Family::Laguerre);
  CHECK(s.param("gamma") == 2.0);
  CHECK(ensemble_from_json(to_json(s)).params == s.params);
  CHECK(ensemble_from_json(nlohmann::json::parse(R"({"family": "gue"})")).family == Family::Hermite);
  auto kind = [](const char* text) {
    try {
      ensemble_from_json(nlohmann::json::parse(text));
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::InvalidParams;
  };
  CHECK(kind(R"({"family": "laguerre", "params": {"gamma": 2}, "extra": 1})") == ErrorKind::Config);
  CHECK(kind(R"({"family": "laguerre", "params": {"beta": 2}})") == ErrorKind::Config);
  CHECK(kind(R"({"family": "nope"})") == ErrorKind::Config);
  CHECK(kind(R"({"family": "laguerre", "params": {"gamma": -3}})") == ErrorKind::Config);
}

namespace {

// Stieltjes procedure on a discrete measure: returns (a_1.., b_0..)
void stieltjes(const std::vector<double>& x, const std::vector<double>& w, int K, std::vector<double>& a,
               std::vector<double>& b) {
  const size_t M = x.size();
  std::vector<double> p_prev(M, 0.0), p(M, 1.0);
  double norm_prev = 0;
  double norm = 0;
  for (size_t i = 0; i < M; ++i) norm += w[i];
  for (size_t i = 0; i < M; ++i) p[i] /= std::sqrt(norm);
  a.clear();
  b.clear();
  double a_prev = 0;
  for (int k = 0; k < K; ++k) {
    double bk = 0;
    for (size_t i = 0; i < M; ++i) bk += w[i] * x[i] * p[i] * p[i];
    b.push_back(bk);
    std::vector<double> q(M);
    for (size_t i = 0; i < M; ++i) q[i] = (x[i] - bk) * p[i] - a_prev * p_prev[i];
    double nq = 0;
    for (size_t i = 0; i < M; ++i) nq += w[i] * q[i] * q[i];
    const double ak = std::sqrt(nq);
    a.push_back(ak);
    for (size_t i = 0; i < M; ++i) {
      p_prev[i] = p[i];
      p[i] = q[i] / ak;
    }
    a_prev = ak;
    (void)norm_prev;
  }
}

}  // namespace

TEST_CASE("hahn standard form matches the orthogonality weight; the printed form does not") {
  const long n = 10;
  const double t1 = 0.5, t2 = 0.7, t3 = 2.0;
  const double al = t1 * n, be = t2 * n;
  const long N = long(std::lround(t3 * n));
  std::vector<double> x, w;
  for (long k = 0; k <= N; ++k) {
    x.push_back(double(k) / double(n));
    // binom(al + k, k) binom(be + N - k, N - k)
    const double lw = std::lgamma(al + k + 1) - std::lgamma(al + 1) - std::lgamma(double(k) + 1) +
                      std::lgamma(be + double(N - k) + 1) - std::lgamma(be + 1) - std::lgamma(double(N - k) + 1);
    w.push_back(std::exp(lw));
  }
  std::vector<double> a, b;
  stieltjes(x, w, 12, a, b);
  const auto standard = make_ensemble(Family::Hahn, {{"t1", t1}, {"t2", t2}, {"t3", t3}, {"standard", 1}});
  const auto printed = make_ensemble(Family::Hahn, {{"t1", t1}, {"t2", t2}, {"t3", t3}});
  double dev_std = 0, dev_printed = 0;
  for (long j = 0; j < 10; ++j) {
    const auto cs = recurrence(standard, j, n), cp = recurrence(printed, j, n);
    dev_std = std::max(dev_std, std::abs(cs.b - b[size_t(j)]));
    dev_printed = std::max(dev_printed, std::abs(cp.b - b[size_t(j)]));
    if (j > 0) {
      dev_std = std::max(dev_std, std::abs(cs.a - a[size_t(j - 1)]));
      dev_printed = std::max(dev_printed, std::abs(cp.a - a[size_t(j - 1)]));
    }
  }
  CHECK(dev_std < 1e-10);
  CHECK(dev_printed > 1e-2);
}

TEST_CASE("jacobi truncation respects discrete supports") {
  const auto kr = make_ensemble(Family::Krawtchouk, {{"p", 0.5}, {"K", 20}});
  std::vector<double> d, o;
  CHECK_NOTHROW(jacobi_coefficients(kr, 21, 10, d, o));
  CHECK_THROWS_AS(jacobi_coefficients(kr, 22, 10, d, o), Error);
}

TEST_CASE("edge spec validation") {
  EdgeSpec e;
  e.alpha = 2.0;
  CHECK_THROWS_AS(validate(e), Error);
  e.alpha = 0.5;
  e.epsilon = 0.8;
  CHECK_THROWS_AS(validate(e), Error);
  e.epsilon = 0.1;
  CHECK_NOTHROW(validate(e));
  CHECK(default_epsilon(1.9) < 1 - 1.9 / 2);
}
