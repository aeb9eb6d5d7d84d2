#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "ope_meso/cumulant.hpp"
#include "ope_meso/errors.hpp"
#include "ope_meso/sampler.hpp"

using namespace ope;

TEST_CASE("determinism and thread independence") {
  const auto gue = make_ensemble(Family::Hermite);
  const auto a = sample_spectra(gue, 50, 40, 99, 1);
  const auto b = sample_spectra(gue, 50, 40, 99, 1);
  const auto c = sample_spectra(gue, 50, 40, 99, 3);
  CHECK(a.eigenvalues == b.eigenvalues);
  CHECK(a.eigenvalues == c.eigenvalues);
  const auto d = sample_spectra(gue, 50, 40, 100, 1);
  CHECK(a.eigenvalues != d.eigenvalues);
  for (long i = 0; i < a.count; ++i)
    for (long k = 1; k < a.n; ++k) CHECK(a.spectrum(i)[k - 1] <= a.spectrum(i)[k]);
}

TEST_CASE("semicircle fraction and soft edge") {
  const auto gue = make_ensemble(Family::Hermite);
  const auto b = sample_spectra(gue, 200, 1000, 5);
  long in = 0;
  double top = 0;
  for (long i = 0; i < b.count; ++i) {
    for (long k = 0; k < b.n; ++k) in += std::abs(b.spectrum(i)[k]) <= 1;
    top += b.spectrum(i)[b.n - 1];
  }
  const double frac = double(in) / double(b.count * b.n);
  CHECK(frac == doctest::Approx(1.0 / 3 + std::sqrt(3.0) / (2 * std::acos(-1.0))).epsilon(0.02 / 0.609));
  top /= double(b.count);
  CHECK(top >= 1.9);
  CHECK(top <= 2.05);
}

TEST_CASE("laguerre model lives on [0, 4]") {
  const auto lue = make_ensemble(Family::Laguerre, {{"gamma", 1}});
  const auto b = sample_spectra(lue, 100, 200, 8);
  double lo = 1e9, hi = -1e9, mean = 0;
  for (double v : b.eigenvalues) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    mean += v;
  }
  mean /= double(b.eigenvalues.size());
  CHECK(lo >= 0);
  CHECK(hi < 4.5);
  CHECK(hi > 3.5);
  // mean of Marchenko-Pastur with ratio one is 1, plus gamma/n
  CHECK(mean == doctest::Approx(1.01).epsilon(0.02));
}

TEST_CASE("unsupported families and limits") {
  CHECK_THROWS_AS(sample_spectra(make_ensemble(Family::Chebyshev2), 10, 10, 1), Error);
  try {
    sample_spectra(make_ensemble(Family::Krawtchouk, {{"p", 0.5}, {"K", 30}}), 10, 10, 1);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Unsupported);
  }
  CHECK_THROWS_AS(sample_spectra(make_ensemble(Family::Hermite), 2001, 1, 1), Error);
}

TEST_CASE("constant statistic") {
  const auto b = sample_spectra(make_ensemble(Family::Hermite), 30, 50, 3);
  EdgeSpec e = make_edge(make_ensemble(Family::Hermite), 30, Side::Right, 0.4);
  const auto s = empirical_statistic(b, [](double) { return 2.5; }, e);
  CHECK(s.variance == doctest::Approx(0.0).epsilon(1e-20));
  CHECK(s.mean == doctest::Approx(75.0));
}

TEST_CASE("binary round trip and resumed aggregation") {
  const auto lue = make_ensemble(Family::Laguerre, {{"gamma", 2}});
  const auto a = sample_spectra(lue, 20, 15, 1), b = sample_spectra(lue, 20, 10, 2);
  const auto dir = std::filesystem::temp_directory_path();
  const std::string pa = (dir / "ope_meso_a.bin").string(), pb = (dir / "ope_meso_b.bin").string();
  write_batch(a, pa);
  write_batch(b, pb);
  const auto ra = read_batch(pa);
  CHECK(ra.eigenvalues == a.eigenvalues);
  CHECK(ra.seed == 1);
  CHECK(ra.ensemble.param("gamma") == 2.0);
  const auto all = concat({read_batch(pa), read_batch(pb)});
  CHECK(all.count == 25);
  EdgeSpec e = make_edge(lue, 20, Side::Left, 0.5);
  const auto f = as_function(parse_test_function("im:1/(x-i)"));
  const auto s1 = empirical_statistic(all, f, e);
  const auto s2 = empirical_statistic(concat({a, b}), f, e);
  CHECK(s1.variance == s2.variance);
  std::remove(pa.c_str());
  std::remove(pb.c_str());
  CHECK_THROWS_AS(read_batch(pa), Error);
  CHECK_THROWS_AS(concat({a, sample_spectra(lue, 21, 2, 1)}), Error);
}

TEST_CASE("exact and empirical variance agree, also off the edge") {
  const auto gue = make_ensemble(Family::Hermite);
  const long n = 100;
  const auto f = parse_test_function("im:1/(x-i)");
  SweepOptions so;
  so.side = Side::Right;
  so.alpha = 0.4;
  const double exact = cumulant_report(gue, n, f, 2, so).scaled_cumulants.at(2);
  const auto b = sample_spectra(gue, n, 4000, 77);
  EdgeSpec e = make_edge(gue, n, Side::Right, 0.4);
  const auto s = empirical_statistic(b, as_function(f), e);
  CHECK(std::abs(s.variance - exact) <= 3 * s.std_error);
  so.x0_shift = std::pow(double(n), -0.9);
  const double exact_shifted = cumulant_report(gue, n, f, 2, so).scaled_cumulants.at(2);
  EdgeSpec sh = e;
  sh.x0 += so.x0_shift;
  const auto t = empirical_statistic(b, as_function(f), sh);
  CHECK(std::abs(t.variance - exact_shifted) <= 3 * t.std_error);
}
