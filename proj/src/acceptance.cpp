#include "ope_meso/acceptance.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include "ope_meso/cumulant.hpp"
#include "ope_meso/errors.hpp"
#include "ope_meso/limit.hpp"
#include "ope_meso/sampler.hpp"
#include "ope_meso/tridiagonal.hpp"

namespace ope {

namespace {

const double kPi = std::acos(-1.0);

CriterionResult start(int id, const char* name) {
  CriterionResult r;
  r.id = id;
  r.name = name;
  return r;
}

std::string fmt(double v, int prec = 3) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

Tridiagonal random_tridiagonal(std::mt19937_64& rng, long N, double im_low, double im_high) {
  std::uniform_real_distribution<double> u(-2, 2), pos(0.3, 2.0), im(im_low, im_high), sign(0, 1);
  std::vector<double> b(static_cast<size_t>(N)), a(static_cast<size_t>(N - 1));
  for (auto& v : b) v = u(rng);
  for (auto& v : a) v = pos(rng) * (sign(rng) < 0.2 ? -1 : 1);
  const double imz = im(rng) * (sign(rng) < 0.5 ? -1 : 1);
  return Tridiagonal(b, a, {u(rng), imz});
}

const std::vector<long> kSweepN = {500, 1000, 2000, 4000};

std::vector<CumulantReport> chebyshev_sweep(const AcceptanceOptions& opt) {
  namespace fs = std::filesystem;
  const fs::path cache = opt.cache_dir.empty() ? fs::path() : fs::path(opt.cache_dir) / "acceptance_chebyshev_sweep.csv";
  if (!cache.empty() && fs::exists(cache)) {
    std::ifstream is(cache);
    std::stringstream ss;
    ss << is.rdbuf();
    try {
      auto reps = reports_from_csv(ss.str());
      bool ok = reps.size() == kSweepN.size();
      for (size_t i = 0; ok && i < reps.size(); ++i)
        ok = reps[i].n == kSweepN[i] && reps[i].alpha == 0.5 && reps[i].scaled_cumulants.size() == 4;
      if (ok) return reps;
    } catch (const Error&) {
    }
  }
  SweepOptions so;
  so.side = Side::Right;
  so.alpha = 0.5;
  so.x0 = 2.0;
  auto reps = convergence_sweep(make_ensemble(Family::Chebyshev2), parse_test_function("im:1/(x-i)"), kSweepN, 4, so);
  if (!cache.empty()) {
    std::ofstream os(cache);
    os << to_csv(reps);
  }
  return reps;
}

CriterionResult free_resolvent(const AcceptanceOptions&) {
  CriterionResult r = start(1, "free_resolvent_exactness");
  const long N = 2000;
  double worst = 0;
  for (double na : {25.0, 100.0}) {
    Tridiagonal J(std::vector<double>(N, 0.0), std::vector<double>(N - 1, 1.0), {2.0, 1.0 / na});
    ResolventRecursion<double> R(J);
    // the half-infinite closed form ignores the bottom boundary; compare on the upper half block
    for (long k = 1; k <= N / 2; ++k)
      for (long j = 1; j <= k; ++j)
        worst = std::max(worst, std::abs(R.entry(j, k) - free_resolvent_entry<double>({0, 1}, na, Side::Right, j, k)));
  }
  r.pass = worst <= 1e-10;
  r.detail = "max |dev| = " + fmt(worst) + " over j,k <= N/2, N = 2000, n^alpha in {25, 100}";
  return r;
}

CriterionResult variance_constants(const AcceptanceOptions&) {
  CriterionResult r = start(2, "variance_constants");
  const auto im = parse_test_function("im:1/(x-i)"), re = parse_test_function("re:1/(x-i)");
  const double qi = sigma2_quadrature(as_function(im), Side::Right).value;
  const double qr = sigma2_quadrature(as_function(re), Side::Right).value;
  const double ri = sigma2_residue(im, Side::Right).value, rr = sigma2_residue(re, Side::Right).value;
  const double dq = std::max(std::abs(qi - 3.0 / 32), std::abs(qr - 1.0 / 32));
  const double dr = std::max(std::abs(ri - 3.0 / 32), std::abs(rr - 1.0 / 32));
  r.pass = dq <= 1e-6 && dr <= 1e-12;
  r.detail = "quadrature dev " + fmt(dq) + ", residue dev " + fmt(dr) + " (targets 3/32, 1/32)";
  return r;
}

CriterionResult pi_squared(const AcceptanceOptions&) {
  CriterionResult r = start(3, "pi_squared_integral");
  const double v = pi_squared_check();
  r.pass = std::abs(v - kPi * kPi) <= 1e-6;
  r.detail = "value " + fmt(v, 12) + ", dev " + fmt(v - kPi * kPi);
  return r;
}

CriterionResult clt_convergence(const AcceptanceOptions& opt) {
  CriterionResult r = start(4, "clt_variance_convergence");
  const auto reps = chebyshev_sweep(opt);
  std::vector<double> err;
  for (const auto& rep : reps) err.push_back(std::abs(rep.scaled_cumulants.at(2) / (3.0 / 32) - 1));
  bool mono = true;
  for (size_t i = 1; i < err.size(); ++i) mono = mono && err[i] < err[i - 1];
  r.pass = mono && err.back() <= 0.15;
  r.detail = "rel err";
  for (size_t i = 0; i < err.size(); ++i) r.detail += " n=" + std::to_string(reps[i].n) + ":" + fmt(err[i]);
  return r;
}

CriterionResult higher_cumulants(const AcceptanceOptions& opt) {
  CriterionResult r = start(5, "higher_cumulant_decay");
  const auto reps = chebyshev_sweep(opt);
  const auto& a = reps.front().scaled_cumulants;
  const auto& b = reps.back().scaled_cumulants;
  const double f3 = std::abs(a.at(3)) / std::abs(b.at(3)), f4 = std::abs(a.at(4)) / std::abs(b.at(4));
  r.pass = f3 >= 2 && f4 >= 2;
  r.detail = "chebyshev |C3| " + fmt(std::abs(a.at(3))) + " -> " + fmt(std::abs(b.at(3))) + ", |C4| " +
             fmt(std::abs(a.at(4))) + " -> " + fmt(std::abs(b.at(4))) +
             " (roundoff level: both vanish exactly for constant coefficients)";
  // informational: the same decay on a fixture with genuinely nonzero higher cumulants
  SweepOptions so;
  so.side = Side::Right;
  so.alpha = 0.5;
  const auto f = parse_test_function("im:1/(x-i)");
  const auto gue = make_ensemble(Family::Hermite);
  const auto g0 = cumulant_report(gue, kSweepN.front(), f, 4, so).scaled_cumulants;
  const auto g1 = cumulant_report(gue, kSweepN.back(), f, 4, so).scaled_cumulants;
  r.detail += "; gue |C3| " + fmt(std::abs(g0.at(3))) + " -> " + fmt(std::abs(g1.at(3))) + ", |C4| " +
              fmt(std::abs(g0.at(4))) + " -> " + fmt(std::abs(g1.at(4)));
  return r;
}

CriterionResult c2_triangle(const AcceptanceOptions& opt) {
  CriterionResult r = start(6, "c2_identity_triangle");
  std::mt19937_64 rng(opt.seed);
  std::uniform_int_distribution<long> nd(40, 300);
  std::uniform_real_distribution<double> u(0, 1);
  const std::vector<EnsembleSpec> pool = {make_ensemble(Family::Chebyshev2), make_ensemble(Family::Hermite),
                                          make_ensemble(Family::Laguerre, {{"gamma", 0.5}}),
                                          make_ensemble(Family::ModifiedJacobi, {{"gamma1", 0.5}, {"gamma2", -0.3}})};
  double worst = 0, min_c2 = std::numeric_limits<double>::infinity();
  for (int t = 0; t < 20; ++t) {
    const auto& spec = pool[size_t(t) % pool.size()];
    const long n = nd(rng);
    const Side side = u(rng) < 0.5 ? Side::Left : Side::Right;
    const double alpha = 0.2 + 0.4 * u(rng);
    std::vector<std::complex<double>> poles, weights;
    const int M = 1 + int(3 * u(rng));
    for (int k = 0; k < M; ++k) {
      poles.emplace_back(4 * u(rng) - 2, 0.3 + 2 * u(rng));
      weights.emplace_back(2 * u(rng) - 1, u(rng) < 0.5 ? 0.0 : 2 * u(rng) - 1);
    }
    const ResolventTestFunction f(poles, weights);
    const EdgeSpec edge = make_edge(spec, n, side, alpha);
    const FMatrix F = build_F(spec, n, edge, f, default_window(n, alpha, edge.epsilon, 2));
    const C2Triangle tri = c2_three_ways(F.F, n);
    worst = std::max(worst, tri.max_rel_spread());
    min_c2 = std::min(min_c2, tri.composition);
  }
  r.pass = worst <= 1e-9;
  r.detail = "max pairwise rel spread " + fmt(worst) + " on 20 fixtures, min C2 " + fmt(min_c2);
  return r;
}

CriterionResult dominated_bound(const AcceptanceOptions&) {
  CriterionResult r = start(7, "dominated_cumulant_bound");
  const auto f = parse_test_function("im:1/(x-i)");
  bool ok = true;
  r.detail = "slack (rhs/lhs):";
  for (Family fam : {Family::Chebyshev2, Family::Hermite}) {
    const auto spec = make_ensemble(fam);
    const long n = 200;
    const EdgeSpec edge = make_edge(spec, n, Side::Right, 0.5);
    const FMatrix F = build_F(spec, n, edge, f, default_window(n, 0.5, edge.epsilon, 4));
    for (int m : {3, 4}) {
      const BoundReport b = cumulant_bound_check(F.F, n, m);
      ok = ok && b.holds;
      r.detail += std::string(" ") + to_string(fam) + " m=" + std::to_string(m) + ":" + fmt(b.slack());
    }
  }
  r.pass = ok;
  return r;
}

CriterionResult oracle_equivalence(const AcceptanceOptions& opt) {
  CriterionResult r = start(8, "oracle_equivalence");
  std::mt19937_64 rng(opt.seed + 8);
  std::uniform_int_distribution<long> nd(1, 64);
  double worst = 0;
  for (int t = 0; t < 200; ++t) {
    const Tridiagonal J = random_tridiagonal(rng, nd(rng), 0.1, 2.0);
    const auto G = resolvent_matrix(J);
    const auto O = invert_dense_oracle(J);
    worst = std::max(worst, (G - O).cwiseAbs().maxCoeff() / O.cwiseAbs().maxCoeff());
  }
  const long N = 300;
  std::vector<double> b(static_cast<size_t>(N)), a(static_cast<size_t>(N - 1));
  for (long j = 0; j < N; ++j) b[size_t(j)] = 2.5 + 0.1 * std::cos(double(j) / 40);
  for (long j = 0; j < N - 1; ++j) a[size_t(j)] = 1 + 0.1 * std::sin(double(j) / 50);
  const Tridiagonal J(b, a, {0.3, 0.1});
  const auto D = almost_toeplitz_decompose(J);
  const auto O = invert_dense_oracle(J);
  const double th = ((D.T + D.H) - O).cwiseAbs().maxCoeff() / O.cwiseAbs().maxCoeff();
  r.pass = worst <= 1e-10 && th <= 1e-10 && D.identity_residual <= 1e-10;
  r.detail = "recursion vs oracle " + fmt(worst) + " (200 random, N <= 64); T+H vs oracle " + fmt(th) +
             ", entry identity residual " + fmt(D.identity_residual) + " (N = 300)";
  return r;
}

CriterionResult decay_rates(const AcceptanceOptions&) {
  CriterionResult r = start(9, "edge_vs_bulk_decay");
  const long N = 8001;
  const double expected = std::sqrt(std::complex<double>(0, -1)).real();
  bool ok = true;
  r.detail = "rate*n^{alpha/2}/Re sqrt(-i), edge/bulk:";
  for (double na : {1e2, 1e3, 1e4}) {
    const std::vector<double> b(N, 0.0), a(N - 1, 1.0);
    const DecayFit edge = decay_profile(Tridiagonal(b, a, {2.0, 1.0 / na}), (N + 1) / 2);
    const DecayFit bulk = decay_profile(Tridiagonal(b, a, {0.0, 1.0 / na}), (N + 1) / 2);
    const double scaled = edge.rate * std::sqrt(na) / expected;
    const double ratio = edge.rate / bulk.rate;
    ok = ok && std::abs(scaled - 1) <= 0.2 && ratio >= 5;
    r.detail += " n^a=" + fmt(na) + ":" + fmt(scaled) + "," + fmt(ratio);
  }
  r.pass = ok;
  return r;
}

CriterionResult norm_bound(const AcceptanceOptions& opt) {
  CriterionResult r = start(10, "resolvent_norm_bound");
  std::mt19937_64 rng(opt.seed + 10);
  std::uniform_int_distribution<long> nd(1, 64);
  double worst = 0;
  for (int t = 0; t < 200; ++t) {
    const Tridiagonal J = random_tridiagonal(rng, nd(rng), 0.01, 2.0);
    const double est = operator_norm_estimate<double>(resolvent_matrix(J));
    worst = std::max(worst, est * std::abs(J.shift.imag()));
  }
  r.pass = worst <= 1 + 1e-6;
  r.detail = "max ||(J-z)^{-1}|| |Im z| = " + fmt(worst, 10) + " on 200 random fixtures";
  return r;
}

CriterionResult monte_carlo(const AcceptanceOptions& opt) {
  CriterionResult r = start(11, "monte_carlo_gue");
  const auto gue = make_ensemble(Family::Hermite);
  const long n = 200;
  const auto f = parse_test_function("im:1/(x-i)");
  SweepOptions so;
  so.side = Side::Right;
  so.alpha = 0.4;
  const double exact = cumulant_report(gue, n, f, 2, so).scaled_cumulants.at(2);
  const auto batch = sample_spectra(gue, n, 10000, opt.seed);
  const auto st = empirical_statistic(batch, as_function(f), make_edge(gue, n, Side::Right, 0.4));
  const double z = (st.variance - exact) / st.std_error;
  r.pass = std::abs(z) <= 3 && std::abs(st.skewness) <= 0.15;
  r.detail = "empirical var " + fmt(st.variance, 6) + " +- " + fmt(st.std_error) + ", exact " + fmt(exact, 6) +
             " (z = " + fmt(z) + "), skewness " + fmt(st.skewness);
  return r;
}

CriterionResult hypotheses(const AcceptanceOptions&) {
  CriterionResult r = start(12, "hypothesis_checker");
  const long n = 1000;
  const auto lag = make_ensemble(Family::Laguerre, {{"gamma", 0.0}});
  EdgeSpec e;
  e.side = Side::Left;
  e.x0 = 0.0;
  e.alpha = 0.5;
  e.epsilon = default_epsilon(0.5);
  const auto rl = check_hypotheses(lag, n, e);
  double lag_max = 0;
  for (double v : rl.curvature) lag_max = std::max(lag_max, std::abs(v));
  const auto cheb = make_ensemble(Family::Chebyshev2);
  const auto rc = check_hypotheses(cheb, n, make_edge(cheb, n, Side::Right, 0.5));
  double cheb_max = 0;
  for (const auto& it : rc.items) cheb_max = std::max(cheb_max, std::abs(it.value));
  for (double v : rc.curvature) cheb_max = std::max(cheb_max, std::abs(v));
  r.pass = lag_max == 0.0 && !rl.curvature.empty() && cheb_max == 0.0;
  r.detail = "laguerre curvature max " + fmt(lag_max) + " over " + std::to_string(rl.curvature.size()) +
             " indices; chebyshev max " + fmt(cheb_max);
  return r;
}

}  // namespace

CriterionResult run_criterion(int id, const AcceptanceOptions& opt) {
  using Fn = CriterionResult (*)(const AcceptanceOptions&);
  static const Fn table[kCriterionCount] = {free_resolvent, variance_constants, pi_squared,     clt_convergence,
                                            higher_cumulants, c2_triangle,      dominated_bound, oracle_equivalence,
                                            decay_rates,      norm_bound,       monte_carlo,     hypotheses};
  if (id < 1 || id > kCriterionCount) throw Error(ErrorKind::InvalidParams, "no criterion " + std::to_string(id));
  const auto t0 = std::chrono::steady_clock::now();
  CriterionResult r;
  try {
    r = table[id - 1](opt);
  } catch (const std::exception& e) {
    r.id = id;
    r.pass = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::string format_line(const CriterionResult& r) {
  std::ostringstream os;
  os << (r.pass ? "PASS" : "FAIL") << " [" << r.id << "] " << r.name << ": " << r.detail << " (" << std::fixed
     << std::setprecision(1) << r.seconds << " s)";
  return os.str();
}

int run_acceptance(const std::vector<int>& ids, const AcceptanceOptions& opt, std::ostream& out) {
  std::vector<int> list = ids;
  if (list.empty())
    for (int i = 1; i <= kCriterionCount; ++i) list.push_back(i);
  int failures = 0;
  for (int id : list) {
    const auto r = run_criterion(id, opt);
    out << format_line(r) << std::endl;
    if (!r.pass) ++failures;
  }
  return failures;
}

}  // namespace ope
