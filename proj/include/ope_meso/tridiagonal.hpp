#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ope_meso/ensemble.hpp"
#include "ope_meso/errors.hpp"

namespace ope {

// J_N - z Id with J_N symmetric tri-diagonal; diag b_0..b_{N-1}, offdiag a_1..a_{N-1}
template <class Real>
struct TridiagonalMatrix {
  using Complex = std::complex<Real>;
  std::vector<Real> diag;
  std::vector<Real> offdiag;
  Complex shift{0, 0};

  TridiagonalMatrix() = default;
  TridiagonalMatrix(std::vector<Real> b, std::vector<Real> a, Complex z)
      : diag(std::move(b)), offdiag(std::move(a)), shift(z) {
    check();
  }

  Eigen::Index size() const { return Eigen::Index(diag.size()); }

  void check() const {
    if (diag.empty()) throw Error(ErrorKind::InvalidParams, "empty tri-diagonal matrix");
    if (offdiag.size() + 1 != diag.size())
      throw Error(ErrorKind::InvalidParams, "offdiag must have N-1 entries");
  }

  // 1-based a_j with a_0 := a_1 and a_N := a_{N-1}
  Real a(Eigen::Index j) const {
    const Eigen::Index N = size();
    if (N == 1) return Real(1);
    if (j <= 0) return offdiag.front();
    if (j >= N) return offdiag.back();
    return offdiag[size_t(j - 1)];
  }

  // b_{j-1} - z for 1-based j
  Complex s(Eigen::Index j) const { return Complex(diag[size_t(j - 1)]) - shift; }

  Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic> dense() const {
    const Eigen::Index N = size();
    Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic> M =
        Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic>::Zero(N, N);
    for (Eigen::Index i = 0; i < N; ++i) {
      M(i, i) = Complex(diag[size_t(i)]) - shift;
      if (i + 1 < N) M(i, i + 1) = M(i + 1, i) = Complex(offdiag[size_t(i)]);
    }
    return M;
  }

  TridiagonalMatrix negated() const {
    TridiagonalMatrix r = *this;
    for (auto& v : r.diag) v = -v;
    for (auto& v : r.offdiag) v = -v;
    r.shift = -shift;
    return r;
  }
};

using Tridiagonal = TridiagonalMatrix<double>;

template <class Real>
using CMatrix = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;

namespace detail {

template <class Real>
struct AccumulatorType {
  using type = long double;
};

}  // namespace detail

// Backward d_j and forward delta_j continued fractions with log-space products.
template <class Real>
class ResolventRecursion {
 public:
  using Complex = std::complex<Real>;
  using Acc = typename detail::AccumulatorType<Real>::type;
  using AccComplex = std::complex<Acc>;

  explicit ResolventRecursion(const TridiagonalMatrix<Real>& J) : N_(J.size()) {
    J.check();
    if (J.shift.imag() == Real(0)) confirm_nonsingular(J);
    const Eigen::Index N = N_;
    std::vector<Complex> d(size_t(N + 2)), del(size_t(N + 2));
    Real scale = 0;
    for (Eigen::Index j = 1; j <= N; ++j) scale = std::max(scale, std::abs(J.s(j)));
    for (auto v : J.offdiag) scale = std::max(scale, std::abs(v));
    const Real tiny = scale * std::numeric_limits<Real>::epsilon() * Real(N);

    d[size_t(N)] = J.s(N);
    for (Eigen::Index j = N - 1; j >= 1; --j) {
      guard(d[size_t(j + 1)], tiny);
      const Real aj = J.offdiag[size_t(j - 1)];
      d[size_t(j)] = J.s(j) - aj * aj / d[size_t(j + 1)];
    }
    guard(d[1], tiny);
    del[1] = J.s(1);
    for (Eigen::Index j = 2; j <= N; ++j) {
      guard(del[size_t(j - 1)], tiny);
      const Real am = J.offdiag[size_t(j - 2)];
      del[size_t(j)] = J.s(j) - am * am / del[size_t(j - 1)];
    }
    guard(del[size_t(N)], tiny);

    // la_[m] = sum_{i<=m} log a_i, ld_[m] = sum_{i>=m} log d_i, ldel_[m] = sum_{i>=m} log delta_i
    la_.assign(size_t(N + 1), AccComplex(0));
    for (Eigen::Index i = 1; i < N; ++i)
      la_[size_t(i)] = la_[size_t(i - 1)] + std::log(AccComplex(Acc(J.offdiag[size_t(i - 1)])));
    ld_.assign(size_t(N + 2), AccComplex(0));
    ldel_.assign(size_t(N + 2), AccComplex(0));
    for (Eigen::Index i = N; i >= 1; --i) {
      ld_[size_t(i)] = ld_[size_t(i + 1)] + std::log(AccComplex(d[size_t(i)]));
      ldel_[size_t(i)] = ldel_[size_t(i + 1)] + std::log(AccComplex(del[size_t(i)]));
    }
  }

  Eigen::Index size() const { return N_; }

  // 1-based (J^{-1})_{jk}
  Complex entry(Eigen::Index j, Eigen::Index k) const {
    if (j < 1 || k < 1 || j > N_ || k > N_) throw Error(ErrorKind::OutOfDomain, "entry index out of range");
    if (j > k) std::swap(j, k);
    const AccComplex e = la_[size_t(k - 1)] - la_[size_t(j - 1)] + ld_[size_t(k + 1)] - ldel_[size_t(j)];
    const std::complex<Real> v = std::exp(std::complex<Real>(Real(e.real()), Real(e.imag())));
    return ((k - j) % 2) ? -v : v;
  }

 private:
  static void guard(const Complex& v, Real tiny) {
    if (!(std::abs(v) > tiny)) throw Error(ErrorKind::Singular, "recursion denominator vanished");
  }

  static void confirm_nonsingular(const TridiagonalMatrix<Real>& J) {
    Eigen::PartialPivLU<CMatrix<Real>> lu(J.dense());
    if (!(lu.rcond() > std::numeric_limits<Real>::epsilon()))
      throw Error(ErrorKind::Singular, "real shift and dense condition estimate exceeds 1/eps");
  }

  Eigen::Index N_;
  std::vector<AccComplex> la_, ld_, ldel_;
};

template <class Real>
std::complex<Real> invert_entry(const TridiagonalMatrix<Real>& J, Eigen::Index j, Eigen::Index k) {
  return ResolventRecursion<Real>(J).entry(j, k);
}

// all entries via the recursions
template <class Real>
CMatrix<Real> resolvent_matrix(const TridiagonalMatrix<Real>& J) {
  ResolventRecursion<Real> R(J);
  const Eigen::Index N = J.size();
  CMatrix<Real> G(N, N);
  for (Eigen::Index k = 0; k < N; ++k)
    for (Eigen::Index j = 0; j <= k; ++j) G(j, k) = G(k, j) = R.entry(j + 1, k + 1);
  return G;
}

template <class Real>
CMatrix<Real> invert_dense_oracle(const TridiagonalMatrix<Real>& J) {
  J.check();
  if (J.size() > 5000) throw Error(ErrorKind::InvalidParams, "dense oracle limited to N <= 5000");
  Eigen::PartialPivLU<CMatrix<Real>> lu(J.dense());
  if (!(lu.rcond() > std::numeric_limits<Real>::epsilon()))
    throw Error(ErrorKind::Singular, "condition estimate exceeds 1/eps");
  return lu.inverse();
}

template <class Real>
struct TransferSpectrum {
  using Complex = std::complex<Real>;
  // index 0 holds j = 1
  std::vector<Complex> omega_plus, omega_minus, lambda_plus, lambda_minus;
  std::vector<Real> M_norms;  // j = 1..N-1
  std::vector<Real> E_norms;  // j = 2..N

  Complex wp(Eigen::Index j) const { return omega_plus[size_t(j - 1)]; }
  Complex wm(Eigen::Index j) const { return omega_minus[size_t(j - 1)]; }
  Complex lp(Eigen::Index j) const { return lambda_plus[size_t(j - 1)]; }
  Complex lm(Eigen::Index j) const { return lambda_minus[size_t(j - 1)]; }
};

template <class Real>
using Mat2 = Eigen::Matrix<std::complex<Real>, 2, 2>;

template <class Real>
Real max_row_sum(const Mat2<Real>& m) {
  return std::max(std::abs(m(0, 0)) + std::abs(m(0, 1)), std::abs(m(1, 0)) + std::abs(m(1, 1)));
}

template <class Real>
Mat2<Real> eigvec_matrix(std::complex<Real> p, std::complex<Real> m) {
  Mat2<Real> V;
  V << std::complex<Real>(1), std::complex<Real>(1), p, m;
  return V;
}

template <class Real>
TransferSpectrum<Real> transfer_spectrum(const TridiagonalMatrix<Real>& J) {
  using Complex = std::complex<Real>;
  J.check();
  for (auto v : J.offdiag)
    if (v == Real(0)) throw Error(ErrorKind::InvalidParams, "transfer matrices need a_j != 0");
  const Eigen::Index N = J.size();
  TransferSpectrum<Real> t;
  for (Eigen::Index j = 1; j <= N; ++j) {
    const Complex s = J.s(j);
    const Real aj = J.a(j), am = J.a(j - 1);
    Complex r = std::sqrt(s * s - Real(4) * aj * am);
    Complex wp = (s + r) / (Real(2) * am), wm = (s - r) / (Real(2) * am);
    if (std::abs(wp) < std::abs(wm)) {
      std::swap(wp, wm);
      r = -r;
    }
    t.omega_plus.push_back(wp);
    t.omega_minus.push_back(wm);
    t.lambda_plus.push_back((s + r) / (Real(2) * aj));
    t.lambda_minus.push_back((s - r) / (Real(2) * aj));
  }
  for (Eigen::Index j = 1; j < N; ++j) {
    Mat2<Real> Vj = eigvec_matrix<Real>(t.wp(j), t.wm(j)), Vn = eigvec_matrix<Real>(t.wp(j + 1), t.wm(j + 1));
    Mat2<Real> M = Vj.inverse() * Vn - Mat2<Real>::Identity();
    t.M_norms.push_back(max_row_sum<Real>(M));
  }
  for (Eigen::Index j = 2; j <= N; ++j) {
    Mat2<Real> Wj = eigvec_matrix<Real>(t.lp(j), t.lm(j)), Wp = eigvec_matrix<Real>(t.lp(j - 1), t.lm(j - 1));
    Mat2<Real> E = Wj.inverse() * Wp - Mat2<Real>::Identity();
    t.E_norms.push_back(max_row_sum<Real>(E));
  }
  return t;
}

// Closed form of the half-infinite free resolvent at x0 = -2 (Left) or +2 (Right), 1-based j,k.
template <class Real>
std::complex<Real> free_resolvent_entry(std::complex<Real> eta, Real n_alpha, Side side, Eigen::Index j,
                                        Eigen::Index k) {
  using Complex = std::complex<Real>;
  if (eta.imag() == Real(0)) throw Error(ErrorKind::InvalidParams, "free resolvent needs Im eta != 0");
  if (!(n_alpha > 0)) throw Error(ErrorKind::InvalidParams, "n_alpha must be positive");
  if (side == Side::Right) {
    const Complex v = free_resolvent_entry<Real>(-eta, n_alpha, Side::Left, j, k);
    return ((j + k) % 2) ? v : -v;
  }
  const Complex s = Real(2) - eta / n_alpha;
  const Complex r = std::sqrt(s * s - Real(4));
  Complex wp = (s + r) / Real(2), wm = (s - r) / Real(2);
  if (std::abs(wp) < std::abs(wm)) std::swap(wp, wm);
  const Real d = Real(std::abs(j - k));
  return (std::pow(-wp, -d) - std::pow(-wm, Real(j + k))) / (wp - wm);
}

template <class Real>
struct AlmostToeplitzDecomposition {
  CMatrix<Real> T;
  CMatrix<Real> H;
  std::vector<Real> C_abs;  // |C(k)|, k = 1..N
  std::vector<Real> D_abs;  // |D(j)|, j = 1..N
  Real D_tilde_abs = 0;
  Real epsilon1 = 0, epsilon2 = 0;
  Real c0 = 0, c1 = 0, c2 = 0;
  Real constant = 0;  // bound constant, infinite when its denominator is not positive
  // residual of the exact entry identity (with the reflection terms kept) against J^{-1}
  Real identity_residual = 0;
  bool precondition_ok = true;  // Re(b_j - z) > 0 for all j
  bool not_applicable = false;  // footnote smallness test failed
};

template <class Real>
AlmostToeplitzDecomposition<Real> almost_toeplitz_decompose(const TridiagonalMatrix<Real>& J) {
  using Complex = std::complex<Real>;
  using Acc = long double;
  using AccComplex = std::complex<Acc>;
  J.check();
  const Eigen::Index N = J.size();
  if (N < 3) throw Error(ErrorKind::InvalidParams, "almost-Toeplitz decomposition needs N >= 3");
  AlmostToeplitzDecomposition<Real> out;
  for (Eigen::Index j = 1; j <= N; ++j)
    if (!(J.s(j).real() > 0)) out.precondition_ok = false;

  const TransferSpectrum<Real> t = transfer_spectrum(J);
  auto q = [&](Eigen::Index l) { return t.wm(l) / t.wp(l); };
  const Mat2<Real> I2 = Mat2<Real>::Identity();

  // Y_k = V_k^{-1} A_k ... A_{N-1} V_{N-1} / prod omega^+, k = 1..N-1
  std::vector<Mat2<Real>> Y(size_t(N + 1));
  std::vector<Complex> rho_b(size_t(N + 1));
  Y[size_t(N - 1)] << Complex(1), Complex(0), Complex(0), q(N - 1);
  rho_b[size_t(N - 1)] = q(N - 1);
  rho_b[size_t(N)] = Complex(1);
  for (Eigen::Index k = N - 2; k >= 1; --k) {
    Mat2<Real> M = eigvec_matrix<Real>(t.wp(k), t.wm(k)).inverse() * eigvec_matrix<Real>(t.wp(k + 1), t.wm(k + 1)) - I2;
    Mat2<Real> Om;
    Om << Complex(1), Complex(0), Complex(0), q(k);
    Y[size_t(k)] = Om * (I2 + M) * Y[size_t(k + 1)];
    rho_b[size_t(k)] = q(k) * rho_b[size_t(k + 1)];
  }
  // Z_j = W_j^{-1} B_j ... B_2 W_2 / prod lambda^+, j = 2..N
  std::vector<Mat2<Real>> Z(size_t(N + 1));
  std::vector<Complex> rho_g(size_t(N + 1));
  rho_g[1] = Complex(1);
  Z[2] << Complex(1), Complex(0), Complex(0), t.lm(2) / t.lp(2);
  rho_g[2] = t.lm(2) / t.lp(2);
  for (Eigen::Index j = 3; j <= N; ++j) {
    Mat2<Real> E = eigvec_matrix<Real>(t.lp(j), t.lm(j)).inverse() * eigvec_matrix<Real>(t.lp(j - 1), t.lm(j - 1)) - I2;
    Mat2<Real> La;
    La << Complex(1), Complex(0), Complex(0), t.lm(j) / t.lp(j);
    Z[size_t(j)] = La * (I2 + E) * Z[size_t(j - 1)];
    rho_g[size_t(j)] = rho_g[size_t(j - 1)] * t.lm(j) / t.lp(j);
  }

  const Real aN1 = J.a(N - 1), a1 = J.a(1);
  const Complex bt1 = t.wm(N - 1) * aN1 - J.s(N), bt2 = -t.wp(N - 1) * aN1 + J.s(N);
  const Complex gt1 = t.lm(2) * a1 - J.s(1), gt2 = -t.lp(2) * a1 + J.s(1);
  const Complex dt1 = J.s(N) * t.lp(N - 1) - aN1, dt2 = J.s(N) * t.lm(N - 1) - aN1;
  const Complex rb = bt2 / bt1, rg = gt2 / gt1, rd = dt2 / dt1;

  std::vector<Complex> C(size_t(N + 1), Complex(0)), D(size_t(N + 1), Complex(0));
  for (Eigen::Index k = 1; k <= N - 1; ++k) {
    Mat2<Real> Ch = Y[size_t(k)];
    Ch(1, 1) -= rho_b[size_t(k)];
    Ch(0, 0) -= Complex(1);
    C[size_t(k)] = (Ch(0, 0) + Ch(1, 0)) + (Ch(0, 1) + Ch(1, 1)) * rb;
  }
  for (Eigen::Index j = 2; j <= N; ++j) {
    Mat2<Real> Dh = Z[size_t(j)];
    Dh(1, 1) -= rho_g[size_t(j)];
    Dh(0, 0) -= Complex(1);
    D[size_t(j)] = (Dh(0, 0) + Dh(1, 0)) + (Dh(0, 1) + Dh(1, 1)) * rg;
  }
  Mat2<Real> Dh = Z[size_t(N - 1)];
  Dh(1, 1) -= rho_g[size_t(N - 1)];
  Dh(0, 0) -= Complex(1);
  const Complex Dt = Dh(0, 0) + Dh(0, 1) * rg + rd * Dh(1, 0) + rd * rg * Dh(1, 1);
  const Complex den = Complex(1) + rd * rg * rho_g[size_t(N - 1)] + Dt;
  const Complex pre0 = t.wm(N - 1) / (t.wp(N - 1) - t.wm(N - 1)) / den;

  // prefix sums of log omega^-
  std::vector<AccComplex> lw(size_t(N + 1), AccComplex(0));
  for (Eigen::Index l = 1; l <= N; ++l) lw[size_t(l)] = lw[size_t(l - 1)] + std::log(AccComplex(t.wm(l)));

  const CMatrix<Real> G = resolvent_matrix(J);
  out.T.resize(N, N);
  Real resid = 0;
  for (Eigen::Index j = 1; j <= N; ++j) {
    for (Eigen::Index k = j; k <= N; ++k) {
      const AccComplex e = lw[size_t(k - 1)] - lw[size_t(j - 1)];
      Complex p = std::exp(Complex(Real(e.real()), Real(e.imag()))) / (t.wm(j) * J.a(k - 1)) * pre0;
      if ((k - j) % 2) p = -p;
      const Complex Tjk = p * (Complex(1) + D[size_t(j)]) * (Complex(1) + C[size_t(k)]);
      out.T(j - 1, k - 1) = out.T(k - 1, j - 1) = Tjk;
      const Complex exact =
          p * (Complex(1) + rg * rho_g[size_t(j)] + D[size_t(j)]) * (Complex(1) + rb * rho_b[size_t(k)] + C[size_t(k)]);
      const Real g = std::abs(G(j - 1, k - 1));
      if (g > std::numeric_limits<Real>::min() / std::numeric_limits<Real>::epsilon())
        resid = std::max(resid, std::abs(exact - G(j - 1, k - 1)) / g);
    }
  }
  out.H = G - out.T;
  out.identity_residual = resid;

  for (Eigen::Index k = 1; k <= N; ++k) out.C_abs.push_back(std::abs(C[size_t(k)]));
  for (Eigen::Index j = 1; j <= N; ++j) out.D_abs.push_back(std::abs(D[size_t(j)]));
  out.D_tilde_abs = std::abs(Dt);

  Real mmax = 0;
  for (Eigen::Index j = 1; j <= N - 2; ++j) mmax = std::max(mmax, t.M_norms[size_t(j - 1)]);
  out.epsilon1 = Real(N) * mmax;
  Acc le2 = 0;
  for (Eigen::Index l = 2; l <= N - 1; ++l) le2 += std::log(Acc(std::abs(q(l))));
  out.epsilon2 = Real(std::exp(le2));
  out.c0 = std::numeric_limits<Real>::max();
  out.c1 = 0;
  for (auto v : J.offdiag) {
    out.c0 = std::min(out.c0, std::abs(v));
    out.c1 = std::max(out.c1, std::abs(v));
  }
  for (Eigen::Index j = 1; j <= N; ++j) out.c1 = std::max(out.c1, std::abs(J.s(j)));
  const Complex s1 = J.s(1);
  out.c2 = std::max({Real(1), std::abs((-a1 + t.wm(2) * s1) / (a1 - t.wp(2) * s1)), std::abs(bt2 / bt1)});
  const Real K = (Real(1) + std::sqrt(Real(5))) * out.c1 / (Real(2) * out.c0);
  const Real K2 = K * K;
  const bool small = out.epsilon1 > 0 && out.epsilon1 < Real(1) / (Real(3) * K2) && out.epsilon2 > 0 &&
                     Real(12) * (Real(1) + K2 * out.c2 * out.c2) * out.epsilon1 + out.c2 * out.epsilon2 < Real(1) / K2;
  // M_j vanishes identically for constant coefficients; the footnote then reduces to its second part
  const bool small_const = out.epsilon1 == 0 && out.c2 * out.epsilon2 < Real(1) / K2;
  out.not_applicable = !out.precondition_ok || !(small || small_const);
  const Real eps1t = Real(12) * (Real(1) + K2 * out.c2 * out.c2) * K2 * out.epsilon1;
  const Real cden = Real(1) - K2 * out.c2 * out.epsilon2 - eps1t;
  out.constant = cden > 0 ? K * (Real(1) + eps1t) * (Real(1) + eps1t) / cden : std::numeric_limits<Real>::infinity();
  return out;
}

// Right edge: J - z = -((-J) - (-z)); decompose the reflected matrix, then negate back.
template <class Real>
AlmostToeplitzDecomposition<Real> almost_toeplitz_decompose(const TridiagonalMatrix<Real>& J, Side side) {
  if (side == Side::Left) return almost_toeplitz_decompose(J);
  AlmostToeplitzDecomposition<Real> r = almost_toeplitz_decompose(J.negated());
  r.T = -r.T;
  r.H = -r.H;
  return r;
}

struct DecayFit {
  double slope = 0.0;      // d log|G| / d|j-k|, negative for decay
  double intercept = 0.0;
  double rate = 0.0;       // -slope
  long ref_row = 0;
  std::vector<long> offsets;
  std::vector<double> log_abs;  // profile over all k, index k-1
};

// Fits log|(J^{-1})_{r,k}| against |k - r| over offsets where the profile stays above
// floor_decades below the diagonal value; max_offset <= 0 means up to the matrix end.
DecayFit decay_profile(const Tridiagonal& J, long ref_row, long max_offset = 0, double floor_decades = 11.0);

// power iteration on A^* A
template <class Real>
Real operator_norm_estimate(const CMatrix<Real>& A, int iterations = 50) {
  using Complex = std::complex<Real>;
  const Eigen::Index n = A.cols();
  if (n == 0) return Real(0);
  Eigen::Matrix<Complex, Eigen::Dynamic, 1> v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = Complex(Real(1) + Real(i % 7) / Real(10), Real(i % 3) / Real(10));
  v.normalize();
  for (int it = 0; it < iterations; ++it) {
    Eigen::Matrix<Complex, Eigen::Dynamic, 1> w = A.adjoint() * (A * v);
    const Real nw = w.norm();
    if (nw == Real(0)) return Real(0);
    v = w / nw;
  }
  return Real((A * v).norm());
}

nlohmann::json to_json(const Tridiagonal& J);
Tridiagonal tridiagonal_from_json(const nlohmann::json& j);

// Jacobi truncation of size N shifted by z: diag b_j - 0, shift z
Tridiagonal jacobi_matrix(const EnsembleSpec& spec, long N, long n, std::complex<double> z);

}  // namespace ope
