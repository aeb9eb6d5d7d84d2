#include "ope_meso/tridiagonal.hpp"

#include <cmath>

namespace ope {

DecayFit decay_profile(const Tridiagonal& J, long ref_row, long max_offset, double floor_decades) {
  if (J.shift.imag() == 0.0) throw Error(ErrorKind::InvalidParams, "decay_profile needs Im z != 0");
  const long N = long(J.size());
  if (ref_row < 1 || ref_row > N) throw Error(ErrorKind::OutOfDomain, "reference row out of range");
  ResolventRecursion<double> R(J);
  DecayFit fit;
  fit.ref_row = ref_row;
  fit.log_abs.resize(size_t(N));
  for (long k = 1; k <= N; ++k) fit.log_abs[size_t(k - 1)] = std::log(std::abs(R.entry(ref_row, k)));

  const double top = fit.log_abs[size_t(ref_row - 1)];
  const double floor = top - floor_decades * std::log(10.0);
  const long reach = std::max(ref_row - 1, N - ref_row);
  const long lim = max_offset > 0 ? std::min(max_offset, reach) : reach;
  // both sides where available, stopping once a side falls below the floor
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  long cnt = 0;
  for (int dir : {1, -1}) {
    for (long d = 1; d <= lim; ++d) {
      const long k = ref_row + dir * d;
      if (k < 1 || k > N) break;
      const double y = fit.log_abs[size_t(k - 1)];
      if (!(y > floor)) break;
      fit.offsets.push_back(d);
      sx += double(d);
      sy += y;
      sxx += double(d) * double(d);
      sxy += double(d) * y;
      ++cnt;
    }
  }
  if (cnt >= 2) {
    const double den = double(cnt) * sxx - sx * sx;
    fit.slope = (double(cnt) * sxy - sx * sy) / den;
    fit.intercept = (sy - fit.slope * sx) / double(cnt);
  } else {
    fit.intercept = top;
  }
  fit.rate = -fit.slope;
  return fit;
}

nlohmann::json to_json(const Tridiagonal& J) {
  nlohmann::json j;
  j["N"] = J.size();
  j["diag"] = J.diag;
  j["offdiag"] = J.offdiag;
  j["z"] = {{"re", J.shift.real()}, {"im", J.shift.imag()}};
  return j;
}

Tridiagonal tridiagonal_from_json(const nlohmann::json& j) {
  try {
    for (auto it = j.begin(); it != j.end(); ++it)
      if (it.key() != "N" && it.key() != "diag" && it.key() != "offdiag" && it.key() != "z")
        throw Error(ErrorKind::Config, "unknown matrix key '" + it.key() + "'");
    const long N = j.at("N").get<long>();
    Tridiagonal J(j.at("diag").get<std::vector<double>>(), j.at("offdiag").get<std::vector<double>>(),
                  {j.at("z").at("re").get<double>(), j.at("z").at("im").get<double>()});
    if (J.size() != N) throw Error(ErrorKind::Config, "N does not match diag length");
    return J;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Config, std::string("matrix JSON: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Config) throw;
    throw Error(ErrorKind::Config, e.what());
  }
}

Tridiagonal jacobi_matrix(const EnsembleSpec& spec, long N, long n, std::complex<double> z) {
  std::vector<double> b, a;
  jacobi_coefficients(spec, N, n, b, a);
  return Tridiagonal(std::move(b), std::move(a), z);
}

}  // namespace ope
