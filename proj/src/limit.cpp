#include "ope_meso/limit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <iomanip>
#include <queue>
#include <sstream>

#include "ope_meso/errors.hpp"
#include "ope_meso/parallel.hpp"

namespace ope {

namespace {

const double kPi = std::acos(-1.0);

// Gauss-Kronrod 7/15 on [-1, 1]
constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                            0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                            0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                            0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                            0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                            0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                            0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                           0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Rule {
  double node[15];
  double wk[15];
  double wg[15];
};

Rule make_rule() {
  Rule r{};
  for (int i = 0; i < 7; ++i) {
    r.node[i] = -kXgk[i];
    r.node[14 - i] = kXgk[i];
    r.wk[i] = r.wk[14 - i] = kWgk[i];
    // Gauss nodes are the odd-indexed Kronrod abscissae
    const double wg = (i % 2 == 1) ? kWg[i / 2] : 0.0;
    r.wg[i] = r.wg[14 - i] = wg;
  }
  r.node[7] = 0.0;
  r.wk[7] = kWgk[7];
  r.wg[7] = kWg[3];
  return r;
}

const Rule& rule() {
  static const Rule r = make_rule();
  return r;
}

// fills v[i*15+j] = K(x_i, y_j) given theta-nodes
using CellKernel = std::function<void(const double* x, const double* y, double* v)>;

struct Cell {
  double a, b, c, d;
  double value = 0, err = 0, ex = 0, ey = 0;
  bool operator<(const Cell& o) const { return err < o.err; }
};

void evaluate(Cell& cell, const CellKernel& kernel) {
  const Rule& R = rule();
  double x[15], y[15], jx[15], jy[15], v[225];
  const double hx = 0.5 * (cell.b - cell.a), mx = 0.5 * (cell.a + cell.b);
  const double hy = 0.5 * (cell.d - cell.c), my = 0.5 * (cell.c + cell.d);
  for (int i = 0; i < 15; ++i) {
    x[i] = std::tan(mx + hx * R.node[i]);
    y[i] = std::tan(my + hy * R.node[i]);
    jx[i] = 1 + x[i] * x[i];
    jy[i] = 1 + y[i] * y[i];
  }
  kernel(x, y, v);
  double kk = 0, gk = 0, kg = 0, gg = 0;
  for (int i = 0; i < 15; ++i) {
    double rk = 0, rg = 0;
    for (int j = 0; j < 15; ++j) {
      const double t = v[i * 15 + j] * jx[i] * jy[j];
      rk += R.wk[j] * t;
      rg += R.wg[j] * t;
    }
    kk += R.wk[i] * rk;
    gk += R.wg[i] * rk;
    kg += R.wk[i] * rg;
    gg += R.wg[i] * rg;
  }
  const double area = hx * hy;
  cell.value = kk * area;
  cell.ex = std::abs(kk - gk) * area;
  cell.ey = std::abs(kk - kg) * area;
  cell.err = std::max(std::abs(kk - gg) * area, std::max(cell.ex, cell.ey));
}

double adaptive_2d(const CellKernel& kernel, double theta_max, const std::vector<double>& breakpoints, double tol_abs,
                   long max_cells, double* est_error) {
  std::vector<double> cuts = {-theta_max, theta_max};
  for (double p : breakpoints) {
    const double t = std::atan(p);
    if (t > -theta_max && t < theta_max) cuts.push_back(t);
  }
  for (int k = 1; k < 4; ++k) cuts.push_back(-theta_max + 2 * theta_max * k / 4.0);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end(), [](double u, double w) { return std::abs(u - w) < 1e-12; }),
             cuts.end());

  std::priority_queue<Cell> heap;
  double total = 0, total_err = 0;
  for (size_t i = 0; i + 1 < cuts.size(); ++i)
    for (size_t j = 0; j + 1 < cuts.size(); ++j) {
      Cell c{cuts[i], cuts[i + 1], cuts[j], cuts[j + 1]};
      evaluate(c, kernel);
      total += c.value;
      total_err += c.err;
      heap.push(c);
    }
  long cells = long(heap.size());
  long since_resum = 0;
  while (total_err > tol_abs) {
    if (cells >= max_cells)
      throw Error(ErrorKind::NoConvergence, "double integral did not reach tolerance within the cell budget");
    Cell w = heap.top();
    heap.pop();
    total -= w.value;
    total_err -= w.err;
    Cell p = w, q = w;
    if (w.ex >= w.ey) {
      const double m = 0.5 * (w.a + w.b);
      p.b = m;
      q.a = m;
    } else {
      const double m = 0.5 * (w.c + w.d);
      p.d = m;
      q.c = m;
    }
    evaluate(p, kernel);
    evaluate(q, kernel);
    total += p.value + q.value;
    total_err += p.err + q.err;
    heap.push(p);
    heap.push(q);
    ++cells;
    if (++since_resum == 10000) {
      since_resum = 0;
      auto copy = heap;
      total = total_err = 0;
      while (!copy.empty()) {
        total += copy.top().value;
        total_err += copy.top().err;
        copy.pop();
      }
    }
  }
  if (est_error) *est_error = std::max(total_err, 0.0);
  return total;
}

double central_derivative(const RealFunction& g, double x) {
  const double h = 1e-3 * std::max(1.0, std::abs(x));
  return (-g(x + 2 * h) + 8 * g(x + h) - 8 * g(x - h) + g(x - 2 * h)) / (12 * h);
}

double theta_limit(double halfwidth) {
  if (!(halfwidth > 0)) throw Error(ErrorKind::InvalidParams, "halfwidth must be positive");
  return std::isinf(halfwidth) ? kPi / 2 : std::atan(halfwidth);
}

}  // namespace

std::string to_string(VarianceMethod m) { return m == VarianceMethod::Quadrature ? "quadrature" : "residue"; }

nlohmann::json to_json(const LimitVariance& v) {
  return {{"value", v.value}, {"method", to_string(v.method)}, {"side", to_string(v.side)}, {"est_error", v.est_error}};
}

double edge_double_integral(const RealFunction& g, const QuadratureOptions& opt, double* est_error) {
  if (!(opt.tol > 0)) throw Error(ErrorKind::InvalidParams, "tolerance must be positive");
  const double norm = 1.0 / (8 * kPi * kPi);
  CellKernel kernel = [&g](const double* x, const double* y, double* v) {
    double gx[15], gy[15], dx[15], dy[15];
    bool have_dx[15] = {}, have_dy[15] = {};
    for (int i = 0; i < 15; ++i) {
      gx[i] = g(x[i]);
      gy[i] = g(y[i]);
    }
    for (int i = 0; i < 15; ++i)
      for (int j = 0; j < 15; ++j) {
        const double diff = x[i] - y[j];
        if (std::abs(diff) <= 1e-7 * (1 + std::abs(x[i]))) {
          if (!have_dx[i]) dx[i] = central_derivative(g, x[i]), have_dx[i] = true;
          if (!have_dy[j]) dy[j] = central_derivative(g, y[j]), have_dy[j] = true;
          v[i * 15 + j] = 0.5 * (dx[i] * dx[i] + dy[j] * dy[j]);
        } else {
          const double q = (gx[i] - gy[j]) / diff;
          v[i * 15 + j] = q * q;
        }
      }
  };
  double err = 0;
  std::vector<double> bps = opt.breakpoints;
  bps.push_back(0.0);
  const double raw = adaptive_2d(kernel, theta_limit(opt.halfwidth), bps, opt.tol / norm, opt.max_cells, &err);
  if (est_error) *est_error = err * norm;
  return raw * norm;
}

LimitVariance sigma2_quadrature(const RealFunction& f, Side side, double halfwidth, double tol) {
  const double s = side == Side::Left ? 1.0 : -1.0;
  RealFunction g = [&f, s](double x) { return f(s * x * x); };
  QuadratureOptions opt;
  opt.halfwidth = halfwidth;
  opt.tol = tol;
  LimitVariance out;
  out.method = VarianceMethod::Quadrature;
  out.side = side;
  out.value = edge_double_integral(g, opt, &out.est_error);
  return out;
}

LimitVariance sigma2_residue(const ResolventTestFunction& f, Side side) {
  const auto terms = f.expanded();
  const double s = side == Side::Left ? -1.0 : 1.0;
  std::vector<std::complex<double>> root;
  for (const auto& t : terms) root.push_back(std::sqrt(s * t.eta));
  std::complex<double> sum = 0;
  for (size_t r = 0; r < terms.size(); ++r)
    for (size_t q = 0; q < terms.size(); ++q) {
      const auto w = root[r] + root[q];
      sum += terms[r].c * terms[q].c / (4.0 * root[r] * root[q] * w * w);
    }
  LimitVariance out;
  out.method = VarianceMethod::Residue;
  out.side = side;
  out.value = sum.real();
  out.est_error = std::abs(sum.imag()) + 1e-15 * std::abs(sum.real());
  return out;
}

double pi_squared_check(double halfwidth, double tol) {
  CellKernel kernel = [](const double* x, const double* y, double* v) {
    double rx[15], ry[15];
    for (int i = 0; i < 15; ++i) {
      rx[i] = 1 / std::sqrt(x[i] * x[i] * x[i] * x[i] + 1);
      ry[i] = 1 / std::sqrt(y[i] * y[i] * y[i] * y[i] + 1);
    }
    for (int i = 0; i < 15; ++i)
      for (int j = 0; j < 15; ++j) {
        const double q = (x[i] + y[j]) * rx[i] * ry[j];
        v[i * 15 + j] = q * q;
      }
  };
  return adaptive_2d(kernel, theta_limit(halfwidth), {0.0}, tol, 400000, nullptr);
}

std::vector<double> GridSpec::nodes() const {
  if (!(halfwidth > 0) || base_points < 2 || level < 0 || level > 12)
    throw Error(ErrorKind::InvalidParams, "bad grid specification");
  const double t = std::atan(halfwidth);
  const long P = size();
  std::vector<double> x(static_cast<size_t>(P));
  for (long i = 0; i < P; ++i) x[size_t(i)] = std::tan(-t + 2 * t * double(i) / double(P - 1));
  x[size_t((P - 1) / 2)] = 0.0;
  return x;
}

double weighted_lipschitz_norm(const RealFunction& f, const GridSpec& grid) {
  const auto x = grid.nodes();
  const size_t P = x.size();
  std::vector<double> fx(P), w(P);
  double best = 0;
  for (size_t i = 0; i < P; ++i) {
    fx[i] = f(x[i]);
    w[i] = std::sqrt(1 + x[i] * x[i]);
    best = std::max(best, w[i] * w[i] * std::abs(central_derivative(f, x[i])));
  }
  const int threads = default_threads();
  std::vector<double> part(size_t(threads), 0.0);
  std::mutex mu;
  parallel_for(long(P), threads, [&](long b, long e) {
    double local = 0;
    for (long i = b; i < e; ++i)
      for (size_t j = size_t(i) + 1; j < P; ++j) {
        const double q = w[size_t(i)] * w[j] * std::abs(fx[size_t(i)] - fx[j]) / (x[j] - x[size_t(i)]);
        local = std::max(local, q);
      }
    std::lock_guard<std::mutex> lock(mu);
    best = std::max(best, local);
  });
  return best;
}

FitResult fit_resolvent_approximation(const RealFunction& f, int M, double pole_height, double support_low,
                                      double support_high, const GridSpec& grid) {
  if (M < 1) throw Error(ErrorKind::InvalidParams, "need at least one pole");
  if (!(pole_height > 0)) throw Error(ErrorKind::InvalidParams, "pole height must be positive");
  if (!(support_high > support_low)) throw Error(ErrorKind::InvalidParams, "empty support interval");
  const double c = 0.5 * (support_low + support_high), half = 0.75 * (support_high - support_low);
  std::vector<double> xr(static_cast<size_t>(M));
  for (int r = 0; r < M; ++r) xr[size_t(r)] = M == 1 ? c : c - half + 2 * half * r / double(M - 1);

  const auto x = grid.nodes();
  const long P = long(x.size());
  Eigen::MatrixXd A(2 * P, M);
  Eigen::VectorXd rhs(2 * P);
  const double h = pole_height;
  for (long i = 0; i < P; ++i) {
    const double wt = 1 + x[size_t(i)] * x[size_t(i)];
    for (int r = 0; r < M; ++r) {
      const double u = x[size_t(i)] - xr[size_t(r)];
      const double den = u * u + h * h;
      A(i, r) = std::sqrt(wt) * h / den;
      A(P + i, r) = wt * (-2 * h * u / (den * den));
    }
    rhs(i) = std::sqrt(wt) * f(x[size_t(i)]);
    rhs(P + i) = wt * central_derivative(f, x[size_t(i)]);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cond = sv(sv.size() - 1) > 0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
  if (cond > 1e12) throw Error(ErrorKind::IllConditioned, "pole fit design matrix is ill-conditioned");
  const Eigen::VectorXd d = svd.solve(rhs);

  std::vector<std::complex<double>> poles, weights;
  for (int r = 0; r < M; ++r) {
    poles.emplace_back(xr[size_t(r)], h);
    weights.emplace_back(d(r), 0.0);
  }
  FitResult out;
  out.h = ResolventTestFunction(poles, weights);
  out.condition = cond;
  const ResolventTestFunction hf = out.h;
  out.achieved_norm = weighted_lipschitz_norm([&](double t) { return f(t) - hf(t); }, grid);
  return out;
}

LimitVariance sigma2_for_c1(const RealFunction& f, Side side, const std::vector<double>& kinks, double tol) {
  const double s = side == Side::Left ? 1.0 : -1.0;
  RealFunction g = [&f, s](double x) { return f(s * x * x); };
  QuadratureOptions opt;
  opt.tol = tol;
  for (double k : kinks) {
    if (s * k >= 0) {
      opt.breakpoints.push_back(std::sqrt(s * k));
      opt.breakpoints.push_back(-std::sqrt(s * k));
    }
  }
  LimitVariance out;
  out.method = VarianceMethod::Quadrature;
  out.side = side;
  out.value = edge_double_integral(g, opt, &out.est_error);
  return out;
}

double variance_difference_bound(double diff_norm, double sum_norm) { return diff_norm * sum_norm / 8.0; }

RealFunction as_function(const ResolventTestFunction& f) {
  return [f](double x) { return f(x); };
}

RealFunction hat_function(double low, double high) {
  if (!(high > low)) throw Error(ErrorKind::InvalidParams, "empty hat support");
  const double mid = 0.5 * (low + high), half = 0.5 * (high - low);
  return [mid, half](double x) { return std::max(0.0, 1 - std::abs(x - mid) / half); };
}

RealFunction smooth_bump(double low, double high) {
  if (!(high > low)) throw Error(ErrorKind::InvalidParams, "empty bump support");
  const double mid = 0.5 * (low + high), half = 0.5 * (high - low);
  return [mid, half](double x) {
    const double t = (x - mid) / half;
    return std::abs(t) < 1 ? std::exp(1 - 1 / (1 - t * t)) : 0.0;
  };
}

std::string fit_to_csv(const FitResult& fit) {
  std::ostringstream os;
  os << std::setprecision(17) << "pole_re,pole_im,weight\n";
  for (size_t r = 0; r < fit.h.size(); ++r)
    os << fit.h.poles()[r].real() << ',' << fit.h.poles()[r].imag() << ',' << fit.h.weights()[r].real() << '\n';
  return os.str();
}

}  // namespace ope
