#include "ope_meso/cumulant.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <regex>
#include <sstream>

#include "ope_meso/errors.hpp"
#include "ope_meso/parallel.hpp"
#include "ope_meso/tridiagonal.hpp"

namespace ope {

using cd = std::complex<double>;

ResolventTestFunction::ResolventTestFunction(std::vector<cd> poles, std::vector<cd> weights)
    : poles_(std::move(poles)), weights_(std::move(weights)) {
  if (poles_.empty()) throw Error(ErrorKind::InvalidParams, "test function needs at least one pole");
  if (poles_.size() != weights_.size()) throw Error(ErrorKind::InvalidParams, "poles and weights differ in length");
  for (const auto& p : poles_)
    if (!(p.imag() > 0)) throw Error(ErrorKind::InvalidParams, "poles must satisfy Im lambda > 0");
}

std::vector<ResolventTestFunction::Term> ResolventTestFunction::expanded() const {
  const cd two_i(0, 2);
  std::vector<Term> out;
  for (size_t r = 0; r < poles_.size(); ++r) out.push_back({weights_[r] / two_i, poles_[r]});
  for (size_t r = 0; r < poles_.size(); ++r) out.push_back({-std::conj(weights_[r]) / two_i, std::conj(poles_[r])});
  return out;
}

double ResolventTestFunction::operator()(double x) const {
  double s = 0;
  for (size_t r = 0; r < poles_.size(); ++r) s += (weights_[r] / (x - poles_[r])).imag();
  return s;
}

double ResolventTestFunction::derivative(double x) const {
  double s = 0;
  for (size_t r = 0; r < poles_.size(); ++r) {
    const cd d = x - poles_[r];
    s += (-weights_[r] / (d * d)).imag();
  }
  return s;
}

cd ResolventTestFunction::expanded_value(double x) const {
  cd s = 0;
  for (const auto& t : expanded()) s += t.c / (x - t.eta);
  return s;
}

ResolventTestFunction ResolventTestFunction::reflected() const {
  std::vector<cd> p, w;
  for (size_t r = 0; r < poles_.size(); ++r) {
    p.push_back(-std::conj(poles_[r]));
    w.push_back(std::conj(weights_[r]));
  }
  return ResolventTestFunction(p, w);
}

ResolventTestFunction ResolventTestFunction::dilated(double s) const {
  if (!(s > 0)) throw Error(ErrorKind::InvalidParams, "dilation factor must be positive");
  std::vector<cd> p, w;
  for (size_t r = 0; r < poles_.size(); ++r) {
    p.push_back(poles_[r] / s);
    w.push_back(weights_[r] / s);
  }
  return ResolventTestFunction(p, w);
}

ResolventTestFunction ResolventTestFunction::operator+(const ResolventTestFunction& o) const {
  std::vector<cd> p = poles_, w = weights_;
  p.insert(p.end(), o.poles_.begin(), o.poles_.end());
  w.insert(w.end(), o.weights_.begin(), o.weights_.end());
  return ResolventTestFunction(p, w);
}

ResolventTestFunction ResolventTestFunction::scaled(double k) const {
  std::vector<cd> w = weights_;
  for (auto& v : w) v *= k;
  return ResolventTestFunction(poles_, w);
}

namespace {
std::string complex_literal(cd z) {
  std::ostringstream os;
  os << std::setprecision(17) << z.real() << (z.imag() < 0 ? "-" : "+") << std::abs(z.imag()) << "i";
  return os.str();
}
}  // namespace

std::string ResolventTestFunction::to_string() const {
  std::string s;
  for (size_t r = 0; r < poles_.size(); ++r) {
    if (r) s += "+";
    s += "im:(" + complex_literal(weights_[r]) + ")/(x-(" + complex_literal(poles_[r]) + "))";
  }
  return s;
}

ResolventTestFunction im_resolvent(cd pole, double weight) { return ResolventTestFunction({pole}, {cd(weight)}); }

ResolventTestFunction re_resolvent(cd pole, double weight) {
  return ResolventTestFunction({pole}, {cd(0, weight)});
}

namespace {

std::string strip(const std::string& s) {
  std::string o;
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) o += c;
  return o;
}

std::string unparen(std::string s) {
  while (s.size() >= 2 && s.front() == '(' && s.back() == ')') {
    int depth = 0;
    bool wraps = true;
    for (size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '(') ++depth;
      if (s[i] == ')') --depth;
      if (depth == 0 && i + 1 < s.size()) {
        wraps = false;
        break;
      }
    }
    if (!wraps) break;
    s = s.substr(1, s.size() - 2);
  }
  return s;
}

}  // namespace

cd parse_complex(const std::string& text) {
  const std::string s = unparen(strip(text));
  static const std::string num = R"((?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)";
  static const std::regex full("^([+-]?" + num + ")?(?:([+-])(" + num + ")?i)?$");
  static const std::regex imag("^([+-]?)(" + num + ")?i$");
  std::smatch m;
  if (std::regex_match(s, m, imag)) {
    const double v = m[2].matched ? std::stod(m[2].str()) : 1.0;
    return {0.0, m[1].str() == "-" ? -v : v};
  }
  if (!s.empty() && std::regex_match(s, m, full)) {
    const double re = m[1].matched ? std::stod(m[1].str()) : 0.0;
    double im = 0.0;
    if (m[2].matched) {
      im = m[3].matched ? std::stod(m[3].str()) : 1.0;
      if (m[2].str() == "-") im = -im;
    }
    return {re, im};
  }
  throw Error(ErrorKind::Config, "cannot parse complex literal '" + text + "'");
}

ResolventTestFunction parse_test_function(const std::string& text) {
  const std::string s = strip(text);
  if (s.empty()) throw Error(ErrorKind::Config, "empty test function");
  // split on '+' at depth 0 that starts a new "im:"/"re:" term
  std::vector<std::string> terms;
  int depth = 0;
  size_t start = 0;
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '(') ++depth;
    if (s[i] == ')') --depth;
    if (depth == 0 && s[i] == '+' && (s.compare(i + 1, 3, "im:") == 0 || s.compare(i + 1, 3, "re:") == 0)) {
      terms.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  terms.push_back(s.substr(start));
  std::vector<cd> poles, weights;
  for (const auto& t : terms) {
    if (t.size() < 4 || (t.compare(0, 3, "im:") != 0 && t.compare(0, 3, "re:") != 0))
      throw Error(ErrorKind::Config, "term '" + t + "' must start with im: or re:");
    const bool is_re = t[1] == 'e';
    const std::string body = t.substr(3);
    const size_t slash = body.find("/(x-");
    if (slash == std::string::npos || body.back() != ')')
      throw Error(ErrorKind::Config, "term '" + t + "' must look like d/(x-lambda)");
    const std::string dtext = body.substr(0, slash);
    const std::string ltext = body.substr(slash + 4, body.size() - slash - 5);
    cd d = dtext.empty() ? cd(1) : parse_complex(dtext);
    cd lam = parse_complex(ltext);
    if (is_re) d *= cd(0, 1);
    if (lam.imag() == 0) throw Error(ErrorKind::Config, "pole '" + ltext + "' lies on the real axis");
    if (lam.imag() < 0) {
      // Im(d/(x-l)) = Im(-conj(d)/(x-conj(l)))
      d = -std::conj(d);
      lam = std::conj(lam);
    }
    poles.push_back(lam);
    weights.push_back(d);
  }
  return ResolventTestFunction(poles, weights);
}

Window default_window(long n, double alpha, double epsilon, int m_max) {
  const long w = long(std::ceil(std::pow(double(n), alpha / 2 + epsilon)));
  return {1, n + std::max(4, 2 * m_max) * w};
}

FMatrix build_F(const EnsembleSpec& spec, long n, const EdgeSpec& edge, const ResolventTestFunction& f,
                const Window& window) {
  validate(edge);
  const double na = std::pow(double(n), edge.alpha);
  const double need = std::pow(double(n), edge.alpha / 2);
  if (window.low < 1 || window.high <= n) throw Error(ErrorKind::WindowTooSmall, "window must cover [1, n]");
  if (double(window.high - n) < need) throw Error(ErrorKind::WindowTooSmall, "upper margin below n^{alpha/2}");
  if (window.low > 1 && double(n - window.low + 1) < need)
    throw Error(ErrorKind::WindowTooSmall, "lower margin below n^{alpha/2}");

  const long N = window.high, L = window.low;
  std::vector<double> b, a;
  jacobi_coefficients(spec, N, n, b, a);
  std::vector<double> bb(b.begin() + (L - 1), b.end()), ab(a.begin() + (L - 1), a.end());

  const auto terms = f.expanded();
  FMatrix out;
  out.window = window;
  for (const auto& t : terms) out.norm_bound += std::abs(t.c / t.eta.imag()) * na;

  std::vector<ResolventRecursion<double>> recs;
  for (const auto& t : terms) recs.emplace_back(Tridiagonal(bb, ab, cd(edge.x0) + t.eta / na));

  out.F = Eigen::MatrixXd::Zero(N, N);
  cd tail = 0;
  for (const auto& t : terms) tail += t.c / (1.0 - edge.x0 - t.eta / na);
  for (long i = 0; i < L - 1; ++i) out.F(i, i) = tail.real();
  double max_imag = std::abs(tail.imag());

  const long M = N - L + 1;
  std::mutex mu;
  parallel_for(M, default_threads(), [&](long c0, long c1) {
    double mi = 0;
    for (long k = c0; k < c1; ++k) {
      for (long j = 0; j <= k; ++j) {
        cd s = 0;
        for (size_t r = 0; r < terms.size(); ++r) s += terms[r].c * recs[r].entry(j + 1, k + 1);
        out.F(L - 1 + j, L - 1 + k) = out.F(L - 1 + k, L - 1 + j) = s.real();
        mi = std::max(mi, std::abs(s.imag()));
      }
    }
    std::lock_guard<std::mutex> lock(mu);
    max_imag = std::max(max_imag, mi);
  });
  out.max_imag = max_imag;
  return out;
}

double kahan_trace_product(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
  if (X.cols() != Y.rows() || X.rows() != Y.cols()) throw Error(ErrorKind::InvalidParams, "trace shape mismatch");
  const Eigen::MatrixXd Yt = Y.transpose();
  double sum = 0, comp = 0;
  const Eigen::Index total = X.size();
  const double* x = X.data();
  const double* y = Yt.data();
  for (Eigen::Index i = 0; i < total; ++i) {
    const double v = x[i] * y[i] - comp;
    const double t = sum + v;
    comp = (t - sum) - v;
    sum = t;
  }
  return sum;
}

namespace {

double kahan_trace(const Eigen::MatrixXd& X) {
  double sum = 0, comp = 0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double v = X(i, i) - comp;
    const double t = sum + v;
    comp = (t - sum) - v;
    sum = t;
  }
  return sum;
}

std::vector<int> canonical_rotation(const std::vector<int>& s) {
  std::vector<int> best = s;
  for (size_t r = 1; r < s.size(); ++r) {
    std::vector<int> c(s.begin() + r, s.end());
    c.insert(c.end(), s.begin(), s.begin() + r);
    if (c < best) best = c;
  }
  return best;
}

void compositions(int m, int parts, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (parts == 1) {
    cur.push_back(m);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (int l = 1; l <= m - parts + 1; ++l) {
    cur.push_back(l);
    compositions(m - l, parts - 1, cur, out);
    cur.pop_back();
  }
}

double factorial(int k) { return std::tgamma(double(k) + 1); }

}  // namespace

CumulantEngine::CumulantEngine(const Eigen::MatrixXd& F, long n, int m_max) : n_(n), m_max_(m_max) {
  if (F.rows() != F.cols()) throw Error(ErrorKind::InvalidParams, "F must be square");
  if (n < 1 || n > F.rows()) throw Error(ErrorKind::InvalidParams, "window must contain [1, n]");
  if (m_max < 1 || m_max > 6) throw Error(ErrorKind::InvalidParams, "cumulant order limited to 1..6");
  B_.resize(size_t(m_max + 1));
  Eigen::MatrixXd X = F.leftCols(n);
  B_[1] = X.topRows(n);
  for (int l = 2; l <= m_max; ++l) {
    Eigen::MatrixXd Y(F.rows(), n);
    Y.noalias() = F * X;
    X.swap(Y);
    B_[size_t(l)] = X.topRows(n);
  }
}

double CumulantEngine::trace_power(int m) const { return kahan_trace(B_.at(size_t(m))); }

const Eigen::MatrixXd& CumulantEngine::product(const std::vector<int>& seq) {
  if (seq.size() == 1) return B_.at(size_t(seq[0]));
  auto it = memo_.find(seq);
  if (it != memo_.end()) return it->second;
  const size_t h = seq.size() / 2;
  std::vector<int> left(seq.begin(), seq.begin() + h), right(seq.begin() + h, seq.end());
  Eigen::MatrixXd P(n_, n_);
  P.noalias() = product(left) * product(right);
  return memo_.emplace(seq, std::move(P)).first->second;
}

double CumulantEngine::trace_sequence(const std::vector<int>& raw) {
  const std::vector<int> seq = canonical_rotation(raw);
  auto it = trace_memo_.find(seq);
  if (it != trace_memo_.end()) return it->second;
  double v;
  if (seq.size() == 1) {
    v = trace_power(seq[0]);
  } else {
    const size_t h = seq.size() / 2;
    std::vector<int> left(seq.begin(), seq.begin() + h), right(seq.begin() + h, seq.end());
    v = kahan_trace_product(product(left), product(right));
  }
  trace_memo_[seq] = v;
  return v;
}

double CumulantEngine::cumulant(int m) {
  if (m < 1 || m > m_max_) throw Error(ErrorKind::InvalidParams, "cumulant order outside engine range");
  if (m == 1) return trace_power(1);
  const double trm = trace_power(m);
  double total = 0;
  for (int j = 2; j <= m; ++j) {
    std::vector<std::vector<int>> comps;
    std::vector<int> cur;
    compositions(m, j, cur, comps);
    double s = 0;
    for (const auto& c : comps) {
      double fact = 1;
      for (int l : c) fact *= factorial(l);
      s += (trace_sequence(c) - trm) / fact;
    }
    total += ((j % 2) ? 1.0 : -1.0) / double(j) * s;
  }
  return factorial(m) * total;
}

double cumulant(const Eigen::MatrixXd& F, long n, int m) {
  CumulantEngine e(F, n, m);
  return e.cumulant(m);
}

double C2Triangle::max_rel_spread() const {
  const double scale = std::max({std::abs(composition), std::abs(trace_form), std::abs(commutator)});
  if (scale == 0) return 0;
  const double d = std::max({std::abs(composition - trace_form), std::abs(composition - commutator),
                             std::abs(trace_form - commutator)});
  return d / scale;
}

C2Triangle c2_three_ways(const Eigen::MatrixXd& F, long n) {
  C2Triangle t;
  t.composition = cumulant(F, n, 2);
  const Eigen::Index N = F.rows();
  // Tr(F Q F P) = sum_{i<n} sum_{k>=n} F_ik F_ki
  double sum = 0, comp = 0;
  auto kadd = [&](double v) {
    const double y = v - comp;
    const double t2 = sum + y;
    comp = (t2 - sum) - y;
    sum = t2;
  };
  for (Eigen::Index k = n; k < N; ++k)
    for (Eigen::Index i = 0; i < n; ++i) kadd(F(i, k) * F(k, i));
  t.trace_form = sum;
  sum = comp = 0;
  for (Eigen::Index k = 0; k < N; ++k) {
    const double pk = k < n ? 1.0 : 0.0;
    for (Eigen::Index i = 0; i < N; ++i) {
      const double pi = i < n ? 1.0 : 0.0;
      const double c = F(i, k) * pk - pi * F(i, k);
      kadd(c * c);
    }
  }
  t.commutator = 0.5 * sum;
  return t;
}

double operator_norm_estimate(const Eigen::MatrixXd& F, int iterations) {
  const Eigen::Index n = F.cols();
  if (n == 0) return 0;
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = 1.0 + double(i % 7) / 10.0;
  v.normalize();
  for (int it = 0; it < iterations; ++it) {
    Eigen::VectorXd w = F.transpose() * (F * v);
    const double nw = w.norm();
    if (nw == 0) return 0;
    v = w / nw;
  }
  return (F * v).norm();
}

BoundReport cumulant_bound_check(const Eigen::MatrixXd& F, long n, int m) {
  if (m < 3) throw Error(ErrorKind::InvalidParams, "bound check needs m >= 3");
  CumulantEngine e(F, n, m);
  BoundReport r;
  r.m = m;
  r.c2 = e.cumulant(2);
  r.lhs = std::abs(e.cumulant(m));
  r.op_norm = operator_norm_estimate(F);
  const double pi = std::acos(-1.0);
  r.rhs = std::sqrt(2 / pi) * factorial(m) * std::pow(double(m), 1.5) * std::pow(r.op_norm, m - 2) *
          std::exp(double(m)) * r.c2;
  r.holds = r.lhs <= r.rhs;
  return r;
}

CumulantReport cumulant_report(const EnsembleSpec& spec, long n, const ResolventTestFunction& f, int m_max,
                               const SweepOptions& opt) {
  EdgeSpec edge;
  edge.side = opt.side;
  edge.alpha = opt.alpha;
  edge.epsilon = opt.epsilon > 0 ? opt.epsilon : default_epsilon(opt.alpha);
  edge.x0 = (opt.x0 ? *opt.x0 : edge_location(spec, n, opt.side)) + opt.x0_shift;
  Window w = default_window(n, edge.alpha, edge.epsilon, m_max);
  if (opt.margin > 0) w.high = n + opt.margin;
  if (opt.low_margin >= 0) w.low = std::max(1L, n + 1 - (opt.low_margin > 0 ? opt.low_margin : w.high - n));
  FMatrix F = build_F(spec, n, edge, f, w);
  CumulantEngine eng(F.F, n, m_max);
  CumulantReport rep;
  rep.n = n;
  rep.alpha = edge.alpha;
  rep.x0 = edge.x0;
  rep.window = w;
  const double na = std::pow(double(n), edge.alpha);
  for (int m = 1; m <= m_max; ++m) rep.scaled_cumulants[m] = eng.cumulant(m) / std::pow(na, m);
  rep.op_norm_estimate = operator_norm_estimate(F.F);
  return rep;
}

std::vector<CumulantReport> convergence_sweep(const EnsembleSpec& spec, const ResolventTestFunction& f,
                                              const std::vector<long>& n_list, int m_max, const SweepOptions& opt) {
  if (n_list.empty()) throw Error(ErrorKind::InvalidParams, "n_list is empty");
  for (size_t i = 1; i < n_list.size(); ++i)
    if (n_list[i] <= n_list[i - 1]) throw Error(ErrorKind::InvalidParams, "n_list must be ascending");
  std::vector<CumulantReport> out;
  for (long n : n_list) out.push_back(cumulant_report(spec, n, f, m_max, opt));
  return out;
}

std::string to_csv(const std::vector<CumulantReport>& reports) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "n,alpha,m,value_re,value_im\n";
  for (const auto& r : reports)
    for (const auto& [m, v] : r.scaled_cumulants) os << r.n << ',' << r.alpha << ',' << m << ',' << v << ",0\n";
  return os.str();
}

nlohmann::json to_json(const std::vector<CumulantReport>& reports) {
  nlohmann::json j;
  j["schema"] = 1;
  j["reports"] = nlohmann::json::array();
  for (const auto& r : reports) {
    nlohmann::json e;
    e["n"] = r.n;
    e["alpha"] = r.alpha;
    e["x0"] = r.x0;
    e["window"] = {r.window.low, r.window.high};
    e["op_norm_estimate"] = r.op_norm_estimate;
    e["scaled_cumulants"] = nlohmann::json::object();
    for (const auto& [m, v] : r.scaled_cumulants) e["scaled_cumulants"][std::to_string(m)] = v;
    j["reports"].push_back(e);
  }
  return j;
}

std::vector<CumulantReport> reports_from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);
  if (line != "n,alpha,m,value_re,value_im") throw Error(ErrorKind::Config, "unexpected cumulant CSV header");
  std::vector<CumulantReport> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tok;
    std::vector<std::string> f;
    while (std::getline(ls, tok, ',')) f.push_back(tok);
    if (f.size() != 5) throw Error(ErrorKind::Config, "bad cumulant CSV row '" + line + "'");
    const long n = std::stol(f[0]);
    if (out.empty() || out.back().n != n) {
      out.emplace_back();
      out.back().n = n;
      out.back().alpha = std::stod(f[1]);
    }
    out.back().scaled_cumulants[std::stoi(f[2])] = std::stod(f[3]);
  }
  return out;
}

}  // namespace ope
