#include "ope_meso/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ope_meso/errors.hpp"

namespace ope {

namespace {

struct FamilyName {
  Family f;
  const char* name;
};

const FamilyName kFamilies[] = {
    {Family::Chebyshev2, "chebyshev2"},   {Family::ModifiedJacobi, "modified_jacobi"},
    {Family::Laguerre, "laguerre"},       {Family::Hermite, "hermite"},
    {Family::Freud, "freud"},             {Family::TricomiCarlitz, "tricomi_carlitz"},
    {Family::Krawtchouk, "krawtchouk"},   {Family::Hahn, "hahn"},
    {Family::LogSingular, "log_singular"}, {Family::Custom, "custom"},
};

const std::set<std::string>& allowed_keys(Family f) {
  static const std::map<Family, std::set<std::string>> keys = {
      {Family::Chebyshev2, {}},
      {Family::ModifiedJacobi, {"gamma1", "gamma2", "asymptotic"}},
      {Family::Laguerre, {"gamma"}},
      {Family::Hermite, {}},
      {Family::Freud, {"gamma"}},
      {Family::TricomiCarlitz, {"gamma"}},
      {Family::Krawtchouk, {"p", "t", "K"}},
      {Family::Hahn, {"t1", "t2", "t3", "standard"}},
      {Family::LogSingular, {}},
      {Family::Custom, {}},
  };
  return keys.at(f);
}

bool is_varying(Family f) {
  switch (f) {
    case Family::Chebyshev2:
    case Family::ModifiedJacobi:
    case Family::LogSingular:
      return false;
    default:
      return true;
  }
}

// a_{j,n} = a_num / denom and b_{j,n} = b_num / denom. Laguerre and Krawtchouk keep the
// integer-valued numerators so differences over the hypothesis window stay exact.
struct Scaled {
  double a_num = 0.0;
  double b_num = 0.0;
  double denom = 1.0;
};

double freud_constant(double g) {
  return std::pow(std::tgamma(g / 2) * std::tgamma(0.5) / std::tgamma((g + 1) / 2), 1.0 / g);
}

long krawtchouk_K(const EnsembleSpec& s, long n) {
  auto it = s.params.find("K");
  if (it != s.params.end()) return std::lround(it->second);
  return std::lround(s.param("t") * double(n));
}

struct HahnParams {
  double a, b, N;
};

HahnParams hahn_params(const EnsembleSpec& s, long n) {
  return {s.param("t1") * double(n), s.param("t2") * double(n),
          double(std::lround(s.param("t3") * double(n)))};
}

Scaled scaled_recurrence(const EnsembleSpec& s, long j, long n) {
  if (j < 0) throw Error(ErrorKind::OutOfDomain, "index j must be >= 0");
  if (n < 1) throw Error(ErrorKind::OutOfDomain, "n must be >= 1");
  const double jd = double(j), nd = double(n);
  Scaled r;
  switch (s.family) {
    case Family::Chebyshev2:
      r.a_num = j == 0 ? 0.0 : 1.0;
      break;
    case Family::ModifiedJacobi: {
      const double g1 = s.param("gamma1"), g2 = s.param("gamma2");
      if (s.param_or("asymptotic", 0.0) != 0.0) {
        if (j == 0) {
          r.a_num = 0.0;
          r.b_num = 2 * (g2 - g1) / (g1 + g2 + 2);
          break;
        }
        r.a_num = 1.0 + (1.0 - 2 * g1 * g1 - 2 * g2 * g2) / (8 * jd * jd);
        r.b_num = (g2 * g2 - g1 * g1) / (2 * jd * jd);
        break;
      }
      const double sg = g1 + g2;
      if (j == 0) {
        r.b_num = 2 * (g2 - g1) / (sg + 2);
      } else {
        r.b_num = 2 * (g2 * g2 - g1 * g1) / ((2 * jd + sg) * (2 * jd + sg + 2));
      }
      if (j == 1) {
        r.a_num = std::sqrt(16 * (1 + g1) * (1 + g2) / ((2 + sg) * (2 + sg) * (3 + sg)));
      } else if (j > 1) {
        const double t = 2 * jd + sg;
        r.a_num = std::sqrt(16 * jd * (jd + sg) * (jd + g1) * (jd + g2) / ((t - 1) * t * t * (t + 1)));
      }
      break;
    }
    case Family::Laguerre: {
      const double g = s.param("gamma");
      r.a_num = std::sqrt(jd * (jd + g));
      r.b_num = 2 * jd + g + 1;
      r.denom = nd;
      break;
    }
    case Family::Hermite:
      r.a_num = std::sqrt(jd / nd);
      break;
    case Family::Freud: {
      const double g = s.param("gamma");
      r.a_num = 0.5 * freud_constant(g) * std::pow(jd / nd, 1.0 / g);
      break;
    }
    case Family::TricomiCarlitz: {
      const double g = s.param("gamma");
      r.a_num = j == 0 ? 0.0 : std::sqrt(jd * nd / ((jd + g - 1) * (jd + g)));
      break;
    }
    case Family::Krawtchouk: {
      const long K = krawtchouk_K(s, n);
      if (j > K) throw Error(ErrorKind::OutOfDomain, "j exceeds the Krawtchouk support K");
      const double p = s.param("p"), Kd = double(K);
      r.a_num = std::sqrt((Kd - jd + 1) * jd * p * (1 - p));
      r.b_num = (Kd - jd) * p + jd * (1 - p);
      r.denom = nd;
      break;
    }
    case Family::Hahn: {
      const HahnParams h = hahn_params(s, n);
      const double a = h.a, b = h.b, N = h.N;
      if (jd > N) throw Error(ErrorKind::OutOfDomain, "j exceeds the Hahn support N");
      if (s.param_or("standard", 0.0) != 0.0) {
        auto A = [&](double k) {
          return (k + a + b + 1) * (k + a + 1) * (N - k) / ((2 * k + a + b + 1) * (2 * k + a + b + 2));
        };
        auto C = [&](double k) {
          return k * (k + a + b + N + 1) * (k + b) / ((2 * k + a + b) * (2 * k + a + b + 1));
        };
        r.b_num = A(jd) + (j == 0 ? 0.0 : C(jd));
        r.a_num = j == 0 ? 0.0 : std::sqrt(A(jd - 1) * C(jd));
        r.denom = nd;
        break;
      }
      r.b_num = (N - jd) * (jd + a + b + 1) * (jd + a + 1) / (N * (2 * jd + a + b + N + 1) * (2 * jd + a + b + 2));
      if (j > 0) {
        const double pre = jd * (jd + a + b + N + 1) * (jd + b) / (N * (2 * jd + a + b) * (2 * jd + a + b + 1));
        const double rad = (N - jd) * (jd + a + b) * (a + jd) * (2 * jd + a + b + 1) /
                           (jd * (jd + a + b + N + 1) * (b + jd) * (2 * jd + a + b - 1));
        r.a_num = pre * std::sqrt(rad);
      }
      break;
    }
    case Family::LogSingular: {
      // the expansion needs log k != 0; indices below 2 reuse k = 2
      const double k = std::max(jd, 2.0);
      const double lk = std::log(k);
      r.a_num = j == 0 ? 0.0 : 0.5 - 1 / (16 * k * k) - 3 / (32 * k * k * lk * lk);
      r.b_num = 1 / (4 * k * k) - 3 / (16 * k * k * lk * lk);
      break;
    }
    case Family::Custom: {
      if (!s.custom) throw Error(ErrorKind::InvalidParams, "custom family without callback");
      Coefficients c = s.custom(j, n);
      r.a_num = j == 0 ? 0.0 : c.a;
      r.b_num = c.b;
      break;
    }
  }
  return r;
}

}  // namespace

const char* to_string(Family f) {
  for (const auto& e : kFamilies)
    if (e.f == f) return e.name;
  return "unknown";
}

const char* to_string(Side s) { return s == Side::Left ? "left" : "right"; }

Family family_from_string(const std::string& s) {
  std::string low;
  for (char c : s) low += (c == '-') ? '_' : char(std::tolower(static_cast<unsigned char>(c)));
  for (const auto& e : kFamilies)
    if (low == e.name) return e.f;
  if (low == "gue") return Family::Hermite;
  if (low == "lue") return Family::Laguerre;
  if (low == "jacobi") return Family::ModifiedJacobi;
  throw Error(ErrorKind::Config, "unknown ensemble family '" + s + "'");
}

Side side_from_string(const std::string& s) {
  if (s == "left" || s == "Left") return Side::Left;
  if (s == "right" || s == "Right") return Side::Right;
  throw Error(ErrorKind::Config, "side must be left or right, got '" + s + "'");
}

double EnsembleSpec::param(const std::string& key) const {
  auto it = params.find(key);
  if (it == params.end())
    throw Error(ErrorKind::InvalidParams, std::string(to_string(family)) + " requires parameter '" + key + "'");
  return it->second;
}

double EnsembleSpec::param_or(const std::string& key, double fallback) const {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

void validate(const EnsembleSpec& s) {
  const auto& keys = allowed_keys(s.family);
  for (const auto& [k, v] : s.params) {
    if (!keys.count(k))
      throw Error(ErrorKind::InvalidParams, std::string(to_string(s.family)) + " does not take parameter '" + k + "'");
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidParams, "parameter '" + k + "' is not finite");
  }
  auto need = [&](const char* k) { return s.param(k); };
  switch (s.family) {
    case Family::ModifiedJacobi:
      if (need("gamma1") <= -1 || need("gamma2") <= -1)
        throw Error(ErrorKind::InvalidParams, "modified_jacobi needs gamma1, gamma2 > -1");
      break;
    case Family::Laguerre:
      if (need("gamma") <= -1) throw Error(ErrorKind::InvalidParams, "laguerre needs gamma > -1");
      break;
    case Family::Freud:
      if (need("gamma") <= 0) throw Error(ErrorKind::InvalidParams, "freud needs gamma > 0");
      break;
    case Family::TricomiCarlitz:
      if (need("gamma") <= 1) throw Error(ErrorKind::InvalidParams, "tricomi_carlitz needs gamma > 1");
      break;
    case Family::Krawtchouk: {
      const double p = need("p");
      if (!(p > 0 && p < 1)) throw Error(ErrorKind::InvalidParams, "krawtchouk needs p in (0,1)");
      const bool hasK = s.params.count("K"), hasT = s.params.count("t");
      if (hasK == hasT) throw Error(ErrorKind::InvalidParams, "krawtchouk needs exactly one of t or K");
      if (hasT && need("t") <= 0) throw Error(ErrorKind::InvalidParams, "krawtchouk needs t > 0");
      if (hasK && (need("K") < 1 || need("K") != std::floor(need("K"))))
        throw Error(ErrorKind::InvalidParams, "krawtchouk needs integer K >= 1");
      break;
    }
    case Family::Hahn:
      if (need("t1") <= 0 || need("t2") <= 0 || need("t3") < 1)
        throw Error(ErrorKind::InvalidParams, "hahn needs t1, t2 > 0 and t3 >= 1");
      break;
    case Family::Custom:
      if (!s.custom) throw Error(ErrorKind::InvalidParams, "custom family without callback");
      break;
    default:
      break;
  }
}

EnsembleSpec make_ensemble(Family f, std::map<std::string, double> params) {
  if (f == Family::Custom) throw Error(ErrorKind::InvalidParams, "use make_custom for the custom family");
  EnsembleSpec s;
  s.family = f;
  s.params = std::move(params);
  s.varying = is_varying(f);
  validate(s);
  return s;
}

EnsembleSpec make_custom(CoefficientCallback cb, bool varying) {
  EnsembleSpec s;
  s.family = Family::Custom;
  s.custom = std::move(cb);
  s.varying = varying;
  validate(s);
  return s;
}

double default_epsilon(double alpha) { return std::min(0.1, 0.5 * (1 - alpha / 2)); }

void validate(const EdgeSpec& e) {
  if (!(e.alpha > 0 && e.alpha < 2)) throw Error(ErrorKind::InvalidParams, "alpha must lie in (0,2)");
  if (!(e.epsilon > 0 && e.epsilon < 1 - e.alpha / 2))
    throw Error(ErrorKind::InvalidParams, "epsilon must lie in (0, 1 - alpha/2)");
  if (!std::isfinite(e.x0)) throw Error(ErrorKind::InvalidParams, "x0 is not finite");
}

Coefficients recurrence(const EnsembleSpec& spec, long j, long n) {
  if (spec.family == Family::Custom) {
    if (!spec.custom) throw Error(ErrorKind::InvalidParams, "custom family without callback");
  }
  Scaled s = scaled_recurrence(spec, j, n);
  if (s.denom == 1.0) return {s.a_num, s.b_num};
  return {s.a_num / s.denom, s.b_num / s.denom};
}

long support_limit(const EnsembleSpec& spec, long n) {
  if (spec.family == Family::Krawtchouk) return krawtchouk_K(spec, n);
  if (spec.family == Family::Hahn) return long(hahn_params(spec, n).N);
  return -1;
}

double edge_location(const EnsembleSpec& spec, long n, Side side) {
  if (n < 2) throw Error(ErrorKind::OutOfDomain, "edge_location needs n >= 2");
  const Coefficients cn = recurrence(spec, n, n);
  const Coefficients cm = recurrence(spec, n - 1, n);
  const double r = 2 * std::sqrt(std::abs(cn.a * cm.a));
  return side == Side::Left ? cm.b - r : cm.b + r;
}

EdgeSpec make_edge(const EnsembleSpec& spec, long n, Side side, double alpha, double epsilon) {
  EdgeSpec e;
  e.side = side;
  e.alpha = alpha;
  e.epsilon = epsilon > 0 ? epsilon : default_epsilon(alpha);
  e.x0 = edge_location(spec, n, side);
  validate(e);
  return e;
}

bool moment_problem_determinate(const EnsembleSpec& spec) {
  if (spec.family == Family::Custom) throw Error(ErrorKind::Unsupported, "custom family has no closed form");
  if (spec.family == Family::Freud) return spec.param("gamma") >= 1.0;
  return true;
}

void jacobi_coefficients(const EnsembleSpec& spec, long N, long n, std::vector<double>& diag,
                         std::vector<double>& offdiag) {
  if (N < 1) throw Error(ErrorKind::OutOfDomain, "matrix size must be >= 1");
  const long lim = support_limit(spec, n);
  if (lim >= 0 && N - 1 > lim) throw Error(ErrorKind::OutOfDomain, "truncation exceeds the discrete support");
  diag.resize(N);
  offdiag.resize(N - 1);
  for (long j = 0; j < N; ++j) {
    Coefficients c = recurrence(spec, j, n);
    diag[j] = c.b;
    if (j > 0) offdiag[j - 1] = c.a;
  }
}

const HypothesisItem& HypothesisReport::item(const std::string& name) const {
  for (const auto& it : items)
    if (it.name == name) return it;
  throw Error(ErrorKind::InvalidParams, "no hypothesis item '" + name + "'");
}

bool HypothesisReport::all_pass() const {
  return std::all_of(items.begin(), items.end(), [](const HypothesisItem& i) { return i.pass; });
}

HypothesisThresholds default_thresholds(const EnsembleSpec& spec) {
  // ten times the value observed at n = 1000, alpha = 0.5 on the right edge, floored at 1
  HypothesisThresholds t;
  if (spec.family == Family::Custom) return t;
  try {
    EnsembleSpec copy = spec;
    EdgeSpec e = make_edge(copy, 1000, Side::Right, 0.5);
    HypothesisThresholds loose{1e300, 1e300, 1e300, 1e300};
    HypothesisReport r = check_hypotheses(copy, 1000, e, loose);
    auto pick = [](double v) { return std::max(1.0, 10.0 * v); };
    t.diff_a = pick(r.item("diff_a").value);
    t.diff_b = pick(r.item("diff_b").value);
    t.second = pick(r.item("second_difference_a").value);
    t.curvature = pick(r.item("curvature").value);
  } catch (const Error&) {
  }
  return t;
}

HypothesisReport check_hypotheses(const EnsembleSpec& spec, long n, const EdgeSpec& edge) {
  return check_hypotheses(spec, n, edge, default_thresholds(spec));
}

HypothesisReport check_hypotheses(const EnsembleSpec& spec, long n, const EdgeSpec& edge,
                                  const HypothesisThresholds& thr) {
  validate(edge);
  const double nd = double(n);
  const double half = std::pow(nd, edge.alpha / 2 + edge.epsilon);
  HypothesisReport rep;
  rep.n = n;
  rep.j_low = std::max(2L, long(std::ceil(nd - half)));
  rep.j_high = long(std::floor(nd + half));
  const long lim = support_limit(spec, n);
  if (lim >= 0 && rep.j_high > lim) throw Error(ErrorKind::OutOfDomain, "hypothesis window leaves the support");

  std::vector<Scaled> c;
  for (long j = rep.j_low - 2; j <= rep.j_high; ++j) c.push_back(scaled_recurrence(spec, j, n));
  auto at = [&](long j) -> const Scaled& { return c[size_t(j - (rep.j_low - 2))]; };

  double da = 0, db = 0, sec = 0, curv = 0;
  rep.min_abs_a = rep.min_abs_b = 1e300;
  rep.max_abs_a = rep.max_abs_b = 0;
  for (long j = rep.j_low; j <= rep.j_high; ++j) {
    const Scaled &s0 = at(j), &s1 = at(j - 1), &s2 = at(j - 2);
    const double d = s0.denom;
    const double x0s = edge.x0 * d;
    da = std::max(da, std::abs(s0.a_num - s1.a_num) / d);
    db = std::max(db, std::abs(s0.b_num - s1.b_num) / d);
    sec = std::max(sec, std::abs(s0.a_num * s2.a_num - s1.a_num * s1.a_num) / (d * d));
    const double q = ((s1.b_num - x0s - s0.a_num) * s2.a_num - (s2.b_num - x0s - s1.a_num) * s1.a_num) / (d * d);
    rep.curvature.push_back(q);
    curv = std::max(curv, std::abs(q));
    const double a = std::abs(s0.a_num / d), b = std::abs(s0.b_num / d);
    rep.min_abs_a = std::min(rep.min_abs_a, a);
    rep.max_abs_a = std::max(rep.max_abs_a, a);
    rep.min_abs_b = std::min(rep.min_abs_b, b);
    rep.max_abs_b = std::max(rep.max_abs_b, b);
  }
  const double a = edge.alpha, e = edge.epsilon;
  auto add = [&](const char* name, double v, double t) { rep.items.push_back({name, v, t, v <= t}); };
  add("diff_a", da * nd, thr.diff_a);
  add("diff_b", db * nd, thr.diff_b);
  add("second_difference_a", sec * std::pow(nd, a + e), thr.second);
  add("curvature", curv * std::pow(nd, 1.5 * a + e), thr.curvature);
  return rep;
}

EnsembleSpec ensemble_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorKind::Config, "ensemble must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (it.key() != "family" && it.key() != "params")
      throw Error(ErrorKind::Config, "unknown ensemble key '" + it.key() + "'");
  if (!j.contains("family") || !j["family"].is_string()) throw Error(ErrorKind::Config, "ensemble.family missing");
  const Family f = family_from_string(j["family"].get<std::string>());
  if (f == Family::Custom) throw Error(ErrorKind::Config, "custom family cannot be given in JSON");
  std::map<std::string, double> params;
  if (j.contains("params")) {
    if (!j["params"].is_object()) throw Error(ErrorKind::Config, "ensemble.params must be an object");
    for (auto it = j["params"].begin(); it != j["params"].end(); ++it) {
      if (it.value().is_boolean()) {
        params[it.key()] = it.value().get<bool>() ? 1.0 : 0.0;
      } else if (it.value().is_number()) {
        params[it.key()] = it.value().get<double>();
      } else {
        throw Error(ErrorKind::Config, "parameter '" + it.key() + "' must be a number");
      }
    }
  }
  try {
    return make_ensemble(f, params);
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, e.what());
  }
}

nlohmann::json to_json(const EnsembleSpec& spec) {
  nlohmann::json j;
  j["family"] = to_string(spec.family);
  j["params"] = nlohmann::json::object();
  for (const auto& [k, v] : spec.params) j["params"][k] = v;
  return j;
}

nlohmann::json to_json(const HypothesisReport& r) {
  nlohmann::json j;
  j["schema"] = 1;
  j["n"] = r.n;
  j["window"] = {r.j_low, r.j_high};
  j["min_abs_a"] = r.min_abs_a;
  j["max_abs_a"] = r.max_abs_a;
  j["min_abs_b"] = r.min_abs_b;
  j["max_abs_b"] = r.max_abs_b;
  j["items"] = nlohmann::json::array();
  for (const auto& it : r.items)
    j["items"].push_back({{"name", it.name}, {"value", it.value}, {"threshold", it.threshold}, {"pass", it.pass}});
  j["all_pass"] = r.all_pass();
  return j;
}

}  // namespace ope
