#pragma once

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace ope {

enum class Family {
  Chebyshev2,
  ModifiedJacobi,
  Laguerre,
  Hermite,
  Freud,
  TricomiCarlitz,
  Krawtchouk,
  Hahn,
  LogSingular,
  Custom
};

enum class Side { Left, Right };

const char* to_string(Family f);
const char* to_string(Side s);
Family family_from_string(const std::string& s);
Side side_from_string(const std::string& s);

struct Coefficients {
  double a = 0.0;
  double b = 0.0;
};

// (j, n) -> (a_{j,n}, b_{j,n})
using CoefficientCallback = std::function<Coefficients(long, long)>;

struct EnsembleSpec {
  Family family = Family::Chebyshev2;
  std::map<std::string, double> params;
  bool varying = false;
  CoefficientCallback custom;

  double param(const std::string& key) const;
  double param_or(const std::string& key, double fallback) const;
};

EnsembleSpec make_ensemble(Family f, std::map<std::string, double> params = {});
EnsembleSpec make_custom(CoefficientCallback cb, bool varying = true);

// throws InvalidParams
void validate(const EnsembleSpec& spec);

struct EdgeSpec {
  Side side = Side::Right;
  double x0 = 0.0;
  double alpha = 0.5;
  double epsilon = 0.1;
};

void validate(const EdgeSpec& edge);
double default_epsilon(double alpha);

// a_0 is returned as 0, so j = 0 yields b_0
Coefficients recurrence(const EnsembleSpec& spec, long j, long n);

// Largest valid index for discrete families, or -1 when unbounded.
long support_limit(const EnsembleSpec& spec, long n);

double edge_location(const EnsembleSpec& spec, long n, Side side);
EdgeSpec make_edge(const EnsembleSpec& spec, long n, Side side, double alpha, double epsilon = -1.0);

// Only for Freud; metadata.
bool moment_problem_determinate(const EnsembleSpec& spec);

// diag b_0..b_{N-1}, offdiag a_1..a_{N-1}
void jacobi_coefficients(const EnsembleSpec& spec, long N, long n, std::vector<double>& diag,
                         std::vector<double>& offdiag);

struct HypothesisItem {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = true;
};

struct HypothesisReport {
  long n = 0;
  long j_low = 0;
  long j_high = 0;
  std::vector<HypothesisItem> items;
  // the curvature quantity per window index, unscaled
  std::vector<double> curvature;
  double min_abs_a = 0.0;
  double max_abs_a = 0.0;
  double min_abs_b = 0.0;
  double max_abs_b = 0.0;

  const HypothesisItem& item(const std::string& name) const;
  bool all_pass() const;
};

struct HypothesisThresholds {
  double diff_a = 10.0;
  double diff_b = 10.0;
  double second = 10.0;
  double curvature = 10.0;
};

HypothesisThresholds default_thresholds(const EnsembleSpec& spec);

HypothesisReport check_hypotheses(const EnsembleSpec& spec, long n, const EdgeSpec& edge,
                                  const HypothesisThresholds& thr);
HypothesisReport check_hypotheses(const EnsembleSpec& spec, long n, const EdgeSpec& edge);

EnsembleSpec ensemble_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EnsembleSpec& spec);
nlohmann::json to_json(const HypothesisReport& r);

}  // namespace ope
