#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "ope_meso/cumulant.hpp"
#include "ope_meso/ensemble.hpp"

namespace ope {

using RealFunction = std::function<double(double)>;

enum class VarianceMethod { Quadrature, Residue };
std::string to_string(VarianceMethod m);

struct LimitVariance {
  double value = 0.0;
  VarianceMethod method = VarianceMethod::Quadrature;
  Side side = Side::Right;
  double est_error = 0.0;
};

nlohmann::json to_json(const LimitVariance& v);

struct QuadratureOptions {
  double halfwidth = std::numeric_limits<double>::infinity();
  double tol = 1e-10;
  long max_cells = 400000;
  // points in x where the integrand may have kinks; cells are split there initially
  std::vector<double> breakpoints;
};

// (1/8pi^2) iint ((g(x)-g(y))/(x-y))^2 dx dy over [-L, L]^2 with x = tan(theta)
double edge_double_integral(const RealFunction& g, const QuadratureOptions& opt, double* est_error = nullptr);

// g(x) = f(x^2) on the left, f(-x^2) on the right
LimitVariance sigma2_quadrature(const RealFunction& f, Side side, double halfwidth = std::numeric_limits<double>::infinity(),
                                double tol = 1e-10);
LimitVariance sigma2_residue(const ResolventTestFunction& f, Side side);

// iint ((x+y)/(sqrt(x^4+1) sqrt(y^4+1)))^2 dx dy over [-L, L]^2
double pi_squared_check(double halfwidth = std::numeric_limits<double>::infinity(), double tol = 1e-10);

// nested grids: level k has base_points * 2^k + 1 nodes x = tan(theta), theta uniform in [-atan L, atan L]
struct GridSpec {
  double halfwidth = 40.0;
  int base_points = 500;
  int level = 2;
  long size() const { return long(base_points) * (1L << level) + 1; }
  std::vector<double> nodes() const;
};

double weighted_lipschitz_norm(const RealFunction& f, const GridSpec& grid = {});

struct FitResult {
  ResolventTestFunction h;
  double achieved_norm = 0.0;  // ||f - h||_{L_w}
  double condition = 0.0;
};

FitResult fit_resolvent_approximation(const RealFunction& f, int M, double pole_height, double support_low,
                                      double support_high, const GridSpec& grid = {});

// kinks: points in the argument of f where f' may jump (support ends, hat peaks)
LimitVariance sigma2_for_c1(const RealFunction& f, Side side, const std::vector<double>& kinks = {},
                            double tol = 1e-9);

// Cauchy-Schwarz: |sigma_f^2 - sigma_h^2| <= (1/8) ||f-h|| ||f+h||
double variance_difference_bound(double diff_norm, double sum_norm);

RealFunction as_function(const ResolventTestFunction& f);
RealFunction hat_function(double low, double high);
RealFunction smooth_bump(double low, double high);

std::string fit_to_csv(const FitResult& fit);

}  // namespace ope
