#pragma once

#include <complex>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ope_meso/ensemble.hpp"

namespace ope {

// f(x) = Im sum_r d_r/(x - lambda_r) with Im lambda_r > 0. Complex d_r are allowed so that
// Re-type terms fit the same form: Re(d/(x-l)) = Im(i d/(x-l)).
class ResolventTestFunction {
 public:
  struct Term {
    std::complex<double> c;
    std::complex<double> eta;
  };

  ResolventTestFunction() = default;
  ResolventTestFunction(std::vector<std::complex<double>> poles, std::vector<std::complex<double>> weights);

  const std::vector<std::complex<double>>& poles() const { return poles_; }
  const std::vector<std::complex<double>>& weights() const { return weights_; }
  size_t size() const { return poles_.size(); }

  // (c_r, eta_r), r = 1..2M, c_r = d_r/(2i), c_{r+M} = -conj(d_r)/(2i), eta_{r+M} = conj(lambda_r)
  std::vector<Term> expanded() const;

  double operator()(double x) const;
  double derivative(double x) const;
  // complex evaluation of sum_r c_r/(x - eta_r)
  std::complex<double> expanded_value(double x) const;

  ResolventTestFunction reflected() const;      // x -> f(-x)
  ResolventTestFunction dilated(double s) const;  // x -> f(s x), s > 0
  ResolventTestFunction operator+(const ResolventTestFunction& o) const;
  ResolventTestFunction scaled(double k) const;

  std::string to_string() const;

 private:
  std::vector<std::complex<double>> poles_;
  std::vector<std::complex<double>> weights_;
};

ResolventTestFunction im_resolvent(std::complex<double> pole, double weight = 1.0);
ResolventTestFunction re_resolvent(std::complex<double> pole, double weight = 1.0);

// "im:1/(x-i)+re:0.5/(x-(1+2i))"
ResolventTestFunction parse_test_function(const std::string& text);
std::complex<double> parse_complex(const std::string& text);

struct Window {
  long low = 1;   // first index kept in the coupled block (1 = one-sided truncation)
  long high = 0;  // last index
};

Window default_window(long n, double alpha, double epsilon, int m_max);

struct FMatrix {
  Eigen::MatrixXd F;       // real symmetric part
  double max_imag = 0.0;   // largest discarded imaginary part
  double norm_bound = 0.0; // sum_r |c_r / Im eta_r| n^alpha
  Window window;
};

// sum_r c_r (J_window - x0 - eta_r/n^alpha)^{-1}; indices below window.low form an identity tail
FMatrix build_F(const EnsembleSpec& spec, long n, const EdgeSpec& edge, const ResolventTestFunction& f,
                const Window& window);

class CumulantEngine {
 public:
  CumulantEngine(const Eigen::MatrixXd& F, long n, int m_max);
  // C_m^{(n)}(F), 1 <= m <= m_max
  double cumulant(int m);
  double trace_power(int m) const;  // Tr(F^m P_n)

 private:
  double trace_sequence(const std::vector<int>& seq);
  const Eigen::MatrixXd& product(const std::vector<int>& seq);

  long n_;
  int m_max_;
  std::vector<Eigen::MatrixXd> B_;  // B_[l] = P F^l P
  std::map<std::vector<int>, Eigen::MatrixXd> memo_;
  std::map<std::vector<int>, double> trace_memo_;
};

double cumulant(const Eigen::MatrixXd& F, long n, int m);

struct C2Triangle {
  double composition = 0.0;
  double trace_form = 0.0;  // Tr(F Q_n F P_n)
  double commutator = 0.0;  // 1/2 ||[F, P_n]||_2^2
  double max_rel_spread() const;
};

C2Triangle c2_three_ways(const Eigen::MatrixXd& F, long n);

double operator_norm_estimate(const Eigen::MatrixXd& F, int iterations = 50);

struct BoundReport {
  int m = 0;
  double lhs = 0.0;  // |C_m|
  double rhs = 0.0;  // sqrt(2/pi) m! m^{3/2} ||F||^{m-2} e^m C_2
  double op_norm = 0.0;
  double c2 = 0.0;
  bool holds = true;
  double slack() const { return lhs > 0 ? rhs / lhs : std::numeric_limits<double>::infinity(); }
};

BoundReport cumulant_bound_check(const Eigen::MatrixXd& F, long n, int m);

double kahan_trace_product(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y);

struct CumulantReport {
  long n = 0;
  double alpha = 0.0;
  double x0 = 0.0;
  std::map<int, double> scaled_cumulants;  // m -> n^{-m alpha} C_m
  Window window;
  double op_norm_estimate = 0.0;
};

struct SweepOptions {
  Side side = Side::Right;
  double alpha = 0.5;
  double epsilon = -1.0;           // default_epsilon(alpha) when negative
  std::optional<double> x0;        // default: edge_location at each n
  double x0_shift = 0.0;           // added to x0
  long margin = 0;                 // 0: m_max-dependent default
  long low_margin = -1;            // >= 0 enables the two-sided truncation
};

CumulantReport cumulant_report(const EnsembleSpec& spec, long n, const ResolventTestFunction& f, int m_max,
                               const SweepOptions& opt);
std::vector<CumulantReport> convergence_sweep(const EnsembleSpec& spec, const ResolventTestFunction& f,
                                              const std::vector<long>& n_list, int m_max, const SweepOptions& opt);

std::string to_csv(const std::vector<CumulantReport>& reports);
nlohmann::json to_json(const std::vector<CumulantReport>& reports);
std::vector<CumulantReport> reports_from_csv(const std::string& text);

}  // namespace ope
