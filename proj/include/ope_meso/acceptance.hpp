#pragma once

#include <string>
#include <vector>

namespace ope {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct AcceptanceOptions {
  // where the Chebyshev sweep shared by criteria 4 and 5 is cached; empty disables caching
  std::string cache_dir = ".";
  unsigned long seed = 20261018;
};

constexpr int kCriterionCount = 12;

CriterionResult run_criterion(int id, const AcceptanceOptions& opt = {});
std::string format_line(const CriterionResult& r);

// runs the listed criteria (all when empty), prints one line each, returns the number of failures
int run_acceptance(const std::vector<int>& ids, const AcceptanceOptions& opt, std::ostream& out);

}  // namespace ope
