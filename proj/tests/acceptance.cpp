#include <CLI11.hpp>
#include <iostream>

#include "ope_meso/acceptance.hpp"

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> ids;
  ope::AcceptanceOptions opt;
  app.add_option("--criterion", ids, "criterion ids, all when omitted")->delimiter(',')->check(CLI::Range(1, 12));
  app.add_option("--cache-dir", opt.cache_dir, "directory for the shared Chebyshev sweep");
  app.add_option("--seed", opt.seed);
  CLI11_PARSE(app, argc, argv);
  return ope::run_acceptance(ids, opt, std::cout) == 0 ? 0 : 1;
}
