#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ope_meso/ensemble.hpp"
#include "ope_meso/limit.hpp"

namespace ope {

struct SampleBatch {
  EnsembleSpec ensemble;
  long n = 0;
  std::uint64_t seed = 0;
  long count = 0;
  std::vector<double> eigenvalues;  // count rows of n sorted values

  const double* spectrum(long i) const { return eigenvalues.data() + i * n; }
};

// Hermite: tridiagonal model scaled to [-2, 2]; Laguerre: bidiagonal model with weight x^gamma e^{-nx}
SampleBatch sample_spectra(const EnsembleSpec& ensemble, long n, long count, std::uint64_t seed, int threads = 0);

// rows appended in order; headers must agree on ensemble and n
SampleBatch concat(const std::vector<SampleBatch>& batches);

void write_batch(const SampleBatch& batch, const std::string& path);
SampleBatch read_batch(const std::string& path);

struct EmpiricalStatistic {
  long count = 0;
  double mean = 0.0;
  double variance = 0.0;   // unbiased
  double std_error = 0.0;  // of the variance
  double skewness = 0.0;
};

EmpiricalStatistic empirical_statistic(const SampleBatch& batch, const RealFunction& f, const EdgeSpec& edge,
                                       int threads = 0);

nlohmann::json to_json(const EmpiricalStatistic& s);

}  // namespace ope
