#include "ope_meso/sampler.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "ope_meso/errors.hpp"
#include "ope_meso/parallel.hpp"

namespace ope {

namespace {

constexpr char kMagic[8] = {'O', 'P', 'E', 'M', 'S', 'M', 'P', 'L'};
constexpr std::uint32_t kVersion = 1;

std::mt19937_64 stream_for(std::uint64_t seed, long index) {
  const auto idx = std::uint64_t(index);
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(idx), std::uint32_t(idx >> 32)};
  return std::mt19937_64(seq);
}

// chi_k / sqrt(2)
double half_chi(std::mt19937_64& rng, double k) {
  std::gamma_distribution<double> g(k / 2, 1.0);
  return std::sqrt(g(rng));
}

void hermite_sample(std::mt19937_64& rng, long n, double* out) {
  Eigen::VectorXd d(n), e(n > 1 ? n - 1 : 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double s = 1 / std::sqrt(double(n));
  for (long i = 0; i < n; ++i) d(i) = normal(rng) * s;
  for (long k = 1; k < n; ++k) e(k - 1) = half_chi(rng, 2.0 * double(n - k)) * s;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(d, e, Eigen::EigenvaluesOnly);
  std::memcpy(out, es.eigenvalues().data(), sizeof(double) * size_t(n));
}

void laguerre_sample(std::mt19937_64& rng, long n, double gamma, double* out) {
  std::vector<double> bd(static_cast<size_t>(n)), be(static_cast<size_t>(n));
  for (long i = 1; i <= n; ++i) {
    bd[size_t(i - 1)] = half_chi(rng, 2.0 * (double(n - i + 1) + gamma));
    if (i < n) be[size_t(i - 1)] = half_chi(rng, 2.0 * double(n - i));
  }
  Eigen::VectorXd d(n), e(n > 1 ? n - 1 : 0);
  const double s = 1 / double(n);
  for (long i = 0; i < n; ++i) {
    d(i) = (bd[size_t(i)] * bd[size_t(i)] + (i > 0 ? be[size_t(i - 1)] * be[size_t(i - 1)] : 0.0)) * s;
    if (i + 1 < n) e(i) = be[size_t(i)] * bd[size_t(i)] * s;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(d, e, Eigen::EigenvaluesOnly);
  std::memcpy(out, es.eigenvalues().data(), sizeof(double) * size_t(n));
}

template <class T>
void put(std::ofstream& os, T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    os.write(reinterpret_cast<const char*>(b), sizeof(T));
  } else {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
}

template <class T>
T get(std::ifstream& is) {
  unsigned char b[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof(T))) throw Error(ErrorKind::Config, "truncated sample file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

}  // namespace

SampleBatch sample_spectra(const EnsembleSpec& ensemble, long n, long count, std::uint64_t seed, int threads) {
  validate(ensemble);
  if (ensemble.family != Family::Hermite && ensemble.family != Family::Laguerre)
    throw Error(ErrorKind::Unsupported, std::string("no matrix model for family ") + to_string(ensemble.family));
  if (n < 1 || n > 2000) throw Error(ErrorKind::InvalidParams, "sample size n must lie in [1, 2000]");
  if (count < 1 || count > 1000000) throw Error(ErrorKind::InvalidParams, "sample count must lie in [1, 1e6]");
  SampleBatch b;
  b.ensemble = ensemble;
  b.n = n;
  b.seed = seed;
  b.count = count;
  b.eigenvalues.resize(size_t(n) * size_t(count));
  const bool hermite = ensemble.family == Family::Hermite;
  const double gamma = hermite ? 0.0 : ensemble.param_or("gamma", 0.0);
  parallel_for(count, resolve_threads(threads), [&](long lo, long hi) {
    for (long i = lo; i < hi; ++i) {
      auto rng = stream_for(seed, i);
      double* out = b.eigenvalues.data() + i * n;
      if (hermite)
        hermite_sample(rng, n, out);
      else
        laguerre_sample(rng, n, gamma, out);
    }
  });
  return b;
}

SampleBatch concat(const std::vector<SampleBatch>& batches) {
  if (batches.empty()) throw Error(ErrorKind::InvalidParams, "nothing to concatenate");
  SampleBatch out = batches.front();
  for (size_t i = 1; i < batches.size(); ++i) {
    const auto& b = batches[i];
    if (b.n != out.n || b.ensemble.family != out.ensemble.family || b.ensemble.params != out.ensemble.params)
      throw Error(ErrorKind::Config, "sample batches disagree on ensemble or n");
    out.eigenvalues.insert(out.eigenvalues.end(), b.eigenvalues.begin(), b.eigenvalues.end());
    out.count += b.count;
  }
  return out;
}

void write_batch(const SampleBatch& batch, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::Config, "cannot open " + path + " for writing");
  os.write(kMagic, 8);
  put<std::uint32_t>(os, kVersion);
  put<std::uint32_t>(os, std::uint32_t(batch.ensemble.family));
  put<double>(os, batch.ensemble.param_or("gamma", 0.0));
  put<std::uint64_t>(os, std::uint64_t(batch.n));
  put<std::uint64_t>(os, std::uint64_t(batch.count));
  put<std::uint64_t>(os, batch.seed);
  for (double v : batch.eigenvalues) put<double>(os, v);
  if (!os) throw Error(ErrorKind::Config, "write to " + path + " failed");
}

SampleBatch read_batch(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::Config, "cannot open " + path);
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw Error(ErrorKind::Config, path + " is not a sample file");
  if (get<std::uint32_t>(is) != kVersion) throw Error(ErrorKind::Config, "unsupported sample file version");
  const auto fam = Family(get<std::uint32_t>(is));
  const double gamma = get<double>(is);
  SampleBatch b;
  b.ensemble = fam == Family::Laguerre ? make_ensemble(fam, {{"gamma", gamma}}) : make_ensemble(fam);
  b.n = long(get<std::uint64_t>(is));
  b.count = long(get<std::uint64_t>(is));
  b.seed = get<std::uint64_t>(is);
  b.eigenvalues.resize(size_t(b.n) * size_t(b.count));
  for (auto& v : b.eigenvalues) v = get<double>(is);
  return b;
}

EmpiricalStatistic empirical_statistic(const SampleBatch& batch, const RealFunction& f, const EdgeSpec& edge,
                                       int threads) {
  if (batch.count < 1) throw Error(ErrorKind::InvalidParams, "empty batch");
  const double na = std::pow(double(batch.n), edge.alpha);
  std::vector<double> X(static_cast<size_t>(batch.count));
  parallel_for(batch.count, resolve_threads(threads), [&](long lo, long hi) {
    for (long i = lo; i < hi; ++i) {
      const double* s = batch.spectrum(i);
      double sum = 0;
      for (long k = 0; k < batch.n; ++k) sum += f(na * (s[k] - edge.x0));
      X[size_t(i)] = sum;
    }
  });
  EmpiricalStatistic st;
  const double N = double(batch.count);
  st.count = batch.count;
  double mean = 0;
  for (double x : X) mean += x;
  mean /= N;
  double m2 = 0, m3 = 0, m4 = 0;
  for (double x : X) {
    const double d = x - mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= N;
  m3 /= N;
  m4 /= N;
  st.mean = mean;
  st.variance = batch.count > 1 ? m2 * N / (N - 1) : 0.0;
  st.skewness = m2 > 0 ? m3 / std::pow(m2, 1.5) : 0.0;
  if (batch.count > 3) st.std_error = std::sqrt(std::max(0.0, (m4 - (N - 3) / (N - 1) * m2 * m2) / N));
  return st;
}

nlohmann::json to_json(const EmpiricalStatistic& s) {
  return {{"count", s.count},
          {"mean", s.mean},
          {"variance", s.variance},
          {"std_error", s.std_error},
          {"skewness", s.skewness}};
}

}  // namespace ope
