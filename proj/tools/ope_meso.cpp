#include <CLI11.hpp>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "ope_meso/acceptance.hpp"
#include "ope_meso/cumulant.hpp"
#include "ope_meso/errors.hpp"
#include "ope_meso/limit.hpp"
#include "ope_meso/parallel.hpp"
#include "ope_meso/sampler.hpp"
#include "ope_meso/tridiagonal.hpp"

#ifndef OPE_GIT_DESCRIBE
#define OPE_GIT_DESCRIBE "unknown"
#endif

namespace {

using nlohmann::json;

struct RunConfig {
  std::string command;
  std::string ensemble = "chebyshev2";
  std::vector<std::string> params;  // key=value
  std::string side = "right";
  double alpha = 0.5;
  double epsilon = -1.0;
  std::optional<double> x0;
  double x0_shift = 0.0;
  std::vector<long> n_list = {500};
  int m_max = 4;
  long margin = 0;
  long low_margin = -1;
  std::string f = "im:1/(x-i)";
  std::string output;
  std::string format = "csv";
  std::string manifest;
  std::uint64_t seed = 1;
  int threads = 0;
  // variance-limit
  std::string method = "both";
  double tol = 1e-10;
  double halfwidth = std::numeric_limits<double>::infinity();
  // decay
  double n_alpha = 100.0;
  long size = 4001;
  long ref_row = 0;
  double floor_decades = 11.0;
  // sample
  long count = 1000;
  std::string save;
  std::vector<std::string> from;
  // fit
  std::string shape = "bump";
  std::vector<double> support = {-1.0, 1.0};
  int poles = 20;
  double height = 0.25;
  // selftest
  std::vector<int> criteria;
};

json to_json(const RunConfig& c) {
  json j;
  j["command"] = c.command;
  j["ensemble"] = c.ensemble;
  j["params"] = c.params;
  j["side"] = c.side;
  j["alpha"] = c.alpha;
  j["epsilon"] = c.epsilon;
  j["x0"] = c.x0 ? json(*c.x0) : json(nullptr);
  j["x0_shift"] = c.x0_shift;
  j["n"] = c.n_list;
  j["m_max"] = c.m_max;
  j["margin"] = c.margin;
  j["low_margin"] = c.low_margin;
  j["f"] = c.f;
  j["output"] = c.output;
  j["format"] = c.format;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["method"] = c.method;
  j["tol"] = c.tol;
  j["halfwidth"] = std::isinf(c.halfwidth) ? json(nullptr) : json(c.halfwidth);
  j["n_alpha"] = c.n_alpha;
  j["size"] = c.size;
  j["ref_row"] = c.ref_row;
  j["floor_decades"] = c.floor_decades;
  j["count"] = c.count;
  j["save"] = c.save;
  j["from"] = c.from;
  j["shape"] = c.shape;
  j["support"] = c.support;
  j["poles"] = c.poles;
  j["height"] = c.height;
  j["criteria"] = c.criteria;
  return j;
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  const json keys = to_json(c);
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!keys.contains(it.key())) throw ope::Error(ope::ErrorKind::Config, "unknown config key '" + it.key() + "'");
  try {
    auto get = [&](const char* k, auto& dst) {
      if (j.contains(k)) j.at(k).get_to(dst);
    };
    get("command", c.command);
    get("ensemble", c.ensemble);
    get("params", c.params);
    get("side", c.side);
    get("alpha", c.alpha);
    get("epsilon", c.epsilon);
    if (j.contains("x0") && !j["x0"].is_null()) c.x0 = j["x0"].get<double>();
    get("x0_shift", c.x0_shift);
    get("n", c.n_list);
    get("m_max", c.m_max);
    get("margin", c.margin);
    get("low_margin", c.low_margin);
    get("f", c.f);
    get("output", c.output);
    get("format", c.format);
    get("seed", c.seed);
    get("threads", c.threads);
    get("method", c.method);
    get("tol", c.tol);
    if (j.contains("halfwidth") && !j["halfwidth"].is_null()) c.halfwidth = j["halfwidth"].get<double>();
    get("n_alpha", c.n_alpha);
    get("size", c.size);
    get("ref_row", c.ref_row);
    get("floor_decades", c.floor_decades);
    get("count", c.count);
    get("save", c.save);
    get("from", c.from);
    get("shape", c.shape);
    get("support", c.support);
    get("poles", c.poles);
    get("height", c.height);
    get("criteria", c.criteria);
  } catch (const json::exception& e) {
    throw ope::Error(ope::ErrorKind::Config, std::string("config: ") + e.what());
  }
  return c;
}

ope::EnsembleSpec ensemble_of(const RunConfig& c) {
  json j;
  j["family"] = c.ensemble;
  j["params"] = json::object();
  for (const auto& p : c.params) {
    const auto eq = p.find('=');
    if (eq == std::string::npos) throw ope::Error(ope::ErrorKind::Config, "parameter '" + p + "' must be key=value");
    try {
      j["params"][p.substr(0, eq)] = std::stod(p.substr(eq + 1));
    } catch (const std::logic_error&) {
      throw ope::Error(ope::ErrorKind::Config, "parameter '" + p + "' has a non-numeric value");
    }
  }
  return ope::ensemble_from_json(j);
}

std::string full(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

// writes to the output path or stdout; returns the path written
std::string emit(const RunConfig& c, const std::string& text) {
  if (c.output.empty() || c.output == "-") {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return "";
  }
  std::ofstream os(c.output);
  if (!os) throw ope::Error(ope::ErrorKind::Config, "cannot write " + c.output);
  os << text;
  if (!text.empty() && text.back() != '\n') os << '\n';
  return c.output;
}

std::string dump(const json& j) { return j.dump(2); }

void check_common(const RunConfig& c) {
  if (c.format != "csv" && c.format != "json") throw ope::Error(ope::ErrorKind::Config, "format must be csv or json");
}

std::vector<std::string> run_cumulants(const RunConfig& c) {
  check_common(c);
  if (c.n_list.empty()) throw ope::Error(ope::ErrorKind::Config, "n list is empty");
  for (size_t i = 1; i < c.n_list.size(); ++i)
    if (c.n_list[i] <= c.n_list[i - 1]) throw ope::Error(ope::ErrorKind::Config, "n list must be ascending");
  if (c.m_max < 2 || c.m_max > 6) throw ope::Error(ope::ErrorKind::Config, "m_max must lie in [2, 6]");
  ope::SweepOptions so;
  so.side = ope::side_from_string(c.side);
  so.alpha = c.alpha;
  so.epsilon = c.epsilon;
  so.x0 = c.x0;
  so.x0_shift = c.x0_shift;
  so.margin = c.margin;
  so.low_margin = c.low_margin;
  const auto reps = ope::convergence_sweep(ensemble_of(c), ope::parse_test_function(c.f), c.n_list, c.m_max, so);
  return {emit(c, c.format == "csv" ? ope::to_csv(reps) : dump(ope::to_json(reps)))};
}

std::vector<std::string> run_variance(const RunConfig& c) {
  const auto f = ope::parse_test_function(c.f);
  const auto side = ope::side_from_string(c.side);
  json out;
  out["schema"] = 1;
  out["f"] = f.to_string();
  if (c.method != "quadrature" && c.method != "residue" && c.method != "both")
    throw ope::Error(ope::ErrorKind::Config, "method must be quadrature, residue or both");
  if (c.method != "residue") {
    const auto q = ope::sigma2_quadrature(ope::as_function(f), side, c.halfwidth, c.tol);
    out["quadrature"] = ope::to_json(q);
    out["value"] = q.value;
  }
  if (c.method != "quadrature") {
    const auto r = ope::sigma2_residue(f, side);
    out["residue"] = ope::to_json(r);
    if (!out.contains("value")) out["value"] = r.value;
  }
  return {emit(c, dump(out))};
}

std::vector<std::string> run_decay(const RunConfig& c) {
  check_common(c);
  if (c.size < 3) throw ope::Error(ope::ErrorKind::Config, "matrix size must be at least 3");
  const auto spec = ensemble_of(c);
  const long n = c.n_list.front();
  const double x0 = c.x0 ? *c.x0 : ope::edge_location(spec, n, ope::side_from_string(c.side));
  const auto eta = ope::parse_complex(c.f.rfind("eta:", 0) == 0 ? c.f.substr(4) : "i");
  const auto J = ope::jacobi_matrix(spec, c.size, n, x0 + eta / c.n_alpha);
  const long ref = c.ref_row > 0 ? c.ref_row : (c.size + 1) / 2;
  const auto fit = ope::decay_profile(J, ref, 0, c.floor_decades);
  if (c.format == "csv") {
    std::ostringstream os;
    os << "offset,log_abs\n";
    for (long k = 1; k <= long(J.size()); ++k)
      if (k >= ref) os << (k - ref) << ',' << full(fit.log_abs[size_t(k - 1)]) << '\n';
    return {emit(c, os.str())};
  }
  json out;
  out["schema"] = 1;
  out["x0"] = x0;
  out["n_alpha"] = c.n_alpha;
  out["ref_row"] = ref;
  out["slope"] = fit.slope;
  out["intercept"] = fit.intercept;
  out["rate"] = fit.rate;
  out["points"] = fit.offsets.size();
  return {emit(c, dump(out))};
}

std::vector<std::string> run_hypotheses(const RunConfig& c) {
  const auto spec = ensemble_of(c);
  const long n = c.n_list.front();
  ope::EdgeSpec e = ope::make_edge(spec, n, ope::side_from_string(c.side), c.alpha, c.epsilon);
  if (c.x0) e.x0 = *c.x0;
  json out = ope::to_json(ope::check_hypotheses(spec, n, e));
  out["schema"] = 1;
  out["x0"] = e.x0;
  return {emit(c, dump(out))};
}

std::vector<std::string> run_sample(const RunConfig& c) {
  std::vector<ope::SampleBatch> batches;
  if (!c.from.empty()) {
    for (const auto& p : c.from) batches.push_back(ope::read_batch(p));
  } else {
    batches.push_back(ope::sample_spectra(ensemble_of(c), c.n_list.front(), c.count, c.seed, c.threads));
  }
  const auto batch = ope::concat(batches);
  std::vector<std::string> written;
  if (!c.save.empty()) {
    ope::write_batch(batch, c.save);
    written.push_back(c.save);
  }
  ope::EdgeSpec e = ope::make_edge(batch.ensemble, batch.n, ope::side_from_string(c.side), c.alpha, c.epsilon);
  if (c.x0) e.x0 = *c.x0;
  e.x0 += c.x0_shift;
  const auto f = ope::parse_test_function(c.f);
  json out = ope::to_json(ope::empirical_statistic(batch, ope::as_function(f), e, c.threads));
  out["schema"] = 1;
  out["n"] = batch.n;
  out["x0"] = e.x0;
  out["alpha"] = e.alpha;
  out["seed"] = batch.seed;
  written.push_back(emit(c, dump(out)));
  return written;
}

std::vector<std::string> run_fit(const RunConfig& c) {
  check_common(c);
  if (c.support.size() != 2) throw ope::Error(ope::ErrorKind::Config, "support needs two values");
  ope::RealFunction f;
  if (c.shape == "bump")
    f = ope::smooth_bump(c.support[0], c.support[1]);
  else if (c.shape == "hat")
    f = ope::hat_function(c.support[0], c.support[1]);
  else
    throw ope::Error(ope::ErrorKind::Config, "shape must be bump or hat");
  const auto fit = ope::fit_resolvent_approximation(f, c.poles, c.height, c.support[0], c.support[1]);
  if (c.format == "csv") return {emit(c, ope::fit_to_csv(fit))};
  json out;
  out["schema"] = 1;
  out["achieved_norm"] = fit.achieved_norm;
  out["target_norm"] = ope::weighted_lipschitz_norm(f);
  out["condition"] = fit.condition;
  out["f"] = fit.h.to_string();
  return {emit(c, dump(out))};
}

int run_selftest(const RunConfig& c) {
  ope::AcceptanceOptions opt;
  opt.cache_dir = "";
  return ope::run_acceptance(c.criteria, opt, std::cout) == 0 ? 0 : 1;
}

std::string iso_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

int execute(RunConfig c) {
  ope::set_default_threads(ope::resolve_threads(c.threads));
  const std::string started = iso_now();
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::string> outputs;
  int status = 0;
  if (c.command == "cumulants")
    outputs = run_cumulants(c);
  else if (c.command == "variance-limit")
    outputs = run_variance(c);
  else if (c.command == "decay")
    outputs = run_decay(c);
  else if (c.command == "hypotheses")
    outputs = run_hypotheses(c);
  else if (c.command == "sample")
    outputs = run_sample(c);
  else if (c.command == "fit")
    outputs = run_fit(c);
  else if (c.command == "selftest")
    status = run_selftest(c);
  else
    throw ope::Error(ope::ErrorKind::Config, "unknown command '" + c.command + "'");

  json m;
  m["schema"] = 1;
  m["config"] = to_json(c);
  m["git_describe"] = OPE_GIT_DESCRIBE;
  m["started_at"] = started;
  m["wallclock_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  m["threads"] = ope::default_threads();
  m["outputs"] = json::array();
  for (const auto& o : outputs)
    if (!o.empty()) m["outputs"].push_back(o);
  m["exit_status"] = status;
  std::string path = c.manifest;
  if (path.empty()) path = c.output.empty() || c.output == "-" ? "ope-meso-" + c.command + ".manifest.json" : c.output + ".manifest.json";
  std::ofstream os(path);
  if (!os) throw ope::Error(ope::ErrorKind::Config, "cannot write manifest " + path);
  os << m.dump(2) << '\n';
  return status;
}

int exit_code(ope::ErrorKind k) {
  switch (k) {
    case ope::ErrorKind::Singular:
    case ope::ErrorKind::NoConvergence:
    case ope::ErrorKind::IllConditioned:
    case ope::ErrorKind::NotApplicable:
      return 1;
    default:
      return 2;
  }
}

void add_ensemble(CLI::App* sub, RunConfig& c) {
  sub->add_option("--ensemble", c.ensemble, "family name");
  sub->add_option("--param", c.params, "family parameter key=value, repeatable");
}

void add_edge(CLI::App* sub, RunConfig& c) {
  sub->add_option("--side", c.side, "left or right");
  sub->add_option("--alpha", c.alpha, "scale exponent in (0, 2)");
  sub->add_option("--epsilon", c.epsilon, "window exponent slack, default from alpha");
  sub->add_option("--x0", c.x0, "edge center, default the finite-n edge");
  sub->add_option("--x0-shift", c.x0_shift, "added to the edge center");
}

void add_output(CLI::App* sub, RunConfig& c) {
  sub->add_option("--output,-o", c.output, "output file, stdout when omitted");
  sub->add_option("--format", c.format, "csv or json");
  sub->add_option("--manifest", c.manifest, "manifest path");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mesoscopic edge cumulants of orthogonal polynomial ensembles"};
  app.require_subcommand(1);
  RunConfig c;
  std::string replay_path;
  app.add_option("--threads", c.threads, "worker threads, falls back to OPE_MESO_THREADS");

  auto* cum = app.add_subcommand("cumulants", "scaled cumulant sweep over n");
  add_ensemble(cum, c);
  add_edge(cum, c);
  add_output(cum, c);
  cum->add_option("--n", c.n_list, "ascending list of n")->delimiter(',');
  cum->add_option("--m-max", c.m_max, "highest cumulant order, 2..6");
  cum->add_option("--f", c.f, "test function, e.g. im:1/(x-i)");
  cum->add_option("--margin", c.margin, "rows kept beyond n, default from m_max");
  cum->add_option("--low-margin", c.low_margin, "enable two-sided truncation with this lower margin (0: same as upper)");

  auto* var = app.add_subcommand("variance-limit", "limiting variance of a resolvent test function");
  var->add_option("--f", c.f, "test function");
  var->add_option("--side", c.side, "left or right");
  var->add_option("--method", c.method, "quadrature, residue or both");
  var->add_option("--tol", c.tol, "quadrature tolerance");
  var->add_option("--halfwidth", c.halfwidth, "truncate the integration square");
  var->add_option("--output,-o", c.output);
  var->add_option("--manifest", c.manifest);

  auto* dec = app.add_subcommand("decay", "off-diagonal resolvent decay profile");
  add_ensemble(dec, c);
  add_edge(dec, c);
  add_output(dec, c);
  dec->add_option("--n", c.n_list, "n for the recurrence coefficients")->delimiter(',');
  dec->add_option("--n-alpha", c.n_alpha, "zoom factor n^alpha");
  dec->add_option("--size", c.size, "matrix size");
  dec->add_option("--ref-row", c.ref_row, "reference row, default the middle");
  dec->add_option("--floor-decades", c.floor_decades, "fit cutoff below the diagonal value");
  dec->add_option("--f", c.f, "spectral parameter as eta:<complex>");

  auto* hyp = app.add_subcommand("hypotheses", "recurrence hypothesis report");
  add_ensemble(hyp, c);
  add_edge(hyp, c);
  hyp->add_option("--n", c.n_list)->delimiter(',');
  hyp->add_option("--output,-o", c.output);
  hyp->add_option("--manifest", c.manifest);

  auto* smp = app.add_subcommand("sample", "Monte-Carlo linear statistic");
  add_ensemble(smp, c);
  add_edge(smp, c);
  smp->add_option("--n", c.n_list)->delimiter(',');
  smp->add_option("--count", c.count);
  smp->add_option("--seed", c.seed);
  smp->add_option("--f", c.f);
  smp->add_option("--save", c.save, "write the batch to a binary file");
  smp->add_option("--from", c.from, "aggregate saved batches instead of sampling")->delimiter(',');
  smp->add_option("--output,-o", c.output);
  smp->add_option("--manifest", c.manifest);

  auto* fit = app.add_subcommand("fit", "resolvent approximation of a compactly supported function");
  add_output(fit, c);
  fit->add_option("--shape", c.shape, "bump or hat");
  fit->add_option("--support", c.support)->delimiter(',')->expected(2);
  fit->add_option("--poles", c.poles);
  fit->add_option("--height", c.height);

  auto* st = app.add_subcommand("selftest", "acceptance suite");
  st->add_option("--criterion", c.criteria)->delimiter(',');
  st->add_option("--manifest", c.manifest);

  auto* rep = app.add_subcommand("replay", "rerun from a manifest");
  rep->add_option("manifest", replay_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (!replay_path.empty()) {
      std::ifstream is(replay_path);
      if (!is) throw ope::Error(ope::ErrorKind::Config, "cannot open manifest " + replay_path);
      json m;
      try {
        m = json::parse(is);
      } catch (const json::exception& e) {
        throw ope::Error(ope::ErrorKind::Config, std::string("manifest: ") + e.what());
      }
      if (!m.contains("schema") || m["schema"] != 1 || !m.contains("config"))
        throw ope::Error(ope::ErrorKind::Config, "manifest lacks schema 1 config");
      RunConfig r = config_from_json(m["config"]);
      if (c.threads > 0) r.threads = c.threads;
      return execute(r);
    }
    c.command = app.get_subcommands().front()->get_name();
    return execute(c);
  } catch (const ope::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
