#include "pacdnn/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "pacdnn/errors.hpp"
#include "pacdnn/io.hpp"
#include "pacdnn/parallel.hpp"
#include "pacdnn/rng.hpp"

namespace pacdnn::harness {
namespace {

constexpr const char* kCsvHeader = "n,gamma,n_eff,excess_risk,bound_rhs,seed,wall_time";

// ceil that absorbs floating noise just above an integer (log(e^3) = 3 + ulp).
std::size_t safe_ceil(double x) {
  const double c = std::ceil(x - 1e-9 * std::max(1.0, std::abs(x)));
  return static_cast<std::size_t>(std::max(1.0, c));
}

template <class T>
T field(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(Errc::config_error, std::string("field '") + key + "': " + e.what());
  }
}

template <class T>
T required(const json& j, const char* key) {
  if (!j.contains(key)) throw Error(Errc::config_error, std::string("missing field '") + key + "'");
  return field<T>(j, key, T{});
}

template <class T>
std::optional<T> optional_field(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return field<T>(j, key, T{});
}

// Config-time errors from the library are reported as configuration errors.
template <class Fn>
auto as_config(Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.code() == Errc::config_error) throw;
    throw Error(Errc::config_error, e.what());
  }
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double target_beta(const ExperimentConfig& cfg) {
  if (cfg.classdef.beta) return *cfg.classdef.beta;
  if (cfg.target.kind == model::TargetKind::holder_sample) return cfg.target.beta;
  throw Error(Errc::config_error, "the Holder rule needs classdef.beta for this target");
}

markov::StationaryDist stationary(const markov::TransitionKernel& kernel) {
  return markov::stationary_distribution(kernel);
}

}  // namespace

// ---------------------------------------------------------------------------
// Chains

markov::TransitionKernel ChainSpec::build(std::optional<double> p_override) const {
  const double prob = p_override.value_or(p);
  if (family == "two_source") return markov::two_source_kernel(states, prob);
  if (family == "uniform") return markov::uniform_kernel(states);
  if (family == "cycle") return markov::cycle_kernel(states);
  if (family == "custom") return markov::TransitionKernel(probs);
  throw Error(Errc::config_error, "unknown chain family '" + family + "'");
}

std::string ChainSpec::id(std::optional<double> p_override) const {
  std::string s = family + "(m=" + std::to_string(states);
  if (family == "two_source") s += ",p=" + io::format_double(p_override.value_or(p));
  return s + ")";
}

ChainSpec ChainSpec::from_json(const json& j) {
  ChainSpec c;
  c.family = field<std::string>(j, "family", c.family);
  if (c.family == "custom") {
    const markov::TransitionKernel k = as_config([&] { return io::kernel_from_json(j); });
    c.states = k.states();
    c.probs = k.probs();
  } else {
    c.states = field<std::size_t>(j, "states", c.states);
    c.p = field<double>(j, "p", c.p);
  }
  as_config([&] { return c.build(); });
  return c;
}

// ---------------------------------------------------------------------------
// Architecture rules

double composition_c0(std::span<const double> betas, std::span<const std::size_t> t) {
  if (betas.size() != t.size() || betas.empty()) {
    throw Error(Errc::invalid_argument, "betas and t must be nonempty and of equal length");
  }
  double c0 = 0.0;
  for (std::size_t i = 0; i < betas.size(); ++i) {
    c0 += std::log(4.0 * std::max(static_cast<double>(t[i]), betas[i])) / std::log(4.0);
  }
  return c0;
}

ArchitectureSize architecture_rule(double n_eff, double beta, std::size_t input_dim,
                                   const Rule& rule) {
  if (!(n_eff > std::exp(1.0))) throw Error(Errc::invalid_argument, "the scaling rules need n_eff > e");
  const RuleConstants& c = rule.constants;
  const double lg = std::log(n_eff);
  ArchitectureSize a;
  if (rule.kind == RuleKind::holder) {
    if (!(beta > 0.0)) throw Error(Errc::invalid_argument, "beta must be > 0");
    const double d = static_cast<double>(input_dim);
    a.depth = safe_ceil(c.c_L * lg);
    a.width = safe_ceil(c.c_N * std::pow(n_eff, d / (2.0 * beta + d)));
    a.sparsity = safe_ceil(c.c_S * static_cast<double>(a.width) * lg);
    const double b = static_cast<double>(
        safe_ceil(c.c_B * std::pow(n_eff, 4.0 * (beta + d) / (2.0 * beta + d))));
    a.weight_bound = std::min(b, c.b_cap);
    a.weight_bound_capped = b > c.b_cap;
  } else if (rule.kind == RuleKind::composition) {
    const double c0 = c.c0.value_or(composition_c0(rule.betas, rule.t));
    const double phi = model::rate_exponents(rule.betas, rule.t, n_eff).phi;
    a.depth = safe_ceil(c.c_L * c0 * lg);
    a.width = safe_ceil(c.c_N * n_eff * phi);
    a.sparsity = safe_ceil(c.c_S * n_eff * phi * lg);
    a.weight_bound = std::max(1.0, c.b_fixed);
  } else {
    throw Error(Errc::invalid_argument, "a fixed class has no scaling rule");
  }
  return a;
}

// ---------------------------------------------------------------------------
// Configuration

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(Errc::config_error, msg); };
  for (std::size_t i = 1; i < n_grid.size(); ++i) {
    if (n_grid[i] <= n_grid[i - 1]) fail("n_grid must be strictly increasing");
  }
  if (!n_grid.empty() && n_grid.front() < 1) fail("n_grid entries must be >= 1");
  if (replications < 1) fail("replications must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) fail("delta must lie in (0,1)");
  if (!(gibbs.s >= 2.0)) fail("gibbs.s must be >= 2");
  if (!(gibbs.K > 0.0)) fail("gibbs.K must be > 0");
  if (!(gibbs.lambda_multiplier > 0.0)) fail("gibbs.lambda_multiplier must be > 0");
  if (!(classdef.output_bound > 0.0)) fail("classdef.F must be > 0");
  if (classdef.rule.kind == RuleKind::fixed) {
    if (classdef.sparsity < 1) fail("classdef.S must be >= 1");
    if (!(classdef.weight_bound > 0.0)) fail("classdef.B must be > 0");
  }
  if (target.states() != chain.states) fail("target and chain disagree on the number of states");
  if (loss == model::Loss::logistic && target.kind != model::TargetKind::logistic_link) {
    fail("logistic loss needs a logistic_link target");
  }
  for (double p : p_grid) {
    if (!(p > 0.0 && p <= 1.0)) fail("p_grid entries must lie in (0,1]");
  }
  gibbs::GibbsConfig probe;
  probe.moves = gibbs.moves;
  probe.iters = gibbs.iters;
  probe.burn_in = gibbs.burn_in;
  probe.thin = gibbs.thin;
  as_config([&] {
    probe.validate();
    return 0;
  });
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  if (!j.is_object()) throw Error(Errc::config_error, "config must be a JSON object");
  ExperimentConfig cfg;
  cfg.chain = ChainSpec::from_json(j.value("chain", json::object()));

  json tj = j.value("target", json::object());
  if (!tj.contains("kind")) tj["kind"] = "holder_sample";
  if (!tj.contains("beta") && tj["kind"] == "holder_sample") tj["beta"] = 1.0;
  if (!tj.contains("points")) {
    tj["states"] = cfg.chain.states;
    if (!tj.contains("input_dim")) tj["input_dim"] = 1;
  }
  cfg.target = as_config([&] {
    model::TargetSpec t = io::target_from_json(tj);
    t.validate();
    return t;
  });

  cfg.n_grid = field<std::vector<std::size_t>>(j, "n_grid", {});
  cfg.p_grid = field<std::vector<double>>(j, "p_grid", {});
  if (j.contains("pairs")) {
    for (const json& pr : j.at("pairs")) {
      if (!pr.is_array() || pr.size() != 2) throw Error(Errc::config_error, "pairs are [n, p]");
      cfg.pairs.emplace_back(pr[0].get<std::size_t>(), pr[1].get<double>());
    }
  }
  cfg.loss = as_config([&] { return model::parse_loss(field<std::string>(j, "loss", "square")); });
  if (j.contains("noise")) {
    const json& nj = j.at("noise");
    cfg.noise.family = as_config(
        [&] { return model::parse_noise_family(field<std::string>(nj, "family", "gaussian")); });
    cfg.noise.varsigma = field<double>(nj, "varsigma", 0.0);
    if (!(cfg.noise.varsigma >= 0.0)) throw Error(Errc::config_error, "noise.varsigma must be >= 0");
  }

  const json cj = j.value("classdef", json::object());
  const std::string rule = field<std::string>(cj, "rule", "fixed");
  ClassSpec& cs = cfg.classdef;
  if (rule == "fixed") {
    cs.rule.kind = RuleKind::fixed;
  } else if (rule == "holder") {
    cs.rule.kind = RuleKind::holder;
  } else if (rule == "composition") {
    cs.rule.kind = RuleKind::composition;
    cs.rule.betas = field<std::vector<double>>(cj, "betas", cfg.target.betas);
    cs.rule.t = field<std::vector<std::size_t>>(cj, "t", cfg.target.t);
  } else {
    throw Error(Errc::config_error, "unknown classdef rule '" + rule + "'");
  }
  cs.depth = field<std::size_t>(cj, "L", cs.depth);
  cs.width = field<std::size_t>(cj, "N", cs.width);
  cs.sparsity = field<std::size_t>(cj, "S", cs.sparsity);
  cs.weight_bound = field<double>(cj, "B", cs.weight_bound);
  cs.output_bound = field<double>(cj, "F", cs.output_bound);
  cs.beta = optional_field<double>(cj, "beta");
  cs.activation = as_config(
      [&] { return network::parse_activation(field<std::string>(cj, "activation", "relu")); });
  RuleConstants& rc = cs.rule.constants;
  rc.c_L = field<double>(cj, "c_L", rc.c_L);
  rc.c_N = field<double>(cj, "c_N", rc.c_N);
  rc.c_S = field<double>(cj, "c_S", rc.c_S);
  rc.c_B = field<double>(cj, "c_B", rc.c_B);
  rc.b_cap = field<double>(cj, "B_cap", rc.b_cap);
  rc.b_fixed = field<double>(cj, "B_fixed", rc.b_fixed);
  rc.c0 = optional_field<double>(cj, "C0");

  const json gj = j.value("gibbs", json::object());
  GibbsTemplate& g = cfg.gibbs;
  g.s = field<double>(gj, "s", g.s);
  g.K = field<double>(gj, "K", g.K);
  g.lambda_multiplier = field<double>(gj, "lambda_multiplier", g.lambda_multiplier);
  g.lambda = optional_field<double>(gj, "lambda");
  if (gj.contains("moves")) {
    const json& mj = gj.at("moves");
    g.moves.add = field<double>(mj, "add", g.moves.add);
    g.moves.remove = field<double>(mj, "remove", g.moves.remove);
    g.moves.perturb = field<double>(mj, "perturb", g.moves.perturb);
  }
  g.step = optional_field<double>(gj, "step");
  g.step_fraction = field<double>(gj, "step_fraction", g.step_fraction);
  g.iters = field<std::size_t>(gj, "iters", g.iters);
  g.burn_in = field<std::size_t>(gj, "burn_in", g.burn_in);
  g.thin = field<std::size_t>(gj, "thin", g.thin);
  g.predictor = as_config(
      [&] { return gibbs::parse_predictor_mode(field<std::string>(gj, "predictor", "single_draw")); });

  cfg.replications = field<std::size_t>(j, "replications", cfg.replications);
  cfg.delta = field<double>(j, "delta", cfg.delta);
  cfg.seed = field<std::uint64_t>(j, "seed", cfg.seed);
  cfg.output_dir = field<std::string>(j, "output_dir", "");
  cfg.n_mc = field<std::size_t>(j, "n_mc", cfg.n_mc);
  cfg.k_max = field<std::size_t>(j, "k_max", cfg.k_max);
  cfg.deterministic = field<bool>(j, "deterministic", cfg.deterministic);
  cfg.threads = field<std::size_t>(j, "threads", cfg.threads);
  if (j.contains("bounds")) {
    const json& bj = j.at("bounds");
    cfg.bounds.xi1 = field<double>(bj, "Xi1", cfg.bounds.xi1);
    cfg.bounds.xi2 = field<double>(bj, "Xi2", cfg.bounds.xi2);
    cfg.bounds.xi3 = field<double>(bj, "Xi3", cfg.bounds.xi3);
    cfg.bounds.c_ell = field<double>(bj, "C_ell", cfg.bounds.c_ell);
  }
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// Pipeline

PipelineRun run_pipeline(const ExperimentConfig& cfg, std::size_t n, std::optional<double> p,
                         std::uint64_t seed) {
  const markov::TransitionKernel kernel = cfg.chain.build(p);
  const markov::StationaryDist pi = stationary(kernel);
  PipelineRun run;
  run.gamma = markov::pseudo_spectral_gap(kernel, pi, cfg.k_max);
  if (!(run.gamma > 0.0)) {
    throw Error(Errc::invalid_argument, "chain " + cfg.chain.id(p) + " has zero pseudo-spectral gap");
  }
  run.n_eff = static_cast<double>(n) * run.gamma;
  run.lambda = cfg.gibbs.lambda.value_or(gibbs::temperature(n, run.gamma, cfg.gibbs.K)) *
               cfg.gibbs.lambda_multiplier;

  const ClassSpec& cs = cfg.classdef;
  const std::size_t d_x = cfg.target.input_dim();
  run.classdef.output_bound = cs.output_bound;
  run.classdef.activation = cs.activation;
  if (cs.rule.kind == RuleKind::fixed) {
    run.classdef.depth = cs.depth;
    run.classdef.width = cs.width;
    run.classdef.sparsity = cs.sparsity;
    run.classdef.weight_bound = cs.weight_bound;
  } else {
    const double beta = cs.rule.kind == RuleKind::holder ? target_beta(cfg) : 0.0;
    const ArchitectureSize a = architecture_rule(run.n_eff, beta, d_x, cs.rule);
    run.classdef.depth = a.depth;
    run.classdef.width = a.width;
    run.classdef.sparsity = a.sparsity;
    run.classdef.weight_bound = a.weight_bound;
    run.weight_bound_capped = a.weight_bound_capped;
  }

  const std::uint64_t data_seed = derive_seed(seed, 0);
  run.data = cfg.loss == model::Loss::square
                 ? model::generate_regression(cfg.target, kernel, pi, n, cfg.noise, data_seed)
                 : model::generate_classification(cfg.target.eta, cfg.target.points, kernel, pi, n,
                                                  data_seed);
  run.data.meta = {cfg.chain.id(p), data_seed, run.gamma};

  gibbs::GibbsConfig g;
  g.s = cfg.gibbs.s;
  g.lambda = run.lambda;
  g.moves = cfg.gibbs.moves;
  g.step = cfg.gibbs.step.value_or(cfg.gibbs.step_fraction * run.classdef.weight_bound);
  g.iters = cfg.gibbs.iters;
  g.burn_in = cfg.gibbs.burn_in;
  g.thin = cfg.gibbs.thin;
  g.seed = derive_seed(seed, 1);
  run.draws = gibbs::sample_posterior(run.data, cfg.loss, run.classdef, g);

  const model::Predictor h = gibbs::posterior_predictor(run.draws, cfg.gibbs.predictor);
  run.excess_risk = cfg.n_mc == 0
                        ? model::excess_risk_exact(h, cfg.target, pi, cfg.loss)
                        : model::excess_risk_mc(h, cfg.target, pi, cfg.loss, cfg.noise, cfg.n_mc,
                                                derive_seed(seed, 2));

  const BoundConstants& bc = cfg.bounds;
  switch (cs.rule.kind) {
    case RuleKind::holder:
      run.bound_rhs = bounds::holder_rate_rhs(run.n_eff, target_beta(cfg), d_x, cfg.delta,
                                              bc.c_ell, bc.xi2);
      break;
    case RuleKind::composition:
      run.bound_rhs = bounds::composition_rate_rhs(run.n_eff, cs.rule.betas, cs.rule.t, cfg.delta,
                                                   bc.c_ell, bc.xi3);
      break;
    case RuleKind::fixed: {
      const std::size_t n_max =
          network::param_count(run.classdef.architecture(d_x, 1));
      run.bound_rhs = bounds::oracle_rhs(0.0, std::min(run.classdef.sparsity, n_max),
                                         run.classdef.depth, n, run.gamma,
                                         run.classdef.weight_bound, n_max, cfg.delta, bc.c_ell,
                                         bc.xi1);
      break;
    }
  }
  return run;
}

namespace {

struct Job {
  std::size_t n;
  std::optional<double> p;
};

SweepResult run_jobs(const ExperimentConfig& cfg, const std::vector<Job>& jobs) {
  const std::size_t total = jobs.size() * cfg.replications;
  std::vector<SweepRow> rows(total);
  std::vector<char> done(total, 0);
  try {
    parallel_for(
        total,
        [&](std::size_t r) {
          const Job& job = jobs[r / cfg.replications];
          const std::uint64_t seed = derive_seed(cfg.seed, r);
          const auto start = std::chrono::steady_clock::now();
          const PipelineRun run = run_pipeline(cfg, job.n, job.p, seed);
          const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
          SweepRow& row = rows[r];
          row.n = job.n;
          row.gamma = run.gamma;
          row.n_eff = run.n_eff;
          row.excess_risk = run.excess_risk;
          row.bound_rhs = run.bound_rhs;
          row.seed = seed;
          row.wall_time = cfg.deterministic ? 0.0 : elapsed.count();
          done[r] = 1;
        },
        cfg.threads);
  } catch (...) {
    if (!cfg.output_dir.empty()) {
      SweepResult partial;
      for (std::size_t r = 0; r < total; ++r) {
        if (done[r]) partial.rows.push_back(rows[r]);
      }
      io::write_text_file(cfg.output_dir / "sweep.partial.csv", sweep_csv(partial));
    }
    throw;
  }
  SweepResult result{std::move(rows)};
  if (!cfg.output_dir.empty()) io::write_text_file(cfg.output_dir / "sweep.csv", sweep_csv(result));
  return result;
}

}  // namespace

SweepResult run_rate_sweep(const ExperimentConfig& cfg) {
  if (cfg.n_grid.empty()) throw Error(Errc::config_error, "n_grid must be nonempty");
  std::vector<Job> jobs;
  const std::vector<std::optional<double>> ps =
      cfg.p_grid.empty() ? std::vector<std::optional<double>>{std::nullopt}
                         : std::vector<std::optional<double>>(cfg.p_grid.begin(), cfg.p_grid.end());
  for (const auto& p : ps) {
    for (std::size_t n : cfg.n_grid) jobs.push_back({n, p});
  }
  return run_jobs(cfg, jobs);
}

SweepResult run_effective_sample_experiment(const ExperimentConfig& cfg,
                                            std::span<const std::pair<std::size_t, double>> pairs) {
  if (pairs.empty()) throw Error(Errc::config_error, "no (n, p) pairs given");
  std::vector<double> n_eff;
  for (const auto& [n, p] : pairs) {
    const markov::TransitionKernel k = cfg.chain.build(p);
    n_eff.push_back(static_cast<double>(n) *
                    markov::pseudo_spectral_gap(k, stationary(k), cfg.k_max));
  }
  double mean = 0.0;
  for (double v : n_eff) mean += v;
  mean /= static_cast<double>(n_eff.size());
  for (double v : n_eff) {
    if (std::abs(v - mean) > 0.01 * mean) {
      throw Error(Errc::mismatched_effective_size,
                  "n gamma values differ by more than 1% from their mean " + io::format_double(mean));
    }
  }
  std::vector<Job> jobs;
  for (const auto& [n, p] : pairs) jobs.push_back({n, p});
  return run_jobs(cfg, jobs);
}

// ---------------------------------------------------------------------------
// Slopes and reports

std::vector<std::pair<double, double>> median_by_n_eff(const SweepResult& result) {
  std::vector<SweepRow> rows = result.rows;
  std::stable_sort(rows.begin(), rows.end(),
                   [](const SweepRow& a, const SweepRow& b) { return a.n_eff < b.n_eff; });
  std::vector<std::pair<double, double>> out;
  std::size_t i = 0;
  while (i < rows.size()) {
    std::size_t k = i;
    std::vector<double> group;
    while (k < rows.size() &&
           std::abs(rows[k].n_eff - rows[i].n_eff) <= 1e-9 * std::max(1.0, rows[i].n_eff)) {
      group.push_back(rows[k].excess_risk);
      ++k;
    }
    out.emplace_back(rows[i].n_eff, median(group));
    i = k;
  }
  return out;
}

SlopeFit fit_rate_slope(const SweepResult& result) {
  const auto pts = median_by_n_eff(result);
  if (pts.size() < 4) throw Error(Errc::too_few_points, "slope fit needs >= 4 distinct n_eff values");
  std::vector<double> x;
  std::vector<double> y;
  for (const auto& [ne, med] : pts) {
    if (!(ne > 0.0) || !(med > 0.0)) {
      throw Error(Errc::invalid_argument, "log-log fit needs positive n_eff and median excess risk");
    }
    x.push_back(std::log(ne));
    y.push_back(std::log(med));
  }
  const auto k = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= k;
  my /= k;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  SlopeFit fit;
  fit.points = x.size();
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    sse += r * r;
  }
  fit.stderr_slope = std::sqrt(sse / (k - 2.0) / sxx);
  return fit;
}

std::optional<double> theory_exponent(const ExperimentConfig& cfg) {
  const std::size_t d = cfg.target.input_dim();
  if (cfg.classdef.rule.kind == RuleKind::composition ||
      cfg.target.kind == model::TargetKind::composition) {
    const auto& betas = cfg.classdef.rule.betas.empty() ? cfg.target.betas : cfg.classdef.rule.betas;
    const auto& t = cfg.classdef.rule.t.empty() ? cfg.target.t : cfg.classdef.rule.t;
    if (betas.empty()) return std::nullopt;
    const model::RateExponents r = model::rate_exponents(betas, t, 2.0);
    double worst = 0.0;
    bool first = true;
    for (std::size_t i = 0; i < betas.size(); ++i) {
      const double e = -2.0 * r.beta_star[i] / (2.0 * r.beta_star[i] + static_cast<double>(t[i]));
      if (first || e > worst) worst = e;
      first = false;
    }
    return worst;
  }
  std::optional<double> beta = cfg.classdef.beta;
  if (!beta && cfg.target.kind == model::TargetKind::holder_sample) beta = cfg.target.beta;
  if (!beta) return std::nullopt;
  return -2.0 * *beta / (2.0 * *beta + static_cast<double>(d));
}

std::string sweep_csv(const SweepResult& result) {
  std::ostringstream out;
  out << kCsvHeader << '\n';
  for (const SweepRow& r : result.rows) {
    out << r.n << ',' << io::format_double(r.gamma) << ',' << io::format_double(r.n_eff) << ','
        << io::format_double(r.excess_risk) << ',' << io::format_double(r.bound_rhs) << ','
        << r.seed << ',' << io::format_double(r.wall_time) << '\n';
  }
  return out.str();
}

SweepResult parse_sweep_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::io_error, "empty sweep file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) throw Error(Errc::io_error, "unexpected sweep header '" + line + "'");
  SweepResult result;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7) throw Error(Errc::io_error, "sweep row must have 7 columns");
    try {
      SweepRow r;
      r.n = std::stoull(cells[0]);
      r.gamma = std::stod(cells[1]);
      r.n_eff = std::stod(cells[2]);
      r.excess_risk = std::stod(cells[3]);
      r.bound_rhs = std::stod(cells[4]);
      r.seed = std::stoull(cells[5]);
      r.wall_time = std::stod(cells[6]);
      result.rows.push_back(r);
    } catch (const std::exception&) {
      throw Error(Errc::io_error, "malformed sweep row '" + line + "'");
    }
  }
  return result;
}

json report_to_json(const bounds::BoundReport& report) {
  json params = json::object();
  for (const auto& [k, v] : report.params) params[k] = v;
  return {{"label", report.label},
          {"rhs_value", report.rhs_value},
          {"empirical_value", report.empirical_value ? json(*report.empirical_value) : json(nullptr)},
          {"params", params},
          {"holds", report.holds}};
}

void emit_report(const SweepResult& result, std::span<const bounds::BoundReport> reports,
                 const std::filesystem::path& dir, std::optional<double> theory) {
  io::write_text_file(dir / "sweep.csv", sweep_csv(result));
  json summary;
  summary["slope"] = nullptr;
  summary["stderr"] = nullptr;
  if (median_by_n_eff(result).size() >= 4) {
    try {
      const SlopeFit fit = fit_rate_slope(result);
      summary["slope"] = fit.slope;
      summary["stderr"] = fit.stderr_slope;
    } catch (const Error&) {
      // non-positive medians: no slope to report
    }
  }
  summary["theory_exponent"] = theory ? json(*theory) : json(nullptr);
  json arr = json::array();
  for (const auto& r : reports) arr.push_back(report_to_json(r));
  summary["bound_reports"] = arr;
  io::write_text_file(dir / "summary.json", summary.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Bound batches

std::vector<bounds::BoundReport> run_bound_checks(const json& j, std::uint64_t seed) {
  if (!j.contains("checks") || !j.at("checks").is_array()) {
    throw Error(Errc::config_error, "bounds config needs a 'checks' array");
  }
  std::vector<bounds::BoundReport> out;
  std::size_t index = 0;
  for (const json& c : j.at("checks")) {
    const std::uint64_t cseed = derive_seed(seed, index++);
    const auto type = required<std::string>(c, "type");
    const double delta = field<double>(c, "delta", 0.05);
    const double c_ell = field<double>(c, "C_ell", 1.0);
    if (type == "paulin_rhs") {
      const auto n = required<std::size_t>(c, "n");
      const auto v = required<double>(c, "V_f");
      const auto g = required<double>(c, "gamma");
      const auto th = required<double>(c, "theta");
      out.push_back(bounds::make_report("paulin_rhs", bounds::paulin_mgf_rhs(n, v, g, th), std::nullopt,
                                        {{"n", static_cast<double>(n)}, {"V_f", v}, {"gamma", g}, {"theta", th}}));
    } else if (type == "bernstein_rhs") {
      const auto lam = required<double>(c, "lambda");
      const auto n = required<std::size_t>(c, "n");
      const auto g = required<double>(c, "gamma");
      const auto K = field<double>(c, "K", 1.0);
      const auto kappa = field<double>(c, "kappa", 1.0);
      const auto ex = required<double>(c, "excess");
      out.push_back(bounds::make_report(
          "bernstein_rhs", bounds::bernstein_mgf_rhs(lam, n, g, K, kappa, ex), std::nullopt,
          {{"lambda", lam}, {"n", static_cast<double>(n)}, {"gamma", g}, {"K", K}, {"kappa", kappa}, {"excess", ex}}));
    } else if (type == "oracle") {
      const auto ex = field<double>(c, "excess_at_best", 0.0);
      const auto card = required<std::size_t>(c, "card_I");
      const auto L = required<std::size_t>(c, "L");
      const auto n = required<std::size_t>(c, "n");
      const auto g = required<double>(c, "gamma");
      const auto B = required<double>(c, "B");
      const auto n_max = required<std::size_t>(c, "n_max");
      const auto xi1 = field<double>(c, "Xi1", 1.0);
      out.push_back(bounds::make_report(
          "oracle_rhs", bounds::oracle_rhs(ex, card, L, n, g, B, n_max, delta, c_ell, xi1), std::nullopt,
          {{"excess_at_best", ex}, {"card_I", static_cast<double>(card)}, {"L", static_cast<double>(L)},
           {"n", static_cast<double>(n)}, {"gamma", g}, {"B", B}, {"n_max", static_cast<double>(n_max)},
           {"delta", delta}, {"C_ell", c_ell}, {"Xi1", xi1}}));
    } else if (type == "holder_rate") {
      const auto ne = required<double>(c, "n_eff");
      const auto beta = required<double>(c, "beta");
      const auto d = field<std::size_t>(c, "d_x", 1);
      const auto xi2 = field<double>(c, "Xi2", 1.0);
      out.push_back(bounds::make_report(
          "holder_rate_rhs", bounds::holder_rate_rhs(ne, beta, d, delta, c_ell, xi2), std::nullopt,
          {{"n_eff", ne}, {"beta", beta}, {"d_x", static_cast<double>(d)}, {"delta", delta},
           {"C_ell", c_ell}, {"Xi2", xi2}}));
    } else if (type == "composition_rate") {
      const auto ne = required<double>(c, "n_eff");
      const auto betas = required<std::vector<double>>(c, "betas");
      const auto t = required<std::vector<std::size_t>>(c, "t");
      const auto xi3 = field<double>(c, "Xi3", 1.0);
      out.push_back(bounds::make_report(
          "composition_rate_rhs", bounds::composition_rate_rhs(ne, betas, t, delta, c_ell, xi3),
          std::nullopt, {{"n_eff", ne}, {"delta", delta}, {"C_ell", c_ell}, {"Xi3", xi3}}));
    } else if (type == "kl") {
      std::optional<Eigen::VectorXd> center;
      if (c.contains("center")) {
        const auto v = c.at("center").get<std::vector<double>>();
        center = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
      }
      out.push_back(bounds::kl_numeric_check(required<std::size_t>(c, "card_I"),
                                             required<double>(c, "eta"), field<double>(c, "s", 2.0),
                                             required<double>(c, "B"),
                                             required<std::size_t>(c, "n_max"), center));
    } else if (type == "paulin_mc") {
      const ChainSpec chain = ChainSpec::from_json(c.value("chain", json::object()));
      const markov::TransitionKernel k = chain.build();
      const auto f = required<std::vector<double>>(c, "f");
      out.push_back(bounds::mc_check_paulin(k, stationary(k), f, required<std::size_t>(c, "n"),
                                            required<double>(c, "theta"),
                                            field<std::size_t>(c, "replications", 2000), cseed));
    } else if (type == "bernstein_mc") {
      const ChainSpec chain = ChainSpec::from_json(c.value("chain", json::object()));
      const markov::TransitionKernel k = chain.build();
      json tj = c.value("target", json::object());
      if (!tj.contains("points")) {
        tj["states"] = chain.states;
        if (!tj.contains("input_dim")) tj["input_dim"] = 1;
      }
      const model::TargetSpec target = as_config([&] { return io::target_from_json(tj); });
      if (!c.contains("network")) throw Error(Errc::config_error, "bernstein_mc needs a 'network'");
      const network::SparseNetwork net = as_config([&] { return io::network_from_json(c.at("network")); });
      bounds::BernsteinSetup setup;
      setup.loss = as_config([&] { return model::parse_loss(field<std::string>(c, "loss", "square")); });
      if (c.contains("noise")) {
        setup.noise.family = as_config([&] {
          return model::parse_noise_family(field<std::string>(c.at("noise"), "family", "gaussian"));
        });
        setup.noise.varsigma = field<double>(c.at("noise"), "varsigma", 0.0);
      }
      setup.K = optional_field<double>(c, "K");
      out.push_back(bounds::mc_check_bernstein(net, target, k, stationary(k), setup,
                                               required<double>(c, "lambda"),
                                               required<std::size_t>(c, "n"),
                                               field<std::size_t>(c, "replications", 2000), cseed));
    } else {
      throw Error(Errc::config_error, "unknown bound check type '" + type + "'");
    }
  }
  return out;
}

std::string format_report_table(std::span<const bounds::BoundReport> reports) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-24s %16s %16s %6s\n", "label", "rhs", "empirical", "holds");
  out << buf;
  for (const auto& r : reports) {
    char emp[32] = "-";
    if (r.empirical_value) std::snprintf(emp, sizeof(emp), "%.6g", *r.empirical_value);
    std::snprintf(buf, sizeof(buf), "%-24s %16.6g %16s %6s\n", r.label.c_str(), r.rhs_value, emp,
                  r.holds ? "yes" : "no");
    out << buf;
  }
  return out.str();
}

}  // namespace pacdnn::harness
