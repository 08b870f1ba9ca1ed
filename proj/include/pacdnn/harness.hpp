#pragma once

// Experiment configuration and orchestration: rate sweeps, effective-sample
// experiments, slope fitting, bound batches and report emission.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pacdnn/bounds.hpp"
#include "pacdnn/gibbs.hpp"
#include "pacdnn/markov.hpp"
#include "pacdnn/model.hpp"

namespace pacdnn::harness {

using nlohmann::json;

/// Kernel family plus parameters. `p` is ignored by uniform and cycle;
/// custom kernels carry their own matrix.
struct ChainSpec {
  std::string family = "two_source";  // two_source | uniform | cycle | custom
  std::size_t states = 2;
  double p = 0.5;
  Eigen::MatrixXd probs;  // custom only

  markov::TransitionKernel build(std::optional<double> p_override = std::nullopt) const;
  std::string id(std::optional<double> p_override = std::nullopt) const;

  static ChainSpec from_json(const json& j);
};

enum class RuleKind { fixed, holder, composition };

/// Proportionality constants of the scaling rules (all default 1).
struct RuleConstants {
  double c_L = 1.0;
  double c_N = 1.0;
  double c_S = 1.0;
  double c_B = 1.0;
  double b_cap = 1e6;
  double b_fixed = 1.0;          // composition rule
  std::optional<double> c0;      // composition rule; the minimal admissible value when unset
};

struct Rule {
  RuleKind kind = RuleKind::holder;
  std::vector<double> betas;           // composition
  std::vector<std::size_t> t;          // composition
  RuleConstants constants;
};

struct ArchitectureSize {
  std::size_t depth = 1;
  std::size_t width = 1;
  std::size_t sparsity = 1;
  double weight_bound = 1.0;
  bool weight_bound_capped = false;
};

/// sum_i log_4(4 max(t_i, beta_i)).
double composition_c0(std::span<const double> betas, std::span<const std::size_t> t);

/// Holder: L = ceil(c_L log n_eff), N = ceil(c_N n_eff^{d/(2b+d)}), S = ceil(c_S N log n_eff),
/// B = min(ceil(c_B n_eff^{4(b+d)/(2b+d)}), cap).
/// Composition: L = ceil(c_L C0 log n_eff), N = ceil(c_N n_eff phi), S = ceil(c_S n_eff phi log n_eff),
/// B = b_fixed. Requires n_eff > e.
ArchitectureSize architecture_rule(double n_eff, double beta, std::size_t input_dim, const Rule& rule);

struct ClassSpec {
  Rule rule;
  // Used as-is for RuleKind::fixed.
  std::size_t depth = 1;
  std::size_t width = 2;
  std::size_t sparsity = 7;
  double weight_bound = 1.0;
  double output_bound = 1.0;
  std::optional<double> beta;  // smoothness fed to the Holder rule and bound (defaults to the target's)
  network::Activation activation = network::Activation::relu;
};

struct GibbsTemplate {
  double s = 2.0;
  double K = 1.0;
  double lambda_multiplier = 1.0;
  std::optional<double> lambda;  // overrides n gamma / (32K + 10)
  gibbs::MoveProbs moves;
  std::optional<double> step;
  double step_fraction = 0.1;    // step = fraction * B when `step` is unset
  std::size_t iters = 20000;
  std::size_t burn_in = 5000;
  std::size_t thin = 100;
  gibbs::PredictorMode predictor = gibbs::PredictorMode::single_draw;
};

struct BoundConstants {
  double xi1 = 1.0;
  double xi2 = 1.0;
  double xi3 = 1.0;
  double c_ell = 1.0;
};

struct ExperimentConfig {
  model::TargetSpec target;  // points follow the chain's states
  ChainSpec chain;
  std::vector<std::size_t> n_grid;
  std::vector<double> p_grid;  // empty: the chain's own p
  std::vector<std::pair<std::size_t, double>> pairs;  // effective-sample experiment
  model::Loss loss = model::Loss::square;
  model::NoiseSpec noise;
  ClassSpec classdef;
  GibbsTemplate gibbs;
  std::size_t replications = 1;
  double delta = 0.05;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;
  std::size_t n_mc = 0;  // 0: exact excess risk
  std::size_t k_max = 10;
  BoundConstants bounds;
  bool deterministic = false;  // wall_time written as 0
  std::size_t threads = 0;

  /// Throws Errc::config_error.
  void validate() const;
  static ExperimentConfig from_json(const json& j);
};

struct SweepRow {
  std::size_t n = 0;
  double gamma = 0.0;
  double n_eff = 0.0;
  double excess_risk = 0.0;
  double bound_rhs = 0.0;
  std::uint64_t seed = 0;
  double wall_time = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
};

/// Everything one pipeline pass produces.
struct PipelineRun {
  double gamma = 0.0;
  double n_eff = 0.0;
  double lambda = 0.0;
  gibbs::ClassDef classdef;
  bool weight_bound_capped = false;
  model::Dataset data;
  gibbs::PosteriorDraws draws;
  double excess_risk = 0.0;
  double bound_rhs = 0.0;
};

/// gamma -> lambda -> class -> data -> posterior -> excess risk for one (n, p, seed).
PipelineRun run_pipeline(const ExperimentConfig& cfg, std::size_t n, std::optional<double> p,
                         std::uint64_t seed);

/// R rows per (p, n) in the order p-major, n, replication. Row r uses
/// derive_seed(cfg.seed, r). Writes sweep.csv into cfg.output_dir when set;
/// completed rows are flushed before an error propagates.
SweepResult run_rate_sweep(const ExperimentConfig& cfg);

/// Pairs must share n gamma(p) within 1% of their mean (Errc::mismatched_effective_size).
SweepResult run_effective_sample_experiment(const ExperimentConfig& cfg,
                                            std::span<const std::pair<std::size_t, double>> pairs);

struct SlopeFit {
  double slope = 0.0;
  double stderr_slope = 0.0;
  double intercept = 0.0;
  std::size_t points = 0;
};

/// OLS of log(median excess) on log(n_eff) over the distinct n_eff values.
/// Throws Errc::too_few_points below 4 distinct values.
SlopeFit fit_rate_slope(const SweepResult& result);

/// Median excess risk per distinct n_eff, in increasing n_eff order.
std::vector<std::pair<double, double>> median_by_n_eff(const SweepResult& result);

/// -2 beta / (2 beta + d) (Holder) or the exponent of phi at large n (composition).
std::optional<double> theory_exponent(const ExperimentConfig& cfg);

std::string sweep_csv(const SweepResult& result);
SweepResult parse_sweep_csv(const std::string& text);

json report_to_json(const bounds::BoundReport& report);

/// Writes <dir>/sweep.csv and <dir>/summary.json {slope, stderr, theory_exponent, bound_reports}.
void emit_report(const SweepResult& result, std::span<const bounds::BoundReport> reports,
                 const std::filesystem::path& dir,
                 std::optional<double> theory = std::nullopt);

/// Evaluates a list of bound requests {"checks": [{"type": ...}, ...]}.
std::vector<bounds::BoundReport> run_bound_checks(const json& j, std::uint64_t seed);

/// Fixed-width text table of reports.
std::string format_report_table(std::span<const bounds::BoundReport> reports);

}  // namespace pacdnn::harness
