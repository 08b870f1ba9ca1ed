#include "pacdnn/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "pacdnn/errors.hpp"
#include "pacdnn/gibbs.hpp"
#include "pacdnn/parallel.hpp"
#include "pacdnn/rng.hpp"

namespace pacdnn::bounds {
namespace {

void require_delta(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw Error(Errc::invalid_argument, "delta must lie in (0,1)");
}

void require_n_eff(double n_eff) {
  if (!(n_eff > 1.0)) throw Error(Errc::invalid_argument, "effective sample size must exceed 1");
}

// Per-state predictions and targets for the Bernstein check.
struct StateTable {
  std::vector<double> pred;
  std::vector<double> best;
};

StateTable tabulate(const network::SparseNetwork& net, const model::TargetSpec& target,
                    network::Activation act) {
  StateTable t;
  t.pred.resize(target.states());
  t.best.resize(target.states());
  for (std::size_t s = 0; s < target.states(); ++s) {
    t.pred[s] = network::forward(net, target.point(s), act, true)(0);
    t.best[s] = target.value_at_state(s);
  }
  return t;
}

}  // namespace

BoundReport make_report(std::string label, double rhs, std::optional<double> empirical,
                        std::map<std::string, double> params) {
  BoundReport r;
  r.label = std::move(label);
  r.rhs_value = rhs;
  r.empirical_value = empirical;
  r.params = std::move(params);
  r.holds = !empirical || *empirical <= rhs;
  return r;
}

double paulin_mgf_rhs(std::size_t n, double v_f, double gamma, double theta) {
  if (!(gamma > 0.0)) throw Error(Errc::theta_out_of_range, "gamma must be > 0");
  if (!(theta > 0.0 && theta < gamma / 10.0)) {
    throw Error(Errc::theta_out_of_range, "theta must lie in (0, gamma/10)");
  }
  if (!(v_f >= 0.0)) throw Error(Errc::invalid_argument, "V_f must be >= 0");
  const double dn = static_cast<double>(n);
  return std::exp(2.0 * (dn + 1.0) * v_f * theta * theta / gamma / (1.0 - 10.0 * theta / gamma));
}

double bernstein_mgf_rhs(double lambda, std::size_t n, double gamma, double K, double kappa,
                         double excess) {
  const double ng = static_cast<double>(n) * gamma;
  if (!(ng > 0.0) || !(lambda > 0.0 && lambda < ng / 10.0)) {
    throw Error(Errc::lambda_out_of_range, "lambda must lie in (0, n gamma / 10)");
  }
  if (!(excess >= 0.0)) throw Error(Errc::invalid_argument, "excess must be >= 0");
  if (!(kappa >= 0.0 && kappa <= 1.0)) throw Error(Errc::invalid_argument, "kappa must lie in [0,1]");
  const double moment = (excess == 0.0 && kappa == 0.0) ? 1.0 : std::pow(excess, kappa);
  return std::exp(16.0 * K * lambda * lambda * moment / ng / (1.0 - 10.0 * lambda / ng));
}

double kl_truncated_uniform_rhs(std::size_t card, double eta, double s, double weight_bound,
                                std::size_t n_max) {
  if (card < 1) throw Error(Errc::invalid_argument, "|I| must be >= 1");
  if (!(eta > 0.0)) throw Error(Errc::invalid_argument, "eta must be > 0");
  const double cs = gibbs::normalizer_Cs(s, n_max);
  return static_cast<double>(card) *
         std::log(2.0 * s * cs * weight_bound * static_cast<double>(n_max) * std::exp(1.0) / eta);
}

double oracle_rhs(double excess_at_best, std::size_t card, std::size_t depth, std::size_t n,
                  double gamma, double weight_bound, std::size_t n_max, double delta,
                  double c_ell, double xi1) {
  require_delta(delta);
  if (!(xi1 > 0.0)) throw Error(Errc::invalid_argument, "Xi1 must be > 0");
  const double ng = static_cast<double>(n) * gamma;
  if (!(ng > 0.0)) throw Error(Errc::invalid_argument, "n gamma must be > 0");
  const double big = std::max({static_cast<double>(n), weight_bound, static_cast<double>(n_max)});
  const double complexity = static_cast<double>(card) * static_cast<double>(depth) * std::log(big);
  return 3.0 * excess_at_best + xi1 / ng * (complexity + std::log(1.0 / delta) + c_ell);
}

double holder_rate_rhs(double n_eff, double beta, std::size_t input_dim, double delta,
                       double c_ell, double xi2) {
  require_delta(delta);
  require_n_eff(n_eff);
  const double d = static_cast<double>(input_dim);
  const double lg = std::log(n_eff);
  return xi2 * (lg * lg * lg / std::pow(n_eff, 2.0 * beta / (2.0 * beta + d)) +
                (std::log(1.0 / delta) + c_ell) / n_eff);
}

double composition_rate_rhs(double n_eff, std::span<const double> beta,
                            std::span<const std::size_t> t, double delta, double c_ell,
                            double xi3) {
  require_delta(delta);
  require_n_eff(n_eff);
  const double phi = model::rate_exponents(beta, t, n_eff).phi;
  const double lg = std::log(n_eff);
  return xi3 * (phi * lg * lg * lg + (std::log(1.0 / delta) + c_ell) / n_eff);
}

McEstimate batch_estimate(std::span<const double> values, std::size_t groups) {
  if (values.empty()) throw Error(Errc::invalid_argument, "no Monte Carlo values");
  groups = std::max<std::size_t>(1, std::min(groups, values.size()));
  McEstimate est;
  for (double v : values) est.mean += v;
  est.mean /= static_cast<double>(values.size());
  if (groups < 2) return est;
  std::vector<double> means(groups, 0.0);
  std::vector<std::size_t> counts(groups, 0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::size_t g = i * groups / values.size();
    means[g] += values[i];
    ++counts[g];
  }
  double grand = 0.0;
  for (std::size_t g = 0; g < groups; ++g) {
    means[g] /= static_cast<double>(counts[g]);
    grand += means[g];
  }
  grand /= static_cast<double>(groups);
  double ss = 0.0;
  for (double m : means) ss += (m - grand) * (m - grand);
  const double g = static_cast<double>(groups);
  est.std_error = std::sqrt(ss / (g - 1.0) / g);
  return est;
}

BoundReport mc_check_paulin(const markov::TransitionKernel& kernel, const markov::StationaryDist& pi,
                            std::span<const double> f_table, std::size_t n, double theta,
                            std::size_t replications, std::uint64_t seed) {
  if (f_table.size() != kernel.states() || pi.size() != kernel.states()) {
    throw Error(Errc::dimension_mismatch, "f table, pi and kernel disagree on state count");
  }
  if (replications < 1) throw Error(Errc::invalid_argument, "replications must be >= 1");
  double mean_f = 0.0;
  for (std::size_t s = 0; s < f_table.size(); ++s) mean_f += pi[s] * f_table[s];
  std::vector<double> centered(f_table.size());
  double v_f = 0.0;
  for (std::size_t s = 0; s < f_table.size(); ++s) {
    centered[s] = f_table[s] - mean_f;
    v_f += pi[s] * centered[s] * centered[s];
  }
  const double gamma = markov::pseudo_spectral_gap(kernel, pi);
  const double rhs = paulin_mgf_rhs(n, v_f, gamma, theta);

  std::vector<double> values(replications);
  parallel_for(replications, [&](std::size_t r) {
    const markov::Trajectory traj = markov::simulate(kernel, pi, n, derive_seed(seed, r));
    double sum = 0.0;
    for (std::size_t z : traj.states) sum += centered[z];
    values[r] = std::exp(theta * sum);
  });
  const McEstimate est = batch_estimate(values);
  const double lower = est.mean - 2.0 * est.std_error;
  return make_report("paulin_mgf", rhs, lower,
                     {{"n", static_cast<double>(n)},
                      {"V_f", v_f},
                      {"gamma", gamma},
                      {"theta", theta},
                      {"replications", static_cast<double>(replications)},
                      {"mc_mean", est.mean},
                      {"mc_stderr", est.std_error}});
}

double exact_bernstein_K(const network::SparseNetwork& net, const model::TargetSpec& target,
                         const markov::StationaryDist& pi, const BernsteinSetup& setup) {
  const model::Predictor h = gibbs::as_predictor(net, setup.activation);
  const double excess = model::excess_risk_exact(h, target, pi, setup.loss);
  const double second = model::excess_loss_second_moment(h, target, pi, setup.loss, setup.noise);
  if (!(excess > 0.0)) return 1.0;  // zero excess: any K works, keep the default
  return second / excess;
}

BoundReport mc_check_bernstein(const network::SparseNetwork& net, const model::TargetSpec& target,
                               const markov::TransitionKernel& kernel,
                               const markov::StationaryDist& pi, const BernsteinSetup& setup,
                               double lambda, std::size_t n, std::size_t replications,
                               std::uint64_t seed) {
  if (replications < 1) throw Error(Errc::invalid_argument, "replications must be >= 1");
  if (n < 1) throw Error(Errc::invalid_argument, "n must be >= 1");
  const double gamma = markov::pseudo_spectral_gap(kernel, pi);
  const model::Predictor h = gibbs::as_predictor(net, setup.activation);
  const double excess = std::max(0.0, model::excess_risk_exact(h, target, pi, setup.loss));
  const double K = setup.K.value_or(exact_bernstein_K(net, target, pi, setup));
  const double rhs = bernstein_mgf_rhs(lambda, n, gamma, K, 1.0, excess);
  const StateTable table = tabulate(net, target, setup.activation);

  std::vector<double> upper(replications);
  std::vector<double> lower(replications);
  parallel_for(replications, [&](std::size_t r) {
    const std::uint64_t rs = derive_seed(seed, r);
    const model::Dataset data =
        setup.loss == model::Loss::square
            ? model::generate_regression(target, kernel, pi, n, setup.noise, rs)
            : model::generate_classification(target.eta, target.points, kernel, pi, n, rs);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t s = data.states[i];
      const double y = data.outputs(static_cast<Eigen::Index>(i));
      sum += model::loss_value(setup.loss, table.pred[s], y) -
             model::loss_value(setup.loss, table.best[s], y);
    }
    const double dev = sum / static_cast<double>(n) - excess;
    upper[r] = std::exp(lambda * dev);
    lower[r] = std::exp(-lambda * dev);
  });
  const McEstimate up = batch_estimate(upper);
  const McEstimate down = batch_estimate(lower);
  const double worst = std::max(up.mean - 2.0 * up.std_error, down.mean - 2.0 * down.std_error);
  return make_report("bernstein_mgf", rhs, worst,
                     {{"n", static_cast<double>(n)},
                      {"gamma", gamma},
                      {"lambda", lambda},
                      {"K", K},
                      {"kappa", 1.0},
                      {"excess", excess},
                      {"replications", static_cast<double>(replications)},
                      {"mc_mean_upper", up.mean},
                      {"mc_stderr_upper", up.std_error},
                      {"mc_mean_lower", down.mean},
                      {"mc_stderr_lower", down.std_error}});
}

double exact_truncated_uniform_kl(std::size_t card, double eta, double s, double weight_bound,
                                  std::size_t n_max, const std::optional<Eigen::VectorXd>& center) {
  if (card < 1 || card > n_max) throw Error(Errc::invalid_argument, "|I| must lie in [1, n_max]");
  if (!(eta > 0.0 && eta <= 2.0 * weight_bound)) {
    throw Error(Errc::invalid_argument, "eta must lie in (0, 2B]");
  }
  if (center && static_cast<std::size_t>(center->size()) != card) {
    throw Error(Errc::dimension_mismatch, "center must have |I| coordinates");
  }
  const double log_weight = gibbs::log_prior_support(card, s, weight_bound, n_max) +
                            static_cast<double>(card) * std::log(2.0 * weight_bound);
  double log_ratio = 0.0;  // log vol(ball cap box) - |I| log(2B)
  for (std::size_t j = 0; j < card; ++j) {
    const double c = center ? (*center)(static_cast<Eigen::Index>(j)) : 0.0;
    if (std::abs(c) > weight_bound) throw Error(Errc::out_of_support, "center outside the box");
    const double len = std::min(c + eta, weight_bound) - std::max(c - eta, -weight_bound);
    log_ratio += std::log(len) - std::log(2.0 * weight_bound);
  }
  return -(log_weight + log_ratio);
}

BoundReport kl_numeric_check(std::size_t card, double eta, double s, double weight_bound,
                             std::size_t n_max, const std::optional<Eigen::VectorXd>& center) {
  const double rhs = kl_truncated_uniform_rhs(card, eta, s, weight_bound, n_max);
  const double exact = exact_truncated_uniform_kl(card, eta, s, weight_bound, n_max, center);
  return make_report("kl_truncated_uniform", rhs, exact,
                     {{"card_I", static_cast<double>(card)},
                      {"eta", eta},
                      {"s", s},
                      {"B", weight_bound},
                      {"n_max", static_cast<double>(n_max)},
                      {"C_s", gibbs::normalizer_Cs(s, n_max)}});
}

}  // namespace pacdnn::bounds
