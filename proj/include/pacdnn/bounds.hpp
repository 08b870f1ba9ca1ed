#pragma once

// Closed-form right-hand sides of the concentration, KL and rate bounds, and
// Monte Carlo checks of the two exponential-moment inequalities.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "pacdnn/markov.hpp"
#include "pacdnn/model.hpp"
#include "pacdnn/network.hpp"

namespace pacdnn::bounds {

/// One evaluated bound. For Monte Carlo checks `empirical_value` is the
/// conservative estimate (mean - 2 standard errors); the raw mean and the
/// standard error are echoed in `params`.
struct BoundReport {
  std::string label;
  double rhs_value = 0.0;
  std::optional<double> empirical_value;
  std::map<std::string, double> params;
  bool holds = true;
};

/// holds = (no empirical value) or (empirical <= rhs).
BoundReport make_report(std::string label, double rhs, std::optional<double> empirical,
                        std::map<std::string, double> params);

/// exp(2 (n+1) V_f theta^2 / gamma * (1 - 10 theta / gamma)^{-1}), theta in (0, gamma/10).
double paulin_mgf_rhs(std::size_t n, double v_f, double gamma, double theta);

/// exp(16 K lambda^2 excess^kappa / (n gamma) * (1 - 10 lambda / (n gamma))^{-1}),
/// lambda in (0, n gamma / 10).
double bernstein_mgf_rhs(double lambda, std::size_t n, double gamma, double K, double kappa,
                         double excess);

/// |I| log(2 s C_s B n_max e / eta).
double kl_truncated_uniform_rhs(std::size_t card, double eta, double s, double weight_bound,
                                std::size_t n_max);

/// 3 excess + Xi1/(n gamma) (|I| L log max(n, B, n_max) + log(1/delta) + C_ell).
double oracle_rhs(double excess_at_best, std::size_t card, std::size_t depth, std::size_t n,
                  double gamma, double weight_bound, std::size_t n_max, double delta,
                  double c_ell, double xi1 = 1.0);

/// Xi2 (log^3(n_eff) / n_eff^{2 beta/(2 beta + d_x)} + (log(1/delta) + C_ell) / n_eff).
double holder_rate_rhs(double n_eff, double beta, std::size_t input_dim, double delta,
                       double c_ell, double xi2 = 1.0);

/// Xi3 (phi_{n_eff} log^3(n_eff) + (log(1/delta) + C_ell) / n_eff).
double composition_rate_rhs(double n_eff, std::span<const double> beta,
                            std::span<const std::size_t> t, double delta, double c_ell,
                            double xi3 = 1.0);

/// Mean and batch standard error (replications split into up to 20 groups).
struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};
McEstimate batch_estimate(std::span<const double> values, std::size_t groups = 20);

/// E[exp(theta sum_{i=1}^n f~(Z_i))] with f~ = f - E_pi f along stationary
/// trajectories, compared with paulin_mgf_rhs at gamma = pseudo-spectral gap.
BoundReport mc_check_paulin(const markov::TransitionKernel& kernel, const markov::StationaryDist& pi,
                            std::span<const double> f_table, std::size_t n, double theta,
                            std::size_t replications, std::uint64_t seed);

struct BernsteinSetup {
  model::Loss loss = model::Loss::square;
  model::NoiseSpec noise;               // regression only
  network::Activation activation = network::Activation::relu;
  std::optional<double> K;              // exact second-moment ratio when unset
};

/// Both exponential moments of +-(E^_n(theta) - E(theta)) against bernstein_mgf_rhs
/// with kappa = 1 and gamma the pseudo-spectral gap of the input chain.
BoundReport mc_check_bernstein(const network::SparseNetwork& net, const model::TargetSpec& target,
                               const markov::TransitionKernel& kernel,
                               const markov::StationaryDist& pi, const BernsteinSetup& setup,
                               double lambda, std::size_t n, std::size_t replications,
                               std::uint64_t seed);

/// E_pi[(l(h,Y) - l(h*,Y))^2] / E(h): the smallest K for which the Bernstein
/// condition holds with kappa = 1 at this network.
double exact_bernstein_K(const network::SparseNetwork& net, const model::TargetSpec& target,
                         const markov::StationaryDist& pi, const BernsteinSetup& setup);

/// -log(w_I vol(ball cap box) / (2B)^{|I|}) for the uniform law on the
/// sup-norm eta-ball around `center` (origin when absent) intersected with
/// [-B,B]^{|I|}, where w_I = s^{-|I|} C(n_max,|I|)^{-1} / C_s.
double exact_truncated_uniform_kl(std::size_t card, double eta, double s, double weight_bound,
                                  std::size_t n_max,
                                  const std::optional<Eigen::VectorXd>& center = std::nullopt);

BoundReport kl_numeric_check(std::size_t card, double eta, double s, double weight_bound,
                             std::size_t n_max,
                             const std::optional<Eigen::VectorXd>& center = std::nullopt);

}  // namespace pacdnn::bounds
