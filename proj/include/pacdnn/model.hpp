#pragma once

// Losses, ground-truth targets, data generation on finite-state chains, and
// exact/Monte-Carlo risk evaluation.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "pacdnn/markov.hpp"

namespace pacdnn::model {

enum class Loss { square, logistic };

Loss parse_loss(std::string_view name);
std::string_view loss_name(Loss loss) noexcept;

double square_loss(double prediction, double y) noexcept;
/// log(1 + exp(-y * score)) without overflow; +-infinite scores are allowed.
double logistic_loss(double score, double y) noexcept;
double loss_value(Loss loss, double prediction, double y) noexcept;

/// log(eta / (1 - eta)), +inf at eta = 1 and -inf at eta = 0.
double logistic_target(double eta);

/// eta phi(s) + (1-eta) phi(-s) - [same at the log-odds], 0 log 0 = 0.
double logistic_conditional_excess(double eta, double score);

struct RateExponents {
  std::vector<double> beta_star;
  double phi;
};

/// beta*_i = beta_i prod_{k>i} min(beta_k, 1); phi = max_i n_eff^{-2 beta*_i / (2 beta*_i + t_i)}.
RateExponents rate_exponents(std::span<const double> beta, std::span<const std::size_t> t,
                             double n_eff);

/// Points x(s) in [0,1]^{d_x}, one row per state. For d_x = 1 the midpoints
/// (s + 1/2)/m; for d_x > 1, m must be a perfect d_x-th power and the points
/// form the midpoint lattice.
Eigen::MatrixXd grid_embedding(std::size_t states, std::size_t input_dim);

enum class TargetKind { holder_sample, composition, logistic_link };

/// Declarative ground truth h*.
///
/// holder_sample: h*(x) = scale * mean_j |x_j - 1/2|^beta.
/// composition:   h* = scale * g_q o ... o g_0 with
///                g_{i,j}(u) = (1/t_i) sum_{k < t_i} |u_{(j+k) mod d_i} - 1/2|^{beta_i},
///                so each component depends on t_i coordinates and maps [0,1]^{d_i}
///                into [0,1].
/// logistic_link: eta(s) per state and h*(x(s)) = logit(eta(s)).
struct TargetSpec {
  TargetKind kind = TargetKind::holder_sample;
  double scale = 1.0;
  double beta = 1.0;
  std::vector<std::size_t> dims;   // d_0..d_{q+1}
  std::vector<std::size_t> t;      // t_0..t_q
  std::vector<double> betas;       // beta_0..beta_q
  std::vector<double> eta;         // per state
  Eigen::MatrixXd points;          // m x d_x

  static TargetSpec holder(double beta, Eigen::MatrixXd points, double scale = 1.0);
  static TargetSpec composition(std::vector<std::size_t> dims, std::vector<std::size_t> t,
                                std::vector<double> betas, Eigen::MatrixXd points,
                                double scale = 1.0);
  static TargetSpec logistic(std::vector<double> eta, Eigen::MatrixXd points);

  /// Throws Errc::invalid_argument when the declared structure is inconsistent.
  void validate() const;

  std::size_t states() const noexcept { return static_cast<std::size_t>(points.rows()); }
  std::size_t input_dim() const noexcept { return static_cast<std::size_t>(points.cols()); }
  Eigen::VectorXd point(std::size_t state) const;

  double value_at_state(std::size_t state) const;
  /// For logistic_link, x must coincide with one of the state points.
  double value(const Eigen::VectorXd& x) const;
  /// Upper bound on sup |h*| (the scale for holder/composition, 0.5^beta included).
  double sup_norm() const;
};

struct ChainMeta {
  std::string kernel_id;
  std::uint64_t seed = 0;
  double gamma = 0.0;
};

struct Dataset {
  Eigen::MatrixXd inputs;            // n x d_x
  Eigen::VectorXd outputs;           // n (labels are +-1 for classification)
  std::vector<std::size_t> states;   // chain state behind each row (may be empty)
  ChainMeta meta;

  std::size_t size() const noexcept { return static_cast<std::size_t>(inputs.rows()); }
};

using Predictor = std::function<double(const Eigen::VectorXd&)>;

enum class NoiseFamily { gaussian, uniform, rademacher };

/// Centered noise with standard deviation `varsigma` (which is also its
/// sub-Gaussian variance proxy for all three families).
struct NoiseSpec {
  NoiseFamily family = NoiseFamily::gaussian;
  double varsigma = 0.0;
};

NoiseFamily parse_noise_family(std::string_view name);
std::string_view noise_family_name(NoiseFamily family) noexcept;

/// (1/n) sum_i loss(h(X_i), Y_i); throws Errc::empty_dataset.
double empirical_risk(const Predictor& h, const Dataset& data, Loss loss);

/// R(h) - R(h*) under the stationary law, computed exactly from the per-state
/// conditional laws (square loss: (h - h*)^2; logistic: the conditional
/// phi-risk difference given eta).
double excess_risk_exact(const Predictor& h, const TargetSpec& target,
                         const markov::StationaryDist& pi, Loss loss);

/// Monte Carlo estimate of the same quantity from n_mc draws of (state, Y).
double excess_risk_mc(const Predictor& h, const TargetSpec& target,
                      const markov::StationaryDist& pi, Loss loss, const NoiseSpec& noise,
                      std::size_t n_mc, std::uint64_t seed);

/// E_pi[(loss(h(X),Y) - loss(h*(X),Y))^2], exact per state.
double excess_loss_second_moment(const Predictor& h, const TargetSpec& target,
                                 const markov::StationaryDist& pi, Loss loss,
                                 const NoiseSpec& noise);

/// Y_t = h*(X_t) + eps_t along a stationary trajectory.
Dataset generate_regression(const TargetSpec& target, const markov::TransitionKernel& kernel,
                            const markov::StationaryDist& pi, std::size_t n,
                            const NoiseSpec& noise, std::uint64_t seed);

/// Y_t | X_t = x(s) ~ 2 Bernoulli(eta(s)) - 1 along a stationary trajectory.
Dataset generate_classification(std::span<const double> eta, const Eigen::MatrixXd& points,
                                const markov::TransitionKernel& kernel,
                                const markov::StationaryDist& pi, std::size_t n,
                                std::uint64_t seed);

/// K + varsigma sqrt(2 log(2n / delta)).
double subgaussian_envelope(double holder_bound, double varsigma, std::size_t n, double delta);

}  // namespace pacdnn::model
