#pragma once

// Spike-and-slab prior over sparse network parameters and a reversible-jump
// Metropolis-Hastings sampler for the Gibbs posterior
//   Pi_lambda(d theta | D_n)  ~  exp(-lambda * empirical_risk(theta)) Pi(d theta).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "pacdnn/model.hpp"
#include "pacdnn/network.hpp"

namespace pacdnn::gibbs {

/// The network class H(L, N, B, F, S).
struct ClassDef {
  std::size_t depth = 1;
  std::size_t width = 2;
  std::size_t sparsity = 1;
  double weight_bound = 1.0;
  double output_bound = 1.0;
  network::Activation activation = network::Activation::relu;

  /// Coordinates the sampler moves over: all parameters of (d_x, N, ..., N, d_y).
  network::Architecture architecture(std::size_t input_dim, std::size_t output_dim = 1) const;
};

struct MoveProbs {
  double add = 0.25;
  double remove = 0.25;
  double perturb = 0.5;
};

struct GibbsConfig {
  double s = 2.0;
  double lambda = 1.0;
  MoveProbs moves;
  /// Random-walk half-width; B/10 when unset.
  std::optional<double> step;
  /// Post-burn-in iterations; one draw is kept every `thin` of them.
  std::size_t iters = 10000;
  std::size_t burn_in = 1000;
  std::size_t thin = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct AcceptanceRates {
  double add = 0.0;
  double remove = 0.0;
  double perturb = 0.0;
};

struct PosteriorDraws {
  std::vector<network::SparseNetwork> networks;
  std::vector<double> log_scores;  // -lambda * empirical risk of each draw
  AcceptanceRates acceptance;
  network::Activation activation = network::Activation::relu;
};

/// (1 - s^{-n_max}) / (s - 1).
double normalizer_Cs(double s, std::size_t n_max);

/// log of s^{-k} C(n_max, k)^{-1} (2B)^{-k} / C_s for a support of size k.
double log_prior_support(std::size_t card, double s, double weight_bound, std::size_t n_max);

/// Prior log-density of a network (Lebesgue on the active coordinates, counting
/// on supports). Throws Errc::out_of_support when a weight leaves [-B, B] or the
/// support size is outside [1, n_max].
double log_prior(const network::SparseNetwork& net, const GibbsConfig& cfg, std::size_t n_max);

/// n gamma / (32 K + 10).
double temperature(std::size_t n, double gamma, double K);

/// Empirical risk of raw parameter vectors, with the sample collapsed onto its
/// distinct inputs (exact: per-input sufficient statistics of the outputs).
class RiskEvaluator {
 public:
  RiskEvaluator(const model::Dataset& data, model::Loss loss, network::Architecture arch,
                network::Activation act, double output_bound);

  double operator()(std::span<const double> theta) const;
  std::size_t sample_size() const noexcept { return n_; }
  std::size_t distinct_inputs() const noexcept { return static_cast<std::size_t>(inputs_.cols()); }

 private:
  model::Loss loss_;
  network::Architecture arch_;
  network::Activation act_;
  double output_bound_;
  std::size_t n_ = 0;
  Eigen::MatrixXd inputs_;    // d_x x U
  Eigen::VectorXd count_;     // rows per distinct input
  Eigen::VectorXd mean_y_;    // square loss: mean output
  Eigen::VectorXd within_ss_; // square loss: sum (y - mean)^2
  Eigen::VectorXd positives_; // logistic: number of +1 labels
};

/// Reversible-jump MH over (support, active values) restricted to 1 <= |I| <= S.
/// Moves: ADD (uniform inactive index, value ~ U[-B,B]), REMOVE (uniform active
/// index), PERTURB (uniform active index, U[-step, step] step reflected at +-B).
/// Starts from a single active coordinate (chosen uniformly) with value 0.
/// Runs burn_in + iters iterations and keeps every `thin`-th post-burn-in state.
PosteriorDraws sample_posterior(const model::Dataset& data, model::Loss loss,
                                const ClassDef& cls, const GibbsConfig& cfg);

enum class PredictorMode { single_draw, average };

PredictorMode parse_predictor_mode(std::string_view name);

/// single_draw: the last retained draw; average: pointwise mean over all draws.
model::Predictor posterior_predictor(const PosteriorDraws& draws,
                                     PredictorMode mode = PredictorMode::single_draw);

/// Clipped scalar predictor x -> h_theta(x)_0.
model::Predictor as_predictor(const network::SparseNetwork& net,
                              network::Activation act = network::Activation::relu,
                              bool clip = true);

}  // namespace pacdnn::gibbs
