#pragma once

// Finite-state Markov chains: stationary laws, time reversal, spectral and
// pseudo-spectral gaps, mixing times, simulation and plug-in gap estimation.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace pacdnn::markov {

/// Row-stochastic square matrix over states {0, ..., m-1}.
class TransitionKernel {
 public:
  static constexpr double kRowTolerance = 1e-12;

  /// Throws Errc::invalid_kernel unless square, entries in [0,1] and rows sum to 1.
  explicit TransitionKernel(Eigen::MatrixXd probs);

  std::size_t states() const noexcept { return static_cast<std::size_t>(probs_.rows()); }
  const Eigen::MatrixXd& probs() const noexcept { return probs_; }
  double operator()(std::size_t from, std::size_t to) const {
    return probs_(static_cast<Eigen::Index>(from), static_cast<Eigen::Index>(to));
  }

 private:
  Eigen::MatrixXd probs_;
};

/// Probability vector pi; `satisfies(kernel)` checks pi P = pi.
class StationaryDist {
 public:
  static constexpr double kSumTolerance = 1e-12;
  static constexpr double kFixedPointTolerance = 1e-10;

  explicit StationaryDist(Eigen::VectorXd weights);

  std::size_t size() const noexcept { return static_cast<std::size_t>(weights_.size()); }
  const Eigen::VectorXd& weights() const noexcept { return weights_; }
  double operator[](std::size_t i) const { return weights_(static_cast<Eigen::Index>(i)); }

  bool satisfies(const TransitionKernel& kernel) const;

 private:
  Eigen::VectorXd weights_;
};

struct Trajectory {
  std::vector<std::size_t> states;
  std::uint64_t seed = 0;
};

// Kernel families used throughout the experiments.

/// Two sources A = {0..m/2-1}, B = {m/2..m-1}; stay in the current source with
/// probability 1-p, switch with probability p, land uniformly inside the source.
/// With m = 2 this is the symmetric kernel [[1-p, p], [p, 1-p]].
TransitionKernel two_source_kernel(std::size_t states, double p);
/// Every row equal to the uniform law.
TransitionKernel uniform_kernel(std::size_t states);
/// Deterministic cycle i -> i+1 mod m.
TransitionKernel cycle_kernel(std::size_t states);

/// Throws Errc::non_unique_stationary when eigenvalue 1 of P^T is numerically repeated.
StationaryDist stationary_distribution(const TransitionKernel& kernel);

/// P*(z,u) = P(u,z) pi(u) / pi(z).
TransitionKernel time_reversal(const TransitionKernel& kernel, const StationaryDist& pi);

/// 1 - (largest modulus of the spectrum other than the simple eigenvalue 1);
/// 0 when eigenvalue 1 is repeated. Operators self-adjoint in L2(pi) go through a
/// symmetric eigen-solver, everything else through the general one.
double spectral_gap(const Eigen::MatrixXd& op, const StationaryDist& pi);

/// max over k = 1..k_max of gamma((P*)^k P^k) / k.
double pseudo_spectral_gap(const TransitionKernel& kernel, const StationaryDist& pi,
                           std::size_t k_max = 10);

/// The individual terms gamma((P*)^k P^k) / k for k = 1..k_max.
std::vector<double> pseudo_spectral_gap_terms(const TransitionKernel& kernel,
                                              const StationaryDist& pi, std::size_t k_max);

double tv_distance(std::span<const double> q1, std::span<const double> q2);
double tv_distance(const Eigen::VectorXd& q1, const Eigen::VectorXd& q2);

/// Smallest t in [1, t_cap] with max_z ||P^t(z,.) - pi||_TV <= epsilon.
std::size_t mixing_time(const TransitionKernel& kernel, const StationaryDist& pi,
                        double epsilon = 0.25, std::size_t t_cap = 100000);

/// Stationary trajectory of length n: Z_0 ~ pi, then Z_{t+1} ~ P(Z_t, .).
Trajectory simulate(const TransitionKernel& kernel, const StationaryDist& pi, std::size_t n,
                    std::uint64_t seed);

struct PlugInEstimate {
  TransitionKernel kernel;
  StationaryDist pi;
  double pseudo_gap;
};

/// Bigram-count estimate of the kernel with `pseudo_count` added to every cell,
/// then the pseudo-spectral gap of the plug-in pair.
PlugInEstimate estimate_pseudo_gap_detailed(const Trajectory& trajectory, std::size_t states,
                                            std::size_t k_max = 10, double pseudo_count = 1.0);
double estimate_pseudo_gap(const Trajectory& trajectory, std::size_t states,
                           std::size_t k_max = 10, double pseudo_count = 1.0);

}  // namespace pacdnn::markov
