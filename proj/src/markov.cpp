#include "pacdnn/markov.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "pacdnn/errors.hpp"

namespace pacdnn {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::invalid_kernel: return "InvalidKernel";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::non_unique_stationary: return "NonUniqueStationary";
    case Errc::zero_stationary_mass: return "ZeroStationaryMass";
    case Errc::eigen_failure: return "EigenFailure";
    case Errc::not_mixed_within_cap: return "NotMixedWithinCap";
    case Errc::unvisited_state: return "UnvisitedState";
    case Errc::architecture_too_large: return "ArchitectureTooLarge";
    case Errc::empty_dataset: return "EmptyDataset";
    case Errc::out_of_support: return "OutOfSupport";
    case Errc::invalid_class: return "InvalidClass";
    case Errc::no_draws: return "NoDraws";
    case Errc::theta_out_of_range: return "ThetaOutOfRange";
    case Errc::lambda_out_of_range: return "LambdaOutOfRange";
    case Errc::too_few_points: return "TooFewPoints";
    case Errc::mismatched_effective_size: return "MismatchedEffectiveSize";
    case Errc::io_error: return "IoError";
    case Errc::config_error: return "ConfigError";
  }
  return "Unknown";
}

namespace markov {
namespace {

// Eigenvalue 1 counts as repeated once the runner-up is this close to it.
constexpr double kMultiplicityThreshold = 1e-10;
constexpr double kMinStationaryMass = 1e-300;

bool rows_sum_to_one(const Eigen::MatrixXd& m, double tol) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (std::abs(m.row(i).sum() - 1.0) > tol) return false;
  }
  return true;
}

StationaryDist normalized(Eigen::VectorXd v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = std::max(v(i), 0.0);
  v /= v.sum();
  return StationaryDist(std::move(v));
}

StationaryDist power_iteration(const TransitionKernel& kernel) {
  // The lazy chain (I + P)/2 has the same stationary law and is aperiodic.
  const auto m = static_cast<Eigen::Index>(kernel.states());
  const Eigen::MatrixXd lazy = 0.5 * (Eigen::MatrixXd::Identity(m, m) + kernel.probs());
  Eigen::RowVectorXd v = Eigen::RowVectorXd::Constant(m, 1.0 / static_cast<double>(m));
  for (int step = 0; step < 10000; ++step) {
    Eigen::RowVectorXd next = v * lazy;
    next /= next.sum();
    const double change = (next - v).cwiseAbs().maxCoeff();
    v = next;
    if (change < 1e-12) break;
  }
  return normalized(v.transpose());
}

// gap from a real spectrum already known to contain the eigenvalue 1.
double gap_from_symmetric_spectrum(Eigen::VectorXd eig) {
  std::sort(eig.data(), eig.data() + eig.size(), std::greater<>());
  if (eig.size() < 2) return 1.0;
  if (eig(1) > 1.0 - kMultiplicityThreshold) return 0.0;
  double largest = 0.0;
  for (Eigen::Index i = 1; i < eig.size(); ++i) largest = std::max(largest, std::abs(eig(i)));
  return std::clamp(1.0 - largest, 0.0, 1.0);
}

double symmetric_gap(const Eigen::MatrixXd& op, const Eigen::VectorXd& sqrt_pi) {
  const Eigen::VectorXd inv_sqrt_pi = sqrt_pi.cwiseInverse();
  Eigen::MatrixXd sym = sqrt_pi.asDiagonal() * op * inv_sqrt_pi.asDiagonal();
  sym = 0.5 * (sym + sym.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw Error(Errc::eigen_failure, "symmetric eigen-solver did not converge");
  }
  return gap_from_symmetric_spectrum(solver.eigenvalues());
}

}  // namespace

TransitionKernel::TransitionKernel(Eigen::MatrixXd probs) : probs_(std::move(probs)) {
  if (probs_.rows() == 0 || probs_.rows() != probs_.cols()) {
    throw Error(Errc::invalid_kernel, "transition matrix must be square and nonempty");
  }
  for (Eigen::Index i = 0; i < probs_.rows(); ++i) {
    for (Eigen::Index j = 0; j < probs_.cols(); ++j) {
      const double v = probs_(i, j);
      if (!(v >= 0.0 && v <= 1.0)) {
        std::ostringstream msg;
        msg << "entry (" << i << "," << j << ") = " << v << " outside [0,1]";
        throw Error(Errc::invalid_kernel, msg.str());
      }
    }
    if (std::abs(probs_.row(i).sum() - 1.0) > kRowTolerance) {
      std::ostringstream msg;
      msg << "row " << i << " sums to " << probs_.row(i).sum();
      throw Error(Errc::invalid_kernel, msg.str());
    }
  }
}

StationaryDist::StationaryDist(Eigen::VectorXd weights) : weights_(std::move(weights)) {
  if (weights_.size() == 0) throw Error(Errc::invalid_argument, "empty probability vector");
  if ((weights_.array() < 0.0).any()) {
    throw Error(Errc::invalid_argument, "negative stationary weight");
  }
  if (std::abs(weights_.sum() - 1.0) > kSumTolerance) {
    throw Error(Errc::invalid_argument, "stationary weights do not sum to 1");
  }
}

bool StationaryDist::satisfies(const TransitionKernel& kernel) const {
  if (kernel.states() != size()) return false;
  const Eigen::RowVectorXd image = weights_.transpose() * kernel.probs();
  return (image.transpose() - weights_).cwiseAbs().maxCoeff() <= kFixedPointTolerance;
}

TransitionKernel two_source_kernel(std::size_t states, double p) {
  if (states < 2 || states % 2 != 0) {
    throw Error(Errc::invalid_argument, "two-source kernel needs an even state count >= 2");
  }
  if (!(p >= 0.0 && p <= 1.0)) throw Error(Errc::invalid_argument, "p must lie in [0,1]");
  const auto m = static_cast<Eigen::Index>(states);
  const Eigen::Index half = m / 2;
  const double h = static_cast<double>(half);
  Eigen::MatrixXd probs(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const bool same = (i < half) == (j < half);
      probs(i, j) = (same ? 1.0 - p : p) / h;
    }
  }
  return TransitionKernel(std::move(probs));
}

TransitionKernel uniform_kernel(std::size_t states) {
  const auto m = static_cast<Eigen::Index>(states);
  return TransitionKernel(Eigen::MatrixXd::Constant(m, m, 1.0 / static_cast<double>(m)));
}

TransitionKernel cycle_kernel(std::size_t states) {
  const auto m = static_cast<Eigen::Index>(states);
  Eigen::MatrixXd probs = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) probs(i, (i + 1) % m) = 1.0;
  return TransitionKernel(std::move(probs));
}

StationaryDist stationary_distribution(const TransitionKernel& kernel) {
  const Eigen::Index m = static_cast<Eigen::Index>(kernel.states());
  if (m == 1) return StationaryDist(Eigen::VectorXd::Ones(1));

  Eigen::EigenSolver<Eigen::MatrixXd> solver(kernel.probs().transpose());
  if (solver.info() != Eigen::Success) return power_iteration(kernel);

  const Eigen::VectorXcd& eig = solver.eigenvalues();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return std::abs(eig(a) - 1.0) < std::abs(eig(b) - 1.0);
  });
  if (std::abs(eig(order[1]) - 1.0) < kMultiplicityThreshold) {
    throw Error(Errc::non_unique_stationary, "eigenvalue 1 of P^T is repeated");
  }

  Eigen::VectorXd v = solver.eigenvectors().col(order[0]).real();
  if (v.sum() < 0.0) v = -v;
  if (v.sum() > 0.0) {
    StationaryDist pi = normalized(std::move(v));
    if (pi.satisfies(kernel)) return pi;
  }
  StationaryDist pi = power_iteration(kernel);
  if (!pi.satisfies(kernel)) {
    throw Error(Errc::eigen_failure, "stationary distribution did not converge");
  }
  return pi;
}

TransitionKernel time_reversal(const TransitionKernel& kernel, const StationaryDist& pi) {
  if (pi.size() != kernel.states()) {
    throw Error(Errc::dimension_mismatch, "kernel and stationary law sizes differ");
  }
  if (pi.weights().minCoeff() <= kMinStationaryMass) {
    throw Error(Errc::zero_stationary_mass, "time reversal needs pi > 0");
  }
  const Eigen::VectorXd& w = pi.weights();
  Eigen::MatrixXd rev = w.cwiseInverse().asDiagonal() * kernel.probs().transpose() * w.asDiagonal();
  // pi P = pi holds only to ~1e-10; renormalize so the result is exactly stochastic.
  for (Eigen::Index i = 0; i < rev.rows(); ++i) rev.row(i) /= rev.row(i).sum();
  return TransitionKernel(std::move(rev));
}

double spectral_gap(const Eigen::MatrixXd& op, const StationaryDist& pi) {
  if (op.rows() != op.cols() || static_cast<std::size_t>(op.rows()) != pi.size()) {
    throw Error(Errc::dimension_mismatch, "operator and stationary law sizes differ");
  }
  if (!rows_sum_to_one(op, 1e-10)) {
    throw Error(Errc::invalid_kernel, "operator does not map constants to constants");
  }
  if (op.rows() == 1) return 1.0;

  // Self-adjoint in L2(pi) iff diag(pi) * op is symmetric.
  const Eigen::MatrixXd weighted = pi.weights().asDiagonal() * op;
  const double asym = (weighted - weighted.transpose()).cwiseAbs().maxCoeff();
  if (asym <= 1e-12 && pi.weights().minCoeff() > kMinStationaryMass) {
    return symmetric_gap(op, pi.weights().cwiseSqrt());
  }

  Eigen::EigenSolver<Eigen::MatrixXd> solver(op, false);
  if (solver.info() != Eigen::Success) {
    throw Error(Errc::eigen_failure, "general eigen-solver did not converge");
  }
  const Eigen::VectorXcd& eig = solver.eigenvalues();
  Eigen::Index unit = 0;
  for (Eigen::Index i = 1; i < eig.size(); ++i) {
    if (std::abs(eig(i) - 1.0) < std::abs(eig(unit) - 1.0)) unit = i;
  }
  double largest = 0.0;
  for (Eigen::Index i = 0; i < eig.size(); ++i) {
    if (i == unit) continue;
    if (std::abs(eig(i) - 1.0) < kMultiplicityThreshold) return 0.0;
    largest = std::max(largest, std::abs(eig(i)));
  }
  return std::clamp(1.0 - largest, 0.0, 1.0);
}

std::vector<double> pseudo_spectral_gap_terms(const TransitionKernel& kernel,
                                              const StationaryDist& pi, std::size_t k_max) {
  if (k_max < 1) throw Error(Errc::invalid_argument, "k_max must be >= 1");
  const TransitionKernel reversed = time_reversal(kernel, pi);
  const Eigen::VectorXd sqrt_pi = pi.weights().cwiseSqrt();

  std::vector<double> terms;
  terms.reserve(k_max);
  Eigen::MatrixXd pk = kernel.probs();
  Eigen::MatrixXd rk = reversed.probs();
  for (std::size_t k = 1; k <= k_max; ++k) {
    if (k > 1) {
      pk = pk * kernel.probs();
      rk = rk * reversed.probs();
    }
    const Eigen::MatrixXd op = rk * pk;
    terms.push_back(symmetric_gap(op, sqrt_pi) / static_cast<double>(k));
  }
  return terms;
}

double pseudo_spectral_gap(const TransitionKernel& kernel, const StationaryDist& pi,
                           std::size_t k_max) {
  const std::vector<double> terms = pseudo_spectral_gap_terms(kernel, pi, k_max);
  return *std::max_element(terms.begin(), terms.end());
}

double tv_distance(std::span<const double> q1, std::span<const double> q2) {
  if (q1.size() != q2.size()) {
    throw Error(Errc::dimension_mismatch, "distributions have different lengths");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < q1.size(); ++i) sum += std::abs(q1[i] - q2[i]);
  return 0.5 * sum;
}

double tv_distance(const Eigen::VectorXd& q1, const Eigen::VectorXd& q2) {
  return tv_distance(std::span<const double>(q1.data(), static_cast<std::size_t>(q1.size())),
                     std::span<const double>(q2.data(), static_cast<std::size_t>(q2.size())));
}

std::size_t mixing_time(const TransitionKernel& kernel, const StationaryDist& pi, double epsilon,
                        std::size_t t_cap) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw Error(Errc::invalid_argument, "epsilon must lie in (0,1)");
  }
  if (pi.size() != kernel.states()) {
    throw Error(Errc::dimension_mismatch, "kernel and stationary law sizes differ");
  }
  const Eigen::RowVectorXd target = pi.weights().transpose();
  Eigen::MatrixXd power = kernel.probs();
  for (std::size_t t = 1; t <= t_cap; ++t) {
    if (t > 1) power = power * kernel.probs();
    double worst = 0.0;
    for (Eigen::Index z = 0; z < power.rows(); ++z) {
      worst = std::max(worst, 0.5 * (power.row(z) - target).cwiseAbs().sum());
    }
    if (worst <= epsilon) return t;
  }
  throw Error(Errc::not_mixed_within_cap, "no t <= t_cap reaches the TV threshold");
}

Trajectory simulate(const TransitionKernel& kernel, const StationaryDist& pi, std::size_t n,
                    std::uint64_t seed) {
  if (n < 1) throw Error(Errc::invalid_argument, "trajectory length must be >= 1");
  if (pi.size() != kernel.states()) {
    throw Error(Errc::dimension_mismatch, "kernel and stationary law sizes differ");
  }
  const std::size_t m = kernel.states();
  auto cumulative = [m](auto&& row_at) {
    std::vector<double> c(m);
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      acc += row_at(j);
      c[j] = acc;
    }
    c[m - 1] = 1.0;
    return c;
  };
  std::vector<std::vector<double>> rows;
  rows.reserve(m);
  for (std::size_t i = 0; i < m; ++i) rows.push_back(cumulative([&](std::size_t j) { return kernel(i, j); }));
  const std::vector<double> start = cumulative([&](std::size_t j) { return pi[j]; });

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto draw = [&](const std::vector<double>& c) {
    const double u = unif(rng);
    const auto it = std::upper_bound(c.begin(), c.end(), u);
    return std::min(static_cast<std::size_t>(it - c.begin()), m - 1);
  };

  Trajectory traj;
  traj.seed = seed;
  traj.states.resize(n);
  traj.states[0] = draw(start);
  for (std::size_t t = 1; t < n; ++t) traj.states[t] = draw(rows[traj.states[t - 1]]);
  return traj;
}

PlugInEstimate estimate_pseudo_gap_detailed(const Trajectory& trajectory, std::size_t states,
                                            std::size_t k_max, double pseudo_count) {
  if (states < 1) throw Error(Errc::invalid_argument, "state count must be >= 1");
  if (pseudo_count < 0.0) throw Error(Errc::invalid_argument, "pseudo_count must be >= 0");
  const auto m = static_cast<Eigen::Index>(states);
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(m, m);
  for (std::size_t t = 0; t + 1 < trajectory.states.size(); ++t) {
    const std::size_t from = trajectory.states[t];
    const std::size_t to = trajectory.states[t + 1];
    if (from >= states || to >= states) {
      throw Error(Errc::invalid_argument, "trajectory state outside [0, m)");
    }
    counts(static_cast<Eigen::Index>(from), static_cast<Eigen::Index>(to)) += 1.0;
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    if (counts.row(i).sum() == 0.0) {
      throw Error(Errc::unvisited_state,
                  "state " + std::to_string(i) + " never appears as a transition source");
    }
  }
  counts.array() += pseudo_count;
  for (Eigen::Index i = 0; i < m; ++i) counts.row(i) /= counts.row(i).sum();

  TransitionKernel kernel(std::move(counts));
  StationaryDist pi = stationary_distribution(kernel);
  const double gap = pseudo_spectral_gap(kernel, pi, k_max);
  return PlugInEstimate{std::move(kernel), std::move(pi), gap};
}

double estimate_pseudo_gap(const Trajectory& trajectory, std::size_t states, std::size_t k_max,
                           double pseudo_count) {
  return estimate_pseudo_gap_detailed(trajectory, states, k_max, pseudo_count).pseudo_gap;
}

}  // namespace markov
}  // namespace pacdnn
