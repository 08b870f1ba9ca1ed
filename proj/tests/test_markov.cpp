#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "pacdnn/errors.hpp"
#include "pacdnn/markov.hpp"

using namespace pacdnn;
using namespace pacdnn::markov;

namespace {

Eigen::MatrixXd random_positive_kernel(int m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Eigen::MatrixXd p(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) p(i, j) = u(rng);
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

// Oracle: rows of P^1000 by repeated squaring.
Eigen::VectorXd power_oracle(const Eigen::MatrixXd& p) {
  Eigen::MatrixXd q = p;
  for (int i = 0; i < 10; ++i) q = q * q;  // P^1024
  return q.row(0).transpose();
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an exception");
  return Errc::invalid_argument;
}

}  // namespace

TEST_CASE("kernel validation") {
  Eigen::MatrixXd bad(2, 2);
  bad << 0.5, 0.6, 0.5, 0.5;
  CHECK(code_of([&] { TransitionKernel k(bad); }) == Errc::invalid_kernel);
  bad << 1.2, -0.2, 0.5, 0.5;
  CHECK(code_of([&] { TransitionKernel k(bad); }) == Errc::invalid_kernel);
  CHECK(code_of([] { TransitionKernel k(Eigen::MatrixXd::Ones(2, 3) / 3.0); }) == Errc::invalid_kernel);
  CHECK_NOTHROW(TransitionKernel(Eigen::MatrixXd::Identity(3, 3)));
}

TEST_CASE("stationary distribution") {
  SUBCASE("symmetric two-state kernel is uniform") {
    const auto pi = stationary_distribution(two_source_kernel(2, 0.3));
    CHECK(pi[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(pi[1] == doctest::Approx(0.5).epsilon(1e-14));
  }
  SUBCASE("identity is reducible") {
    CHECK(code_of([] { stationary_distribution(TransitionKernel(Eigen::MatrixXd::Identity(2, 2))); }) ==
          Errc::non_unique_stationary);
  }
  SUBCASE("random positive kernels match the power-iteration oracle") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
      const Eigen::MatrixXd p = random_positive_kernel(3, rng);
      const TransitionKernel k(p);
      const auto pi = stationary_distribution(k);
      const Eigen::VectorXd oracle = power_oracle(p);
      CHECK((pi.weights() - oracle).cwiseAbs().maxCoeff() < 1e-8);
      CHECK(pi.satisfies(k));
      CHECK(std::abs(pi.weights().sum() - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("time reversal") {
  SUBCASE("reversible kernel is its own reversal") {
    const auto k = two_source_kernel(2, 0.3);
    const auto r = time_reversal(k, stationary_distribution(k));
    CHECK((r.probs() - k.probs()).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("cycle reverses") {
    const auto k = cycle_kernel(3);
    const auto r = time_reversal(k, stationary_distribution(k));
    CHECK(r(0, 2) == doctest::Approx(1.0));
    CHECK(r(2, 1) == doctest::Approx(1.0));
    CHECK(r(1, 0) == doctest::Approx(1.0));
  }
  SUBCASE("involution on random kernels") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
      const TransitionKernel k(random_positive_kernel(4, rng));
      const auto pi = stationary_distribution(k);
      const auto r = time_reversal(k, pi);
      CHECK((r.probs().rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
      const auto rr = time_reversal(r, pi);
      CHECK((rr.probs() - k.probs()).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("spectral gap") {
  const auto k = two_source_kernel(2, 0.3);
  const auto pi = stationary_distribution(k);
  CHECK(spectral_gap(k.probs(), pi) == doctest::Approx(0.6).epsilon(1e-12));

  const StationaryDist half(Eigen::Vector2d(0.5, 0.5));
  CHECK(spectral_gap(Eigen::MatrixXd::Identity(2, 2), half) == 0.0);

  const auto u = uniform_kernel(4);
  CHECK(spectral_gap(u.probs(), stationary_distribution(u)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pseudo-spectral gap") {
  auto gap_of = [](const TransitionKernel& k, std::size_t k_max) {
    return pseudo_spectral_gap(k, stationary_distribution(k), k_max);
  };
  CHECK(gap_of(two_source_kernel(2, 0.25), 5) == doctest::Approx(0.75).epsilon(1e-10));
  CHECK(gap_of(two_source_kernel(2, 0.5), 5) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(gap_of(two_source_kernel(8, 0.25), 5) == doctest::Approx(0.75).epsilon(1e-10));

  const StationaryDist half(Eigen::Vector2d(0.5, 0.5));
  CHECK(pseudo_spectral_gap(TransitionKernel(Eigen::MatrixXd::Identity(2, 2)), half, 5) == 0.0);

  for (double p : {0.01, 0.05, 0.1, 0.25, 0.4, 0.5}) {
    CHECK(std::abs(gap_of(two_source_kernel(4, p), 1) - 4 * p * (1 - p)) < 1e-10);
  }

  SUBCASE("monotone in k_max") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 10; ++trial) {
      const TransitionKernel k(random_positive_kernel(5, rng));
      double prev = 0.0;
      for (std::size_t km = 1; km <= 8; ++km) {
        const double g = gap_of(k, km);
        CHECK(g >= prev - 1e-15);
        prev = g;
      }
    }
  }

  SUBCASE("k = 1 term equals gamma(P^2) for reversible chains") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
      // Symmetric weights give a reversible kernel.
      Eigen::MatrixXd w(4, 4);
      for (int i = 0; i < 4; ++i)
        for (int j = i; j < 4; ++j) w(i, j) = w(j, i) = u(rng);
      Eigen::MatrixXd p = w;
      for (int i = 0; i < 4; ++i) p.row(i) /= w.row(i).sum();
      const TransitionKernel k(p);
      const auto pi = stationary_distribution(k);
      const double term = pseudo_spectral_gap_terms(k, pi, 1).front();
      CHECK(std::abs(term - spectral_gap(p * p, pi)) < 1e-10);
    }
  }

  CHECK(code_of([] {
          const auto k = two_source_kernel(2, 0.3);
          pseudo_spectral_gap(k, stationary_distribution(k), 0);
        }) == Errc::invalid_argument);
}

TEST_CASE("total variation") {
  CHECK(tv_distance(Eigen::Vector2d(1, 0), Eigen::Vector2d(0.5, 0.5)) == doctest::Approx(0.5));
  CHECK(tv_distance(Eigen::Vector3d(0.2, 0.3, 0.5), Eigen::Vector3d(0.2, 0.3, 0.5)) == 0.0);
  CHECK(tv_distance(Eigen::Vector3d(0.2, 0.3, 0.5), Eigen::Vector3d(0.5, 0.3, 0.2)) ==
        doctest::Approx(0.3));
  CHECK(code_of([] { tv_distance(Eigen::Vector2d(1, 0), Eigen::Vector3d(1, 0, 0)); }) ==
        Errc::dimension_mismatch);

  std::mt19937_64 rng(2);
  std::gamma_distribution<double> g(1.0, 1.0);
  auto draw = [&] {
    Eigen::VectorXd v(5);
    for (int i = 0; i < 5; ++i) v(i) = g(rng);
    return Eigen::VectorXd(v / v.sum());
  };
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = draw(), b = draw(), c = draw();
    CHECK(tv_distance(a, b) >= 0.0);
    CHECK(tv_distance(a, b) == doctest::Approx(tv_distance(b, a)));
    CHECK(tv_distance(a, c) <= tv_distance(a, b) + tv_distance(b, c) + 1e-15);
  }
}

TEST_CASE("mixing time") {
  const auto k = two_source_kernel(2, 0.25);
  const auto pi = stationary_distribution(k);
  CHECK(mixing_time(k, pi, 0.25) == 1);

  // brute force against |1-2p|^t / 2 for a slow chain
  const auto slow = two_source_kernel(2, 0.05);
  const auto pis = stationary_distribution(slow);
  std::size_t expected = 1;
  while (0.5 * std::pow(0.9, static_cast<double>(expected)) > 0.25) ++expected;
  CHECK(mixing_time(slow, pis, 0.25) == expected);

  std::size_t prev = mixing_time(slow, pis, 0.05);
  for (double eps : {0.1, 0.2, 0.3, 0.45}) {
    const std::size_t t = mixing_time(slow, pis, eps);
    CHECK(t <= prev);
    prev = t;
  }

  const auto u = uniform_kernel(3);
  CHECK(mixing_time(u, stationary_distribution(u)) == 1);

  const StationaryDist half(Eigen::Vector2d(0.5, 0.5));
  CHECK(code_of([&] { mixing_time(TransitionKernel(Eigen::MatrixXd::Identity(2, 2)), half, 0.25, 500); }) ==
        Errc::not_mixed_within_cap);
}

TEST_CASE("simulation") {
  const auto u = uniform_kernel(4);
  const auto pi = stationary_distribution(u);
  const auto traj = simulate(u, pi, 100000, 42);
  std::vector<double> freq(4, 0.0);
  for (auto s : traj.states) freq[s] += 1.0 / 1e5;
  for (double f : freq) CHECK(std::abs(f - 0.25) < 0.01);

  CHECK(simulate(u, pi, 1000, 7).states == simulate(u, pi, 1000, 7).states);
  CHECK(simulate(u, pi, 1000, 7).states != simulate(u, pi, 1000, 8).states);

  const auto c = cycle_kernel(3);
  const auto cyc = simulate(c, stationary_distribution(c), 6, 1);
  for (std::size_t t = 1; t < 6; ++t) CHECK(cyc.states[t] == (cyc.states[t - 1] + 1) % 3);
}

TEST_CASE("plug-in pseudo-gap estimate") {
  const auto k = two_source_kernel(2, 0.3);
  const auto pi = stationary_distribution(k);
  CHECK(std::abs(estimate_pseudo_gap(simulate(k, pi, 200000, 1), 2) - 0.84) < 0.1);

  const auto c = cycle_kernel(3);
  const auto est = estimate_pseudo_gap_detailed(simulate(c, stationary_distribution(c), 300, 4), 3, 10, 0.0);
  CHECK((est.kernel.probs() - c.probs()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(est.pseudo_gap == 0.0);

  Trajectory stuck;
  stuck.states.assign(50, 0);
  CHECK(code_of([&] { estimate_pseudo_gap(stuck, 2); }) == Errc::unvisited_state);

  SUBCASE("error shrinks with n") {
    const auto k4 = two_source_kernel(4, 0.2);
    const auto pi4 = stationary_distribution(k4);
    const double truth = pseudo_spectral_gap(k4, pi4);
    std::vector<double> small, large;
    for (std::uint64_t s = 0; s < 20; ++s) {
      small.push_back(std::abs(estimate_pseudo_gap(simulate(k4, pi4, 2000, s), 4) - truth));
      large.push_back(std::abs(estimate_pseudo_gap(simulate(k4, pi4, 200000, 100 + s), 4) - truth));
    }
    std::nth_element(small.begin(), small.begin() + 10, small.end());
    std::nth_element(large.begin(), large.begin() + 10, large.end());
    CHECK(large[10] < small[10]);
  }
}
