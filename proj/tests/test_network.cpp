#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "pacdnn/errors.hpp"
#include "pacdnn/network.hpp"

using namespace pacdnn;
using namespace pacdnn::network;

namespace {

std::span<const double> span_of(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

// Independent oracle: dense per-layer matrices built by walking the flat layout by hand.
Eigen::VectorXd dense_forward(const std::vector<std::size_t>& widths, const Eigen::VectorXd& theta,
                              Eigen::VectorXd x, bool relu) {
  std::size_t pos = 0;
  for (std::size_t l = 1; l < widths.size(); ++l) {
    const auto r = static_cast<int>(widths[l]);
    const auto c = static_cast<int>(widths[l - 1]);
    Eigen::MatrixXd w(r, c);
    for (int j = 0; j < c; ++j)
      for (int i = 0; i < r; ++i) w(i, j) = theta(static_cast<Eigen::Index>(pos++));
    Eigen::VectorXd b(r);
    for (int i = 0; i < r; ++i) b(i) = theta(static_cast<Eigen::Index>(pos++));
    Eigen::VectorXd z = w * x + b;
    if (l + 1 < widths.size()) {
      for (int i = 0; i < r; ++i) z(i) = relu ? std::max(0.0, z(i)) : 1.0 / (1.0 + std::exp(-z(i)));
    }
    x = z;
  }
  return x;
}

Eigen::VectorXd random_theta(const Architecture& a, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  Eigen::VectorXd t(static_cast<Eigen::Index>(param_count(a)));
  for (auto& v : t) v = u(rng);
  return t;
}

}  // namespace

TEST_CASE("parameter counts") {
  CHECK(param_count(Architecture({1, 2, 1})) == 7);
  CHECK(param_count(Architecture({1, 1})) == 2);
  CHECK(param_count(Architecture({3, 4, 4, 2})) == 46);
  CHECK(param_count_max(1, 2) == 12);
  CHECK(param_count_max(0, 1) == 2);
  CHECK(param_count_max(3, 5) == 120);
  CHECK(param_count(Architecture::uniform(2, 2, 2, 2)) == param_count_max(2, 2));

  CHECK_THROWS_AS(Architecture({1}), Error);
  CHECK_THROWS_AS(Architecture({1, 0, 1}), Error);
}

TEST_CASE("flat layout offsets") {
  const Architecture a({3, 4, 2});
  CHECK(a.weight_offset(1) == 0);
  CHECK(a.bias_offset(1) == 12);
  CHECK(a.weight_offset(2) == 16);
  CHECK(a.bias_offset(2) == 24);
  CHECK(a.depth() == 1);
  CHECK(a.width() == 4);
}

TEST_CASE("sparse network invariants") {
  const Architecture a({1, 2, 1});
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(7);
  theta(1) = 0.5;
  theta(6) = -0.25;
  const SparseNetwork net(a, theta, 1.0, 1.0);
  CHECK(net.active() == std::vector<std::size_t>{1, 6});
  CHECK(net.active_values() == std::vector<double>{0.5, -0.25});

  const std::vector<double> vals{0.3, -0.1};
  const SparseNetwork explicit_net(a, {6, 2}, vals, 1.0, 1.0);
  CHECK(explicit_net.theta()(6) == 0.3);
  CHECK(explicit_net.theta()(2) == -0.1);
  CHECK(explicit_net.theta()(0) == 0.0);

  theta(3) = 1.5;
  try {
    SparseNetwork bad(a, theta, 1.0, 1.0);
    FAIL("expected OutOfSupport");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::out_of_support);
  }
  theta(3) = 0.5;
  try {
    SparseNetwork bad(a, theta, 1.0, 1.0, 2);
    FAIL("expected InvalidClass");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::invalid_class);
  }
  CHECK_THROWS_AS(SparseNetwork(a, {1, 1}, vals, 1.0, 1.0), Error);
  CHECK_THROWS_AS(SparseNetwork(a, {7}, std::vector<double>{0.1}, 1.0, 1.0), Error);
}

TEST_CASE("forward pass") {
  SUBCASE("zero parameters give zero output") {
    const SparseNetwork net(Architecture({2, 3, 1}), Eigen::VectorXd::Zero(13), 1.0, 1.0);
    CHECK(forward(net, Eigen::Vector2d(0.3, -0.8))(0) == 0.0);
  }
  SUBCASE("identity affine map") {
    Eigen::VectorXd theta(6);
    theta << 1, 0, 0, 1, 0, 0;
    const SparseNetwork net(Architecture({2, 2}), theta, 1.0, 100.0);
    const Eigen::Vector2d x(3.5, -7.25);
    CHECK((forward(net, x) - x).norm() == 0.0);
  }
  SUBCASE("agrees with a dense oracle") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const std::vector<std::size_t> widths{3, 3, 3, 2};
    const Architecture a(widths);
    for (bool relu : {true, false}) {
      const Eigen::VectorXd theta = random_theta(a, 1.0, rng);
      const SparseNetwork net(a, theta, 1.0, 1e9);
      for (int k = 0; k < 100; ++k) {
        const Eigen::Vector3d x(u(rng), u(rng), u(rng));
        const Eigen::VectorXd got = forward(net, x, relu ? Activation::relu : Activation::sigmoid, false);
        CHECK((got - dense_forward(widths, theta, x, relu)).cwiseAbs().maxCoeff() < 1e-12);
      }
    }
  }
  SUBCASE("clipping keeps outputs in [-F, F]") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g(0.0, 5.0);
    const Architecture a({2, 4, 4, 1});
    for (int k = 0; k < 200; ++k) {
      const SparseNetwork net(a, random_theta(a, 1.0, rng), 1.0, 0.3);
      CHECK(std::abs(forward(net, Eigen::Vector2d(g(rng), g(rng)))(0)) <= 0.3);
    }
  }
  SUBCASE("homogeneous in the last layer without biases") {
    std::mt19937_64 rng(3);
    const Architecture a({2, 3, 3, 1});
    Eigen::VectorXd theta = random_theta(a, 1.0, rng);
    for (std::size_t l = 1; l <= 3; ++l)
      for (std::size_t i = a.bias_offset(l); i < a.bias_offset(l) + a.widths()[l]; ++i) theta(static_cast<Eigen::Index>(i)) = 0.0;
    Eigen::VectorXd scaled = theta;
    for (std::size_t i = a.weight_offset(3); i < a.bias_offset(3); ++i) scaled(static_cast<Eigen::Index>(i)) *= 0.4;
    const Eigen::Vector2d x(0.7, -0.2);
    const double base = forward(SparseNetwork(a, theta, 1.0, 1e9), x, Activation::relu, false)(0);
    const double sc = forward(SparseNetwork(a, scaled, 1.0, 1e9), x, Activation::relu, false)(0);
    CHECK(sc == doctest::Approx(0.4 * base).epsilon(1e-12));
  }
}

TEST_CASE("activation registry") {
  CHECK(activation_info(Activation::relu).lipschitz == 1.0);
  CHECK(activation_info(Activation::relu).value_at_zero == 0.0);
  CHECK(activation_info(Activation::sigmoid).lipschitz == 0.25);
  CHECK(activation_info(Activation::sigmoid).value_at_zero == 0.5);
  CHECK(parse_activation("sigmoid") == Activation::sigmoid);
  CHECK_THROWS_AS(parse_activation("tanh"), Error);
}

TEST_CASE("parameter-Lipschitz constant") {
  CHECK(lipschitz_parameter_bound(Architecture({1, 2, 1}), 1.0, 1.0, 0.0, 1.0) == doctest::Approx(8.0));
  CHECK(lipschitz_parameter_bound(Architecture({3, 2}), 5.0, 1.0, 0.0, 1.0) == 0.0);
  const Architecture a({2, 3, 3, 1});
  double prev = 0.0;
  for (double b : {0.5, 1.0, 2.0, 4.0}) {
    const double v = lipschitz_parameter_bound(a, b, 1.0, 0.0, 1.0);
    CHECK(v >= prev);
    prev = v;
  }
}

// Under entrywise parameter distance the inequality fails: every weight 1,
// every coordinate moved by -eps gives a 9 eps gap against a bound of 8 eps.
// The proof bounds layers in the row-sum norm, which is what layerwise_distance measures.
TEST_CASE("entrywise parameter distance is too weak for the Lipschitz bound") {
  const Architecture a({1, 2, 1});
  const double eps = 1e-3;
  const Eigen::VectorXd theta = Eigen::VectorXd::Ones(7);
  const Eigen::VectorXd moved = theta.array() - eps;
  const Eigen::VectorXd x = Eigen::VectorXd::Ones(1);
  const double gap = std::abs(forward(SparseNetwork(a, theta, 1.0, 1e9), x, Activation::relu, false)(0) -
                              forward(SparseNetwork(a, moved, 1.0, 1e9), x, Activation::relu, false)(0));
  const double bound = lipschitz_parameter_bound(a, 1.0, 1.0, 0.0, 1.0);
  CHECK(gap > bound * (theta - moved).cwiseAbs().maxCoeff());
  CHECK(gap <= bound * layerwise_distance(a, span_of(theta), span_of(moved)));
}

TEST_CASE("layerwise norms") {
  const Architecture a({2, 2, 1});
  Eigen::VectorXd t(9);
  t << 0.5, -0.25, 0.5, 0.5, 0.1, 0.2, 0.3, -0.6, 0.9;
  // W1 rows: (0.5, 0.5) and (-0.25, 0.5); b1 = (0.1, 0.2); W2 = (0.3, -0.6); b2 = 0.9
  CHECK(layerwise_norm(a, span_of(t)) == doctest::Approx(1.0));
  const Eigen::VectorXd z = Eigen::VectorXd::Zero(9);
  CHECK(layerwise_distance(a, span_of(t), span_of(z)) == doctest::Approx(1.0));
  CHECK(layerwise_distance(a, span_of(t), span_of(t)) == 0.0);
  CHECK(layerwise_distance(a, span_of(t), span_of(z)) <= (t - z).cwiseAbs().sum());
}

TEST_CASE("embedding into the maximal architecture") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  SUBCASE("maximal shape embeds as the identity") {
    const Architecture a = Architecture::uniform(2, 1, 2, 2);
    const Eigen::VectorXd theta = random_theta(a, 1.0, rng);
    const SparseNetwork net(a, theta, 1.0, 1.0);
    CHECK((embed_to_max(net, 1, 2) - theta).norm() == 0.0);
  }
  SUBCASE("slot mapping for widths (1, 1, 1) into L=1, N=2") {
    Eigen::VectorXd theta(4);
    theta << 0.1, 0.2, 0.3, 0.4;  // W1, b1, W2, b2
    const Eigen::VectorXd e = embed_to_max(SparseNetwork(Architecture({1, 1, 1}), theta, 1.0, 1.0), 1, 2);
    REQUIRE(e.size() == 12);
    // maximal layout: W1 (2x2) at 0..3, b1 at 4..5, W2 (2x2) at 6..9, b2 at 10..11
    Eigen::VectorXd expected = Eigen::VectorXd::Zero(12);
    expected(0) = 0.1;
    expected(4) = 0.2;
    expected(6) = 0.3;
    expected(10) = 0.4;
    CHECK((e - expected).norm() == 0.0);
    CHECK((e.array() != 0.0).count() == 4);
  }
  SUBCASE("too wide or too deep") {
    const SparseNetwork wide(Architecture({1, 3, 1}), Eigen::VectorXd::Zero(10), 1.0, 1.0);
    try {
      embed_to_max(wide, 1, 2);
      FAIL("expected ArchitectureTooLarge");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::architecture_too_large);
    }
    const SparseNetwork deep(Architecture({1, 1, 1, 1}), Eigen::VectorXd::Zero(6), 1.0, 1.0);
    CHECK_THROWS_AS(embed_to_max(deep, 1, 2), Error);
  }
  SUBCASE("function preserved, including shallower networks") {
    for (const std::vector<std::size_t>& w : {std::vector<std::size_t>{2, 3, 1}, {2, 2, 3, 1}, {1, 2, 1}}) {
      const Architecture a(w);
      const Architecture big = Architecture::uniform(3, 3, 3, 3);
      for (int trial = 0; trial < 10; ++trial) {
        const Eigen::VectorXd theta = random_theta(a, 1.0, rng);
        const SparseNetwork net(a, theta, 1.0, 1e9);
        const Eigen::VectorXd e = embed_to_max(net, 3, 3);
        const SparseNetwork embedded(big, e, 1.0, 1e9);
        for (int k = 0; k < 10; ++k) {
          Eigen::VectorXd x(static_cast<Eigen::Index>(w.front()));
          for (auto& v : x) v = u(rng);
          Eigen::VectorXd padded = Eigen::VectorXd::Zero(3);
          padded.head(x.size()) = x;
          const double direct = forward(net, x, Activation::relu, false)(0);
          const double via = forward(embedded, padded, Activation::relu, false)(0);
          CHECK(via == doctest::Approx(direct).epsilon(1e-12));
        }
      }
    }
  }
}
