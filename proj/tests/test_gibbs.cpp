#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "pacdnn/errors.hpp"
#include "pacdnn/gibbs.hpp"
#include "pacdnn/markov.hpp"
#include "pacdnn/model.hpp"

using namespace pacdnn;
using namespace pacdnn::gibbs;

namespace {

model::Dataset regression_data(std::size_t states, std::size_t n, double noise, std::uint64_t seed,
                               std::size_t dim = 1) {
  const auto k = markov::two_source_kernel(states, 0.3);
  const auto pi = markov::stationary_distribution(k);
  Eigen::MatrixXd points(static_cast<Eigen::Index>(states), static_cast<Eigen::Index>(dim));
  std::mt19937_64 rng(seed + 1000);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& v : points.reshaped()) v = u(rng);
  const auto target = model::TargetSpec::holder(1.0, points);
  return model::generate_regression(target, k, pi, n, {model::NoiseFamily::gaussian, noise}, seed);
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

TEST_CASE("prior normalizer") {
  CHECK(normalizer_Cs(2, 3) == doctest::Approx(0.875).epsilon(1e-15));
  CHECK(normalizer_Cs(3, 2) == doctest::Approx(4.0 / 9.0).epsilon(1e-15));
  CHECK(normalizer_Cs(2, 2000) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(normalizer_Cs(1.5, 3), Error);

  for (double s : {2.0, 3.5, 10.0}) {
    for (std::size_t n_max : {1u, 2u, 7u, 40u}) {
      double total = 0.0;
      for (std::size_t i = 1; i <= n_max; ++i) total += std::pow(s, -static_cast<double>(i));
      CHECK(std::abs(total / normalizer_Cs(s, n_max) - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("log prior") {
  GibbsConfig cfg;
  cfg.s = 2;
  const network::Architecture a({1, 1});
  const network::SparseNetwork one(a, {0}, std::vector<double>{0.4}, 1.0, 1.0);
  CHECK(log_prior(one, cfg, 2) == doctest::Approx(std::log(1.0 / 6.0)).epsilon(1e-14));

  // Summed over supports with slab volume (2B)^k the prior integrates to 1.
  for (std::size_t n_max : {2u, 5u, 9u}) {
    double total = 0.0;
    for (std::size_t k = 1; k <= n_max; ++k) {
      const double binom = std::exp(std::lgamma(n_max + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n_max - k + 1.0));
      total += binom * std::exp(log_prior_support(k, 2.5, 0.7, n_max)) * std::pow(1.4, static_cast<double>(k));
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }

  // A network with B = 2 holding a weight 1.5 is outside a B = 1 slab.
  const network::SparseNetwork wide(a, {0}, std::vector<double>{1.5}, 2.0, 1.0);
  const network::SparseNetwork narrow(a, {0}, std::vector<double>{0.5}, 1.0, 1.0);
  CHECK_NOTHROW(log_prior(wide, cfg, 2));
  CHECK(code_of([&] { log_prior_support(0, 2, 1, 2); }) == Errc::out_of_support);
  CHECK(code_of([&] { log_prior_support(3, 2, 1, 2); }) == Errc::out_of_support);
  CHECK(code_of([&] { network::SparseNetwork(a, {0}, std::vector<double>{1.5}, 1.0, 1.0); }) ==
        Errc::out_of_support);
  CHECK(log_prior(narrow, cfg, 2) == log_prior(one, cfg, 2));
}

TEST_CASE("temperature") {
  CHECK(temperature(1000, 0.5, 1) == doctest::Approx(500.0 / 42.0).epsilon(1e-15));
  CHECK(temperature(1000, 0.0, 1) == 0.0);
  CHECK(temperature(2000, 0.5, 1) == doctest::Approx(2 * temperature(1000, 0.5, 1)));
  CHECK_THROWS_AS(temperature(10, 1.5, 1), Error);
  CHECK_THROWS_AS(temperature(10, 0.5, 0), Error);
}

TEST_CASE("config validation") {
  GibbsConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.s = 1.5;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.moves = {0.3, 0.3, 0.3};
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.moves = {0.5, 0.0, 0.5};
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.moves = {0.0, 0.0, 1.0};
  CHECK_NOTHROW(cfg.validate());
  cfg = {};
  cfg.lambda = -1;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.step = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.thin = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);

  const auto data = regression_data(2, 10, 0.1, 1);
  ClassDef cls;
  cls.sparsity = 0;
  CHECK(code_of([&] { sample_posterior(data, model::Loss::square, cls, GibbsConfig{}); }) == Errc::invalid_class);
  CHECK(code_of([&] { sample_posterior(model::Dataset{}, model::Loss::square, ClassDef{}, GibbsConfig{}); }) ==
        Errc::empty_dataset);
}

TEST_CASE("risk evaluator matches the per-row empirical risk") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const ClassDef cls{1, 3, 20, 1.0, 0.6, network::Activation::relu};
  for (std::size_t dim : {1u, 2u}) {
    const auto data = regression_data(4, 300, 0.5, 3 + dim, dim);
    const auto arch = cls.architecture(dim);
    const RiskEvaluator eval(data, model::Loss::square, arch, cls.activation, cls.output_bound);
    CHECK(eval.sample_size() == 300);
    CHECK(eval.distinct_inputs() == 4);
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::VectorXd theta(static_cast<Eigen::Index>(network::param_count(arch)));
      for (auto& v : theta) v = u(rng);
      const network::SparseNetwork net(arch, theta, 1.0, cls.output_bound);
      const double direct = model::empirical_risk(as_predictor(net), data, model::Loss::square);
      CHECK(eval({theta.data(), static_cast<std::size_t>(theta.size())}) == doctest::Approx(direct).epsilon(1e-12));
    }
  }

  const auto k = markov::two_source_kernel(4, 0.3);
  const auto pi = markov::stationary_distribution(k);
  const auto cls_data = model::generate_classification(std::vector<double>{0.2, 0.5, 0.7, 0.9},
                                                       model::grid_embedding(4, 1), k, pi, 400, 9);
  const auto arch = cls.architecture(1);
  const RiskEvaluator eval(cls_data, model::Loss::logistic, arch, cls.activation, cls.output_bound);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd theta(static_cast<Eigen::Index>(network::param_count(arch)));
    for (auto& v : theta) v = u(rng);
    const network::SparseNetwork net(arch, theta, 1.0, cls.output_bound);
    const double direct = model::empirical_risk(as_predictor(net), cls_data, model::Loss::logistic);
    CHECK(eval({theta.data(), static_cast<std::size_t>(theta.size())}) == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("zero temperature samples the prior") {
  // depth 0, input dimension 3: n_max = 4
  const auto data = regression_data(2, 20, 0.1, 2, 3);
  const ClassDef cls{0, 1, 4, 1.0, 1.0, network::Activation::relu};
  GibbsConfig cfg;
  cfg.lambda = 0.0;
  cfg.s = 2.0;
  cfg.iters = 100000;
  cfg.burn_in = 1000;
  cfg.thin = 10;
  cfg.seed = 5;
  const auto draws = sample_posterior(data, model::Loss::square, cls, cfg);
  REQUIRE(draws.networks.size() == 10000);

  std::vector<double> freq(5, 0.0), law(5, 0.0);
  double mean = 0.0, sq = 0.0, count = 0.0;
  for (const auto& net : draws.networks) {
    freq[net.active().size()] += 1e-4;
    for (double v : net.active_values()) {
      mean += v;
      sq += v * v;
      count += 1;
    }
  }
  const double cs = normalizer_Cs(2.0, 4);
  for (std::size_t i = 1; i <= 4; ++i) law[i] = std::pow(2.0, -static_cast<double>(i)) / cs;
  double tv = 0.0;
  for (std::size_t i = 0; i <= 4; ++i) tv += 0.5 * std::abs(freq[i] - law[i]);
  CHECK(tv <= 0.05);
  CHECK(std::abs(mean / count) < 0.03);
  CHECK(sq / count == doctest::Approx(1.0 / 3.0).epsilon(0.05));
}

TEST_CASE("draws stay in the class and are reproducible") {
  const auto data = regression_data(4, 200, 0.3, 4);
  const ClassDef cls{1, 3, 3, 0.8, 0.5, network::Activation::relu};
  GibbsConfig cfg;
  cfg.lambda = 20.0;
  cfg.iters = 20000;
  cfg.burn_in = 500;
  cfg.thin = 20;
  cfg.seed = 11;
  const auto a = sample_posterior(data, model::Loss::square, cls, cfg);
  CHECK(a.networks.size() == 1000);
  for (std::size_t i = 0; i < a.networks.size(); ++i) {
    const auto& net = a.networks[i];
    CHECK(net.active().size() >= 1);
    CHECK(net.active().size() <= 3);
    CHECK(net.theta().cwiseAbs().maxCoeff() <= 0.8);
    const double r = model::empirical_risk(as_predictor(net), data, model::Loss::square);
    CHECK(a.log_scores[i] == doctest::Approx(-cfg.lambda * r).epsilon(1e-10));
  }
  CHECK(a.acceptance.add > 0.0);
  CHECK(a.acceptance.perturb > 0.0);

  const auto b = sample_posterior(data, model::Loss::square, cls, cfg);
  REQUIRE(b.networks.size() == a.networks.size());
  bool same = true;
  for (std::size_t i = 0; i < a.networks.size(); ++i) {
    same = same && a.networks[i].theta() == b.networks[i].theta() && a.log_scores[i] == b.log_scores[i];
  }
  CHECK(same);

  cfg.seed = 12;
  const auto c = sample_posterior(data, model::Loss::square, cls, cfg);
  CHECK(c.log_scores != a.log_scores);
}

TEST_CASE("detailed balance on a discretized tiny class") {
  // Two coordinates, cells = support x sign x 4 magnitude bins. For a reversible
  // chain the count of a->b jumps matches b->a up to Monte Carlo error.
  const auto data = regression_data(2, 100, 0.5, 6);
  const ClassDef cls{0, 1, 2, 1.0, 1.0, network::Activation::relu};
  GibbsConfig cfg;
  cfg.lambda = 5.0;
  cfg.iters = 400000;
  cfg.burn_in = 1000;
  cfg.thin = 1;
  cfg.seed = 3;
  const auto draws = sample_posterior(data, model::Loss::square, cls, cfg);
  auto cell = [](const network::SparseNetwork& net) {
    int code = 0;
    for (int j = 0; j < 2; ++j) {
      const double v = net.theta()(j);
      const bool on = std::find(net.active().begin(), net.active().end(), static_cast<std::size_t>(j)) != net.active().end();
      const int bin = on ? 1 + (v >= 0 ? 4 : 0) + std::min(3, static_cast<int>(std::abs(v) * 4)) : 0;
      code = code * 9 + bin;
    }
    return code;
  };
  std::map<std::pair<int, int>, double> flow;
  int prev = cell(draws.networks.front());
  for (std::size_t i = 1; i < draws.networks.size(); ++i) {
    const int c = cell(draws.networks[i]);
    if (c != prev) flow[{prev, c}] += 1.0;
    prev = c;
  }
  std::vector<std::tuple<double, int, int>> pairs;
  for (const auto& [key, n] : flow) {
    if (key.first < key.second) {
      const auto it = flow.find({key.second, key.first});
      pairs.emplace_back(n + (it == flow.end() ? 0.0 : it->second), key.first, key.second);
    }
  }
  std::sort(pairs.rbegin(), pairs.rend());
  REQUIRE(pairs.size() >= 20);
  for (std::size_t k = 0; k < 20; ++k) {
    const auto [total, a, b] = pairs[k];
    const double ab = flow[{a, b}];
    const double ba = total - ab;
    CHECK(std::abs(ab - ba) <= 5.0 * std::sqrt(total) + 5.0);
  }
}

TEST_CASE("higher temperature fits better") {
  const auto data = regression_data(4, 400, 0.2, 8);
  const ClassDef cls{1, 3, 8, 1.0, 1.0, network::Activation::relu};
  const auto k = markov::two_source_kernel(4, 0.3);
  const double n_eff = 400.0 * markov::pseudo_spectral_gap(k, markov::stationary_distribution(k));
  auto median_risk = [&](double lambda) {
    GibbsConfig cfg;
    cfg.lambda = lambda;
    cfg.iters = 40000;
    cfg.burn_in = 10000;
    cfg.thin = 40;
    cfg.seed = 21;
    const auto draws = sample_posterior(data, model::Loss::square, cls, cfg);
    std::vector<double> r;
    for (const auto& net : draws.networks) r.push_back(model::empirical_risk(as_predictor(net), data, model::Loss::square));
    std::nth_element(r.begin(), r.begin() + r.size() / 2, r.end());
    return r[r.size() / 2];
  };
  CHECK(median_risk(10.0 * n_eff) <= median_risk(0.0));
}

TEST_CASE("posterior predictors") {
  const network::Architecture a({1, 1});
  auto constant = [&](double c) { return network::SparseNetwork(a, {1}, std::vector<double>{c}, 1.0, 1.0); };
  PosteriorDraws draws;
  CHECK(code_of([&] { posterior_predictor(draws); }) == Errc::no_draws);

  draws.networks = {constant(0.2)};
  draws.log_scores = {0.0};
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 0.4);
  CHECK(posterior_predictor(draws)(x) == 0.2);

  draws.networks = {constant(0.2), constant(0.2), constant(0.2)};
  CHECK(posterior_predictor(draws, PredictorMode::average)(x) == doctest::Approx(0.2).epsilon(1e-15));

  draws.networks = {constant(0.2), constant(-0.6)};
  CHECK(posterior_predictor(draws, PredictorMode::average)(x) == doctest::Approx(-0.2).epsilon(1e-15));
  CHECK(posterior_predictor(draws, PredictorMode::single_draw)(x) == -0.6);

  CHECK(parse_predictor_mode("average") == PredictorMode::average);
  CHECK_THROWS_AS(parse_predictor_mode("mode"), Error);
}
