#include "pacdnn/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "pacdnn/errors.hpp"
#include "pacdnn/rng.hpp"

namespace pacdnn::model {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double entropy_term(double p) { return p > 0.0 ? -p * std::log(p) : 0.0; }

// weight * value with the convention 0 * inf = 0.
double weighted(double weight, double value) { return weight == 0.0 ? 0.0 : weight * value; }

void require_states(const TargetSpec& target, const markov::StationaryDist& pi) {
  if (target.states() != pi.size()) {
    throw Error(Errc::dimension_mismatch, "target state count differs from the chain's");
  }
}

double draw_noise(const NoiseSpec& noise, std::mt19937_64& rng) {
  if (noise.varsigma == 0.0) return 0.0;
  switch (noise.family) {
    case NoiseFamily::gaussian: {
      std::normal_distribution<double> d(0.0, noise.varsigma);
      return d(rng);
    }
    case NoiseFamily::uniform: {
      const double a = std::sqrt(3.0) * noise.varsigma;
      std::uniform_real_distribution<double> d(-a, a);
      return d(rng);
    }
    case NoiseFamily::rademacher: {
      std::bernoulli_distribution d(0.5);
      return d(rng) ? noise.varsigma : -noise.varsigma;
    }
  }
  return 0.0;
}

std::vector<double> cumulative(const Eigen::VectorXd& w) {
  std::vector<double> c(static_cast<std::size_t>(w.size()));
  double acc = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) c[static_cast<std::size_t>(i)] = (acc += w(i));
  c.back() = 1.0;
  return c;
}

std::size_t draw_index(const std::vector<double>& c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto it = std::upper_bound(c.begin(), c.end(), unif(rng));
  return std::min(static_cast<std::size_t>(it - c.begin()), c.size() - 1);
}

double holder_profile(const Eigen::VectorXd& x, double beta) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) acc += std::pow(std::abs(x(j) - 0.5), beta);
  return acc / static_cast<double>(x.size());
}

}  // namespace

Loss parse_loss(std::string_view name) {
  if (name == "square") return Loss::square;
  if (name == "logistic") return Loss::logistic;
  throw Error(Errc::invalid_argument, "unknown loss '" + std::string(name) + "'");
}

std::string_view loss_name(Loss loss) noexcept {
  return loss == Loss::square ? "square" : "logistic";
}

double square_loss(double prediction, double y) noexcept {
  const double d = prediction - y;
  return d * d;
}

double logistic_loss(double score, double y) noexcept {
  const double v = y * score;
  if (v == kInf) return 0.0;
  if (v == -kInf) return kInf;
  if (v > 0.0) return std::log1p(std::exp(-v));
  return -v + std::log1p(std::exp(v));
}

double loss_value(Loss loss, double prediction, double y) noexcept {
  return loss == Loss::square ? square_loss(prediction, y) : logistic_loss(prediction, y);
}

double logistic_target(double eta) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw Error(Errc::invalid_argument, "eta must lie in [0,1]");
  if (eta == 1.0) return kInf;
  if (eta == 0.0) return -kInf;
  return std::log(eta) - std::log1p(-eta);
}

double logistic_conditional_excess(double eta, double score) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw Error(Errc::invalid_argument, "eta must lie in [0,1]");
  const double risk = weighted(eta, logistic_loss(score, 1.0)) +
                      weighted(1.0 - eta, logistic_loss(score, -1.0));
  const double best = entropy_term(eta) + entropy_term(1.0 - eta);
  return std::max(risk - best, 0.0);
}

RateExponents rate_exponents(std::span<const double> beta, std::span<const std::size_t> t,
                             double n_eff) {
  if (beta.empty() || beta.size() != t.size()) {
    throw Error(Errc::dimension_mismatch, "beta and t must have the same nonzero length");
  }
  if (!(n_eff > 1.0)) throw Error(Errc::invalid_argument, "n_eff must exceed 1");
  const std::size_t q1 = beta.size();
  RateExponents out;
  out.beta_star.resize(q1);
  double downstream = 1.0;
  for (std::size_t i = q1; i-- > 0;) {
    if (!(beta[i] > 0.0) || t[i] == 0) {
      throw Error(Errc::invalid_argument, "beta_i and t_i must be positive");
    }
    out.beta_star[i] = beta[i] * downstream;
    downstream *= std::min(beta[i], 1.0);
  }
  out.phi = 0.0;
  for (std::size_t i = 0; i < q1; ++i) {
    const double b = out.beta_star[i];
    out.phi = std::max(out.phi, std::pow(n_eff, -2.0 * b / (2.0 * b + static_cast<double>(t[i]))));
  }
  return out;
}

Eigen::MatrixXd grid_embedding(std::size_t states, std::size_t input_dim) {
  if (states < 1 || input_dim < 1) {
    throw Error(Errc::invalid_argument, "state count and input dimension must be >= 1");
  }
  const auto side = static_cast<std::size_t>(
      std::llround(std::pow(static_cast<double>(states), 1.0 / static_cast<double>(input_dim))));
  std::size_t total = 1;
  for (std::size_t j = 0; j < input_dim; ++j) total *= side;
  if (total != states) {
    throw Error(Errc::invalid_argument, "state count is not a perfect power of the input dimension");
  }
  Eigen::MatrixXd pts(static_cast<Eigen::Index>(states), static_cast<Eigen::Index>(input_dim));
  for (std::size_t s = 0; s < states; ++s) {
    std::size_t rest = s;
    for (std::size_t j = 0; j < input_dim; ++j) {
      const std::size_t coord = rest % side;
      rest /= side;
      pts(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j)) =
          (static_cast<double>(coord) + 0.5) / static_cast<double>(side);
    }
  }
  return pts;
}

TargetSpec TargetSpec::holder(double beta, Eigen::MatrixXd points, double scale) {
  TargetSpec t;
  t.kind = TargetKind::holder_sample;
  t.beta = beta;
  t.scale = scale;
  t.points = std::move(points);
  t.validate();
  return t;
}

TargetSpec TargetSpec::composition(std::vector<std::size_t> dims, std::vector<std::size_t> t,
                                   std::vector<double> betas, Eigen::MatrixXd points,
                                   double scale) {
  TargetSpec spec;
  spec.kind = TargetKind::composition;
  spec.dims = std::move(dims);
  spec.t = std::move(t);
  spec.betas = std::move(betas);
  spec.points = std::move(points);
  spec.scale = scale;
  spec.validate();
  return spec;
}

TargetSpec TargetSpec::logistic(std::vector<double> eta, Eigen::MatrixXd points) {
  TargetSpec t;
  t.kind = TargetKind::logistic_link;
  t.eta = std::move(eta);
  t.points = std::move(points);
  t.validate();
  return t;
}

void TargetSpec::validate() const {
  if (points.rows() == 0 || points.cols() == 0) {
    throw Error(Errc::invalid_argument, "target needs a nonempty state embedding");
  }
  switch (kind) {
    case TargetKind::holder_sample:
      if (!(beta > 0.0)) throw Error(Errc::invalid_argument, "Hoelder smoothness must be > 0");
      break;
    case TargetKind::composition: {
      const std::size_t q1 = betas.size();
      if (q1 == 0 || t.size() != q1 || dims.size() != q1 + 1) {
        throw Error(Errc::invalid_argument, "composition needs |d| = q+2, |t| = |beta| = q+1");
      }
      if (dims.front() != input_dim() || dims.back() != 1) {
        throw Error(Errc::invalid_argument, "composition needs d_0 = d_x and d_{q+1} = 1");
      }
      for (std::size_t i = 0; i < q1; ++i) {
        if (t[i] == 0 || t[i] > dims[i]) {
          throw Error(Errc::invalid_argument, "composition needs 1 <= t_i <= d_i");
        }
        if (!(betas[i] > 0.0)) throw Error(Errc::invalid_argument, "beta_i must be > 0");
      }
      break;
    }
    case TargetKind::logistic_link:
      if (eta.size() != states()) {
        throw Error(Errc::dimension_mismatch, "eta table length differs from the state count");
      }
      for (double e : eta) {
        if (!(e >= 0.0 && e <= 1.0)) throw Error(Errc::invalid_argument, "eta must lie in [0,1]");
      }
      break;
  }
}

Eigen::VectorXd TargetSpec::point(std::size_t state) const {
  if (state >= states()) throw Error(Errc::invalid_argument, "state index out of range");
  return points.row(static_cast<Eigen::Index>(state)).transpose();
}

double TargetSpec::value_at_state(std::size_t state) const {
  if (kind == TargetKind::logistic_link) {
    if (state >= states()) throw Error(Errc::invalid_argument, "state index out of range");
    return logistic_target(eta[state]);
  }
  return value(point(state));
}

double TargetSpec::value(const Eigen::VectorXd& x) const {
  if (static_cast<std::size_t>(x.size()) != input_dim()) {
    throw Error(Errc::dimension_mismatch, "input dimension differs from the target's");
  }
  switch (kind) {
    case TargetKind::holder_sample:
      return scale * holder_profile(x, beta);
    case TargetKind::composition: {
      Eigen::VectorXd u = x;
      for (std::size_t i = 0; i < betas.size(); ++i) {
        const std::size_t din = dims[i];
        const std::size_t dout = dims[i + 1];
        Eigen::VectorXd next(static_cast<Eigen::Index>(dout));
        for (std::size_t j = 0; j < dout; ++j) {
          double acc = 0.0;
          for (std::size_t k = 0; k < t[i]; ++k) {
            acc += std::pow(std::abs(u(static_cast<Eigen::Index>((j + k) % din)) - 0.5), betas[i]);
          }
          next(static_cast<Eigen::Index>(j)) = acc / static_cast<double>(t[i]);
        }
        u = std::move(next);
      }
      return scale * u(0);
    }
    case TargetKind::logistic_link:
      for (std::size_t s = 0; s < states(); ++s) {
        if ((points.row(static_cast<Eigen::Index>(s)).transpose() - x).cwiseAbs().maxCoeff() == 0.0) {
          return logistic_target(eta[s]);
        }
      }
      throw Error(Errc::invalid_argument, "logistic target is only defined at state points");
  }
  return 0.0;
}

double TargetSpec::sup_norm() const {
  switch (kind) {
    case TargetKind::holder_sample: return scale * std::pow(0.5, beta);
    case TargetKind::composition: return scale;
    case TargetKind::logistic_link: {
      double m = 0.0;
      for (double e : eta) m = std::max(m, std::abs(logistic_target(e)));
      return m;
    }
  }
  return 0.0;
}

NoiseFamily parse_noise_family(std::string_view name) {
  if (name == "gaussian") return NoiseFamily::gaussian;
  if (name == "uniform") return NoiseFamily::uniform;
  if (name == "rademacher") return NoiseFamily::rademacher;
  throw Error(Errc::invalid_argument, "unknown noise family '" + std::string(name) + "'");
}

std::string_view noise_family_name(NoiseFamily family) noexcept {
  switch (family) {
    case NoiseFamily::gaussian: return "gaussian";
    case NoiseFamily::uniform: return "uniform";
    case NoiseFamily::rademacher: return "rademacher";
  }
  return "gaussian";
}

double empirical_risk(const Predictor& h, const Dataset& data, Loss loss) {
  if (data.size() == 0) throw Error(Errc::empty_dataset, "empirical risk of an empty sample");
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Eigen::VectorXd x = data.inputs.row(static_cast<Eigen::Index>(i)).transpose();
    total += loss_value(loss, h(x), data.outputs(static_cast<Eigen::Index>(i)));
  }
  return total / static_cast<double>(data.size());
}

double excess_risk_exact(const Predictor& h, const TargetSpec& target,
                         const markov::StationaryDist& pi, Loss loss) {
  require_states(target, pi);
  double total = 0.0;
  for (std::size_t s = 0; s < target.states(); ++s) {
    const double pred = h(target.point(s));
    double cond = 0.0;
    if (loss == Loss::square) {
      cond = square_loss(pred, target.value_at_state(s));
    } else {
      if (target.kind != TargetKind::logistic_link) {
        throw Error(Errc::invalid_argument, "logistic excess risk needs a logistic_link target");
      }
      cond = logistic_conditional_excess(target.eta[s], pred);
    }
    total += weighted(pi[s], cond);
  }
  return total;
}

double excess_risk_mc(const Predictor& h, const TargetSpec& target,
                      const markov::StationaryDist& pi, Loss loss, const NoiseSpec& noise,
                      std::size_t n_mc, std::uint64_t seed) {
  require_states(target, pi);
  if (n_mc == 0) throw Error(Errc::invalid_argument, "n_mc must be >= 1");
  if (loss == Loss::logistic && target.kind != TargetKind::logistic_link) {
    throw Error(Errc::invalid_argument, "logistic excess risk needs a logistic_link target");
  }
  std::vector<double> pred(target.states());
  std::vector<double> best(target.states());
  for (std::size_t s = 0; s < target.states(); ++s) {
    pred[s] = h(target.point(s));
    best[s] = target.value_at_state(s);
  }
  const std::vector<double> c = cumulative(pi.weights());
  std::mt19937_64 rng(seed);
  double total = 0.0;
  for (std::size_t r = 0; r < n_mc; ++r) {
    const std::size_t s = draw_index(c, rng);
    double y = 0.0;
    if (loss == Loss::square) {
      y = best[s] + draw_noise(noise, rng);
    } else {
      std::bernoulli_distribution coin(target.eta[s]);
      y = coin(rng) ? 1.0 : -1.0;
    }
    total += loss_value(loss, pred[s], y) - loss_value(loss, best[s], y);
  }
  return total / static_cast<double>(n_mc);
}

double excess_loss_second_moment(const Predictor& h, const TargetSpec& target,
                                 const markov::StationaryDist& pi, Loss loss,
                                 const NoiseSpec& noise) {
  require_states(target, pi);
  double total = 0.0;
  for (std::size_t s = 0; s < target.states(); ++s) {
    const double pred = h(target.point(s));
    double cond = 0.0;
    if (loss == Loss::square) {
      // (h - y)^2 - (h* - y)^2 = d (d - 2 eps) with d = h - h*.
      const double d = pred - target.value_at_state(s);
      cond = d * d * (d * d + 4.0 * noise.varsigma * noise.varsigma);
    } else {
      const double eta = target.eta[s];
      const double best = target.value_at_state(s);
      const double up = logistic_loss(pred, 1.0) - logistic_loss(best, 1.0);
      const double down = logistic_loss(pred, -1.0) - logistic_loss(best, -1.0);
      cond = weighted(eta, up * up) + weighted(1.0 - eta, down * down);
    }
    total += weighted(pi[s], cond);
  }
  return total;
}

Dataset generate_regression(const TargetSpec& target, const markov::TransitionKernel& kernel,
                            const markov::StationaryDist& pi, std::size_t n,
                            const NoiseSpec& noise, std::uint64_t seed) {
  if (target.states() != kernel.states()) {
    throw Error(Errc::dimension_mismatch, "target state count differs from the chain's");
  }
  if (noise.varsigma < 0.0) throw Error(Errc::invalid_argument, "noise scale must be >= 0");
  const markov::Trajectory traj = markov::simulate(kernel, pi, n, seed);
  std::vector<double> best(target.states());
  for (std::size_t s = 0; s < target.states(); ++s) best[s] = target.value_at_state(s);

  std::mt19937_64 rng(derive_seed(seed, 1));
  Dataset data;
  data.inputs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(target.input_dim()));
  data.outputs.resize(static_cast<Eigen::Index>(n));
  data.states = traj.states;
  data.meta.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t s = traj.states[i];
    const auto row = static_cast<Eigen::Index>(i);
    data.inputs.row(row) = target.points.row(static_cast<Eigen::Index>(s));
    data.outputs(row) = best[s] + draw_noise(noise, rng);
  }
  return data;
}

Dataset generate_classification(std::span<const double> eta, const Eigen::MatrixXd& points,
                                const markov::TransitionKernel& kernel,
                                const markov::StationaryDist& pi, std::size_t n,
                                std::uint64_t seed) {
  if (eta.size() != kernel.states() || static_cast<std::size_t>(points.rows()) != eta.size()) {
    throw Error(Errc::dimension_mismatch, "eta table, points and chain disagree on state count");
  }
  for (double e : eta) {
    if (!(e >= 0.0 && e <= 1.0)) throw Error(Errc::invalid_argument, "eta must lie in [0,1]");
  }
  const markov::Trajectory traj = markov::simulate(kernel, pi, n, seed);
  std::mt19937_64 rng(derive_seed(seed, 1));
  Dataset data;
  data.inputs.resize(static_cast<Eigen::Index>(n), points.cols());
  data.outputs.resize(static_cast<Eigen::Index>(n));
  data.states = traj.states;
  data.meta.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t s = traj.states[i];
    const auto row = static_cast<Eigen::Index>(i);
    data.inputs.row(row) = points.row(static_cast<Eigen::Index>(s));
    std::bernoulli_distribution coin(eta[s]);
    data.outputs(row) = coin(rng) ? 1.0 : -1.0;
  }
  return data;
}

double subgaussian_envelope(double holder_bound, double varsigma, std::size_t n, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw Error(Errc::invalid_argument, "delta must lie in (0,1)");
  if (n < 1) throw Error(Errc::invalid_argument, "n must be >= 1");
  return holder_bound + varsigma * std::sqrt(2.0 * std::log(2.0 * static_cast<double>(n) / delta));
}

}  // namespace pacdnn::model
