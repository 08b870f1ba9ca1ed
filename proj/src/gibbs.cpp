#include "pacdnn/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <random>
#include <string>

#include "pacdnn/errors.hpp"

namespace pacdnn::gibbs {
namespace {

double log_binomial(std::size_t n, std::size_t k) {
  const auto dn = static_cast<double>(n);
  const auto dk = static_cast<double>(k);
  return std::lgamma(dn + 1.0) - std::lgamma(dk + 1.0) - std::lgamma(dn - dk + 1.0);
}

// Folds x back into [-b, b] by reflection at the end points.
double reflect(double x, double b) {
  const double period = 4.0 * b;
  double y = std::fmod(x + b, period);
  if (y < 0.0) y += period;
  return y <= 2.0 * b ? y - b : 3.0 * b - y;
}

// Index set with O(1) insert, erase and uniform selection.
class IndexPool {
 public:
  explicit IndexPool(std::size_t universe) : pos_(universe, kAbsent) {}

  void insert(std::size_t i) {
    pos_[i] = items_.size();
    items_.push_back(i);
  }
  void erase(std::size_t i) {
    const std::size_t p = pos_[i];
    const std::size_t last = items_.back();
    items_[p] = last;
    pos_[last] = p;
    items_.pop_back();
    pos_[i] = kAbsent;
  }
  std::size_t size() const noexcept { return items_.size(); }
  std::size_t at(std::size_t k) const { return items_[k]; }
  std::vector<std::size_t> sorted() const {
    std::vector<std::size_t> v = items_;
    std::sort(v.begin(), v.end());
    return v;
  }

 private:
  static constexpr std::size_t kAbsent = static_cast<std::size_t>(-1);
  std::vector<std::size_t> items_;
  std::vector<std::size_t> pos_;
};

}  // namespace

network::Architecture ClassDef::architecture(std::size_t input_dim, std::size_t output_dim) const {
  return network::Architecture::uniform(input_dim, depth, width, output_dim);
}

void GibbsConfig::validate() const {
  if (!(s >= 2.0)) throw Error(Errc::invalid_argument, "sparsity parameter s must be >= 2");
  if (!(lambda >= 0.0)) throw Error(Errc::invalid_argument, "temperature must be >= 0");
  const double total = moves.add + moves.remove + moves.perturb;
  if (moves.add < 0.0 || moves.remove < 0.0 || moves.perturb < 0.0 ||
      std::abs(total - 1.0) > 1e-12) {
    throw Error(Errc::invalid_argument, "move probabilities must be nonnegative and sum to 1");
  }
  if ((moves.add > 0.0) != (moves.remove > 0.0)) {
    throw Error(Errc::invalid_argument, "ADD and REMOVE must both be enabled or both disabled");
  }
  if (step && !(*step > 0.0)) throw Error(Errc::invalid_argument, "step must be > 0");
  if (thin < 1) throw Error(Errc::invalid_argument, "thin must be >= 1");
  if (iters < thin) throw Error(Errc::invalid_argument, "iters must be >= thin");
}

double normalizer_Cs(double s, std::size_t n_max) {
  if (!(s >= 2.0)) throw Error(Errc::invalid_argument, "s must be >= 2");
  if (n_max < 1) throw Error(Errc::invalid_argument, "n_max must be >= 1");
  return -std::expm1(-static_cast<double>(n_max) * std::log(s)) / (s - 1.0);
}

double log_prior_support(std::size_t card, double s, double weight_bound, std::size_t n_max) {
  if (card < 1 || card > n_max) {
    throw Error(Errc::out_of_support, "support size outside [1, n_max]");
  }
  const auto k = static_cast<double>(card);
  return -k * std::log(s) - log_binomial(n_max, card) - k * std::log(2.0 * weight_bound) -
         std::log(normalizer_Cs(s, n_max));
}

double log_prior(const network::SparseNetwork& net, const GibbsConfig& cfg, std::size_t n_max) {
  const double b = net.weight_bound();
  for (double v : net.active_values()) {
    if (std::abs(v) > b) throw Error(Errc::out_of_support, "active weight outside [-B, B]");
  }
  return log_prior_support(net.active().size(), cfg.s, b, n_max);
}

double temperature(std::size_t n, double gamma, double K) {
  if (n < 1) throw Error(Errc::invalid_argument, "n must be >= 1");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw Error(Errc::invalid_argument, "gamma must lie in [0,1]");
  if (!(K > 0.0)) throw Error(Errc::invalid_argument, "K must be > 0");
  return static_cast<double>(n) * gamma / (32.0 * K + 10.0);
}

RiskEvaluator::RiskEvaluator(const model::Dataset& data, model::Loss loss,
                             network::Architecture arch, network::Activation act,
                             double output_bound)
    : loss_(loss), arch_(std::move(arch)), act_(act), output_bound_(output_bound), n_(data.size()) {
  if (n_ == 0) throw Error(Errc::empty_dataset, "cannot sample a posterior from no data");
  if (static_cast<std::size_t>(data.inputs.cols()) != arch_.input_dim()) {
    throw Error(Errc::dimension_mismatch, "data input dimension differs from the architecture");
  }
  std::map<std::vector<double>, std::size_t> groups;
  std::vector<std::vector<double>> keys;
  std::vector<std::vector<double>> ys;
  for (std::size_t i = 0; i < n_; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    std::vector<double> key(static_cast<std::size_t>(data.inputs.cols()));
    for (Eigen::Index j = 0; j < data.inputs.cols(); ++j) key[static_cast<std::size_t>(j)] = data.inputs(row, j);
    auto [it, fresh] = groups.emplace(key, keys.size());
    if (fresh) {
      keys.push_back(std::move(key));
      ys.emplace_back();
    }
    ys[it->second].push_back(data.outputs(row));
  }
  const auto u = static_cast<Eigen::Index>(keys.size());
  inputs_.resize(data.inputs.cols(), u);
  count_.resize(u);
  mean_y_.resize(u);
  within_ss_.resize(u);
  positives_.resize(u);
  for (Eigen::Index g = 0; g < u; ++g) {
    const auto& key = keys[static_cast<std::size_t>(g)];
    const auto& y = ys[static_cast<std::size_t>(g)];
    for (std::size_t j = 0; j < key.size(); ++j) inputs_(static_cast<Eigen::Index>(j), g) = key[j];
    double mean = 0.0;
    double pos = 0.0;
    for (double v : y) {
      mean += v;
      if (v > 0.0) pos += 1.0;
    }
    mean /= static_cast<double>(y.size());
    double ss = 0.0;
    for (double v : y) ss += (v - mean) * (v - mean);
    count_(g) = static_cast<double>(y.size());
    mean_y_(g) = mean;
    within_ss_(g) = ss;
    positives_(g) = pos;
  }
}

double RiskEvaluator::operator()(std::span<const double> theta) const {
  const Eigen::MatrixXd out = network::forward_batch(arch_, theta, inputs_, act_);
  double total = 0.0;
  for (Eigen::Index g = 0; g < inputs_.cols(); ++g) {
    const double h = std::clamp(out(0, g), -output_bound_, output_bound_);
    if (loss_ == model::Loss::square) {
      const double d = h - mean_y_(g);
      total += count_(g) * d * d + within_ss_(g);
    } else {
      total += positives_(g) * model::logistic_loss(h, 1.0) +
               (count_(g) - positives_(g)) * model::logistic_loss(h, -1.0);
    }
  }
  return total / static_cast<double>(n_);
}

PosteriorDraws sample_posterior(const model::Dataset& data, model::Loss loss,
                                const ClassDef& cls, const GibbsConfig& cfg) {
  if (data.size() == 0) throw Error(Errc::empty_dataset, "cannot sample a posterior from no data");
  cfg.validate();
  if (cls.sparsity < 1) throw Error(Errc::invalid_class, "sparsity S must be >= 1");
  if (!(cls.weight_bound > 0.0) || !(cls.output_bound > 0.0)) {
    throw Error(Errc::invalid_class, "B and F must be > 0");
  }
  const network::Architecture arch =
      cls.architecture(static_cast<std::size_t>(data.inputs.cols()), 1);
  const std::size_t n_max = network::param_count(arch);
  const std::size_t max_support = std::min(cls.sparsity, n_max);
  const double bound = cls.weight_bound;
  const double step = cfg.step.value_or(bound / 10.0);

  const RiskEvaluator risk(data, loss, arch, cls.activation, cls.output_bound);

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_real_distribution<double> slab(-bound, bound);
  std::uniform_real_distribution<double> walk(-step, step);
  auto pick = [&](std::size_t size) {
    return std::min(static_cast<std::size_t>(unif(rng) * static_cast<double>(size)), size - 1);
  };

  std::vector<double> theta(n_max, 0.0);
  IndexPool active(n_max);
  IndexPool inactive(n_max);
  for (std::size_t i = 0; i < n_max; ++i) inactive.insert(i);
  {
    const std::size_t first = inactive.at(pick(n_max));
    inactive.erase(first);
    active.insert(first);
  }
  double current = risk(theta);

  const double log_s = std::log(cfg.s);
  const double log_add_ratio = cfg.moves.add > 0.0 ? std::log(cfg.moves.remove / cfg.moves.add) : 0.0;
  std::size_t proposed[3] = {0, 0, 0};
  std::size_t accepted[3] = {0, 0, 0};

  auto accept = [&](double log_alpha) { return log_alpha >= 0.0 || std::log(unif(rng)) < log_alpha; };

  PosteriorDraws draws;
  draws.activation = cls.activation;
  draws.networks.reserve(cfg.iters / cfg.thin);
  draws.log_scores.reserve(cfg.iters / cfg.thin);

  const std::size_t total_iters = cfg.burn_in + cfg.iters;
  for (std::size_t it = 0; it < total_iters; ++it) {
    const double u = unif(rng);
    if (u < cfg.moves.add) {
      ++proposed[0];
      if (active.size() < max_support) {
        const std::size_t j = inactive.at(pick(inactive.size()));
        theta[j] = slab(rng);
        const double next = risk(theta);
        if (accept(-cfg.lambda * (next - current) - log_s + log_add_ratio)) {
          inactive.erase(j);
          active.insert(j);
          current = next;
          ++accepted[0];
        } else {
          theta[j] = 0.0;
        }
      }
    } else if (u < cfg.moves.add + cfg.moves.remove) {
      ++proposed[1];
      if (active.size() > 1) {
        const std::size_t j = active.at(pick(active.size()));
        const double old = theta[j];
        theta[j] = 0.0;
        const double next = risk(theta);
        if (accept(-cfg.lambda * (next - current) + log_s - log_add_ratio)) {
          active.erase(j);
          inactive.insert(j);
          current = next;
          ++accepted[1];
        } else {
          theta[j] = old;
        }
      }
    } else {
      ++proposed[2];
      const std::size_t j = active.at(pick(active.size()));
      const double old = theta[j];
      theta[j] = reflect(old + walk(rng), bound);
      const double next = risk(theta);
      if (accept(-cfg.lambda * (next - current))) {
        current = next;
        ++accepted[2];
      } else {
        theta[j] = old;
      }
    }

    if (it >= cfg.burn_in && (it - cfg.burn_in + 1) % cfg.thin == 0) {
      const std::vector<std::size_t> support = active.sorted();
      std::vector<double> values;
      values.reserve(support.size());
      for (std::size_t i : support) values.push_back(theta[i]);
      draws.networks.emplace_back(arch, support, values, bound, cls.output_bound, max_support);
      draws.log_scores.push_back(-cfg.lambda * current);
    }
  }

  auto rate = [&](int k) {
    return proposed[k] == 0 ? 0.0 : static_cast<double>(accepted[k]) / static_cast<double>(proposed[k]);
  };
  draws.acceptance = {rate(0), rate(1), rate(2)};
  return draws;
}

PredictorMode parse_predictor_mode(std::string_view name) {
  if (name == "single_draw") return PredictorMode::single_draw;
  if (name == "average") return PredictorMode::average;
  throw Error(Errc::invalid_argument, "unknown predictor mode '" + std::string(name) + "'");
}

model::Predictor as_predictor(const network::SparseNetwork& net, network::Activation act,
                              bool clip) {
  auto shared = std::make_shared<const network::SparseNetwork>(net);
  return [shared, act, clip](const Eigen::VectorXd& x) {
    return network::forward(*shared, x, act, clip)(0);
  };
}

model::Predictor posterior_predictor(const PosteriorDraws& draws, PredictorMode mode) {
  if (draws.networks.empty()) throw Error(Errc::no_draws, "posterior has no retained draws");
  if (mode == PredictorMode::single_draw) {
    return as_predictor(draws.networks.back(), draws.activation);
  }
  auto nets = std::make_shared<const std::vector<network::SparseNetwork>>(draws.networks);
  const network::Activation act = draws.activation;
  return [nets, act](const Eigen::VectorXd& x) {
    double acc = 0.0;
    for (const auto& net : *nets) acc += network::forward(net, x, act, true)(0);
    return acc / static_cast<double>(nets->size());
  };
}

}  // namespace pacdnn::gibbs
