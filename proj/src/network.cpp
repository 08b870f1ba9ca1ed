#include "pacdnn/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "pacdnn/errors.hpp"

namespace pacdnn::network {

ActivationInfo activation_info(Activation act) noexcept {
  switch (act) {
    case Activation::relu: return {1.0, 0.0};
    case Activation::sigmoid: return {0.25, 0.5};
  }
  return {1.0, 0.0};
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  throw Error(Errc::invalid_argument, "unknown activation '" + std::string(name) + "'");
}

std::string_view activation_name(Activation act) noexcept {
  return act == Activation::relu ? "relu" : "sigmoid";
}

Architecture::Architecture(std::vector<std::size_t> widths) : widths_(std::move(widths)) {
  if (widths_.size() < 2) {
    throw Error(Errc::invalid_argument, "architecture needs at least input and output widths");
  }
  if (std::any_of(widths_.begin(), widths_.end(), [](std::size_t w) { return w == 0; })) {
    throw Error(Errc::invalid_argument, "all widths must be >= 1");
  }
  offsets_.resize(widths_.size());
  std::size_t off = 0;
  for (std::size_t l = 1; l < widths_.size(); ++l) {
    offsets_[l] = off;
    off += widths_[l] * widths_[l - 1] + widths_[l];
  }
  offsets_[0] = off;  // total count, kept for param_count
}

Architecture Architecture::uniform(std::size_t input_dim, std::size_t depth, std::size_t width,
                                   std::size_t output_dim) {
  std::vector<std::size_t> w(depth + 2, width);
  w.front() = input_dim;
  w.back() = output_dim;
  return Architecture(std::move(w));
}

std::size_t Architecture::width() const noexcept {
  std::size_t w = 0;
  for (std::size_t l = 1; l + 1 < widths_.size(); ++l) w = std::max(w, widths_[l]);
  return w;
}

std::size_t Architecture::weight_offset(std::size_t layer) const {
  if (layer < 1 || layer >= widths_.size()) {
    throw Error(Errc::invalid_argument, "layer index out of range");
  }
  return offsets_[layer];
}

std::size_t Architecture::bias_offset(std::size_t layer) const {
  return weight_offset(layer) + widths_[layer] * widths_[layer - 1];
}

std::size_t param_count(const Architecture& arch) {
  const auto& p = arch.widths();
  std::size_t total = 0;
  for (std::size_t l = 1; l < p.size(); ++l) total += p[l] * p[l - 1] + p[l];
  return total;
}

std::size_t param_count_max(std::size_t depth, std::size_t width) {
  return width * (width + 1) * (depth + 1);
}

SparseNetwork::SparseNetwork(Architecture arch, Eigen::VectorXd theta, double weight_bound,
                             double output_bound, std::optional<std::size_t> sparsity)
    : arch_(std::move(arch)),
      theta_(std::move(theta)),
      weight_bound_(weight_bound),
      output_bound_(output_bound) {
  if (static_cast<std::size_t>(theta_.size()) != param_count(arch_)) {
    throw Error(Errc::dimension_mismatch, "parameter vector length does not match architecture");
  }
  for (Eigen::Index i = 0; i < theta_.size(); ++i) {
    if (theta_(i) != 0.0) active_.push_back(static_cast<std::size_t>(i));
  }
  validate(sparsity);
}

SparseNetwork::SparseNetwork(Architecture arch, std::vector<std::size_t> active,
                             std::span<const double> values, double weight_bound,
                             double output_bound, std::optional<std::size_t> sparsity)
    : arch_(std::move(arch)),
      theta_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(param_count(arch_)))),
      weight_bound_(weight_bound),
      output_bound_(output_bound) {
  if (active.size() != values.size()) {
    throw Error(Errc::dimension_mismatch, "active indices and values differ in length");
  }
  std::vector<std::size_t> order(active.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return active[a] < active[b]; });
  active_.reserve(active.size());
  for (std::size_t k : order) {
    const std::size_t idx = active[k];
    if (idx >= static_cast<std::size_t>(theta_.size())) {
      throw Error(Errc::invalid_argument, "active index beyond parameter count");
    }
    if (!active_.empty() && active_.back() == idx) {
      throw Error(Errc::invalid_argument, "duplicate active index");
    }
    active_.push_back(idx);
    theta_(static_cast<Eigen::Index>(idx)) = values[k];
  }
  validate(sparsity);
}

void SparseNetwork::validate(std::optional<std::size_t> sparsity) const {
  if (!(weight_bound_ > 0.0)) throw Error(Errc::invalid_argument, "weight bound B must be > 0");
  if (!(output_bound_ > 0.0)) throw Error(Errc::invalid_argument, "output bound F must be > 0");
  if (theta_.size() > 0 && theta_.cwiseAbs().maxCoeff() > weight_bound_) {
    throw Error(Errc::out_of_support, "weight exceeds the bound B");
  }
  if (sparsity && active_.size() > *sparsity) {
    throw Error(Errc::invalid_class, "support larger than the sparsity level S");
  }
}

std::vector<double> SparseNetwork::active_values() const {
  std::vector<double> v;
  v.reserve(active_.size());
  for (std::size_t i : active_) v.push_back(theta_(static_cast<Eigen::Index>(i)));
  return v;
}

Eigen::MatrixXd forward_batch(const Architecture& arch, std::span<const double> theta,
                              const Eigen::MatrixXd& inputs, Activation act) {
  const auto& p = arch.widths();
  if (theta.size() != param_count(arch)) {
    throw Error(Errc::dimension_mismatch, "parameter vector length does not match architecture");
  }
  if (static_cast<std::size_t>(inputs.rows()) != p.front()) {
    throw Error(Errc::dimension_mismatch, "input dimension does not match p_0");
  }
  Eigen::MatrixXd a = inputs;
  const std::size_t layers = p.size() - 1;
  for (std::size_t l = 1; l <= layers; ++l) {
    const auto rows = static_cast<Eigen::Index>(p[l]);
    const auto cols = static_cast<Eigen::Index>(p[l - 1]);
    Eigen::Map<const Eigen::MatrixXd> w(theta.data() + arch.weight_offset(l), rows, cols);
    Eigen::Map<const Eigen::VectorXd> b(theta.data() + arch.bias_offset(l), rows);
    Eigen::MatrixXd z = w * a;
    z.colwise() += b;
    if (l < layers) {
      if (act == Activation::relu) {
        z = z.cwiseMax(0.0);
      } else {
        z = (1.0 + (-z.array()).exp()).inverse().matrix();
      }
    }
    a = std::move(z);
  }
  return a;
}

Eigen::VectorXd forward(const SparseNetwork& net, const Eigen::VectorXd& x, Activation act,
                        bool clip) {
  const auto& theta = net.theta();
  Eigen::VectorXd out = forward_batch(
      net.architecture(), std::span<const double>(theta.data(), static_cast<std::size_t>(theta.size())),
      x, act);
  if (clip) {
    const double f = net.output_bound();
    out = out.cwiseMax(-f).cwiseMin(f);
  }
  return out;
}

double lipschitz_parameter_bound(const Architecture& arch, double weight_bound, double c_sigma,
                                 double sigma_at_zero, double x_norm) {
  if (!(weight_bound > 0.0 && c_sigma > 0.0)) {
    throw Error(Errc::invalid_argument, "B and C_sigma must be positive");
  }
  const double depth = static_cast<double>(arch.depth());
  const double cb = c_sigma * weight_bound;
  return 2.0 * depth * depth * (std::abs(sigma_at_zero) + x_norm + 1.0) * (1.0 + cb) *
         std::max(1.0, std::pow(cb, 2.0 * depth));
}

namespace {

template <typename Fn>
double layer_max(const Architecture& arch, Fn&& entry) {
  const auto& p = arch.widths();
  double worst = 0.0;
  for (std::size_t l = 1; l < p.size(); ++l) {
    const std::size_t rows = p[l];
    const std::size_t cols = p[l - 1];
    const std::size_t w0 = arch.weight_offset(l);
    const std::size_t b0 = arch.bias_offset(l);
    for (std::size_t i = 0; i < rows; ++i) {
      double row_sum = 0.0;
      for (std::size_t j = 0; j < cols; ++j) row_sum += std::abs(entry(w0 + i + j * rows));
      worst = std::max({worst, row_sum, std::abs(entry(b0 + i))});
    }
  }
  return worst;
}

}  // namespace

double layerwise_distance(const Architecture& arch, std::span<const double> a,
                          std::span<const double> b) {
  if (a.size() != param_count(arch) || b.size() != a.size()) {
    throw Error(Errc::dimension_mismatch, "parameter vector length does not match architecture");
  }
  return layer_max(arch, [&](std::size_t i) { return a[i] - b[i]; });
}

double layerwise_norm(const Architecture& arch, std::span<const double> theta) {
  if (theta.size() != param_count(arch)) {
    throw Error(Errc::dimension_mismatch, "parameter vector length does not match architecture");
  }
  return layer_max(arch, [&](std::size_t i) { return theta[i]; });
}

Eigen::VectorXd embed_to_max(const SparseNetwork& net, std::size_t depth, std::size_t width) {
  const Architecture& arch = net.architecture();
  const auto& p = arch.widths();
  if (arch.depth() > depth) {
    throw Error(Errc::architecture_too_large, "network deeper than the target depth");
  }
  if (*std::max_element(p.begin(), p.end()) > width) {
    throw Error(Errc::architecture_too_large, "network wider than the target width");
  }
  const Architecture target = Architecture::uniform(width, depth, width, width);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(param_count(target)));
  const Eigen::VectorXd& theta = net.theta();

  auto copy_layer = [&](std::size_t src_layer, std::size_t dst_layer) {
    const std::size_t rows = p[src_layer];
    const std::size_t cols = p[src_layer - 1];
    const std::size_t src_w = arch.weight_offset(src_layer);
    const std::size_t src_b = arch.bias_offset(src_layer);
    const std::size_t dst_w = target.weight_offset(dst_layer);
    const std::size_t dst_b = target.bias_offset(dst_layer);
    for (std::size_t j = 0; j < cols; ++j) {
      for (std::size_t i = 0; i < rows; ++i) {
        out(static_cast<Eigen::Index>(dst_w + i + j * width)) =
            theta(static_cast<Eigen::Index>(src_w + i + j * rows));
      }
    }
    for (std::size_t i = 0; i < rows; ++i) {
      out(static_cast<Eigen::Index>(dst_b + i)) = theta(static_cast<Eigen::Index>(src_b + i));
    }
  };

  const std::size_t own_depth = arch.depth();
  for (std::size_t l = 1; l <= own_depth; ++l) copy_layer(l, l);
  // Pass-through layers carry the last hidden activations (or the input) forward.
  const std::size_t carried = p[own_depth];
  for (std::size_t l = own_depth + 1; l <= depth; ++l) {
    const std::size_t dst_w = target.weight_offset(l);
    for (std::size_t i = 0; i < carried; ++i) {
      out(static_cast<Eigen::Index>(dst_w + i + i * width)) = 1.0;
    }
  }
  copy_layer(own_depth + 1, depth + 1);
  return out;
}

}  // namespace pacdnn::network
