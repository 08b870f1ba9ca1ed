#pragma once

// Sparse feedforward networks stored as a flat parameter vector plus an
// explicit active index set.
//
// Flat layout (fixed bijection used by the prior and the sampler): layers in
// order 1..L+1; inside layer l the weight matrix W_l (p_l x p_{l-1}) is stored
// column-major, immediately followed by the bias b_l (p_l entries).

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace pacdnn::network {

enum class Activation { relu, sigmoid };

struct ActivationInfo {
  double lipschitz;     // C_sigma
  double value_at_zero; // sigma(0)
};

ActivationInfo activation_info(Activation act) noexcept;
Activation parse_activation(std::string_view name);
std::string_view activation_name(Activation act) noexcept;

/// Widths (p_0, ..., p_{L+1}); p_0 is the input dimension, p_{L+1} the output dimension.
class Architecture {
 public:
  explicit Architecture(std::vector<std::size_t> widths);

  /// (d_x, N, ..., N, d_y) with `depth` hidden layers.
  static Architecture uniform(std::size_t input_dim, std::size_t depth, std::size_t width,
                              std::size_t output_dim);

  std::size_t depth() const noexcept { return widths_.size() - 2; }
  std::size_t input_dim() const noexcept { return widths_.front(); }
  std::size_t output_dim() const noexcept { return widths_.back(); }
  /// Largest hidden width (0 for depth 0).
  std::size_t width() const noexcept;
  const std::vector<std::size_t>& widths() const noexcept { return widths_; }

  /// Offset of W_l (l = 1..L+1) in the flat vector; the bias starts at
  /// weight_offset(l) + p_l * p_{l-1}.
  std::size_t weight_offset(std::size_t layer) const;
  std::size_t bias_offset(std::size_t layer) const;

  bool operator==(const Architecture&) const = default;

 private:
  std::vector<std::size_t> widths_;
  std::vector<std::size_t> offsets_;
};

/// sum_l p_l p_{l-1} + sum_l p_l.
std::size_t param_count(const Architecture& arch);
/// N (N + 1) (L + 1).
std::size_t param_count_max(std::size_t depth, std::size_t width);

/// A parameter vector theta together with its support I and class bounds.
class SparseNetwork {
 public:
  /// Dense constructor: the support is the set of nonzero entries.
  SparseNetwork(Architecture arch, Eigen::VectorXd theta, double weight_bound,
                double output_bound, std::optional<std::size_t> sparsity = std::nullopt);
  /// Explicit support: values are given for the active indices only (sorted or not).
  SparseNetwork(Architecture arch, std::vector<std::size_t> active, std::span<const double> values,
                double weight_bound, double output_bound,
                std::optional<std::size_t> sparsity = std::nullopt);

  const Architecture& architecture() const noexcept { return arch_; }
  const Eigen::VectorXd& theta() const noexcept { return theta_; }
  const std::vector<std::size_t>& active() const noexcept { return active_; }
  double weight_bound() const noexcept { return weight_bound_; }
  double output_bound() const noexcept { return output_bound_; }

  /// Values at the active indices, in the order of active().
  std::vector<double> active_values() const;

 private:
  void validate(std::optional<std::size_t> sparsity) const;

  Architecture arch_;
  Eigen::VectorXd theta_;
  std::vector<std::size_t> active_;
  double weight_bound_;
  double output_bound_;
};

/// h_theta(x), clipped coordinate-wise to [-F, F] when `clip` is set.
Eigen::VectorXd forward(const SparseNetwork& net, const Eigen::VectorXd& x,
                        Activation act = Activation::relu, bool clip = true);

/// Raw evaluation on a parameter vector; inputs are the columns of `inputs`.
/// Returns a (d_y x batch) matrix. No clipping.
Eigen::MatrixXd forward_batch(const Architecture& arch, std::span<const double> theta,
                              const Eigen::MatrixXd& inputs, Activation act);

/// 2 L^2 (|sigma(0)| + ||x|| + 1)(1 + C_sigma B) max(1, (C_sigma B)^{2L}).
double lipschitz_parameter_bound(const Architecture& arch, double weight_bound, double c_sigma,
                                 double sigma_at_zero, double x_norm);

/// max over layers of max(||W_l - W~_l||_{inf->inf}, ||b_l - b~_l||_inf). This is the
/// parameter distance under which the Lipschitz bound above is valid; it is
/// dominated by the l1 distance of the flat vectors.
double layerwise_distance(const Architecture& arch, std::span<const double> a,
                          std::span<const double> b);
/// max over layers of max(||W_l||_{inf->inf}, ||b_l||_inf).
double layerwise_norm(const Architecture& arch, std::span<const double> theta);

/// Canonical zero-padded embedding into the flat vector of the maximal
/// architecture (N, N, ..., N) with `depth` hidden layers (length N(N+1)(L+1)).
///
/// Layer l of the network maps to layer l of the maximal network with entry
/// (i, j) of W_l placed at row i, column j, and b_l(i) at bias slot i. When the
/// network is shallower than `depth`, its last hidden layer is followed by
/// identity pass-through layers (unit diagonal weights, zero bias) and its output
/// layer becomes layer depth+1. For ReLU the pass-through layers act as the
/// identity on the nonnegative hidden activations, so the function is preserved
/// (for depth-0 networks, on nonnegative inputs). Inputs are zero-padded to N
/// coordinates and the first d_y outputs carry the original outputs.
Eigen::VectorXd embed_to_max(const SparseNetwork& net, std::size_t depth, std::size_t width);

}  // namespace pacdnn::network
