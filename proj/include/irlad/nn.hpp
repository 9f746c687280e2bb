// Feed-forward network with a shared ReLU trunk and several linear output
// heads. Backpropagation is written out by hand; there is no autodiff graph.
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace irlad::nn {

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out

  Eigen::Index in() const { return weight.cols(); }
  Eigen::Index out() const { return weight.rows(); }
};

struct MlpShape {
  int input_dim = 0;
  std::vector<int> trunk_widths;  // may be empty: heads then read the input directly
  int head_width = 1;
  int num_heads = 1;

  int feature_dim() const { return trunk_widths.empty() ? input_dim : trunk_widths.back(); }
  bool operator==(const MlpShape&) const = default;
};

/// Trunk and head layers. Shared by parameters, gradients and optimizer moments.
struct LayerStack {
  std::vector<DenseLayer> trunk;
  std::vector<DenseLayer> heads;

  std::size_t num_values() const;
  /// Row-major weights then bias, trunk layers first, then heads in order.
  Eigen::VectorXd flatten() const;
  void unflatten(const Eigen::VectorXd& values);
  void set_zero();
  bool all_finite() const;
  bool same_shape(const LayerStack& other) const;
};

struct MlpParams : LayerStack {
  MlpShape shape;
};

/// Accumulates weighted gradient contributions; zero it between updates.
struct GradBuffer : LayerStack {
  GradBuffer() = default;
  explicit GradBuffer(const MlpParams& params);
};

struct AdamState {
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  LayerStack first_moment;
  LayerStack second_moment;
  // Separate counters so bias correction tracks how often each block was updated.
  std::int64_t trunk_steps = 0;
  std::vector<std::int64_t> head_steps;

  AdamState() = default;
  AdamState(const MlpParams& params, double step);
};

/// Every weight and bias drawn i.i.d. N(0, sigma2) from a generator seeded with `seed`.
MlpParams init_params(std::uint64_t seed, double sigma2, const MlpShape& shape);

/// head(ReLU-trunk(input)); throws std::out_of_range / std::invalid_argument
/// on a bad head index or input dimension.
Eigen::VectorXd forward(const MlpParams& params, std::span<const double> input, int head);
double forward_scalar(const MlpParams& params, std::span<const double> input, int head);

/// Column-wise batch evaluation: inputs is input_dim x n, result head_width x n.
Eigen::MatrixXd forward_batch(const MlpParams& params, const Eigen::MatrixXd& inputs, int head);

/// Scalar heads only: row k holds head k's outputs for every input column.
/// The trunk is evaluated once.
Eigen::MatrixXd forward_all_heads(const MlpParams& params, const Eigen::MatrixXd& inputs);

/// grads += upstream_weight * d(output)/d(params) for the trunk and `head` only.
void backward(const MlpParams& params, std::span<const double> input, int head,
              double upstream_weight, GradBuffer& grads);
void backward(const MlpParams& params, std::span<const double> input, int head,
              const Eigen::VectorXd& upstream, GradBuffer& grads);

/// Batched form: grads += sum_i upstream.col(i)^T d(output_i)/d(params).
void backward_batch(const MlpParams& params, const Eigen::MatrixXd& inputs, int head,
                    const Eigen::MatrixXd& upstream, GradBuffer& grads);

/// In-place ascent step. With `active_head` set only the trunk and that head
/// (and their moments) move. Throws NumericError on a non-finite gradient.
void adam_step(MlpParams& params, const GradBuffer& grads, AdamState& state,
               std::optional<int> active_head = std::nullopt);

}  // namespace irlad::nn
