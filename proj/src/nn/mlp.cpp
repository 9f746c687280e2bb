#include "irlad/nn.hpp"

#include "irlad/core.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace irlad::nn {
namespace {

DenseLayer zeros_like(const DenseLayer& l) {
  return DenseLayer{Eigen::MatrixXd::Zero(l.out(), l.in()), Eigen::VectorXd::Zero(l.out())};
}

LayerStack zeros_like(const LayerStack& s) {
  LayerStack z;
  for (const auto& l : s.trunk) z.trunk.push_back(zeros_like(l));
  for (const auto& l : s.heads) z.heads.push_back(zeros_like(l));
  return z;
}

void check_head(const MlpParams& params, int head) {
  if (head < 0 || head >= static_cast<int>(params.heads.size()))
    throw std::out_of_range("head index " + std::to_string(head) + " outside [0, " +
                            std::to_string(params.heads.size()) + ")");
}

void check_input(const MlpParams& params, Eigen::Index dim) {
  if (dim != params.shape.input_dim)
    throw std::invalid_argument("input dimension " + std::to_string(dim) + " does not match " +
                                std::to_string(params.shape.input_dim));
}

Eigen::MatrixXd relu(const Eigen::MatrixXd& z) { return z.cwiseMax(0.0); }

// Pre-activations of every trunk layer plus the final trunk features.
struct TrunkPass {
  std::vector<Eigen::MatrixXd> pre;   // z_l
  std::vector<Eigen::MatrixXd> post;  // a_l, post[0] is the input
};

TrunkPass run_trunk(const MlpParams& params, const Eigen::MatrixXd& inputs) {
  TrunkPass pass;
  pass.post.push_back(inputs);
  for (const auto& layer : params.trunk) {
    Eigen::MatrixXd z = layer.weight * pass.post.back();
    z.colwise() += layer.bias;
    pass.post.push_back(relu(z));
    pass.pre.push_back(std::move(z));
  }
  return pass;
}

Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> input) {
  return {input.data(), static_cast<Eigen::Index>(input.size())};
}

}  // namespace

std::size_t LayerStack::num_values() const {
  std::size_t n = 0;
  for (const auto& l : trunk) n += l.weight.size() + l.bias.size();
  for (const auto& l : heads) n += l.weight.size() + l.bias.size();
  return n;
}

Eigen::VectorXd LayerStack::flatten() const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(num_values()));
  Eigen::Index k = 0;
  auto put = [&](const DenseLayer& l) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) out[k++] = l.weight(r, c);
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) out[k++] = l.bias[r];
  };
  for (const auto& l : trunk) put(l);
  for (const auto& l : heads) put(l);
  return out;
}

void LayerStack::unflatten(const Eigen::VectorXd& values) {
  if (values.size() != static_cast<Eigen::Index>(num_values()))
    throw std::invalid_argument("unflatten: size mismatch");
  Eigen::Index k = 0;
  auto get = [&](DenseLayer& l) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = values[k++];
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias[r] = values[k++];
  };
  for (auto& l : trunk) get(l);
  for (auto& l : heads) get(l);
}

void LayerStack::set_zero() {
  for (auto& l : trunk) { l.weight.setZero(); l.bias.setZero(); }
  for (auto& l : heads) { l.weight.setZero(); l.bias.setZero(); }
}

bool LayerStack::all_finite() const {
  for (const auto& l : trunk)
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  for (const auto& l : heads)
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

bool LayerStack::same_shape(const LayerStack& other) const {
  if (trunk.size() != other.trunk.size() || heads.size() != other.heads.size()) return false;
  auto eq = [](const DenseLayer& a, const DenseLayer& b) {
    return a.in() == b.in() && a.out() == b.out() && a.bias.size() == b.bias.size();
  };
  for (std::size_t i = 0; i < trunk.size(); ++i)
    if (!eq(trunk[i], other.trunk[i])) return false;
  for (std::size_t i = 0; i < heads.size(); ++i)
    if (!eq(heads[i], other.heads[i])) return false;
  return true;
}

GradBuffer::GradBuffer(const MlpParams& params) : LayerStack(zeros_like(params)) {}

AdamState::AdamState(const MlpParams& params, double step)
    : step_size(step),
      first_moment(zeros_like(params)),
      second_moment(zeros_like(params)),
      head_steps(params.heads.size(), 0) {}

MlpParams init_params(std::uint64_t seed, double sigma2, const MlpShape& shape) {
  if (!(sigma2 > 0.0)) throw ConfigError("init_params: sigma2 must be positive");
  if (shape.input_dim < 1 || shape.head_width < 1 || shape.num_heads < 1)
    throw ConfigError("init_params: dimensions must be positive");
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, std::sqrt(sigma2));
  auto make = [&](int in, int out) {
    DenseLayer l{Eigen::MatrixXd(out, in), Eigen::VectorXd(out)};
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) l.weight(r, c) = gauss(rng);
    for (int r = 0; r < out; ++r) l.bias[r] = gauss(rng);
    return l;
  };
  MlpParams p;
  p.shape = shape;
  int in = shape.input_dim;
  for (int w : shape.trunk_widths) {
    if (w < 1) throw ConfigError("init_params: trunk widths must be positive");
    p.trunk.push_back(make(in, w));
    in = w;
  }
  for (int k = 0; k < shape.num_heads; ++k) p.heads.push_back(make(in, shape.head_width));
  return p;
}

Eigen::MatrixXd forward_batch(const MlpParams& params, const Eigen::MatrixXd& inputs, int head) {
  check_head(params, head);
  check_input(params, inputs.rows());
  Eigen::MatrixXd a = inputs;
  for (const auto& layer : params.trunk) {
    Eigen::MatrixXd z = layer.weight * a;
    z.colwise() += layer.bias;
    a = relu(z);
  }
  const auto& h = params.heads[static_cast<std::size_t>(head)];
  Eigen::MatrixXd y = h.weight * a;
  y.colwise() += h.bias;
  return y;
}

Eigen::MatrixXd forward_all_heads(const MlpParams& params, const Eigen::MatrixXd& inputs) {
  check_input(params, inputs.rows());
  if (params.shape.head_width != 1) throw std::invalid_argument("forward_all_heads: scalar heads only");
  Eigen::MatrixXd a = inputs;
  for (const auto& layer : params.trunk) {
    Eigen::MatrixXd z = layer.weight * a;
    z.colwise() += layer.bias;
    a = relu(z);
  }
  const auto k = static_cast<Eigen::Index>(params.heads.size());
  Eigen::MatrixXd w(k, a.rows());
  Eigen::VectorXd b(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    w.row(i) = params.heads[static_cast<std::size_t>(i)].weight.row(0);
    b[i] = params.heads[static_cast<std::size_t>(i)].bias[0];
  }
  Eigen::MatrixXd y = w * a;
  y.colwise() += b;
  return y;
}

Eigen::VectorXd forward(const MlpParams& params, std::span<const double> input, int head) {
  return forward_batch(params, Eigen::MatrixXd(as_vector(input)), head).col(0);
}

double forward_scalar(const MlpParams& params, std::span<const double> input, int head) {
  return forward(params, input, head)[0];
}

void backward_batch(const MlpParams& params, const Eigen::MatrixXd& inputs, int head,
                    const Eigen::MatrixXd& upstream, GradBuffer& grads) {
  check_head(params, head);
  check_input(params, inputs.rows());
  if (!grads.same_shape(params)) throw std::invalid_argument("backward: gradient buffer shape");
  const auto& h = params.heads[static_cast<std::size_t>(head)];
  if (upstream.rows() != h.out() || upstream.cols() != inputs.cols())
    throw std::invalid_argument("backward: upstream shape");

  const TrunkPass pass = run_trunk(params, inputs);
  auto& gh = grads.heads[static_cast<std::size_t>(head)];
  gh.weight.noalias() += upstream * pass.post.back().transpose();
  gh.bias += upstream.rowwise().sum();

  if (params.trunk.empty()) return;
  Eigen::MatrixXd delta = h.weight.transpose() * upstream;
  for (std::size_t l = params.trunk.size(); l-- > 0;) {
    delta = delta.cwiseProduct((pass.pre[l].array() > 0.0).cast<double>().matrix());
    grads.trunk[l].weight.noalias() += delta * pass.post[l].transpose();
    grads.trunk[l].bias += delta.rowwise().sum();
    if (l > 0) delta = params.trunk[l].weight.transpose() * delta;
  }
}

void backward(const MlpParams& params, std::span<const double> input, int head,
              const Eigen::VectorXd& upstream, GradBuffer& grads) {
  backward_batch(params, Eigen::MatrixXd(as_vector(input)), head, Eigen::MatrixXd(upstream), grads);
}

void backward(const MlpParams& params, std::span<const double> input, int head,
              double upstream_weight, GradBuffer& grads) {
  check_head(params, head);
  if (upstream_weight == 0.0) {
    check_input(params, static_cast<Eigen::Index>(input.size()));
    return;
  }
  const auto width = params.heads[static_cast<std::size_t>(head)].out();
  backward(params, input, head, Eigen::VectorXd::Constant(width, upstream_weight), grads);
}

void adam_step(MlpParams& params, const GradBuffer& grads, AdamState& state,
               std::optional<int> active_head) {
  if (!grads.same_shape(params) || !state.first_moment.same_shape(params))
    throw std::invalid_argument("adam_step: shape mismatch");
  if (!grads.all_finite()) throw NumericError("adam_step: non-finite gradient, update rejected");
  if (active_head) check_head(params, *active_head);

  const double b1 = state.beta1, b2 = state.beta2;
  auto update = [&](DenseLayer& p, const DenseLayer& g, DenseLayer& m, DenseLayer& v,
                    std::int64_t t) {
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
    m.weight = b1 * m.weight + (1.0 - b1) * g.weight;
    v.weight = b2 * v.weight + (1.0 - b2) * g.weight.cwiseAbs2();
    m.bias = b1 * m.bias + (1.0 - b1) * g.bias;
    v.bias = b2 * v.bias + (1.0 - b2) * g.bias.cwiseAbs2();
    p.weight.array() += state.step_size * (m.weight.array() / c1) /
                        ((v.weight.array() / c2).sqrt() + state.epsilon);
    p.bias.array() += state.step_size * (m.bias.array() / c1) /
                      ((v.bias.array() / c2).sqrt() + state.epsilon);
  };

  ++state.trunk_steps;
  for (std::size_t i = 0; i < params.trunk.size(); ++i)
    update(params.trunk[i], grads.trunk[i], state.first_moment.trunk[i],
           state.second_moment.trunk[i], state.trunk_steps);
  for (std::size_t k = 0; k < params.heads.size(); ++k) {
    if (active_head && static_cast<int>(k) != *active_head) continue;
    const auto t = ++state.head_steps[k];
    update(params.heads[k], grads.heads[k], state.first_moment.heads[k],
           state.second_moment.heads[k], t);
  }
}

}  // namespace irlad::nn
