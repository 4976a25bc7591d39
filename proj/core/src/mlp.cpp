#include "wadc/mlp.hpp"

#include <cmath>

namespace wadc {

namespace {

Mat activate(const Mat& z, Activation a) {
  switch (a) {
    case Activation::relu: return z.cwiseMax(0.0);
    case Activation::tanh: return z.array().tanh().matrix();
    case Activation::linear: return z;
  }
  return z;
}

// dL/dz from dL/dy, with y = act(z).
Mat activation_backward(const Mat& grad, const Mat& z, const Mat& y, Activation a) {
  switch (a) {
    case Activation::relu: return (z.array() > 0.0).select(grad, 0.0);
    case Activation::tanh: return (grad.array() * (1.0 - y.array().square())).matrix();
    case Activation::linear: return grad;
  }
  return grad;
}

}  // namespace

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw InvalidArgument("network needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].bias.size() != layers_[l].weight.rows())
      throw InvalidArgument("layer bias length must match its output size");
    if (l > 0 && layers_[l].weight.cols() != layers_[l - 1].weight.rows())
      throw InvalidArgument("consecutive layer dimensions must chain");
  }
}

Mlp Mlp::make(const std::vector<std::size_t>& sizes, const std::vector<Activation>& activations,
              std::mt19937_64& rng) {
  if (sizes.size() < 2 || activations.size() != sizes.size() - 1)
    throw InvalidArgument("need one activation per layer");
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const auto in = static_cast<Eigen::Index>(sizes[l]);
    const auto out = static_cast<Eigen::Index>(sizes[l + 1]);
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes[l]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    DenseLayer layer{Mat(out, in), Vec(out), activations[l]};
    for (Eigen::Index c = 0; c < in; ++c)
      for (Eigen::Index r = 0; r < out; ++r) layer.weight(r, c) = dist(rng);
    for (Eigen::Index r = 0; r < out; ++r) layer.bias(r) = dist(rng);
    layers.push_back(std::move(layer));
  }
  return Mlp(std::move(layers));
}

std::size_t Mlp::input_size() const {
  return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.front().weight.cols());
}

std::size_t Mlp::output_size() const {
  return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.back().weight.rows());
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

Vec Mlp::forward(const Vec& x) const {
  if (x.size() != static_cast<Eigen::Index>(input_size())) throw InvalidArgument("network input shape mismatch");
  Vec h = x;
  for (const auto& l : layers_) h = activate(l.weight * h + l.bias, l.activation);
  return h;
}

Mat Mlp::forward(const Mat& X) const {
  if (X.rows() != static_cast<Eigen::Index>(input_size())) throw InvalidArgument("network input shape mismatch");
  Mat h = X;
  for (const auto& l : layers_) h = activate((l.weight * h).colwise() + l.bias, l.activation);
  return h;
}

Mat Mlp::forward(const Mat& X, Tape& tape) const {
  if (X.rows() != static_cast<Eigen::Index>(input_size())) throw InvalidArgument("network input shape mismatch");
  tape.activations.assign(1, X);
  tape.pre_activations.clear();
  for (const auto& l : layers_) {
    tape.pre_activations.push_back((l.weight * tape.activations.back()).colwise() + l.bias);
    tape.activations.push_back(activate(tape.pre_activations.back(), l.activation));
  }
  return tape.activations.back();
}

Mat Mlp::backward(const Tape& tape, const Mat& output_grad, Vec* param_grad) const {
  if (tape.pre_activations.size() != layers_.size()) throw InvalidArgument("tape does not match network");
  if (param_grad) param_grad->resize(static_cast<Eigen::Index>(parameter_count()));

  // Offsets of each layer's block in the flat parameter vector.
  std::vector<Eigen::Index> offset(layers_.size());
  Eigen::Index pos = 0;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    offset[l] = pos;
    pos += layers_[l].weight.size() + layers_[l].bias.size();
  }

  Mat grad = output_grad;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& layer = layers_[l];
    const Mat dz = activation_backward(grad, tape.pre_activations[l], tape.activations[l + 1], layer.activation);
    if (param_grad) {
      const Mat dw = dz * tape.activations[l].transpose();
      param_grad->segment(offset[l], dw.size()) = Eigen::Map<const Vec>(dw.data(), dw.size());
      param_grad->segment(offset[l] + dw.size(), layer.bias.size()) = dz.rowwise().sum();
    }
    grad = layer.weight.transpose() * dz;
  }
  return grad;
}

Vec Mlp::parameters() const {
  Vec flat(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index pos = 0;
  for (const auto& l : layers_) {
    flat.segment(pos, l.weight.size()) = Eigen::Map<const Vec>(l.weight.data(), l.weight.size());
    pos += l.weight.size();
    flat.segment(pos, l.bias.size()) = l.bias;
    pos += l.bias.size();
  }
  return flat;
}

void Mlp::set_parameters(const Vec& flat) {
  if (flat.size() != static_cast<Eigen::Index>(parameter_count()))
    throw InvalidArgument("parameter vector length mismatch");
  Eigen::Index pos = 0;
  for (auto& l : layers_) {
    Eigen::Map<Vec>(l.weight.data(), l.weight.size()) = flat.segment(pos, l.weight.size());
    pos += l.weight.size();
    l.bias = flat.segment(pos, l.bias.size());
    pos += l.bias.size();
  }
}

bool Mlp::same_shape(const Mlp& other) const {
  if (layers_.size() != other.layers_.size()) return false;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& a = layers_[l];
    const auto& b = other.layers_[l];
    if (a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols() ||
        a.activation != b.activation)
      return false;
  }
  return true;
}

void soft_update(const Mlp& learned, Mlp& target, double tau) {
  if (!learned.same_shape(target)) throw InvalidArgument("soft update shape mismatch");
  if (!(tau >= 0.0 && tau <= 1.0)) throw InvalidArgument("tau must lie in [0, 1]");
  auto& dst = target.layers();
  const auto& src = learned.layers();
  for (std::size_t l = 0; l < dst.size(); ++l) {
    dst[l].weight = tau * src[l].weight + (1.0 - tau) * dst[l].weight;
    dst[l].bias = tau * src[l].bias + (1.0 - tau) * dst[l].bias;
  }
}

Optimizer::Optimizer(OptimizerKind kind, double learning_rate, std::size_t parameters)
    : kind_(kind), lr_(learning_rate) {
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (kind_ == OptimizerKind::adam) {
    first_moment = Vec::Zero(static_cast<Eigen::Index>(parameters));
    second_moment = Vec::Zero(static_cast<Eigen::Index>(parameters));
  }
}

void Optimizer::step(Mlp& net, const Vec& gradient) {
  Vec theta = net.parameters();
  if (gradient.size() != theta.size()) throw InvalidArgument("gradient length mismatch");
  ++steps;
  if (kind_ == OptimizerKind::sgd) {
    theta -= lr_ * gradient;
  } else {
    first_moment = beta1_ * first_moment + (1.0 - beta1_) * gradient;
    second_moment = beta2_ * second_moment + (1.0 - beta2_) * gradient.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps));
    theta.array() -= lr_ * (first_moment.array() / c1) / ((second_moment.array() / c2).sqrt() + epsilon_);
  }
  net.set_parameters(theta);
}

}  // namespace wadc
