#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "wadc/types.hpp"

namespace wadc {

enum class Activation { relu, tanh, linear };

struct DenseLayer {
  Mat weight;  // out x in
  Vec bias;
  Activation activation = Activation::linear;
};

/// Fully connected network evaluated column-wise (one sample per column).
///
/// Parameters are addressed as one flat vector: for every layer its weight
/// matrix in column-major order followed by its bias.
class Mlp {
public:
  struct Tape {
    std::vector<Mat> activations;  // input, then the output of every layer
    std::vector<Mat> pre_activations;
  };

  Mlp() = default;
  explicit Mlp(std::vector<DenseLayer> layers);

  /// Uniform initialization in +-1/sqrt(fan_in) per layer.
  static Mlp make(const std::vector<std::size_t>& sizes, const std::vector<Activation>& activations,
                  std::mt19937_64& rng);

  std::size_t input_size() const;
  std::size_t output_size() const;
  std::size_t parameter_count() const;

  Vec forward(const Vec& x) const;
  Mat forward(const Mat& X) const;
  Mat forward(const Mat& X, Tape& tape) const;

  /// Back-propagates dL/d(output). Writes dL/d(parameters) into `param_grad`
  /// when non-null and returns dL/d(input).
  Mat backward(const Tape& tape, const Mat& output_grad, Vec* param_grad) const;

  Vec parameters() const;
  void set_parameters(const Vec& flat);

  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::vector<DenseLayer>& layers() noexcept { return layers_; }

  bool same_shape(const Mlp& other) const;

private:
  std::vector<DenseLayer> layers_;
};

/// target <- tau * learned + (1 - tau) * target, elementwise.
void soft_update(const Mlp& learned, Mlp& target, double tau);

enum class OptimizerKind { sgd, adam };

/// Gradient descent on a flat parameter vector; the adam mode keeps first and
/// second moment estimates.
class Optimizer {
public:
  Optimizer() = default;
  Optimizer(OptimizerKind kind, double learning_rate, std::size_t parameters);

  void step(Mlp& net, const Vec& gradient);

  OptimizerKind kind() const noexcept { return kind_; }
  double learning_rate() const noexcept { return lr_; }

  // Exposed for checkpointing.
  Vec first_moment;
  Vec second_moment;
  std::uint64_t steps = 0;

private:
  OptimizerKind kind_ = OptimizerKind::sgd;
  double lr_ = 1e-4;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double epsilon_ = 1e-8;
};

}  // namespace wadc
