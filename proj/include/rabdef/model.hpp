#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rabdef/matrix.hpp"

namespace rabdef {

enum class Activation { relu, tanh };

// Fully connected net: layer_sizes = {input, hidden..., classes}. The last
// layer feeds a softmax; hidden layers use the configured activation.
struct ModelLayout {
  std::vector<int> layer_sizes;
  Activation activation = Activation::relu;

  int input_dim() const { return layer_sizes.front(); }
  int class_count() const { return layer_sizes.back(); }
  size_t param_count() const;
  void validate() const;

  bool operator==(const ModelLayout&) const = default;
};

// Flat parameter vector. Per layer: row-major weights (in x out), then biases.
struct ParamVector {
  std::vector<double> values;
  ModelLayout layout;

  void validate() const;  // length matches layout, all entries finite
};

struct Batch {
  Mat features;             // samples x input_dim
  std::vector<int> labels;  // class indices
};

ParamVector zero_params(const ModelLayout& layout);

// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per layer; biases zero.
ParamVector init_params(const ModelLayout& layout, uint64_t seed);

// Class probability vector (softmax output), sums to 1.
std::vector<double> forward(const ParamVector& params, std::span<const double> x);

// Mean cross-entropy over the batch.
double batch_loss(const ParamVector& params, const Batch& batch);

// Gradient of the mean cross-entropy loss with respect to every parameter.
ParamVector loss_gradient(const ParamVector& params, const Batch& batch);

// Plain SGD, minibatch order reshuffled per epoch from the seed. Raises a
// divergence error naming the epoch if the loss stops being finite.
ParamVector local_train(ParamVector params, const Batch& data, int epochs, double lr,
                        int batch_size, uint64_t seed);

// d p_k / d x_f for the softmax output, as a (features x classes) matrix.
Mat input_jacobian(const ParamVector& params, std::span<const double> x);

}  // namespace rabdef
