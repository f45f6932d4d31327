#include "rabdef/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rabdef/error.hpp"
#include "rabdef/rng.hpp"

namespace rabdef {

namespace {

// Activations and per-layer probabilities captured during a forward pass.
// h[0] is the input; h.back() holds the softmax output.
struct Trace {
  std::vector<std::vector<double>> h;
};

double activate(double z, Activation a) {
  return a == Activation::relu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

// Derivative expressed through the activation output.
double activate_grad(double h, Activation a) {
  return a == Activation::relu ? (h > 0.0 ? 1.0 : 0.0) : 1.0 - h * h;
}

void softmax_inplace(std::vector<double>& z) {
  double zmax = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double& v : z) {
    v = std::exp(v - zmax);
    total += v;
  }
  for (double& v : z) v /= total;
}

size_t layer_offset(const ModelLayout& layout, int layer) {
  size_t off = 0;
  for (int l = 0; l < layer; ++l) {
    size_t in = layout.layer_sizes[l];
    size_t out = layout.layer_sizes[l + 1];
    off += in * out + out;
  }
  return off;
}

Trace run_forward(const ParamVector& params, std::span<const double> x) {
  const ModelLayout& layout = params.layout;
  int depth = static_cast<int>(layout.layer_sizes.size()) - 1;
  Trace trace;
  trace.h.resize(depth + 1);
  trace.h[0].assign(x.begin(), x.end());
  size_t off = 0;
  for (int l = 0; l < depth; ++l) {
    int n_in = layout.layer_sizes[l];
    int n_out = layout.layer_sizes[l + 1];
    const double* w = params.values.data() + off;
    const double* b = w + static_cast<size_t>(n_in) * n_out;
    std::vector<double> z(b, b + n_out);
    const std::vector<double>& input = trace.h[l];
    for (int i = 0; i < n_in; ++i) {
      const double* wrow = w + static_cast<size_t>(i) * n_out;
      double hi = input[i];
      for (int j = 0; j < n_out; ++j) z[j] += hi * wrow[j];
    }
    if (l + 1 < depth) {
      for (double& v : z) v = activate(v, layout.activation);
    } else {
      softmax_inplace(z);
    }
    trace.h[l + 1] = std::move(z);
    off += static_cast<size_t>(n_in) * n_out + n_out;
  }
  return trace;
}

void check_batch(const ParamVector& params, const Batch& batch) {
  params.validate();
  if (batch.features.rows == 0) fail(ErrorCode::empty_input, "batch is empty");
  if (batch.features.cols != params.layout.input_dim())
    fail(ErrorCode::shape_mismatch, "batch feature width " + std::to_string(batch.features.cols) +
                                        " does not match model input " +
                                        std::to_string(params.layout.input_dim()));
  if (static_cast<int>(batch.labels.size()) != batch.features.rows)
    fail(ErrorCode::shape_mismatch, "label count does not match sample count");
  int classes = params.layout.class_count();
  for (int y : batch.labels) {
    if (y < 0 || y >= classes)
      fail(ErrorCode::invalid_argument, "label " + std::to_string(y) + " outside class range");
  }
}

// Accumulates the summed cross-entropy gradient for the batch into grad and
// returns the summed loss. Caller scales by 1/n.
double accumulate_gradient(const ParamVector& params, const Batch& batch,
                           std::vector<double>& grad) {
  const ModelLayout& layout = params.layout;
  int depth = static_cast<int>(layout.layer_sizes.size()) - 1;
  double loss = 0.0;
  std::vector<double> delta;
  std::vector<double> delta_prev;
  for (int s = 0; s < batch.features.rows; ++s) {
    Trace trace = run_forward(params, batch.features.row(s));
    const std::vector<double>& probs = trace.h[depth];
    loss += -std::log(probs[batch.labels[s]]);
    delta = probs;
    delta[batch.labels[s]] -= 1.0;  // d loss / d logits for softmax + CE
    for (int l = depth - 1; l >= 0; --l) {
      int n_in = layout.layer_sizes[l];
      int n_out = layout.layer_sizes[l + 1];
      size_t off = layer_offset(layout, l);
      double* gw = grad.data() + off;
      double* gb = gw + static_cast<size_t>(n_in) * n_out;
      const double* w = params.values.data() + off;
      const std::vector<double>& input = trace.h[l];
      for (int i = 0; i < n_in; ++i) {
        double* gwrow = gw + static_cast<size_t>(i) * n_out;
        double hi = input[i];
        for (int j = 0; j < n_out; ++j) gwrow[j] += hi * delta[j];
      }
      for (int j = 0; j < n_out; ++j) gb[j] += delta[j];
      if (l > 0) {
        delta_prev.assign(n_in, 0.0);
        for (int i = 0; i < n_in; ++i) {
          const double* wrow = w + static_cast<size_t>(i) * n_out;
          double acc = 0.0;
          for (int j = 0; j < n_out; ++j) acc += wrow[j] * delta[j];
          delta_prev[i] = acc * activate_grad(input[i], layout.activation);
        }
        delta = delta_prev;
      }
    }
  }
  return loss;
}

}  // namespace

size_t ModelLayout::param_count() const {
  size_t total = 0;
  for (size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    total += static_cast<size_t>(layer_sizes[l]) * layer_sizes[l + 1] + layer_sizes[l + 1];
  }
  return total;
}

void ModelLayout::validate() const {
  if (layer_sizes.size() < 2)
    fail(ErrorCode::invalid_argument, "model needs at least input and output layers");
  for (int n : layer_sizes) {
    if (n < 1) fail(ErrorCode::invalid_argument, "layer sizes must be positive");
  }
}

void ParamVector::validate() const {
  layout.validate();
  if (values.size() != layout.param_count())
    fail(ErrorCode::shape_mismatch, "parameter vector length " + std::to_string(values.size()) +
                                        " does not match layout (" +
                                        std::to_string(layout.param_count()) + ")");
  for (double v : values) {
    if (!std::isfinite(v)) fail(ErrorCode::invalid_argument, "parameter vector has non-finite entry");
  }
}

ParamVector zero_params(const ModelLayout& layout) {
  layout.validate();
  ParamVector p;
  p.layout = layout;
  p.values.assign(layout.param_count(), 0.0);
  return p;
}

ParamVector init_params(const ModelLayout& layout, uint64_t seed) {
  ParamVector p = zero_params(layout);
  Rng rng(seed);
  size_t off = 0;
  for (size_t l = 0; l + 1 < layout.layer_sizes.size(); ++l) {
    size_t n_in = layout.layer_sizes[l];
    size_t n_out = layout.layer_sizes[l + 1];
    double bound = 1.0 / std::sqrt(static_cast<double>(n_in));
    for (size_t i = 0; i < n_in * n_out; ++i) p.values[off + i] = rng.uniform(-bound, bound);
    off += n_in * n_out + n_out;  // biases stay zero
  }
  return p;
}

std::vector<double> forward(const ParamVector& params, std::span<const double> x) {
  params.validate();
  if (static_cast<int>(x.size()) != params.layout.input_dim())
    fail(ErrorCode::shape_mismatch, "input length does not match model input dimension");
  Trace trace = run_forward(params, x);
  return trace.h.back();
}

double batch_loss(const ParamVector& params, const Batch& batch) {
  check_batch(params, batch);
  int depth = static_cast<int>(params.layout.layer_sizes.size()) - 1;
  double loss = 0.0;
  for (int s = 0; s < batch.features.rows; ++s) {
    Trace trace = run_forward(params, batch.features.row(s));
    loss += -std::log(trace.h[depth][batch.labels[s]]);
  }
  return loss / batch.features.rows;
}

ParamVector loss_gradient(const ParamVector& params, const Batch& batch) {
  check_batch(params, batch);
  ParamVector grad = zero_params(params.layout);
  accumulate_gradient(params, batch, grad.values);
  double inv = 1.0 / batch.features.rows;
  for (double& g : grad.values) g *= inv;
  return grad;
}

ParamVector local_train(ParamVector params, const Batch& data, int epochs, double lr,
                        int batch_size, uint64_t seed) {
  check_batch(params, data);
  if (epochs < 0) fail(ErrorCode::invalid_argument, "epochs must be non-negative");
  if (lr <= 0.0) fail(ErrorCode::invalid_argument, "learning rate must be positive");
  if (batch_size < 1) fail(ErrorCode::invalid_argument, "batch size must be positive");

  int n = data.features.rows;
  int dim = data.features.cols;
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  std::vector<double> grad(params.values.size());
  Batch mini;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    for (int start = 0; start < n; start += batch_size) {
      int count = std::min(batch_size, n - start);
      mini.features = Mat(count, dim);
      mini.labels.resize(count);
      for (int k = 0; k < count; ++k) {
        auto src = data.features.row(order[start + k]);
        std::copy(src.begin(), src.end(), mini.features.row(k).begin());
        mini.labels[k] = data.labels[order[start + k]];
      }
      std::fill(grad.begin(), grad.end(), 0.0);
      double loss = accumulate_gradient(params, mini, grad);
      if (!std::isfinite(loss))
        fail(ErrorCode::divergence,
             "local training diverged at epoch " + std::to_string(epoch));
      double step = -lr / count;
      axpy(step, grad, params.values);
    }
  }
  return params;
}

Mat input_jacobian(const ParamVector& params, std::span<const double> x) {
  params.validate();
  if (static_cast<int>(x.size()) != params.layout.input_dim())
    fail(ErrorCode::shape_mismatch, "input length does not match model input dimension");
  const ModelLayout& layout = params.layout;
  int depth = static_cast<int>(layout.layer_sizes.size()) - 1;
  int classes = layout.class_count();
  int features = layout.input_dim();
  Trace trace = run_forward(params, x);
  const std::vector<double>& probs = trace.h[depth];

  Mat jac(features, classes);
  std::vector<double> delta;
  std::vector<double> delta_prev;
  for (int k = 0; k < classes; ++k) {
    // d p_k / d logits = p_k * (e_k - p); rows therefore sum to zero over k.
    delta.resize(classes);
    for (int j = 0; j < classes; ++j) delta[j] = probs[k] * ((j == k ? 1.0 : 0.0) - probs[j]);
    for (int l = depth - 1; l >= 0; --l) {
      int n_in = layout.layer_sizes[l];
      int n_out = layout.layer_sizes[l + 1];
      const double* w = params.values.data() + layer_offset(layout, l);
      const std::vector<double>& input = trace.h[l];
      delta_prev.assign(n_in, 0.0);
      for (int i = 0; i < n_in; ++i) {
        const double* wrow = w + static_cast<size_t>(i) * n_out;
        double acc = 0.0;
        for (int j = 0; j < n_out; ++j) acc += wrow[j] * delta[j];
        delta_prev[i] = l > 0 ? acc * activate_grad(input[i], layout.activation) : acc;
      }
      delta = delta_prev;
    }
    for (int f = 0; f < features; ++f) jac.at(f, k) = delta[f];
  }
  return jac;
}

}  // namespace rabdef
