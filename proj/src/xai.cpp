#include "rabdef/xai.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rabdef/error.hpp"
#include "rabdef/rng.hpp"

namespace rabdef {

namespace {

constexpr double kZeroNorm = 1e-12;

// Cholesky solve of the SPD system G * out = rhs for several right-hand sides.
// G is overwritten with its factor.
void cholesky_solve(Mat& g, Mat& rhs) {
  int n = g.rows;
  for (int j = 0; j < n; ++j) {
    double diag = g.at(j, j);
    for (int k = 0; k < j; ++k) diag -= g.at(j, k) * g.at(j, k);
    if (diag <= 0.0) fail(ErrorCode::invalid_argument, "surrogate normal matrix not positive definite");
    diag = std::sqrt(diag);
    g.at(j, j) = diag;
    for (int i = j + 1; i < n; ++i) {
      double v = g.at(i, j);
      for (int k = 0; k < j; ++k) v -= g.at(i, k) * g.at(j, k);
      g.at(i, j) = v / diag;
    }
  }
  for (int c = 0; c < rhs.cols; ++c) {
    for (int i = 0; i < n; ++i) {
      double v = rhs.at(i, c);
      for (int k = 0; k < i; ++k) v -= g.at(i, k) * rhs.at(k, c);
      rhs.at(i, c) = v / g.at(i, i);
    }
    for (int i = n - 1; i >= 0; --i) {
      double v = rhs.at(i, c);
      for (int k = i + 1; k < n; ++k) v -= g.at(k, i) * rhs.at(k, c);
      rhs.at(i, c) = v / g.at(i, i);
    }
  }
}

uint8_t to_byte(double v) {
  long b = std::lround(v);
  return static_cast<uint8_t>(std::clamp(b, 0l, 255l));
}

std::vector<uint8_t> pgm_bytes(const std::vector<double>& pixels, int height, int width) {
  std::string header = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  std::vector<uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + pixels.size());
  for (double v : pixels) out.push_back(to_byte(v));
  return out;
}

}  // namespace

Mat fit_linear_surrogate(const ProbeFn& predict, std::span<const double> x, int n_outputs,
                         int n_perturb, double radius, uint64_t seed) {
  if (!predict) fail(ErrorCode::invalid_argument, "surrogate needs a prediction function");
  if (n_outputs < 1) fail(ErrorCode::invalid_argument, "surrogate needs at least one output");
  if (n_perturb < 2) fail(ErrorCode::invalid_argument, "surrogate needs at least two perturbations");
  if (radius <= 0.0) fail(ErrorCode::invalid_argument, "surrogate radius must be positive");

  int d = static_cast<int>(x.size());
  // Design on offsets with an intercept column keeps the normal matrix well
  // conditioned and leaves the slopes unchanged.
  Mat gram(d + 1, d + 1);
  Mat rhs(d + 1, n_outputs);
  std::vector<double> z(d + 1);
  std::vector<double> probe(d);
  Rng rng(seed);
  for (int s = 0; s < n_perturb; ++s) {
    z[0] = 1.0;
    for (int f = 0; f < d; ++f) {
      z[f + 1] = radius * rng.normal();
      probe[f] = x[f] + z[f + 1];
    }
    std::vector<double> y = predict(probe);
    if (static_cast<int>(y.size()) != n_outputs)
      fail(ErrorCode::shape_mismatch, "prediction function output width mismatch");
    for (double v : y) {
      if (!std::isfinite(v)) fail(ErrorCode::invalid_argument, "surrogate probe returned non-finite value");
    }
    for (int i = 0; i <= d; ++i) {
      for (int j = i; j <= d; ++j) gram.at(i, j) += z[i] * z[j];
      for (int k = 0; k < n_outputs; ++k) rhs.at(i, k) += z[i] * y[k];
    }
  }
  for (int i = 0; i <= d; ++i) {
    for (int j = 0; j < i; ++j) gram.at(i, j) = gram.at(j, i);
  }
  double ridge = 1e-8 * n_perturb;
  for (int i = 1; i <= d; ++i) gram.at(i, i) += ridge;  // intercept unpenalized

  cholesky_solve(gram, rhs);
  Mat coefs(d, n_outputs);
  for (int f = 0; f < d; ++f) {
    for (int k = 0; k < n_outputs; ++k) coefs.at(f, k) = rhs.at(f + 1, k);
  }
  return coefs;
}

ImportanceMatrix lle_importance(const ParamVector& params, std::span<const double> x,
                                const LleConfig& config) {
  ImportanceMatrix out;
  out.mode = config.mode;
  if (config.mode == LleMode::gradient) {
    out.entries = input_jacobian(params, x);
  } else {
    params.validate();
    if (static_cast<int>(x.size()) != params.layout.input_dim())
      fail(ErrorCode::shape_mismatch, "input length does not match model input dimension");
    auto probe = [&params](std::span<const double> p) { return forward(params, p); };
    out.entries = fit_linear_surrogate(probe, x, params.layout.class_count(), config.n_perturb,
                                       config.radius, config.seed);
  }
  return out;
}

double cosine_similarity(const ImportanceMatrix& a, const ImportanceMatrix& b) {
  if (!a.entries.same_shape(b.entries))
    fail(ErrorCode::shape_mismatch, "importance matrices have different shapes");
  double na = l2_norm(a.entries.data);
  double nb = l2_norm(b.entries.data);
  if (na < kZeroNorm || nb < kZeroNorm) return 0.0;
  double cos = dot(a.entries.data, b.entries.data) / (na * nb);
  return std::clamp(cos, -1.0, 1.0);
}

std::vector<int> bank_instances(int validation_size, int cap) {
  if (validation_size < 1) fail(ErrorCode::empty_input, "validation set is empty");
  if (cap < 1) fail(ErrorCode::invalid_argument, "instance cap must be positive");
  int count = std::min(cap, validation_size);
  std::vector<int> indices(count);
  for (int k = 0; k < count; ++k) {
    indices[k] = static_cast<int>(static_cast<int64_t>(k) * validation_size / count);
  }
  return indices;
}

std::vector<std::vector<ImportanceMatrix>> explanation_bank(
    const std::vector<ParamVector>& models, const Dataset& validation, const LleConfig& config) {
  if (models.empty()) fail(ErrorCode::empty_input, "explanation bank needs at least one model");
  validation.validate();
  auto indices = bank_instances(validation.size(), config.max_instances);

  std::vector<std::vector<ImportanceMatrix>> bank(models.size());
  for (size_t i = 0; i < models.size(); ++i) {
    bank[i].reserve(indices.size());
    for (size_t v = 0; v < indices.size(); ++v) {
      LleConfig per = config;
      per.seed = mix_seed(config.seed, i, v);
      try {
        bank[i].push_back(lle_importance(models[i], validation.features.row(indices[v]), per));
      } catch (const Error& e) {
        fail(e.code(), "client " + std::to_string(i) + ": " + e.what());
      }
    }
  }
  return bank;
}

std::vector<uint8_t> render_importance(const ImportanceMatrix& importance, int class_index,
                                       const ImageShape& shape) {
  if (!shape.set()) fail(ErrorCode::invalid_argument, "rendering needs an image shape");
  if (importance.entries.rows != shape.dims())
    fail(ErrorCode::shape_mismatch, "importance rows do not match image shape");
  if (class_index < 0 || class_index >= importance.entries.cols)
    fail(ErrorCode::invalid_argument, "class index outside importance columns");

  int pixels = shape.height * shape.width;
  std::vector<double> intensity(pixels, 0.0);
  for (int p = 0; p < pixels; ++p) {
    double acc = 0.0;
    for (int ch = 0; ch < shape.channels; ++ch) {
      acc += std::abs(importance.entries.at(p * shape.channels + ch, class_index));
    }
    intensity[p] = acc / shape.channels;
  }
  auto [lo_it, hi_it] = std::minmax_element(intensity.begin(), intensity.end());
  double lo = *lo_it;
  double hi = *hi_it;
  if (hi - lo < kZeroNorm) {
    std::fill(intensity.begin(), intensity.end(), 0.0);  // constant map renders black
  } else {
    for (double& v : intensity) v = (v - lo) / (hi - lo) * 255.0;
  }
  return pgm_bytes(intensity, shape.height, shape.width);
}

std::vector<uint8_t> render_input(std::span<const double> features, const ImageShape& shape) {
  if (!shape.set()) fail(ErrorCode::invalid_argument, "rendering needs an image shape");
  if (static_cast<int>(features.size()) != shape.dims())
    fail(ErrorCode::shape_mismatch, "feature length does not match image shape");
  int pixels = shape.height * shape.width;
  std::vector<double> intensity(pixels, 0.0);
  for (int p = 0; p < pixels; ++p) {
    double acc = 0.0;
    for (int ch = 0; ch < shape.channels; ++ch) acc += features[p * shape.channels + ch];
    intensity[p] = std::clamp(acc / shape.channels, 0.0, 1.0) * 255.0;
  }
  return pgm_bytes(intensity, shape.height, shape.width);
}

}  // namespace rabdef
