#include "rabdef/attack.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "rabdef/error.hpp"
#include "rabdef/rng.hpp"

namespace rabdef {

namespace {

// Fixed salt for the poisoned-sample selection; mixed with the dataset size
// so the same dataset always selects the same rows.
constexpr uint64_t kInjectSalt = 0xbdf0f2a6u;

void check_pixel(int r, int c, const ImageShape& shape) {
  if (r < 0 || r >= shape.height || c < 0 || c >= shape.width)
    fail(ErrorCode::invalid_argument, "pattern pixel (" + std::to_string(r) + ", " +
                                          std::to_string(c) + ") outside image bounds");
}

}  // namespace

std::vector<std::pair<int, int>> pattern_footprint(const BackdoorPattern& pattern,
                                                   const ImageShape& shape) {
  if (!shape.set()) fail(ErrorCode::invalid_argument, "pattern needs an image-shaped dataset");
  if (pattern.size < 1) fail(ErrorCode::invalid_argument, "pattern size must be positive");
  if (pattern.intensity < 0.0 || pattern.intensity > 1.0 || !std::isfinite(pattern.intensity))
    fail(ErrorCode::invalid_argument, "pattern intensity must lie in [0, 1]");

  std::vector<std::pair<int, int>> pixels;
  if (pattern.kind == BackdoorPattern::Kind::cross) {
    if (pattern.size % 2 == 0)
      fail(ErrorCode::invalid_argument, "cross length must be odd");
    int half = (pattern.size - 1) / 2;
    int row = pattern.row >= 0 ? pattern.row : shape.height - 2;
    int col = pattern.col >= 0 ? pattern.col : shape.width - 2;
    pixels.push_back({row, col});
    for (int i = 1; i <= half; ++i) {
      pixels.push_back({row - i, col});
      pixels.push_back({row + i, col});
      pixels.push_back({row, col - i});
      pixels.push_back({row, col + i});
    }
  } else {
    int row = pattern.row >= 0 ? pattern.row : shape.height - 1 - pattern.size;
    int col = pattern.col >= 0 ? pattern.col : shape.width - 1 - pattern.size;
    for (int r = row; r < row + pattern.size; ++r) {
      for (int c = col; c < col + pattern.size; ++c) pixels.push_back({r, c});
    }
  }
  for (auto [r, c] : pixels) check_pixel(r, c, shape);
  return pixels;
}

void apply_pattern(const BackdoorPattern& pattern, const ImageShape& shape,
                   std::span<double> features) {
  auto pixels = pattern_footprint(pattern, shape);
  for (auto [r, c] : pixels) {
    size_t base = (static_cast<size_t>(r) * shape.width + c) * shape.channels;
    for (int ch = 0; ch < shape.channels; ++ch) features[base + ch] = pattern.intensity;
  }
}

Dataset flip_labels(const Dataset& data, uint64_t seed) {
  data.validate();
  if (data.classes < 2)
    fail(ErrorCode::invalid_argument, "label flipping needs at least two classes");
  Dataset out = data;
  Rng rng(seed);
  for (int& y : out.labels) {
    // Uniform over the other classes; with two classes this is the complement.
    int draw = static_cast<int>(rng.below(static_cast<size_t>(data.classes - 1)));
    y = draw >= y ? draw + 1 : draw;
  }
  return out;
}

ParamVector random_weights_update(const ModelLayout& layout, double scale, uint64_t seed) {
  layout.validate();
  if (scale <= 0.0 || !std::isfinite(scale))
    fail(ErrorCode::invalid_argument, "random weights scale must be positive");
  ParamVector p = zero_params(layout);
  Rng rng(seed);
  for (double& v : p.values) v = rng.uniform(-scale, scale);
  return p;
}

Dataset inject_backdoor(const Dataset& data, const BackdoorPattern& pattern, double fraction) {
  data.validate();
  if (fraction <= 0.0 || fraction > 1.0)
    fail(ErrorCode::invalid_argument, "poison fraction must lie in (0, 1]");
  if (pattern.target_label < 0 || pattern.target_label >= data.classes)
    fail(ErrorCode::invalid_argument, "backdoor target label outside class range");
  if (data.size() == 0) fail(ErrorCode::empty_input, "cannot poison an empty dataset");

  int n = data.size();
  int count = std::clamp(static_cast<int>(std::lround(fraction * n)), 1, n);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(kInjectSalt, static_cast<uint64_t>(n)));
  rng.shuffle(order);

  Dataset out = data;
  for (int i = 0; i < count; ++i) {
    int row = order[i];
    apply_pattern(pattern, out.image_shape, out.features.row(row));
    out.labels[row] = pattern.target_label;
  }
  return out;
}

ParamVector boost_update(const ParamVector& adv_params, const ParamVector& global_prev,
                         int n_clients, double server_lr) {
  adv_params.validate();
  global_prev.validate();
  if (!(adv_params.layout == global_prev.layout))
    fail(ErrorCode::shape_mismatch, "boosted update layout does not match global model");
  if (n_clients < 1) fail(ErrorCode::invalid_argument, "client count must be positive");
  if (server_lr <= 0.0) fail(ErrorCode::invalid_argument, "server learning rate must be positive");

  double beta = static_cast<double>(n_clients) / server_lr;
  ParamVector out = zero_params(adv_params.layout);
  for (size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] = beta * (adv_params.values[i] - global_prev.values[i]);
  }
  return out;
}

}  // namespace rabdef
