#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "rabdef/data.hpp"
#include "rabdef/model.hpp"

namespace rabdef {

// Pixel pattern stamped onto images for the backdoor task. The anchor is the
// cross center for kind cross and the top-left corner for kind square; a
// negative anchor coordinate resolves to one pixel in from the bottom-right
// corner of the image.
struct BackdoorPattern {
  enum class Kind { cross, square };

  Kind kind = Kind::cross;
  int size = 3;            // cross arm span (odd) or square side
  int row = -1;
  int col = -1;
  double intensity = 1.0;  // value written to every pattern pixel, all channels
  int target_label = 0;
};

// The exact pixel set the pattern touches, bounds-checked against the shape.
std::vector<std::pair<int, int>> pattern_footprint(const BackdoorPattern& pattern,
                                                   const ImageShape& shape);

// Writes the pattern into one feature row (all channels of each footprint pixel).
void apply_pattern(const BackdoorPattern& pattern, const ImageShape& shape,
                   std::span<double> features);

// Every label becomes a uniformly random different label; features untouched.
Dataset flip_labels(const Dataset& data, uint64_t seed);

// A full parameter vector with i.i.d. uniform [-scale, scale] entries.
ParamVector random_weights_update(const ModelLayout& layout, double scale, uint64_t seed);

// Stamps the pattern and target label onto a fixed fraction of samples. The
// selection is deterministic in the dataset size, so the operation is
// idempotent: poisoning twice equals poisoning once.
Dataset inject_backdoor(const Dataset& data, const BackdoorPattern& pattern, double fraction);

// Model replacement boost: beta * (adv - global_prev) with beta = n / server_lr.
ParamVector boost_update(const ParamVector& adv_params, const ParamVector& global_prev,
                         int n_clients, double server_lr);

}  // namespace rabdef
