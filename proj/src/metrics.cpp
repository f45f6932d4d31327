#include "rabdef/metrics.hpp"

#include <vector>

#include "rabdef/error.hpp"

namespace rabdef {

namespace {

int argmax_class(const std::vector<double>& probs) {
  int best = 0;
  for (int k = 1; k < static_cast<int>(probs.size()); ++k) {
    if (probs[k] > probs[best]) best = k;  // strict, so ties keep the lowest index
  }
  return best;
}

}  // namespace

double evaluate(const ParamVector& params, const Dataset& data) {
  params.validate();
  data.validate();
  if (data.size() == 0) fail(ErrorCode::empty_input, "cannot evaluate on an empty dataset");
  if (data.features.cols != params.layout.input_dim())
    fail(ErrorCode::shape_mismatch, "dataset width does not match model input");
  if (data.classes > params.layout.class_count())
    fail(ErrorCode::shape_mismatch, "dataset has more classes than the model");

  int correct = 0;
  for (int s = 0; s < data.size(); ++s) {
    if (argmax_class(forward(params, data.features.row(s))) == data.labels[s]) ++correct;
  }
  return static_cast<double>(correct) / data.size();
}

double evaluate_backdoor(const ParamVector& params, const Dataset& data,
                         const BackdoorPattern& pattern) {
  params.validate();
  data.validate();
  if (pattern.target_label < 0 || pattern.target_label >= data.classes)
    fail(ErrorCode::invalid_argument, "backdoor target label outside class range");

  std::vector<double> row(data.features.cols);
  int total = 0;
  int hits = 0;
  for (int s = 0; s < data.size(); ++s) {
    if (data.labels[s] == pattern.target_label) continue;
    auto src = data.features.row(s);
    std::copy(src.begin(), src.end(), row.begin());
    apply_pattern(pattern, data.image_shape, row);
    ++total;
    if (argmax_class(forward(params, row)) == pattern.target_label) ++hits;
  }
  if (total == 0)
    fail(ErrorCode::empty_input, "every sample already carries the backdoor target label");
  return static_cast<double>(hits) / total;
}

}  // namespace rabdef
