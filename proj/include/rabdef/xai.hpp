#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "rabdef/data.hpp"
#include "rabdef/matrix.hpp"
#include "rabdef/model.hpp"

namespace rabdef {

enum class LleMode { gradient, surrogate };

struct LleConfig {
  LleMode mode = LleMode::gradient;
  int n_perturb = 300;     // surrogate sample count
  double radius = 0.1;     // surrogate perturbation scale
  int max_instances = 32;  // per-round validation instance cap for the bank
  uint64_t seed = 0;       // surrogate perturbation seed
};

// Local linear explanation of one model at one instance: entry (f, k) is the
// importance of feature f for class k.
struct ImportanceMatrix {
  Mat entries;  // features x classes
  LleMode mode = LleMode::gradient;
};

using ProbeFn = std::function<std::vector<double>(std::span<const double>)>;

// Ridge least-squares fit of a local linear model around x: perturbs x with
// Gaussian offsets of the given radius, probes the prediction function, and
// returns the slope matrix (features x outputs). The ridge term keeps
// underdetermined fits solvable.
Mat fit_linear_surrogate(const ProbeFn& predict, std::span<const double> x, int n_outputs,
                         int n_perturb, double radius, uint64_t seed);

ImportanceMatrix lle_importance(const ParamVector& params, std::span<const double> x,
                                const LleConfig& config);

// Cosine similarity of the flattened matrices in [-1, 1]; zero when either
// matrix has (near-)zero norm, which also covers saturated-model explanations.
double cosine_similarity(const ImportanceMatrix& a, const ImportanceMatrix& b);

// Deterministic evenly spaced subsample of validation instance indices.
std::vector<int> bank_instances(int validation_size, int cap);

// Explanations for every (client model, sampled validation instance) pair;
// banks[i][v] explains models[i] at sampled instance v. Pure per entry, so
// the result is independent of evaluation order.
std::vector<std::vector<ImportanceMatrix>> explanation_bank(
    const std::vector<ParamVector>& models, const Dataset& validation, const LleConfig& config);

// Binary PGM (P5, maxval 255) of per-pixel absolute importance for one class,
// channels averaged and min-max scaled; constant maps render black.
std::vector<uint8_t> render_importance(const ImportanceMatrix& importance, int class_index,
                                       const ImageShape& shape);

// Binary PGM of an input image row (channels averaged, values clamped to [0, 1]).
std::vector<uint8_t> render_input(std::span<const double> features, const ImageShape& shape);

}  // namespace rabdef
