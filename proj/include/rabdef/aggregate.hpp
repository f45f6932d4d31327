#pragma once

#include <cstdint>
#include <vector>

#include "rabdef/data.hpp"
#include "rabdef/model.hpp"
#include "rabdef/xai.hpp"

namespace rabdef {

// Client scores plus the derived exponential-gap statistics. scores[i] and
// x_values[i] belong to client index i; ranking lists client indices in
// descending score order with ties broken by ascending index.
struct OrderingResult {
  std::vector<double> scores;
  std::vector<double> x_values;  // max(scores) - scores[i]
  double lambda = 0.0;           // 1 / mean(x_values); 0 when degenerate
  bool degenerate = false;       // mean(x_values) below 1e-12
  std::vector<int> ranking;
};

// Step-wise quantifier breakpoints on [0, 1]. a is always 0; b and c are the
// rank proportions where the top segment ends and the filtered tail begins.
struct QuantifierParams {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double y_b = 1.0;
};

// Aggregation weights by rank position (weights[p] goes to ranking[p]).
struct WeightVector {
  std::vector<double> weights;
};

// G_prev + (server_lr / n) * sum(deltas).
ParamVector fedavg(const ParamVector& global_prev, const std::vector<ParamVector>& deltas,
                   double server_lr);

// Per-coordinate median; even counts average the two middle values.
ParamVector coordinate_median(const std::vector<ParamVector>& updates);

// Per coordinate, drops floor(trim * n) smallest and largest values and
// averages the rest.
ParamVector trimmed_mean(const std::vector<ParamVector>& updates, double trim);

// Sum of squared distances to the n - n_byz - 2 nearest other updates.
std::vector<double> multikrum_scores(const std::vector<ParamVector>& updates, int n_byz);

// Indices of the n_select lowest-scoring updates, ascending.
std::vector<int> multikrum_select(const std::vector<ParamVector>& updates, int n_select,
                                  int n_byz);

ParamVector multikrum(const std::vector<ParamVector>& updates, int n_select, int n_byz);

// Iteratively picks the best-scoring update n - 2*n_byz times.
std::vector<int> bulyan_select(const std::vector<ParamVector>& updates, int n_byz);

// Trimmed per-coordinate aggregation over the bulyan_select set.
ParamVector bulyan(const std::vector<ParamVector>& updates, int n_byz, double trim);

// Deltas rescaled to at most max_norm before averaging: delta / max(1, |delta|/M).
ParamVector norm_clip(const ParamVector& global_prev, const std::vector<ParamVector>& deltas,
                      double max_norm, double server_lr);

// norm_clip plus seeded Gaussian noise with std sigma * max_norm / n per coordinate.
ParamVector wdp(const ParamVector& global_prev, const std::vector<ParamVector>& deltas,
                double max_norm, double sigma, double server_lr, uint64_t seed);

// Robust learning rate: coordinates whose sign agreement |sum(sign(delta))|
// falls below theta get a negated learning rate.
ParamVector rlr(const ParamVector& global_prev, const std::vector<ParamVector>& deltas, int theta,
                double server_lr);

// Shared ordering tail: x values, lambda, degeneracy flag, ranking.
OrderingResult ordering_from_scores(std::vector<double> scores);

// Explanation agreement score per client: sum over sampled validation
// instances of the mean cosine similarity against every other client.
OrderingResult lle_ordering(const std::vector<ParamVector>& updates, const Dataset& validation,
                            const LleConfig& config);

// Validation accuracy per client model.
OrderingResult accuracy_ordering(const std::vector<ParamVector>& updates,
                                 const Dataset& validation);

// Fits the exponential-gap quantifier: b counts clients with X below
// ln(10/9)/lambda, the outliers are those at or beyond (ln4 + 1.5*ln3)/lambda,
// c = 1 - outlier share, y_b = 2|Top| / (2|Top| + |Rest|). Degenerate
// orderings raise an error so callers can fall back to uniform weights.
QuantifierParams quantifier_params(const OrderingResult& ordering, int n);

// The step-wise quantifier Q(x) on [0, 1].
double quantifier_value(const QuantifierParams& params, double x);

// w_p = Q(p/n) - Q((p-1)/n), computed segment-wise so top weights are exactly
// twice rest weights and filtered positions are exactly zero.
WeightVector quantifier_weights(const QuantifierParams& params, int n);

struct QuantifierAggregate {
  ParamVector value;
  WeightVector weights;
  OrderingResult ordering;
  QuantifierParams params;
  bool fallback = false;  // degenerate ordering, uniform weights used
};

// Explanation-ordered weighted model average. server_lr is accepted for
// interface symmetry with the delta-based rules but the operator itself is a
// plain weighted sum of the submitted models.
QuantifierAggregate rab2def_aggregate(const ParamVector& global_prev,
                                      const std::vector<ParamVector>& updates,
                                      const Dataset& validation, const LleConfig& config,
                                      double server_lr);

// Accuracy-ordered variant of the same pipeline.
QuantifierAggregate ddaba_aggregate(const ParamVector& global_prev,
                                    const std::vector<ParamVector>& updates,
                                    const Dataset& validation, double server_lr);

}  // namespace rabdef
