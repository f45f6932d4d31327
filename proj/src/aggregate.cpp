#include "rabdef/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "rabdef/error.hpp"
#include "rabdef/metrics.hpp"
#include "rabdef/rng.hpp"

namespace rabdef {

namespace {

constexpr double kDegenerateMean = 1e-12;

// Exponential-distribution cut points at rate 1: membership in the top block
// and the Q3 + 1.5*IQR outlier fence.
const double kTopThreshold = std::log(10.0 / 9.0);
const double kOutlierThreshold = std::log(4.0) + 1.5 * std::log(3.0);

void check_updates(const std::vector<ParamVector>& updates) {
  if (updates.empty()) fail(ErrorCode::empty_input, "no client updates to aggregate");
  updates.front().validate();
  for (size_t i = 1; i < updates.size(); ++i) {
    updates[i].validate();
    if (!(updates[i].layout == updates.front().layout))
      fail(ErrorCode::shape_mismatch, "client updates have mismatched layouts");
  }
}

std::vector<double> krum_scores_of(const std::vector<const ParamVector*>& updates, int n_byz) {
  int n = static_cast<int>(updates.size());
  int neighbors = n - n_byz - 2;
  if (n_byz < 0) fail(ErrorCode::invalid_argument, "byzantine count must be non-negative");
  if (neighbors < 1)
    fail(ErrorCode::invalid_argument,
         "krum needs n - n_byz - 2 >= 1 (n = " + std::to_string(n) + ", n_byz = " +
             std::to_string(n_byz) + ")");
  std::vector<double> scores(n, 0.0);
  std::vector<double> row(n - 1);
  for (int i = 0; i < n; ++i) {
    int m = 0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const auto& a = updates[i]->values;
      const auto& b = updates[j]->values;
      double s = 0.0;
      for (size_t k = 0; k < a.size(); ++k) {
        double d = a[k] - b[k];
        s += d * d;
      }
      row[m++] = s;
    }
    std::nth_element(row.begin(), row.begin() + (neighbors - 1), row.end());
    double total = 0.0;
    for (int k = 0; k < neighbors; ++k) total += row[k];
    scores[i] = total;
  }
  return scores;
}

ParamVector mean_of(const std::vector<ParamVector>& updates, const std::vector<int>& indices) {
  ParamVector out = zero_params(updates.front().layout);
  for (int idx : indices) axpy(1.0, updates[idx].values, out.values);
  double inv = 1.0 / static_cast<double>(indices.size());
  for (double& v : out.values) v *= inv;
  return out;
}

ParamVector combine_deltas(const ParamVector& global_prev, const std::vector<ParamVector>& deltas,
                           double server_lr, const std::vector<double>* coordinate_lr) {
  check_updates(deltas);
  global_prev.validate();
  if (!(deltas.front().layout == global_prev.layout))
    fail(ErrorCode::shape_mismatch, "delta layout does not match global model");
  if (server_lr <= 0.0) fail(ErrorCode::invalid_argument, "server learning rate must be positive");

  ParamVector out = global_prev;
  std::vector<double> sum(out.values.size(), 0.0);
  for (const auto& d : deltas) axpy(1.0, d.values, sum);
  double scale = server_lr / static_cast<double>(deltas.size());
  for (size_t k = 0; k < sum.size(); ++k) {
    double lr = coordinate_lr ? (*coordinate_lr)[k] * scale : scale;
    out.values[k] += lr * sum[k];
  }
  return out;
}

// Weighted model average over ranked positions, skipping exact-zero weights
// so filtered clients cannot perturb the sum even at the bit level.
ParamVector weighted_by_rank(const std::vector<ParamVector>& updates,
                             const std::vector<int>& ranking, const std::vector<double>& weights) {
  ParamVector out = zero_params(updates.front().layout);
  for (size_t p = 0; p < ranking.size(); ++p) {
    if (weights[p] == 0.0) continue;
    axpy(weights[p], updates[ranking[p]].values, out.values);
  }
  return out;
}

QuantifierAggregate quantifier_pipeline(const std::vector<ParamVector>& updates,
                                        OrderingResult ordering) {
  int n = static_cast<int>(updates.size());
  QuantifierAggregate out;
  if (ordering.degenerate) {
    out.fallback = true;
    out.weights.weights.assign(n, 1.0 / n);
    std::vector<int> all(n);
    std::iota(all.begin(), all.end(), 0);
    out.value = mean_of(updates, all);
  } else {
    out.params = quantifier_params(ordering, n);
    out.weights = quantifier_weights(out.params, n);
    out.value = weighted_by_rank(updates, ordering.ranking, out.weights.weights);
  }
  out.ordering = std::move(ordering);
  return out;
}

}  // namespace

ParamVector fedavg(const ParamVector& global_prev, const std::vector<ParamVector>& deltas,
                   double server_lr) {
  return combine_deltas(global_prev, deltas, server_lr, nullptr);
}

ParamVector coordinate_median(const std::vector<ParamVector>& updates) {
  check_updates(updates);
  size_t n = updates.size();
  ParamVector out = zero_params(updates.front().layout);
  std::vector<double> column(n);
  for (size_t k = 0; k < out.values.size(); ++k) {
    for (size_t i = 0; i < n; ++i) column[i] = updates[i].values[k];
    std::sort(column.begin(), column.end());
    out.values[k] = n % 2 == 1 ? column[n / 2] : (column[n / 2 - 1] + column[n / 2]) / 2.0;
  }
  return out;
}

ParamVector trimmed_mean(const std::vector<ParamVector>& updates, double trim) {
  check_updates(updates);
  if (trim < 0.0 || trim >= 0.5)
    fail(ErrorCode::invalid_argument, "trim fraction must lie in [0, 0.5)");
  int n = static_cast<int>(updates.size());
  int cut = static_cast<int>(std::floor(trim * n));
  int kept = n - 2 * cut;
  if (kept < 1) fail(ErrorCode::invalid_argument, "trimming removes every value");

  ParamVector out = zero_params(updates.front().layout);
  std::vector<double> column(n);
  for (size_t k = 0; k < out.values.size(); ++k) {
    for (int i = 0; i < n; ++i) column[i] = updates[i].values[k];
    std::sort(column.begin(), column.end());
    double total = 0.0;
    for (int i = cut; i < n - cut; ++i) total += column[i];
    out.values[k] = total / kept;
  }
  return out;
}

std::vector<double> multikrum_scores(const std::vector<ParamVector>& updates, int n_byz) {
  check_updates(updates);
  std::vector<const ParamVector*> ptrs;
  ptrs.reserve(updates.size());
  for (const auto& u : updates) ptrs.push_back(&u);
  return krum_scores_of(ptrs, n_byz);
}

std::vector<int> multikrum_select(const std::vector<ParamVector>& updates, int n_select,
                                  int n_byz) {
  auto scores = multikrum_scores(updates, n_byz);
  int n = static_cast<int>(updates.size());
  if (n_select < 1 || n_select > n)
    fail(ErrorCode::invalid_argument, "selection count outside [1, n]");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&scores](int a, int b) {
    return scores[a] != scores[b] ? scores[a] < scores[b] : a < b;
  });
  order.resize(n_select);
  std::sort(order.begin(), order.end());
  return order;
}

ParamVector multikrum(const std::vector<ParamVector>& updates, int n_select, int n_byz) {
  return mean_of(updates, multikrum_select(updates, n_select, n_byz));
}

std::vector<int> bulyan_select(const std::vector<ParamVector>& updates, int n_byz) {
  check_updates(updates);
  int n = static_cast<int>(updates.size());
  int select = n - 2 * n_byz;
  if (select < 1)
    fail(ErrorCode::invalid_argument, "bulyan needs n - 2*n_byz >= 1");
  if ((n - select + 1) - n_byz - 2 < 1)
    fail(ErrorCode::invalid_argument, "bulyan selection exhausts the krum neighbor count");

  std::vector<int> remaining(n);
  std::iota(remaining.begin(), remaining.end(), 0);
  std::vector<int> selected;
  selected.reserve(select);
  while (static_cast<int>(selected.size()) < select) {
    std::vector<const ParamVector*> ptrs;
    ptrs.reserve(remaining.size());
    for (int idx : remaining) ptrs.push_back(&updates[idx]);
    auto scores = krum_scores_of(ptrs, n_byz);
    int best = 0;
    for (int i = 1; i < static_cast<int>(scores.size()); ++i) {
      if (scores[i] < scores[best]) best = i;
    }
    selected.push_back(remaining[best]);
    remaining.erase(remaining.begin() + best);
  }
  std::sort(selected.begin(), selected.end());
  return selected;
}

ParamVector bulyan(const std::vector<ParamVector>& updates, int n_byz, double trim) {
  auto selected = bulyan_select(updates, n_byz);
  std::vector<ParamVector> subset;
  subset.reserve(selected.size());
  for (int idx : selected) subset.push_back(updates[idx]);
  return trimmed_mean(subset, trim);
}

ParamVector norm_clip(const ParamVector& global_prev, const std::vector<ParamVector>& deltas,
                      double max_norm, double server_lr) {
  check_updates(deltas);
  if (max_norm <= 0.0) fail(ErrorCode::invalid_argument, "clip norm must be positive");
  std::vector<ParamVector> clipped = deltas;
  for (auto& d : clipped) {
    double divisor = std::max(1.0, l2_norm(d.values) / max_norm);
    if (divisor > 1.0) {
      double inv = 1.0 / divisor;
      for (double& v : d.values) v *= inv;
    }
  }
  return combine_deltas(global_prev, clipped, server_lr, nullptr);
}

ParamVector wdp(const ParamVector& global_prev, const std::vector<ParamVector>& deltas,
                double max_norm, double sigma, double server_lr, uint64_t seed) {
  if (sigma < 0.0) fail(ErrorCode::invalid_argument, "noise level must be non-negative");
  ParamVector out = norm_clip(global_prev, deltas, max_norm, server_lr);
  double stddev = sigma * max_norm / static_cast<double>(deltas.size());
  Rng rng(seed);
  for (double& v : out.values) v += stddev * rng.normal();
  return out;
}

ParamVector rlr(const ParamVector& global_prev, const std::vector<ParamVector>& deltas, int theta,
                double server_lr) {
  check_updates(deltas);
  if (theta < 0) fail(ErrorCode::invalid_argument, "sign threshold must be non-negative");
  std::vector<double> coordinate_lr(global_prev.values.size(), 1.0);
  for (size_t k = 0; k < coordinate_lr.size(); ++k) {
    int agreement = 0;
    for (const auto& d : deltas) {
      double v = d.values[k];
      agreement += v > 0.0 ? 1 : (v < 0.0 ? -1 : 0);
    }
    if (std::abs(agreement) < theta) coordinate_lr[k] = -1.0;
  }
  return combine_deltas(global_prev, deltas, server_lr, &coordinate_lr);
}

OrderingResult ordering_from_scores(std::vector<double> scores) {
  if (scores.empty()) fail(ErrorCode::empty_input, "ordering needs at least one score");
  for (double s : scores) {
    if (!std::isfinite(s)) fail(ErrorCode::invalid_argument, "ordering scores must be finite");
  }
  OrderingResult out;
  int n = static_cast<int>(scores.size());
  double top = *std::max_element(scores.begin(), scores.end());
  out.x_values.resize(n);
  double mean = 0.0;
  for (int i = 0; i < n; ++i) {
    out.x_values[i] = top - scores[i];
    mean += out.x_values[i];
  }
  mean /= n;
  out.degenerate = mean < kDegenerateMean;
  out.lambda = out.degenerate ? 0.0 : 1.0 / mean;
  out.ranking.resize(n);
  std::iota(out.ranking.begin(), out.ranking.end(), 0);
  std::sort(out.ranking.begin(), out.ranking.end(), [&scores](int a, int b) {
    return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
  });
  out.scores = std::move(scores);
  return out;
}

OrderingResult lle_ordering(const std::vector<ParamVector>& updates, const Dataset& validation,
                            const LleConfig& config) {
  check_updates(updates);
  if (updates.size() < 2) fail(ErrorCode::invalid_argument, "explanation ordering needs at least two clients");
  auto bank = explanation_bank(updates, validation, config);
  size_t n = updates.size();
  size_t instances = bank.front().size();
  std::vector<double> scores(n, 0.0);
  for (size_t v = 0; v < instances; ++v) {
    for (size_t i = 0; i < n; ++i) {
      double total = 0.0;
      for (size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        total += cosine_similarity(bank[i][v], bank[j][v]);
      }
      scores[i] += total / static_cast<double>(n - 1);
    }
  }
  return ordering_from_scores(std::move(scores));
}

OrderingResult accuracy_ordering(const std::vector<ParamVector>& updates,
                                 const Dataset& validation) {
  check_updates(updates);
  std::vector<double> scores(updates.size());
  for (size_t i = 0; i < updates.size(); ++i) scores[i] = evaluate(updates[i], validation);
  return ordering_from_scores(std::move(scores));
}

QuantifierParams quantifier_params(const OrderingResult& ordering, int n) {
  if (n < 1 || n != static_cast<int>(ordering.x_values.size()))
    fail(ErrorCode::invalid_argument, "ordering size does not match client count");
  if (ordering.degenerate)
    fail(ErrorCode::degenerate_ordering, "all ordering scores equal; quantifier undefined");

  double top_cut = kTopThreshold / ordering.lambda;
  double outlier_cut = kOutlierThreshold / ordering.lambda;
  int top = 0;
  int outliers = 0;
  for (double x : ordering.x_values) {
    if (x <= top_cut) ++top;
    if (x >= outlier_cut) ++outliers;
  }
  if (top == 0) top = 1;
  int kept = n - outliers;
  if (kept < top) kept = top;

  QuantifierParams q;
  q.a = 0.0;
  q.b = static_cast<double>(top) / n;
  q.c = static_cast<double>(kept) / n;
  int rest = kept - top;
  q.y_b = 2.0 * top / static_cast<double>(2 * top + rest);
  return q;
}

double quantifier_value(const QuantifierParams& q, double x) {
  if (x < 0.0 || x > 1.0) fail(ErrorCode::invalid_argument, "quantifier input outside [0, 1]");
  if (x <= q.a) return 0.0;
  if (x <= q.b) return (x - q.a) / (q.b - q.a) * q.y_b;
  if (x <= q.c) return q.y_b + (x - q.b) / (q.c - q.b) * (1.0 - q.y_b);
  return 1.0;
}

WeightVector quantifier_weights(const QuantifierParams& q, int n) {
  if (n < 1) fail(ErrorCode::invalid_argument, "weight count must be positive");
  int top = static_cast<int>(std::llround(q.b * n));
  int kept = static_cast<int>(std::llround(q.c * n));
  if (top < 1 || kept < top || kept > n)
    fail(ErrorCode::invalid_argument, "quantifier breakpoints inconsistent with n");
  int rest = kept - top;
  // Telescoping the piecewise-linear quantifier gives y_b/|Top| per top
  // position and (1-y_b)/|Rest| per rest position, which reduce to 2/(2T+R)
  // and 1/(2T+R); using the integer counts keeps the 2:1 ratio exact.
  double denom = static_cast<double>(2 * top + rest);
  WeightVector w;
  w.weights.assign(n, 0.0);
  for (int p = 0; p < top; ++p) w.weights[p] = 2.0 / denom;
  for (int p = top; p < kept; ++p) w.weights[p] = 1.0 / denom;
  return w;
}

QuantifierAggregate rab2def_aggregate(const ParamVector& global_prev,
                                      const std::vector<ParamVector>& updates,
                                      const Dataset& validation, const LleConfig& config,
                                      double server_lr) {
  check_updates(updates);
  global_prev.validate();
  if (!(updates.front().layout == global_prev.layout))
    fail(ErrorCode::shape_mismatch, "update layout does not match global model");
  if (server_lr <= 0.0) fail(ErrorCode::invalid_argument, "server learning rate must be positive");
  return quantifier_pipeline(updates, lle_ordering(updates, validation, config));
}

QuantifierAggregate ddaba_aggregate(const ParamVector& global_prev,
                                    const std::vector<ParamVector>& updates,
                                    const Dataset& validation, double server_lr) {
  check_updates(updates);
  global_prev.validate();
  if (!(updates.front().layout == global_prev.layout))
    fail(ErrorCode::shape_mismatch, "update layout does not match global model");
  if (server_lr <= 0.0) fail(ErrorCode::invalid_argument, "server learning rate must be positive");
  return quantifier_pipeline(updates, accuracy_ordering(updates, validation));
}

}  // namespace rabdef
