// Acceptance gate: one pass/fail line per criterion, nonzero exit on failure.
// Thresholds are fixed here on purpose; loosening them is not a fix.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "rabdef/aggregate.hpp"
#include "rabdef/attack.hpp"
#include "rabdef/data.hpp"
#include "rabdef/error.hpp"
#include "rabdef/model.hpp"
#include "rabdef/report.hpp"
#include "rabdef/rng.hpp"
#include "rabdef/sim.hpp"

namespace fs = std::filesystem;
using namespace rabdef;

namespace {

constexpr uint64_t kSeeds[] = {1, 2, 3};
constexpr double kChance = 0.1;           // 10 balanced classes
constexpr double kMaxRunSeconds = 300.0;  // budget per scenario run

bool g_all_pass = true;

void report(const std::string& label, bool pass, const std::string& detail) {
  g_all_pass = g_all_pass && pass;
  std::printf("%s: %s%s%s\n", label.c_str(), pass ? "PASS" : "FAIL",
              detail.empty() ? "" : "  ", detail.c_str());
  std::fflush(stdout);
}

std::string fmt(double v) { return format_fixed(v, 4); }

std::string range(const std::vector<double>& v) {
  auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return fmt(*lo) + ".." + fmt(*hi);
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

// ---- experiment matrix -----------------------------------------------------

ExperimentConfig desk_config(Defense defense, AttackChoice attack, uint64_t seed) {
  ExperimentConfig c;
  c.synth_classes = 10;
  c.synth_dims = 49;
  c.synth_per_class = 1000;
  c.synth_test_per_class = 200;
  c.synth_spread = 0.10;
  c.n_clients = 50;
  c.clients_per_round = 20;
  c.rounds = 20;
  c.hidden = {32};
  c.local_epochs = 8;
  c.local_lr = 0.15;
  c.batch_size = 32;
  c.lle_instances = 128;
  c.attack_scale = 10.0;
  c.defense = defense;
  c.attack = attack;
  c.n_adversarial = attack == AttackChoice::none ? 0 : 5;
  c.seed = seed;
  return c;
}

ExperimentConfig fairness_config(Defense defense, AttackChoice attack, uint64_t seed) {
  ExperimentConfig c = desk_config(defense, attack, seed);
  c.clients_per_round = 50;
  c.n_poor = 5;
  c.poor_skew = 0.995;
  c.synth_spread = 0.45;
  c.local_epochs = 32;
  c.local_lr = 0.2;
  c.lle_instances = 16;
  return c;
}

struct RunOutcome {
  ExperimentResult result;
  double seconds = 0.0;
};

std::map<std::string, RunOutcome> g_runs;
double g_max_run_seconds = 0.0;

std::string run_key(const ExperimentConfig& c) {
  return std::string(defense_name(c.defense)) + "|" + attack_name(c.attack) + "|" + std::to_string(c.clients_per_round) +
         "|" + std::to_string(c.n_poor) + "|" + std::to_string(c.seed);
}

const RunOutcome& run_cached(const ExperimentConfig& c) {
  std::string key = run_key(c);
  auto it = g_runs.find(key);
  if (it != g_runs.end()) return it->second;
  auto start = std::chrono::steady_clock::now();
  RunOutcome out;
  out.result = run_experiment(c);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  g_max_run_seconds = std::max(g_max_run_seconds, out.seconds);
  return g_runs.emplace(key, std::move(out)).first->second;
}

double final_accuracy(const ExperimentResult& r) { return r.rounds.back().accuracy; }
double final_backdoor(const ExperimentResult& r) { return r.rounds.back().backdoor_accuracy; }

// ---- criteria 1-4 and the no-attack invariant -------------------------------

void criterion_byzantine() {
  bool pass = true;
  std::vector<double> drops, rand_gaps, flip_gaps, rand_dists;
  for (uint64_t seed : kSeeds) {
    double fed_none = final_accuracy(run_cached(desk_config(Defense::fedavg, AttackChoice::none, seed)).result);
    double fed_flip = final_accuracy(run_cached(desk_config(Defense::fedavg, AttackChoice::label_flip, seed)).result);
    double fed_rand = final_accuracy(run_cached(desk_config(Defense::fedavg, AttackChoice::random_weights, seed)).result);
    double rab_none = final_accuracy(run_cached(desk_config(Defense::rab2def, AttackChoice::none, seed)).result);
    double rab_flip = final_accuracy(run_cached(desk_config(Defense::rab2def, AttackChoice::label_flip, seed)).result);
    double rab_rand = final_accuracy(run_cached(desk_config(Defense::rab2def, AttackChoice::random_weights, seed)).result);
    drops.push_back(fed_none - fed_flip);
    flip_gaps.push_back(std::abs(rab_none - rab_flip));
    rand_dists.push_back(std::abs(fed_rand - kChance));
    rand_gaps.push_back(std::abs(rab_none - rab_rand));
    pass = pass && fed_none - fed_flip >= 0.15;
    pass = pass && std::abs(rab_none - rab_flip) <= 0.03;
    pass = pass && std::abs(fed_rand - kChance) <= 0.05;
    pass = pass && std::abs(rab_none - rab_rand) <= 0.03;
  }
  pass = pass && g_max_run_seconds <= kMaxRunSeconds;
  report("criterion 1 (byzantine resilience)", pass,
         "[flip drop " + range(drops) + ", flip gap " + range(flip_gaps) + ", rand |acc-chance| " +
             range(rand_dists) + ", rand gap " + range(rand_gaps) + ", max run " +
             fmt(g_max_run_seconds) + "s]");
}

void criterion_backdoor() {
  bool pass = true;
  std::vector<double> fed_bd, fed_main_gap, rab_bd, rab_main_gap;
  for (uint64_t seed : kSeeds) {
    double fed_none = final_accuracy(run_cached(desk_config(Defense::fedavg, AttackChoice::none, seed)).result);
    double rab_none = final_accuracy(run_cached(desk_config(Defense::rab2def, AttackChoice::none, seed)).result);
    const auto& fed = run_cached(desk_config(Defense::fedavg, AttackChoice::backdoor, seed)).result;
    const auto& rab = run_cached(desk_config(Defense::rab2def, AttackChoice::backdoor, seed)).result;
    fed_bd.push_back(final_backdoor(fed));
    fed_main_gap.push_back(std::abs(final_accuracy(fed) - fed_none));
    rab_bd.push_back(final_backdoor(rab));
    rab_main_gap.push_back(std::abs(final_accuracy(rab) - rab_none));
    pass = pass && final_backdoor(fed) >= 0.90;
    pass = pass && std::abs(final_accuracy(fed) - fed_none) <= 0.03;
    pass = pass && final_backdoor(rab) <= 0.05;
    pass = pass && std::abs(final_accuracy(rab) - rab_none) <= 0.03;
  }
  report("criterion 2 (backdoor resilience)", pass,
         "[fedavg bd " + range(fed_bd) + ", fedavg gap " + range(fed_main_gap) + ", rab2def bd " +
             range(rab_bd) + ", rab2def gap " + range(rab_main_gap) + "]");
}

void criterion_fairness_separation() {
  std::vector<double> rab_adv, rab_poor, dda_poor;
  for (uint64_t seed : kSeeds) {
    const auto& rab =
        run_cached(fairness_config(Defense::rab2def, AttackChoice::label_flip, seed)).result;
    const auto& dda =
        run_cached(fairness_config(Defense::ddaba, AttackChoice::label_flip, seed)).result;
    rab_adv.push_back(rab.fairness.adversarial_mean);
    rab_poor.push_back(rab.fairness.poor_mean);
    dda_poor.push_back(dda.fairness.poor_mean);
  }
  bool pass = mean_of(rab_adv) >= 4.0 && mean_of(rab_poor) <= 0.5 &&
              mean_of(dda_poor) > mean_of(rab_poor);
  report("criterion 3 (fairness separation)", pass,
         "[adv discard mean " + fmt(mean_of(rab_adv)) + ", poor discard " + fmt(mean_of(rab_poor)) +
             " vs ddaba " + fmt(mean_of(dda_poor)) + "]");
}

void criterion_poor_benefit() {
  bool pass = true;
  std::string detail = "[gap";
  for (AttackChoice attack :
       {AttackChoice::label_flip, AttackChoice::random_weights, AttackChoice::backdoor}) {
    std::vector<double> rab_acc, dda_acc;
    for (uint64_t seed : kSeeds) {
      rab_acc.push_back(
          run_cached(fairness_config(Defense::rab2def, attack, seed)).result.fairness.poor_accuracy_mean);
      dda_acc.push_back(
          run_cached(fairness_config(Defense::ddaba, attack, seed)).result.fairness.poor_accuracy_mean);
    }
    double gap = mean_of(rab_acc) - mean_of(dda_acc);
    pass = pass && gap >= 0.05;
    detail += " " + fmt(gap);
  }
  report("criterion 4 (poor-client benefit)", pass, detail + "]");
}

void invariant_no_attack_parity() {
  bool pass = true;
  std::vector<double> gaps;
  for (uint64_t seed : kSeeds) {
    double fed = final_accuracy(run_cached(desk_config(Defense::fedavg, AttackChoice::none, seed)).result);
    double rab = final_accuracy(run_cached(desk_config(Defense::rab2def, AttackChoice::none, seed)).result);
    gaps.push_back(fed - rab);
    pass = pass && rab >= fed - 0.02;
  }
  report("invariant (no-attack parity)", pass, "[fedavg-rab2def " + range(gaps) + "]");
}

// ---- criterion 5: quantifier suite ------------------------------------------

void criterion_quantifier() {
  bool pass = true;
  std::string detail;

  // Worked example, checked against integer arithmetic done from scratch.
  {
    std::vector<double> x = {0.0, 0.05, 0.08, 0.5, 0.7, 0.9, 1.1, 1.3, 5.0, 6.0};
    OrderingResult ordering;
    ordering.x_values = x;
    for (double v : x) ordering.scores.push_back(-v);
    double mean = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
    ordering.lambda = 1.0 / mean;
    ordering.degenerate = false;
    for (int i = 0; i < 10; ++i) ordering.ranking.push_back(i);

    double top_cut = std::log(10.0 / 9.0) * mean;
    double outlier_cut = (std::log(4.0) + 1.5 * std::log(3.0)) * mean;
    long top = std::count_if(x.begin(), x.end(), [&](double v) { return v <= top_cut; });
    long outliers = std::count_if(x.begin(), x.end(), [&](double v) { return v >= outlier_cut; });
    long kept = 10 - outliers;
    long denom = 2 * top + (kept - top);
    pass = pass && top == 3 && kept == 8 && denom == 11;

    QuantifierParams q = quantifier_params(ordering, 10);
    pass = pass && q.b == 0.3 && q.c == 0.8 && q.y_b == 6.0 / 11.0;
    WeightVector w = quantifier_weights(q, 10);
    for (int p = 0; p < 10; ++p) {
      double expected = p < top ? 2.0 / static_cast<double>(denom)
                                : (p < kept ? 1.0 / static_cast<double>(denom) : 0.0);
      pass = pass && w.weights[p] == expected;
    }
    detail = "[worked example b=" + fmt(q.b) + " c=" + fmt(q.c) + " y_b=" + fmt(q.y_b);
  }

  // 500 random orderings.
  Rng rng(501);
  int checked = 0;
  while (checked < 500 && pass) {
    int n = 2 + static_cast<int>(rng.below(59));
    std::vector<double> scores(n);
    for (double& s : scores) s = rng.uniform(-3.0, 3.0);
    OrderingResult ordering = ordering_from_scores(scores);
    if (ordering.degenerate) continue;
    QuantifierParams q = quantifier_params(ordering, n);
    WeightVector w = quantifier_weights(q, n);
    int top = static_cast<int>(std::lround(q.b * n));
    int kept = static_cast<int>(std::lround(q.c * n));
    double total = 0.0;
    for (int p = 0; p < n; ++p) {
      pass = pass && w.weights[p] >= 0.0;
      total += w.weights[p];
      if (p >= kept) pass = pass && w.weights[p] == 0.0;
      if (p < top && kept > top) pass = pass && w.weights[p] == 2.0 * w.weights[kept - 1];
    }
    pass = pass && std::abs(total - 1.0) <= 1e-9;
    ++checked;
  }
  report("criterion 5 (quantifier weights)", pass,
         detail + ", " + std::to_string(checked) + " random instances]");
}

// ---- criterion 6: brute-force oracle equivalence -----------------------------

double brute_median(std::vector<double> column) {
  std::sort(column.begin(), column.end());
  size_t n = column.size();
  return n % 2 == 1 ? column[n / 2] : (column[n / 2 - 1] + column[n / 2]) / 2.0;
}

double brute_trimmed(std::vector<double> column, double trim) {
  std::sort(column.begin(), column.end());
  int n = static_cast<int>(column.size());
  int cut = static_cast<int>(std::floor(trim * n));
  double total = 0.0;
  for (int i = cut; i < n - cut; ++i) total += column[i];
  return total / (n - 2 * cut);
}

std::vector<double> brute_krum(const std::vector<ParamVector>& updates, int n_byz) {
  int n = static_cast<int>(updates.size());
  std::vector<double> scores(n, 0.0);
  for (int i = 0; i < n; ++i) {
    std::vector<double> dists;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      double s = 0.0;
      for (size_t k = 0; k < updates[i].values.size(); ++k) {
        double d = updates[i].values[k] - updates[j].values[k];
        s += d * d;
      }
      dists.push_back(s);
    }
    std::sort(dists.begin(), dists.end());
    for (int k = 0; k < n - n_byz - 2; ++k) scores[i] += dists[k];
  }
  return scores;
}

void criterion_oracles() {
  bool pass = true;
  Rng rng(601);
  for (int it = 0; it < 200 && pass; ++it) {
    int n = 4 + static_cast<int>(rng.below(5));       // 4..8 updates
    int dims = 1 + static_cast<int>(rng.below(4));    // vector length 2..5
    ModelLayout layout{{dims, 1}, Activation::relu};
    std::vector<ParamVector> updates;
    for (int i = 0; i < n; ++i) {
      ParamVector p = zero_params(layout);
      for (double& v : p.values) v = rng.uniform(-5.0, 5.0);
      updates.push_back(std::move(p));
    }

    ParamVector med = coordinate_median(updates);
    double trim = rng.uniform(0.0, 0.45);
    if (n - 2 * static_cast<int>(std::floor(trim * n)) < 1) trim = 0.0;
    ParamVector trm = trimmed_mean(updates, trim);
    for (size_t k = 0; k < med.values.size(); ++k) {
      std::vector<double> column;
      for (const auto& u : updates) column.push_back(u.values[k]);
      pass = pass && med.values[k] == brute_median(column);
      pass = pass && trm.values[k] == brute_trimmed(column, trim);
    }

    int n_byz = static_cast<int>(rng.below(n - 3 + 1));
    auto scores = multikrum_scores(updates, n_byz);
    auto expected = brute_krum(updates, n_byz);
    for (int i = 0; i < n; ++i) pass = pass && std::abs(scores[i] - expected[i]) <= 1e-9;
  }
  report("criterion 6 (oracle equivalence)", pass, "[200 instances, n<=8, dim<=5]");
}

// ---- criterion 7: finite-difference numerics ---------------------------------

void criterion_numerics() {
  bool pass = true;
  double worst = 0.0;
  Rng rng(701);
  for (int it = 0; it < 100 && pass; ++it) {
    std::vector<int> sizes = {2 + static_cast<int>(rng.below(5))};
    if (rng.below(2) == 1) sizes.push_back(3 + static_cast<int>(rng.below(3)));
    sizes.push_back(2 + static_cast<int>(rng.below(3)));
    ModelLayout layout{sizes, Activation::tanh};
    ParamVector params = init_params(layout, rng.raw());
    for (double& v : params.values) v += rng.uniform(-0.5, 0.5);

    int samples = 1 + static_cast<int>(rng.below(4));
    Batch batch;
    batch.features = Mat(samples, layout.input_dim());
    for (double& v : batch.features.data) v = rng.uniform(-1.0, 1.0);
    for (int s = 0; s < samples; ++s)
      batch.labels.push_back(static_cast<int>(rng.below(layout.class_count())));

    for (int s = 0; s < samples; ++s) {
      auto probs = forward(params, batch.features.row(s));
      double total = std::accumulate(probs.begin(), probs.end(), 0.0);
      pass = pass && std::abs(total - 1.0) <= 1e-9;
    }

    ParamVector grad = loss_gradient(params, batch);
    for (size_t k = 0; k < params.values.size(); ++k) {
      double h = 1e-6 * std::max(1.0, std::abs(params.values[k]));
      ParamVector plus = params;
      ParamVector minus = params;
      plus.values[k] += h;
      minus.values[k] -= h;
      double fd = (batch_loss(plus, batch) - batch_loss(minus, batch)) / (2.0 * h);
      double gap = std::abs(fd - grad.values[k]) /
                   std::max({std::abs(fd), std::abs(grad.values[k]), 1e-2});
      worst = std::max(worst, gap);
      pass = pass && gap <= 1e-4;
    }

    Mat jac = input_jacobian(params, batch.features.row(0));
    std::vector<double> x(batch.features.row(0).begin(), batch.features.row(0).end());
    for (int f = 0; f < layout.input_dim(); ++f) {
      double h = 1e-6 * std::max(1.0, std::abs(x[f]));
      std::vector<double> plus = x;
      std::vector<double> minus = x;
      plus[f] += h;
      minus[f] -= h;
      auto pp = forward(params, plus);
      auto pm = forward(params, minus);
      for (int k = 0; k < layout.class_count(); ++k) {
        double fd = (pp[k] - pm[k]) / (2.0 * h);
        double gap =
            std::abs(fd - jac.at(f, k)) / std::max({std::abs(fd), std::abs(jac.at(f, k)), 1e-2});
        worst = std::max(worst, gap);
        pass = pass && gap <= 1e-4;
      }
    }
  }
  report("criterion 7 (gradient numerics)", pass, "[100 cases, worst gap " +
                                                      format_fixed(worst, 8) + "]");
}

// ---- criterion 8: replacement identity ---------------------------------------

void criterion_replacement() {
  ModelLayout layout{{5, 4, 3}, Activation::relu};
  ParamVector global = init_params(layout, 81);
  ParamVector adversarial = init_params(layout, 82);
  for (double& v : adversarial.values) v += 0.4;

  int n = 12;
  double server_lr = 0.7;
  std::vector<ParamVector> deltas(n, zero_params(layout));
  deltas[3] = boost_update(adversarial, global, n, server_lr);
  ParamVector merged = fedavg(global, deltas, server_lr);

  bool pass = true;
  double worst = 0.0;
  for (size_t k = 0; k < merged.values.size(); ++k) {
    double gap = std::abs(merged.values[k] - adversarial.values[k]);
    worst = std::max(worst, gap);
    pass = pass && gap <= 1e-9;
  }
  report("criterion 8 (replacement identity)", pass,
         "[worst coordinate gap " + format_fixed(worst, 12) + "]");
}

// ---- criterion 9: byte-identical reruns --------------------------------------

std::map<std::string, std::vector<uint8_t>> dir_contents(const fs::path& dir) {
  std::map<std::string, std::vector<uint8_t>> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    out[entry.path().filename().string()] = read_file_bytes(entry.path().string());
  }
  return out;
}

void criterion_determinism() {
  ExperimentConfig c;
  c.synth_classes = 4;
  c.synth_dims = 16;
  c.synth_per_class = 120;
  c.synth_test_per_class = 40;
  c.n_clients = 8;
  c.clients_per_round = 8;
  c.n_adversarial = 1;
  c.n_poor = 1;
  c.rounds = 3;
  c.hidden = {8};
  c.local_epochs = 1;
  c.defense = Defense::rab2def;
  c.attack = AttackChoice::label_flip;
  c.lle_instances = 4;
  c.seed = 9;

  fs::path base = fs::temp_directory_path() / "rabdef_acceptance";
  fs::remove_all(base);
  bool pass = true;
  int files = 0;
  for (const char* name : {"a", "b"}) {
    ExperimentResult result = run_experiment(c);
    emit_reports(result, c.n_clients, (base / name).string());
    Explanation e = explain_client(c, 1, 0);
    emit_explanation(e, (base / name).string());
  }
  auto a = dir_contents(base / "a");
  auto b = dir_contents(base / "b");
  pass = a == b && a.size() >= 5;
  files = static_cast<int>(a.size());
  bool saw_pgm = false;
  for (const auto& [name, bytes] : a) saw_pgm = saw_pgm || name.ends_with(".pgm");
  pass = pass && saw_pgm;
  fs::remove_all(base);
  report("criterion 9 (byte-identical reruns)", pass,
         "[" + std::to_string(files) + " files compared]");
}

}  // namespace

int main() {
  try {
    criterion_byzantine();
    criterion_backdoor();
    criterion_fairness_separation();
    criterion_poor_benefit();
    criterion_quantifier();
    criterion_oracles();
    criterion_numerics();
    criterion_replacement();
    criterion_determinism();
    invariant_no_attack_parity();
  } catch (const Error& e) {
    std::printf("acceptance aborted: %s\n", e.what());
    return 1;
  }
  return g_all_pass ? 0 : 1;
}
