#include "rabdef/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include "rabdef/aggregate.hpp"
#include "rabdef/attack.hpp"
#include "rabdef/error.hpp"
#include "rabdef/metrics.hpp"
#include "rabdef/rng.hpp"

namespace rabdef {

namespace {

constexpr uint64_t kDataSalt = 0x5d1a7e11;
constexpr uint64_t kSubsetSalt = 0x219c3bb5;
constexpr uint64_t kValidationSalt = 0x7c4e19a3;
constexpr uint64_t kPartitionSalt = 0x3f8d02c7;
constexpr uint64_t kFlipSalt = 0x9e11af52;
constexpr uint64_t kInitSalt = 0x62b7c913;
constexpr uint64_t kSelectSalt = 0x1b94d1e7;
constexpr uint64_t kTrainSalt = 0x84a6f3d1;
constexpr uint64_t kRandomModelSalt = 0x4dc9b22f;
constexpr uint64_t kNoiseSalt = 0xa35e88cb;
constexpr uint64_t kLleSalt = 0x70f1562d;

uint64_t per_client_seed(uint64_t master, uint64_t salt, int round, int client) {
  return mix_seed(mix_seed(master, salt, static_cast<uint64_t>(round)),
                  static_cast<uint64_t>(client));
}

struct Submission {
  ParamVector delta;  // what the client puts on the wire
  bool diverged = false;
};

ParamVector difference(const ParamVector& a, const ParamVector& b) {
  ParamVector out = a;
  for (size_t k = 0; k < out.values.size(); ++k) out.values[k] -= b.values[k];
  return out;
}

ParamVector displaced(const ParamVector& base, const ParamVector& delta) {
  ParamVector out = base;
  for (size_t k = 0; k < out.values.size(); ++k) out.values[k] += delta.values[k];
  return out;
}

int resolve_n_select(const ExperimentConfig& config, int n) {
  if (config.n_select > 0) return std::min(config.n_select, n);
  return std::max(1, static_cast<int>(std::lround(0.2 * n)));
}

int resolve_n_byz(const ExperimentConfig& config, int n) {
  if (config.n_byz > 0) return config.n_byz;
  return std::max(0, std::min(static_cast<int>(std::lround(0.25 * n)), n - 3));
}

int resolve_theta(const ExperimentConfig& config, int n) {
  if (config.rlr_theta > 0) return config.rlr_theta;
  return std::max(1, n / 4);
}

LleConfig resolve_lle(const ExperimentConfig& config, int round) {
  LleConfig out;
  out.mode = config.lle_mode;
  out.n_perturb = config.lle_perturbations;
  out.radius = config.lle_radius;
  out.max_instances = config.lle_instances;
  out.seed = mix_seed(config.seed, kLleSalt, static_cast<uint64_t>(round));
  return out;
}

std::vector<Submission> collect_submissions(const ParamVector& global,
                                            const FederatedDataset& fed,
                                            const ExperimentConfig& config, int round,
                                            const std::vector<int>& participants) {
  int boosting = 0;
  if (config.boost_enabled()) {
    for (int id : participants) {
      if (fed.clients[id].profile.attack == AttackKind::backdoor) ++boosting;
    }
  }

  std::vector<Submission> out;
  out.reserve(participants.size());
  for (int id : participants) {
    const ClientShard& shard = fed.clients[id];
    Submission sub;
    if (shard.profile.attack == AttackKind::random_weights) {
      ParamVector fake = random_weights_update(
          global.layout, config.attack_scale,
          per_client_seed(config.seed, kRandomModelSalt, round, id));
      sub.delta = difference(fake, global);
    } else {
      ParamVector local = global;
      try {
        local = local_train(global, to_batch(shard.data), config.local_epochs, config.local_lr,
                            config.batch_size,
                            per_client_seed(config.seed, kTrainSalt, round, id));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::divergence) throw;
        local = global;
        sub.diverged = true;
      }
      if (shard.profile.attack == AttackKind::backdoor && config.boost_enabled() && !sub.diverged) {
        // Boosting scales the delta so the joint adversarial contribution
        // replaces the global model; co-present boosters split the factor.
        sub.delta = boost_update(local, global, static_cast<int>(participants.size()),
                                 config.server_lr);
        double share = 1.0 / boosting;
        for (double& v : sub.delta.values) v *= share;
      } else {
        sub.delta = difference(local, global);
      }
    }
    out.push_back(std::move(sub));
  }
  return out;
}

struct AggregateOutcome {
  ParamVector model;
  std::vector<double> weights;
  std::vector<double> scores;
  std::vector<double> x_values;
  std::vector<bool> discarded;
  bool fallback = false;
};

AggregateOutcome run_defense(const ParamVector& global, const std::vector<Submission>& subs,
                             const FederatedDataset& fed, const ExperimentConfig& config,
                             int round) {
  int n = static_cast<int>(subs.size());
  AggregateOutcome out;
  out.weights.assign(n, 1.0 / n);
  out.scores.assign(n, 0.0);
  out.x_values.assign(n, 0.0);
  out.discarded.assign(n, false);

  std::vector<ParamVector> deltas;
  deltas.reserve(n);
  for (const auto& s : subs) deltas.push_back(s.delta);

  auto models = [&]() {
    std::vector<ParamVector> m;
    m.reserve(n);
    for (const auto& s : subs) m.push_back(displaced(global, s.delta));
    return m;
  };

  auto mark_selected = [&](const std::vector<int>& selected) {
    std::vector<bool> in(n, false);
    for (int idx : selected) in[idx] = true;
    double w = 1.0 / static_cast<double>(selected.size());
    for (int i = 0; i < n; ++i) {
      out.weights[i] = in[i] ? w : 0.0;
      out.discarded[i] = !in[i];
    }
  };

  auto apply_quantifier = [&](const QuantifierAggregate& agg) {
    out.model = agg.value;
    out.fallback = agg.fallback;
    out.scores = agg.ordering.scores;
    out.x_values = agg.ordering.x_values;
    if (agg.fallback) {
      out.weights.assign(n, 1.0 / n);
    } else {
      for (int p = 0; p < n; ++p) out.weights[agg.ordering.ranking[p]] = agg.weights.weights[p];
    }
    for (int i = 0; i < n; ++i) out.discarded[i] = out.weights[i] == 0.0;
  };

  switch (config.defense) {
    case Defense::fedavg:
      out.model = fedavg(global, deltas, config.server_lr);
      break;
    case Defense::median:
      out.model = coordinate_median(models());
      break;
    case Defense::trimmed_mean:
      out.model = trimmed_mean(models(), config.trim);
      break;
    case Defense::multikrum: {
      auto m = models();
      int n_byz = resolve_n_byz(config, n);
      out.scores = multikrum_scores(m, n_byz);
      auto selected = multikrum_select(m, resolve_n_select(config, n), n_byz);
      std::vector<ParamVector> subset;
      subset.reserve(selected.size());
      for (int idx : selected) subset.push_back(m[idx]);
      out.model = zero_params(global.layout);
      for (const auto& s : subset) axpy(1.0 / selected.size(), s.values, out.model.values);
      mark_selected(selected);
      break;
    }
    case Defense::bulyan: {
      auto m = models();
      auto selected = bulyan_select(m, resolve_n_byz(config, n));
      std::vector<ParamVector> subset;
      subset.reserve(selected.size());
      for (int idx : selected) subset.push_back(m[idx]);
      out.model = trimmed_mean(subset, config.trim);
      mark_selected(selected);
      break;
    }
    case Defense::norm_clip:
      out.model = norm_clip(global, deltas, config.clip_norm, config.server_lr);
      break;
    case Defense::wdp:
      out.model = wdp(global, deltas, config.clip_norm, config.noise_sigma, config.server_lr,
                      mix_seed(config.seed, kNoiseSalt, static_cast<uint64_t>(round)));
      break;
    case Defense::rlr:
      out.model = rlr(global, deltas, resolve_theta(config, n), config.server_lr);
      break;
    case Defense::rab2def:
      apply_quantifier(rab2def_aggregate(global, models(), fed.validation,
                                         resolve_lle(config, round), config.server_lr));
      break;
    case Defense::ddaba:
      apply_quantifier(ddaba_aggregate(global, models(), fed.validation, config.server_lr));
      break;
  }
  return out;
}

}  // namespace

FederatedDataset build_federation(const ExperimentConfig& config) {
  config.validate();

  Dataset train;
  Dataset test;
  if (config.dataset == DatasetSource::synth) {
    Dataset full = synth_blobs(config.synth_classes, config.synth_dims,
                               config.synth_per_class + config.synth_test_per_class,
                               config.synth_spread, mix_seed(config.seed, kDataSalt));
    double test_fraction =
        static_cast<double>(config.synth_test_per_class) /
        (config.synth_per_class + config.synth_test_per_class);
    auto split = validation_split(full, test_fraction, mix_seed(config.seed, kSubsetSalt));
    test = std::move(split.first);
    train = std::move(split.second);
  } else if (config.dataset == DatasetSource::idx) {
    train = load_idx_files(config.idx_train_images, config.idx_train_labels);
    test = load_idx_files(config.idx_test_images, config.idx_test_labels);
  } else {
    train = load_cifar_files(config.cifar_train);
    test = load_cifar_files(config.cifar_test);
  }

  if (train.features.cols != test.features.cols || !(train.image_shape == test.image_shape))
    fail(ErrorCode::shape_mismatch, "train and test data disagree on feature shape");
  int classes = std::max(train.classes, test.classes);
  train.classes = classes;
  test.classes = classes;

  if (config.train_limit > 0 && config.train_limit < train.size()) {
    double fraction = static_cast<double>(config.train_limit) / train.size();
    train = validation_split(train, fraction, mix_seed(config.seed, kSubsetSalt, 1)).first;
    train.classes = classes;
  }

  auto val_split =
      validation_split(train, config.validation_fraction, mix_seed(config.seed, kValidationSalt));

  FederatedDataset fed;
  fed.validation = std::move(val_split.first);
  fed.test = std::move(test);
  fed.clients = partition(val_split.second, config.n_clients, config.n_poor, config.poor_skew,
                          mix_seed(config.seed, kPartitionSalt));

  if (config.attack != AttackChoice::none) {
    AttackKind kind = config.attack == AttackChoice::label_flip ? AttackKind::label_flip
                      : config.attack == AttackChoice::random_weights
                          ? AttackKind::random_weights
                          : AttackKind::backdoor;
    if (kind == AttackKind::backdoor) {
      if (config.target_label >= classes)
        fail(ErrorCode::invalid_argument, "target_label must name a valid class");
      pattern_footprint(config.pattern(), fed.test.image_shape);
    }
    for (int id = 0; id < config.n_adversarial; ++id) {
      ClientShard& shard = fed.clients[id];
      shard.profile.role = Role::adversarial;
      shard.profile.attack = kind;
      if (kind == AttackKind::label_flip) {
        shard.data = flip_labels(shard.data, mix_seed(config.seed, kFlipSalt,
                                                      static_cast<uint64_t>(id)));
      } else if (kind == AttackKind::backdoor) {
        shard.data = inject_backdoor(shard.data, config.pattern(), config.poison_fraction);
      }
    }
  }
  return fed;
}

ModelLayout resolve_layout(const ExperimentConfig& config, const FederatedDataset& fed) {
  ModelLayout layout;
  layout.activation = config.activation;
  layout.layer_sizes.push_back(fed.test.features.cols);
  if (!config.hidden.empty()) {
    layout.layer_sizes.insert(layout.layer_sizes.end(), config.hidden.begin(),
                              config.hidden.end());
  } else {
    layout.layer_sizes.push_back(config.dataset == DatasetSource::synth ? 16 : 64);
  }
  layout.layer_sizes.push_back(fed.test.classes);
  layout.validate();
  return layout;
}

std::vector<int> select_round_clients(const FederatedDataset& fed, const ExperimentConfig& config,
                                      int round) {
  int n = static_cast<int>(fed.clients.size());
  std::vector<int> picked;
  std::vector<int> pool;
  for (int id = 0; id < n; ++id) {
    if (fed.clients[id].profile.role == Role::regular) {
      pool.push_back(id);
    } else {
      picked.push_back(id);
    }
  }
  int remaining = config.clients_per_round - static_cast<int>(picked.size());
  if (remaining < 0)
    fail(ErrorCode::invalid_argument, "clients_per_round below forced participant count");
  Rng rng(mix_seed(config.seed, kSelectSalt, static_cast<uint64_t>(round)));
  rng.shuffle(pool);
  picked.insert(picked.end(), pool.begin(), pool.begin() + std::min<size_t>(remaining, pool.size()));
  std::sort(picked.begin(), picked.end());
  return picked;
}

RoundReport run_round(ParamVector& global, const FederatedDataset& fed,
                      const ExperimentConfig& config, int round) {
  auto participants = select_round_clients(fed, config, round);
  auto subs = collect_submissions(global, fed, config, round, participants);
  auto outcome = run_defense(global, subs, fed, config, round);

  RoundReport report;
  report.round = round;
  report.fallback = outcome.fallback;
  report.clients.resize(participants.size());
  for (size_t i = 0; i < participants.size(); ++i) {
    ClientRoundRecord& rec = report.clients[i];
    rec.client = participants[i];
    rec.role = fed.clients[participants[i]].profile.role;
    rec.weight = outcome.weights[i];
    rec.score = outcome.scores[i];
    rec.x_value = outcome.x_values[i];
    rec.discarded = outcome.discarded[i];
    rec.diverged = subs[i].diverged;
    if (rec.role == Role::poor) {
      rec.local_accuracy = evaluate(displaced(global, subs[i].delta), fed.test);
    }
    if (rec.discarded) {
      switch (rec.role) {
        case Role::regular: ++report.discarded_regular; break;
        case Role::poor: ++report.discarded_poor; break;
        case Role::adversarial: ++report.discarded_adversarial; break;
      }
    }
  }

  global = std::move(outcome.model);
  report.accuracy = evaluate(global, fed.test);
  if (config.attack == AttackChoice::backdoor) {
    report.backdoor_accuracy = evaluate_backdoor(global, fed.test, config.pattern());
  }
  return report;
}

FairnessSummary fairness_summary(const std::vector<RoundReport>& reports,
                                 const std::vector<ClientProfile>& profiles) {
  FairnessSummary out;
  if (!reports.empty()) {
    double adv_min = reports.front().discarded_adversarial;
    double adv_max = adv_min;
    double adv_sum = 0.0;
    double poor_min = reports.front().discarded_poor;
    double poor_max = poor_min;
    double poor_sum = 0.0;
    for (const auto& r : reports) {
      adv_min = std::min<double>(adv_min, r.discarded_adversarial);
      adv_max = std::max<double>(adv_max, r.discarded_adversarial);
      adv_sum += r.discarded_adversarial;
      poor_min = std::min<double>(poor_min, r.discarded_poor);
      poor_max = std::max<double>(poor_max, r.discarded_poor);
      poor_sum += r.discarded_poor;
    }
    out.adversarial_min = adv_min;
    out.adversarial_max = adv_max;
    out.adversarial_mean = adv_sum / reports.size();
    out.poor_min = poor_min;
    out.poor_max = poor_max;
    out.poor_mean = poor_sum / reports.size();
  }

  for (const auto& p : profiles) {
    if (p.role != Role::poor) continue;
    for (auto it = reports.rbegin(); it != reports.rend(); ++it) {
      auto rec = std::find_if(it->clients.begin(), it->clients.end(),
                              [&p](const ClientRoundRecord& r) { return r.client == p.id; });
      if (rec == it->clients.end()) continue;
      out.poor_ids.push_back(p.id);
      out.poor_accuracy.push_back(rec->discarded ? rec->local_accuracy : it->accuracy);
      break;
    }
  }
  if (!out.poor_accuracy.empty()) {
    out.poor_accuracy_mean =
        std::accumulate(out.poor_accuracy.begin(), out.poor_accuracy.end(), 0.0) /
        out.poor_accuracy.size();
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  FederatedDataset fed = build_federation(config);
  ModelLayout layout = resolve_layout(config, fed);

  ExperimentResult result;
  result.model = init_params(layout, mix_seed(config.seed, kInitSalt));
  result.rounds.reserve(config.rounds);
  for (int r = 0; r < config.rounds; ++r) {
    result.rounds.push_back(run_round(result.model, fed, config, r));
  }

  std::vector<ClientProfile> profiles;
  profiles.reserve(fed.clients.size());
  for (const auto& c : fed.clients) profiles.push_back(c.profile);
  result.fairness = fairness_summary(result.rounds, profiles);
  return result;
}

Explanation explain_client(const ExperimentConfig& config, int round, int client) {
  if (round < 0 || round >= config.rounds)
    fail(ErrorCode::invalid_argument, "round index outside the configured range");
  if (client < 0 || client >= config.n_clients)
    fail(ErrorCode::invalid_argument, "client id outside the configured range");

  FederatedDataset fed = build_federation(config);
  ModelLayout layout = resolve_layout(config, fed);
  ParamVector global = init_params(layout, mix_seed(config.seed, kInitSalt));
  for (int r = 0; r < round; ++r) run_round(global, fed, config, r);

  auto participants = select_round_clients(fed, config, round);
  auto pos_it = std::find(participants.begin(), participants.end(), client);
  if (pos_it == participants.end())
    fail(ErrorCode::invalid_argument,
         "client " + std::to_string(client) + " did not participate in round " +
             std::to_string(round));
  size_t pos = static_cast<size_t>(pos_it - participants.begin());

  auto subs = collect_submissions(global, fed, config, round, participants);
  std::vector<ParamVector> models;
  models.reserve(subs.size());
  for (const auto& s : subs) models.push_back(displaced(global, s.delta));

  LleConfig lle = resolve_lle(config, round);
  auto bank = explanation_bank(models, fed.validation, lle);

  Explanation out;
  out.round = round;
  out.client = client;
  out.shape = fed.validation.image_shape;
  out.instances = bank_instances(fed.validation.size(), lle.max_instances);
  out.matrices = std::move(bank[pos]);
  out.instance_labels.reserve(out.instances.size());
  out.instance_features.reserve(out.instances.size());
  for (int idx : out.instances) {
    out.instance_labels.push_back(fed.validation.labels[idx]);
    auto row = fed.validation.features.row(idx);
    out.instance_features.emplace_back(row.begin(), row.end());
  }
  return out;
}

}  // namespace rabdef
