#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rabdef/config.hpp"
#include "rabdef/data.hpp"
#include "rabdef/model.hpp"
#include "rabdef/xai.hpp"

namespace rabdef {

struct ClientRoundRecord {
  int client = 0;
  Role role = Role::regular;
  double weight = 0.0;
  double score = 0.0;
  double x_value = 0.0;
  bool discarded = false;
  bool diverged = false;
  // Test accuracy of the locally trained model; recorded for poor clients so
  // the fairness summary can evaluate a discarded client on the model it
  // actually keeps. -1 for everyone else.
  double local_accuracy = -1.0;
};

struct RoundReport {
  int round = 0;
  double accuracy = 0.0;
  // -1 when the run has no backdoor task.
  double backdoor_accuracy = -1.0;
  bool fallback = false;
  int discarded_regular = 0;
  int discarded_poor = 0;
  int discarded_adversarial = 0;
  // Participants in ascending client id order.
  std::vector<ClientRoundRecord> clients;
};

struct FairnessSummary {
  double adversarial_min = 0.0;
  double adversarial_max = 0.0;
  double adversarial_mean = 0.0;
  double poor_min = 0.0;
  double poor_max = 0.0;
  double poor_mean = 0.0;
  // Final accuracy per poor client: a client discarded in its last round
  // keeps its locally trained model, a retained one uses the global model.
  std::vector<int> poor_ids;
  std::vector<double> poor_accuracy;
  double poor_accuracy_mean = 0.0;
};

struct ExperimentResult {
  ParamVector model;
  std::vector<RoundReport> rounds;
  FairnessSummary fairness;
};

// One client's explanations for one round, ready for rendering.
struct Explanation {
  int round = 0;
  int client = 0;
  ImageShape shape;
  std::vector<int> instances;
  std::vector<int> instance_labels;
  std::vector<std::vector<double>> instance_features;
  std::vector<ImportanceMatrix> matrices;
};

// Loads or synthesizes the dataset, carves the server validation set, splits
// clients, assigns roles (adversarial ids 0..n_adv-1, poor ids at the tail)
// and applies setup-time poisoning (label flips, backdoor stamps).
FederatedDataset build_federation(const ExperimentConfig& config);

ModelLayout resolve_layout(const ExperimentConfig& config, const FederatedDataset& fed);

// Adversarial and poor clients participate every round; the remaining slots
// are filled from regular clients by seeded sampling. Ascending ids.
std::vector<int> select_round_clients(const FederatedDataset& fed, const ExperimentConfig& config,
                                      int round);

RoundReport run_round(ParamVector& global, const FederatedDataset& fed,
                      const ExperimentConfig& config, int round);

FairnessSummary fairness_summary(const std::vector<RoundReport>& reports,
                                 const std::vector<ClientProfile>& profiles);

ExperimentResult run_experiment(const ExperimentConfig& config);

// Replays the experiment up to the given round and recomputes the named
// participant's explanations exactly as the ordering saw them.
Explanation explain_client(const ExperimentConfig& config, int round, int client);

}  // namespace rabdef
