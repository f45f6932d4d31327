#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rabdef/attack.hpp"
#include "rabdef/data.hpp"
#include "rabdef/model.hpp"
#include "rabdef/xai.hpp"

namespace rabdef {

enum class DatasetSource { synth, idx, cifar };

enum class Defense {
  fedavg,
  median,
  trimmed_mean,
  multikrum,
  bulyan,
  norm_clip,
  wdp,
  rlr,
  rab2def,
  ddaba,
};

enum class AttackChoice { none, label_flip, random_weights, backdoor };

// Full description of one experiment. Parsed from a flat key=value file;
// every key below is accepted under the same name, unknown keys are errors.
struct ExperimentConfig {
  DatasetSource dataset = DatasetSource::synth;
  std::string idx_train_images;
  std::string idx_train_labels;
  std::string idx_test_images;
  std::string idx_test_labels;
  std::vector<std::string> cifar_train;
  std::vector<std::string> cifar_test;

  int synth_classes = 10;
  int synth_dims = 49;
  int synth_per_class = 1000;
  int synth_test_per_class = 200;
  double synth_spread = 0.08;
  int train_limit = 0;

  double validation_fraction = 0.05;

  int n_clients = 50;
  int clients_per_round = 10;
  int n_adversarial = 0;
  int n_poor = 0;
  double poor_skew = 0.9;
  int rounds = 20;

  std::vector<int> hidden;
  Activation activation = Activation::relu;
  int local_epochs = 2;
  double local_lr = 0.05;
  int batch_size = 32;

  double server_lr = 1.0;
  Defense defense = Defense::fedavg;
  double trim = 0.15;
  int n_select = 0;
  int n_byz = 0;
  double clip_norm = 1.0;
  double noise_sigma = 0.01;
  int rlr_theta = 0;

  AttackChoice attack = AttackChoice::none;
  double attack_scale = 1.0;
  int boost = -1;
  BackdoorPattern::Kind pattern_kind = BackdoorPattern::Kind::cross;
  int pattern_size = 0;
  int pattern_row = -1;
  int pattern_col = -1;
  double pattern_intensity = 1.0;
  int target_label = 0;
  double poison_fraction = 0.5;

  LleMode lle_mode = LleMode::gradient;
  int lle_instances = 32;
  int lle_perturbations = 300;
  double lle_radius = 0.1;

  uint64_t seed = 1;

  void validate() const;

  bool boost_enabled() const {
    return boost == -1 ? attack == AttackChoice::backdoor : boost != 0;
  }
  BackdoorPattern pattern() const;
};

const char* defense_name(Defense d);
const char* attack_name(AttackChoice a);

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

}  // namespace rabdef
