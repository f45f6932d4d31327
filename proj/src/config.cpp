#include "rabdef/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string_view>

#include "rabdef/error.hpp"

namespace rabdef {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  fail(ErrorCode::format,
       "invalid value '" + std::string(value) + "' for config key '" + std::string(key) + "'");
}

long long parse_int(std::string_view key, std::string_view value) {
  long long out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) bad_value(key, value);
  return out;
}

uint64_t parse_u64(std::string_view key, std::string_view value) {
  uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) bad_value(key, value);
  return out;
}

double parse_double(std::string_view key, std::string_view value) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) bad_value(key, value);
  return out;
}

std::vector<std::string> parse_list(std::string_view value) {
  std::vector<std::string> out;
  size_t start = 0;
  while (start <= value.size()) {
    size_t comma = value.find(',', start);
    if (comma == std::string_view::npos) comma = value.size();
    auto item = trim(value.substr(start, comma - start));
    if (!item.empty()) out.emplace_back(item);
    start = comma + 1;
  }
  return out;
}

std::vector<int> parse_int_list(std::string_view key, std::string_view value) {
  std::vector<int> out;
  for (const auto& item : parse_list(value)) {
    out.push_back(static_cast<int>(parse_int(key, item)));
  }
  return out;
}

void apply(ExperimentConfig& c, std::string_view key, std::string_view value) {
  if (key == "dataset") {
    if (value == "synth") c.dataset = DatasetSource::synth;
    else if (value == "idx") c.dataset = DatasetSource::idx;
    else if (value == "cifar") c.dataset = DatasetSource::cifar;
    else bad_value(key, value);
  } else if (key == "idx_train_images") c.idx_train_images = value;
  else if (key == "idx_train_labels") c.idx_train_labels = value;
  else if (key == "idx_test_images") c.idx_test_images = value;
  else if (key == "idx_test_labels") c.idx_test_labels = value;
  else if (key == "cifar_train") c.cifar_train = parse_list(value);
  else if (key == "cifar_test") c.cifar_test = parse_list(value);
  else if (key == "synth_classes") c.synth_classes = static_cast<int>(parse_int(key, value));
  else if (key == "synth_dims") c.synth_dims = static_cast<int>(parse_int(key, value));
  else if (key == "synth_per_class") c.synth_per_class = static_cast<int>(parse_int(key, value));
  else if (key == "synth_test_per_class")
    c.synth_test_per_class = static_cast<int>(parse_int(key, value));
  else if (key == "synth_spread") c.synth_spread = parse_double(key, value);
  else if (key == "train_limit") c.train_limit = static_cast<int>(parse_int(key, value));
  else if (key == "validation_fraction") c.validation_fraction = parse_double(key, value);
  else if (key == "n_clients") c.n_clients = static_cast<int>(parse_int(key, value));
  else if (key == "clients_per_round")
    c.clients_per_round = static_cast<int>(parse_int(key, value));
  else if (key == "n_adversarial") c.n_adversarial = static_cast<int>(parse_int(key, value));
  else if (key == "n_poor") c.n_poor = static_cast<int>(parse_int(key, value));
  else if (key == "poor_skew") c.poor_skew = parse_double(key, value);
  else if (key == "rounds") c.rounds = static_cast<int>(parse_int(key, value));
  else if (key == "hidden") c.hidden = parse_int_list(key, value);
  else if (key == "activation") {
    if (value == "relu") c.activation = Activation::relu;
    else if (value == "tanh") c.activation = Activation::tanh;
    else bad_value(key, value);
  } else if (key == "local_epochs") c.local_epochs = static_cast<int>(parse_int(key, value));
  else if (key == "local_lr") c.local_lr = parse_double(key, value);
  else if (key == "batch_size") c.batch_size = static_cast<int>(parse_int(key, value));
  else if (key == "server_lr") c.server_lr = parse_double(key, value);
  else if (key == "defense") {
    if (value == "fedavg") c.defense = Defense::fedavg;
    else if (value == "median") c.defense = Defense::median;
    else if (value == "trimmed_mean") c.defense = Defense::trimmed_mean;
    else if (value == "multikrum") c.defense = Defense::multikrum;
    else if (value == "bulyan") c.defense = Defense::bulyan;
    else if (value == "norm_clip") c.defense = Defense::norm_clip;
    else if (value == "wdp") c.defense = Defense::wdp;
    else if (value == "rlr") c.defense = Defense::rlr;
    else if (value == "rab2def") c.defense = Defense::rab2def;
    else if (value == "ddaba") c.defense = Defense::ddaba;
    else bad_value(key, value);
  } else if (key == "trim") c.trim = parse_double(key, value);
  else if (key == "n_select") c.n_select = static_cast<int>(parse_int(key, value));
  else if (key == "n_byz") c.n_byz = static_cast<int>(parse_int(key, value));
  else if (key == "clip_norm") c.clip_norm = parse_double(key, value);
  else if (key == "noise_sigma") c.noise_sigma = parse_double(key, value);
  else if (key == "rlr_theta") c.rlr_theta = static_cast<int>(parse_int(key, value));
  else if (key == "attack") {
    if (value == "none") c.attack = AttackChoice::none;
    else if (value == "label_flip") c.attack = AttackChoice::label_flip;
    else if (value == "random_weights") c.attack = AttackChoice::random_weights;
    else if (value == "backdoor") c.attack = AttackChoice::backdoor;
    else bad_value(key, value);
  } else if (key == "attack_scale") c.attack_scale = parse_double(key, value);
  else if (key == "boost") {
    if (value == "auto") c.boost = -1;
    else if (value == "on") c.boost = 1;
    else if (value == "off") c.boost = 0;
    else bad_value(key, value);
  } else if (key == "pattern") {
    if (value == "cross") c.pattern_kind = BackdoorPattern::Kind::cross;
    else if (value == "square") c.pattern_kind = BackdoorPattern::Kind::square;
    else bad_value(key, value);
  } else if (key == "pattern_size") c.pattern_size = static_cast<int>(parse_int(key, value));
  else if (key == "pattern_row") c.pattern_row = static_cast<int>(parse_int(key, value));
  else if (key == "pattern_col") c.pattern_col = static_cast<int>(parse_int(key, value));
  else if (key == "pattern_intensity") c.pattern_intensity = parse_double(key, value);
  else if (key == "target_label") c.target_label = static_cast<int>(parse_int(key, value));
  else if (key == "poison_fraction") c.poison_fraction = parse_double(key, value);
  else if (key == "lle_mode") {
    if (value == "gradient") c.lle_mode = LleMode::gradient;
    else if (value == "surrogate") c.lle_mode = LleMode::surrogate;
    else bad_value(key, value);
  } else if (key == "lle_instances") c.lle_instances = static_cast<int>(parse_int(key, value));
  else if (key == "lle_perturbations")
    c.lle_perturbations = static_cast<int>(parse_int(key, value));
  else if (key == "lle_radius") c.lle_radius = parse_double(key, value);
  else if (key == "seed") c.seed = parse_u64(key, value);
  else fail(ErrorCode::format, "unknown config key '" + std::string(key) + "'");
}

void require(bool ok, const char* message) {
  if (!ok) fail(ErrorCode::invalid_argument, message);
}

}  // namespace

void ExperimentConfig::validate() const {
  require(n_clients >= 1, "n_clients must be at least 1");
  require(clients_per_round >= 1 && clients_per_round <= n_clients,
          "clients_per_round must lie in [1, n_clients]");
  require(n_adversarial >= 0 && n_poor >= 0, "client role counts must be non-negative");
  require(n_adversarial + n_poor <= n_clients,
          "adversarial plus poor clients exceed n_clients");
  require(n_adversarial + n_poor <= clients_per_round,
          "clients_per_round must cover all adversarial and poor clients");
  require(rounds >= 0, "rounds must be non-negative");
  require((attack == AttackChoice::none) == (n_adversarial == 0),
          "attack and n_adversarial must be set together");
  require(local_epochs >= 0, "local_epochs must be non-negative");
  require(local_lr > 0.0, "local_lr must be positive");
  require(batch_size >= 1, "batch_size must be at least 1");
  require(server_lr > 0.0, "server_lr must be positive");
  require(trim >= 0.0 && trim < 0.5, "trim must lie in [0, 0.5)");
  require(n_select >= 0 && n_select <= clients_per_round,
          "n_select must lie in [0, clients_per_round]");
  require(n_byz >= 0 && n_byz < clients_per_round,
          "n_byz must lie in [0, clients_per_round)");
  require(rlr_theta >= 0 && rlr_theta <= clients_per_round,
          "rlr_theta must lie in [0, clients_per_round]");
  require(clip_norm > 0.0, "clip_norm must be positive");
  require(noise_sigma >= 0.0, "noise_sigma must be non-negative");
  require(attack_scale > 0.0, "attack_scale must be positive");
  require(poor_skew >= 0.0 && poor_skew <= 1.0, "poor_skew must lie in [0, 1]");
  require(validation_fraction > 0.0 && validation_fraction < 1.0,
          "validation_fraction must lie in (0, 1)");
  require(poison_fraction > 0.0 && poison_fraction <= 1.0,
          "poison_fraction must lie in (0, 1]");
  require(pattern_size >= 0, "pattern_size must be non-negative");
  require(pattern_intensity >= 0.0 && pattern_intensity <= 1.0,
          "pattern_intensity must lie in [0, 1]");
  require(target_label >= 0, "target_label must be non-negative");
  require(lle_instances >= 1, "lle_instances must be at least 1");
  require(lle_perturbations >= 1, "lle_perturbations must be at least 1");
  require(lle_radius > 0.0, "lle_radius must be positive");
  require(train_limit >= 0, "train_limit must be non-negative");
  for (int h : hidden) require(h >= 1, "hidden layer sizes must be at least 1");
  if (dataset == DatasetSource::synth) {
    require(synth_classes >= 2, "synth_classes must be at least 2");
    require(synth_dims >= 1, "synth_dims must be at least 1");
    require(synth_per_class >= 1 && synth_test_per_class >= 1,
            "synthetic per-class sample counts must be at least 1");
    require(synth_spread > 0.0, "synth_spread must be positive");
    require(target_label < synth_classes, "target_label must name a valid class");
  } else if (dataset == DatasetSource::idx) {
    require(!idx_train_images.empty() && !idx_train_labels.empty() && !idx_test_images.empty() &&
                !idx_test_labels.empty(),
            "idx dataset needs all four file paths");
  } else {
    require(!cifar_train.empty() && !cifar_test.empty(),
            "cifar dataset needs train and test file lists");
  }
}

BackdoorPattern ExperimentConfig::pattern() const {
  BackdoorPattern p;
  p.kind = pattern_kind;
  p.size = pattern_size > 0 ? pattern_size
                            : (pattern_kind == BackdoorPattern::Kind::cross ? 3 : 5);
  p.row = pattern_row;
  p.col = pattern_col;
  p.intensity = pattern_intensity;
  p.target_label = target_label;
  return p;
}

const char* defense_name(Defense d) {
  switch (d) {
    case Defense::fedavg: return "fedavg";
    case Defense::median: return "median";
    case Defense::trimmed_mean: return "trimmed_mean";
    case Defense::multikrum: return "multikrum";
    case Defense::bulyan: return "bulyan";
    case Defense::norm_clip: return "norm_clip";
    case Defense::wdp: return "wdp";
    case Defense::rlr: return "rlr";
    case Defense::rab2def: return "rab2def";
    case Defense::ddaba: return "ddaba";
  }
  return "unknown";
}

const char* attack_name(AttackChoice a) {
  switch (a) {
    case AttackChoice::none: return "none";
    case AttackChoice::label_flip: return "label_flip";
    case AttackChoice::random_weights: return "random_weights";
    case AttackChoice::backdoor: return "backdoor";
  }
  return "unknown";
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream stream(text);
  std::string line;
  int line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    std::string_view view(line);
    size_t hash = view.find('#');
    if (hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    size_t eq = view.find('=');
    if (eq == std::string_view::npos)
      fail(ErrorCode::format, "config line " + std::to_string(line_no) + " is not key=value");
    auto key = trim(view.substr(0, eq));
    auto value = trim(view.substr(eq + 1));
    if (key.empty())
      fail(ErrorCode::format, "config line " + std::to_string(line_no) + " has an empty key");
    apply(cfg, key, value);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open config file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

}  // namespace rabdef
