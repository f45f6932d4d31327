#include "rabdef.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>
#include <utility>

#include "rabdef/config.hpp"
#include "rabdef/error.hpp"
#include "rabdef/report.hpp"
#include "rabdef/sim.hpp"

struct rabdef_config {
  rabdef::ExperimentConfig cfg;
};

struct rabdef_result {
  rabdef::ExperimentResult res;
  int n_clients = 0;
};

namespace {

thread_local std::string g_last_error;

rabdef_status map_code(rabdef::ErrorCode code) {
  switch (code) {
    case rabdef::ErrorCode::invalid_argument:
    case rabdef::ErrorCode::shape_mismatch:
    case rabdef::ErrorCode::empty_input:
    case rabdef::ErrorCode::insufficient_data:
      return RABDEF_INVALID_ARGUMENT;
    case rabdef::ErrorCode::format:
      return RABDEF_FORMAT;
    case rabdef::ErrorCode::io:
      return RABDEF_IO;
    case rabdef::ErrorCode::divergence:
    case rabdef::ErrorCode::degenerate_ordering:
      return RABDEF_RUNTIME;
  }
  return RABDEF_RUNTIME;
}

template <class Fn>
rabdef_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return RABDEF_OK;
  } catch (const rabdef::Error& e) {
    g_last_error = e.what();
    return map_code(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return RABDEF_RUNTIME;
  }
}

rabdef_status null_argument(const char* what) {
  g_last_error = std::string(what) + " must not be null";
  return RABDEF_INVALID_ARGUMENT;
}

}  // namespace

extern "C" {

const char* rabdef_version(void) { return "1.0.0"; }

const char* rabdef_last_error(void) { return g_last_error.c_str(); }

rabdef_status rabdef_config_load(const char* path, rabdef_config** out) {
  if (!path) return null_argument("path");
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] { *out = new rabdef_config{rabdef::load_config(path)}; });
}

rabdef_status rabdef_config_parse(const char* text, rabdef_config** out) {
  if (!text) return null_argument("text");
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] { *out = new rabdef_config{rabdef::parse_config(text)}; });
}

void rabdef_config_free(rabdef_config* config) { delete config; }

rabdef_status rabdef_experiment_run(const rabdef_config* config, rabdef_result** out) {
  if (!config) return null_argument("config");
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] {
    auto res = rabdef::run_experiment(config->cfg);
    *out = new rabdef_result{std::move(res), config->cfg.n_clients};
  });
}

void rabdef_result_free(rabdef_result* result) { delete result; }

int rabdef_result_round_count(const rabdef_result* result) {
  return result ? static_cast<int>(result->res.rounds.size()) : 0;
}

double rabdef_result_final_accuracy(const rabdef_result* result) {
  if (!result || result->res.rounds.empty()) return -1.0;
  return result->res.rounds.back().accuracy;
}

double rabdef_result_round_accuracy(const rabdef_result* result, int round) {
  if (!result || round < 0 || round >= static_cast<int>(result->res.rounds.size())) return -1.0;
  return result->res.rounds[round].accuracy;
}

double rabdef_result_round_backdoor_accuracy(const rabdef_result* result, int round) {
  if (!result || round < 0 || round >= static_cast<int>(result->res.rounds.size())) return -1.0;
  return result->res.rounds[round].backdoor_accuracy;
}

double rabdef_result_discarded_mean(const rabdef_result* result, rabdef_role role) {
  if (!result) return -1.0;
  return role == RABDEF_ROLE_POOR ? result->res.fairness.poor_mean
                                  : result->res.fairness.adversarial_mean;
}

double rabdef_result_poor_accuracy_mean(const rabdef_result* result) {
  if (!result || result->res.fairness.poor_accuracy.empty()) return -1.0;
  return result->res.fairness.poor_accuracy_mean;
}

rabdef_status rabdef_result_write(const rabdef_result* result, const char* out_dir) {
  if (!result) return null_argument("result");
  if (!out_dir) return null_argument("out_dir");
  return guarded([&] { rabdef::emit_reports(result->res, result->n_clients, out_dir); });
}

rabdef_status rabdef_explain(const rabdef_config* config, int round, int client,
                             const char* out_dir) {
  if (!config) return null_argument("config");
  if (!out_dir) return null_argument("out_dir");
  return guarded([&] {
    auto explanation = rabdef::explain_client(config->cfg, round, client);
    rabdef::emit_explanation(explanation, out_dir);
  });
}

rabdef_status rabdef_report_render(const char* in_dir, char** out_text) {
  if (!in_dir) return null_argument("in_dir");
  if (!out_text) return null_argument("out_text");
  *out_text = nullptr;
  return guarded([&] {
    std::string table = rabdef::render_fairness_report(in_dir);
    char* buffer = new char[table.size() + 1];
    std::memcpy(buffer, table.c_str(), table.size() + 1);
    *out_text = buffer;
  });
}

void rabdef_string_free(char* text) { delete[] text; }

}  // extern "C"
