#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "rabdef.h"

namespace {

int report_failure(const char* stage) {
  std::fprintf(stderr, "%s: %s\n", stage, rabdef_last_error());
  return 1;
}

int cmd_run(const std::string& config_path, const std::string& out_dir) {
  rabdef_config* config = nullptr;
  if (rabdef_config_load(config_path.c_str(), &config) != RABDEF_OK)
    return report_failure("loading config failed");

  rabdef_result* result = nullptr;
  if (rabdef_experiment_run(config, &result) != RABDEF_OK) {
    rabdef_config_free(config);
    return report_failure("experiment failed");
  }

  int rc = 0;
  if (rabdef_result_write(result, out_dir.c_str()) != RABDEF_OK) {
    rc = report_failure("writing reports failed");
  } else {
    int rounds = rabdef_result_round_count(result);
    std::printf("rounds: %d\n", rounds);
    if (rounds > 0) {
      std::printf("final accuracy: %.6f\n", rabdef_result_final_accuracy(result));
      double backdoor = rabdef_result_round_backdoor_accuracy(result, rounds - 1);
      if (backdoor >= 0.0) std::printf("final backdoor accuracy: %.6f\n", backdoor);
    }
    std::printf("reports written to %s\n", out_dir.c_str());
  }
  rabdef_result_free(result);
  rabdef_config_free(config);
  return rc;
}

int cmd_explain(const std::string& config_path, int round, int client,
                const std::string& out_dir) {
  rabdef_config* config = nullptr;
  if (rabdef_config_load(config_path.c_str(), &config) != RABDEF_OK)
    return report_failure("loading config failed");

  int rc = 0;
  if (rabdef_explain(config, round, client, out_dir.c_str()) != RABDEF_OK) {
    rc = report_failure("explanation failed");
  } else {
    std::printf("explanations written to %s\n", out_dir.c_str());
  }
  rabdef_config_free(config);
  return rc;
}

int cmd_report(const std::string& in_dir) {
  char* table = nullptr;
  if (rabdef_report_render(in_dir.c_str(), &table) != RABDEF_OK)
    return report_failure("reading reports failed");
  std::fputs(table, stdout);
  rabdef_string_free(table);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"federated learning attack/defense simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string in_dir;
  int round = 0;
  int client = 0;

  CLI::App* run = app.add_subcommand("run", "run an experiment and write CSV reports");
  run->add_option("--config", config_path, "experiment config file")->required();
  run->add_option("--out", out_dir, "output directory")->required();

  CLI::App* explain = app.add_subcommand(
      "explain", "write explanation images for one client in one round");
  explain->add_option("--config", config_path, "experiment config file")->required();
  explain->add_option("--round", round, "round index")->required();
  explain->add_option("--client", client, "client id")->required();
  explain->add_option("--out", out_dir, "output directory")->required();

  CLI::App* report = app.add_subcommand("report", "print the fairness summary table");
  report->add_option("--in", in_dir, "directory holding fairness.csv")->required();

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return cmd_run(config_path, out_dir);
  if (explain->parsed()) return cmd_explain(config_path, round, client, out_dir);
  return cmd_report(in_dir);
}
