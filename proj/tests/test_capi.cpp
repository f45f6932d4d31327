#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <string>

#include "rabdef.h"

namespace fs = std::filesystem;

namespace {

const char* kTinyConfig =
    "synth_classes = 4\n"
    "synth_dims = 16\n"
    "synth_per_class = 120\n"
    "synth_test_per_class = 40\n"
    "n_clients = 8\n"
    "clients_per_round = 8\n"
    "rounds = 2\n"
    "hidden = 8\n"
    "local_epochs = 1\n"
    "seed = 5\n";

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("rabdef_capi_" + tag);
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("version and error channel start clean") {
  REQUIRE(rabdef_version() != nullptr);
  CHECK(std::strlen(rabdef_version()) > 0);
  REQUIRE(rabdef_last_error() != nullptr);
}

TEST_CASE("config parsing distinguishes format and argument errors") {
  rabdef_config* config = nullptr;
  CHECK(rabdef_config_parse("no equals sign here\n", &config) == RABDEF_FORMAT);
  CHECK(config == nullptr);
  CHECK(std::strlen(rabdef_last_error()) > 0);

  CHECK(rabdef_config_parse("unknown_key = 3\n", &config) == RABDEF_FORMAT);
  CHECK(std::string(rabdef_last_error()).find("unknown_key") != std::string::npos);

  CHECK(rabdef_config_parse(nullptr, &config) == RABDEF_INVALID_ARGUMENT);
  CHECK(rabdef_config_parse("rounds = 1\n", nullptr) == RABDEF_INVALID_ARGUMENT);

  CHECK(rabdef_config_load("/nonexistent/rabdef.conf", &config) == RABDEF_IO);

  REQUIRE(rabdef_config_parse(kTinyConfig, &config) == RABDEF_OK);
  REQUIRE(config != nullptr);
  rabdef_config_free(config);
  rabdef_config_free(nullptr);
}

TEST_CASE("experiments run through the C interface") {
  rabdef_config* config = nullptr;
  REQUIRE(rabdef_config_parse(kTinyConfig, &config) == RABDEF_OK);

  rabdef_result* result = nullptr;
  CHECK(rabdef_experiment_run(nullptr, &result) == RABDEF_INVALID_ARGUMENT);
  REQUIRE(rabdef_experiment_run(config, &result) == RABDEF_OK);
  REQUIRE(result != nullptr);

  CHECK(rabdef_result_round_count(result) == 2);
  double final_acc = rabdef_result_final_accuracy(result);
  CHECK(final_acc >= 0.0);
  CHECK(final_acc <= 1.0);
  CHECK(rabdef_result_round_accuracy(result, 1) == final_acc);
  CHECK(rabdef_result_round_accuracy(result, 5) == -1.0);
  CHECK(rabdef_result_round_backdoor_accuracy(result, 0) == -1.0);
  CHECK(rabdef_result_discarded_mean(result, RABDEF_ROLE_ADVERSARIAL) == 0.0);
  CHECK(rabdef_result_poor_accuracy_mean(result) == -1.0);

  SUBCASE("results serialize to the report files") {
    TempDir dir("write");
    REQUIRE(rabdef_result_write(result, dir.path.c_str()) == RABDEF_OK);
    CHECK(fs::exists(dir.path / "rounds.csv"));
    CHECK(fs::exists(dir.path / "weights.csv"));
    CHECK(fs::exists(dir.path / "fairness.csv"));

    char* text = nullptr;
    REQUIRE(rabdef_report_render(dir.path.c_str(), &text) == RABDEF_OK);
    REQUIRE(text != nullptr);
    CHECK(std::string(text).find("adversarial_discard_mean") != std::string::npos);
    rabdef_string_free(text);
    rabdef_string_free(nullptr);
  }

  rabdef_result_free(result);
  rabdef_result_free(nullptr);
  rabdef_config_free(config);
}

TEST_CASE("determinism holds across the C boundary") {
  rabdef_config* config = nullptr;
  REQUIRE(rabdef_config_parse(kTinyConfig, &config) == RABDEF_OK);
  rabdef_result* a = nullptr;
  rabdef_result* b = nullptr;
  REQUIRE(rabdef_experiment_run(config, &a) == RABDEF_OK);
  REQUIRE(rabdef_experiment_run(config, &b) == RABDEF_OK);
  CHECK(rabdef_result_final_accuracy(a) == rabdef_result_final_accuracy(b));
  CHECK(rabdef_result_round_accuracy(a, 0) == rabdef_result_round_accuracy(b, 0));
  rabdef_result_free(a);
  rabdef_result_free(b);
  rabdef_config_free(config);
}

TEST_CASE("explanations render to image files") {
  rabdef_config* config = nullptr;
  REQUIRE(rabdef_config_parse(kTinyConfig, &config) == RABDEF_OK);

  TempDir dir("explain");
  CHECK(rabdef_explain(config, 99, 0, dir.path.c_str()) == RABDEF_INVALID_ARGUMENT);
  CHECK(rabdef_explain(config, 0, 0, nullptr) == RABDEF_INVALID_ARGUMENT);
  REQUIRE(rabdef_explain(config, 1, 3, dir.path.c_str()) == RABDEF_OK);

  int inputs = 0;
  int maps = 0;
  for (const auto& entry : fs::directory_iterator(dir.path)) {
    std::string name = entry.path().filename().string();
    REQUIRE(entry.path().extension() == ".pgm");
    if (name.rfind("instance_", 0) == 0) ++inputs;
    if (name.rfind("explanation_round1_client3_", 0) == 0) ++maps;
  }
  CHECK(inputs > 0);
  CHECK(inputs == maps);
  rabdef_config_free(config);
}

TEST_CASE("report rendering surfaces io failures") {
  char* text = nullptr;
  CHECK(rabdef_report_render("/nonexistent/rabdef_dir", &text) == RABDEF_IO);
  CHECK(text == nullptr);
  CHECK(rabdef_report_render(nullptr, &text) == RABDEF_INVALID_ARGUMENT);
}
