#ifndef RABDEF_H
#define RABDEF_H

#ifdef __cplusplus
extern "C" {
#endif

/*
 * C interface to the federated-learning attack/defense simulator. All entry
 * points return a status code; on failure rabdef_last_error() describes the
 * problem for the calling thread. Handles are opaque and owned by the caller
 * through the matching *_free function.
 */

typedef enum rabdef_status {
  RABDEF_OK = 0,
  RABDEF_INVALID_ARGUMENT = 1,
  RABDEF_IO = 2,
  RABDEF_FORMAT = 3,
  RABDEF_RUNTIME = 4
} rabdef_status;

typedef enum rabdef_role {
  RABDEF_ROLE_POOR = 0,
  RABDEF_ROLE_ADVERSARIAL = 1
} rabdef_role;

typedef struct rabdef_config rabdef_config;
typedef struct rabdef_result rabdef_result;

const char* rabdef_version(void);

/* Message for the most recent failing call on this thread; empty if none. */
const char* rabdef_last_error(void);

/* Parses a key=value config file (or text) and validates it. */
rabdef_status rabdef_config_load(const char* path, rabdef_config** out);
rabdef_status rabdef_config_parse(const char* text, rabdef_config** out);
void rabdef_config_free(rabdef_config* config);

/* Runs the full experiment described by the config. Deterministic: the same
 * config always produces the same result. */
rabdef_status rabdef_experiment_run(const rabdef_config* config, rabdef_result** out);
void rabdef_result_free(rabdef_result* result);

int rabdef_result_round_count(const rabdef_result* result);
double rabdef_result_final_accuracy(const rabdef_result* result);
double rabdef_result_round_accuracy(const rabdef_result* result, int round);
/* -1 when the run has no backdoor task. */
double rabdef_result_round_backdoor_accuracy(const rabdef_result* result, int round);
/* Mean per-round count of discarded clients of the given role. */
double rabdef_result_discarded_mean(const rabdef_result* result, rabdef_role role);
/* Mean final accuracy over poor clients; -1 when the run has none. */
double rabdef_result_poor_accuracy_mean(const rabdef_result* result);

/* Writes rounds.csv, weights.csv and fairness.csv into the directory. */
rabdef_status rabdef_result_write(const rabdef_result* result, const char* out_dir);

/* Recomputes one participant's explanations for one round and writes PGM
 * images (inputs and per-instance importance maps) into the directory. */
rabdef_status rabdef_explain(const rabdef_config* config, int round, int client,
                             const char* out_dir);

/* Renders fairness.csv from the directory as an aligned text table. The
 * returned string is released with rabdef_string_free. */
rabdef_status rabdef_report_render(const char* in_dir, char** out_text);
void rabdef_string_free(char* text);

#ifdef __cplusplus
}
#endif

#endif
