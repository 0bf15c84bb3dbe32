// Copyright 2026 The sicql Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// C interface to the sicql engine. All strings are UTF-8. Strings returned
// through out-parameters are owned by the caller and released with
// sicql_string_free. On failure, sicql_last_error() describes the error of
// the most recent failing call on the calling thread.

#ifndef SICQL_SICQL_H_
#define SICQL_SICQL_H_

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define SICQL_API __declspec(dllexport)
#else
#define SICQL_API __attribute__((visibility("default")))
#endif

typedef enum {
  SICQL_OK = 0,
  SICQL_ERR_INVALID_ARGUMENT = 1,
  SICQL_ERR_PARSE = 2,
  SICQL_ERR_PLAN = 3,
  SICQL_ERR_ESTIMATE = 4,
  SICQL_ERR_INFEASIBLE = 5,
  SICQL_ERR_CHECK = 6,
  SICQL_ERR_MODEL = 7,
  SICQL_ERR_UNSUPPORTED = 8,
  SICQL_ERR_IO = 9,
  SICQL_ERR_NOT_FOUND = 10,
  SICQL_ERR_CONFLICT = 11,
  SICQL_ERR_ABORTED = 12,
  SICQL_ERR_INTERNAL = 13,
} sicql_status;

/// Engine handle: configuration, model client and constraint store.
typedef struct sicql_engine sicql_engine;

SICQL_API const char* sicql_version(void);
SICQL_API const char* sicql_status_name(sicql_status status);
SICQL_API const char* sicql_last_error(void);
SICQL_API void sicql_string_free(char* s);

/// `config_json` may be NULL for defaults. Relative paths in it resolve
/// against `base_dir` (may be NULL).
SICQL_API sicql_status sicql_engine_create(const char* config_json, const char* base_dir, sicql_engine** out);
SICQL_API sicql_status sicql_engine_create_from_file(const char* config_path, sicql_engine** out);
SICQL_API void sicql_engine_destroy(sicql_engine* engine);

/// Effective configuration as JSON.
SICQL_API sicql_status sicql_engine_config(sicql_engine* engine, char** out_json);

/// `level` is "parsed", "logical" or "physical". `data_dir` may be NULL;
/// when given, the scanned table's columns are resolved from it.
SICQL_API sicql_status sicql_explain(sicql_engine* engine, const char* query, const char* level, const char* data_dir,
                                     char** out_text);

/// Runs `query` over `data_dir` and writes a run directory. `run_id` may
/// be NULL. `out_json` receives {run_id, run_dir, status, error, totals,
/// warnings}; `out_exit_code` 0 completed, 2 aborted, 1 failed. A run that
/// executes but aborts or fails still returns SICQL_OK.
SICQL_API sicql_status sicql_run(sicql_engine* engine, const char* query, const char* data_dir, const char* run_id,
                                 char** out_json, int* out_exit_code);

/// `metadata_json` may be NULL: {id?, description?, tags?, provenance?, soft?}.
SICQL_API sicql_status sicql_store_register(sicql_engine* engine, const char* constraint_text,
                                            const char* metadata_json, char** out_id);
SICQL_API sicql_status sicql_store_recommend(sicql_engine* engine, const char* query, int k, char** out_json);
SICQL_API sicql_status sicql_store_conflicts(sicql_engine* engine, char** out_json);

/// Dispatches one HTTP API request. `query_string` and `body` may be NULL.
/// Errors are reported in the response, so this fails only on bad arguments.
SICQL_API sicql_status sicql_handle_request(sicql_engine* engine, const char* method, const char* path,
                                            const char* query_string, const char* body, int* out_http_status,
                                            char** out_json);

#ifdef __cplusplus
}  // extern "C"
#endif

#endif  // SICQL_SICQL_H_
