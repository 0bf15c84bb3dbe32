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

#include "sicql/sicql.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <mutex>
#include <string>

#include "sicql/error.hpp"
#include "sicql/pipeline.hpp"
#include "sicql/relation.hpp"
#include "sicql/service.hpp"
#include "sicql/store.hpp"

struct sicql_engine {
  sicql::Config config;
  std::unique_ptr<sicql::model::ModelClient> client;
  std::shared_ptr<sicql::store::ConstraintStore> store;
  std::unique_ptr<sicql::engine::ExemplarCache> cache;
  std::once_flag service_once;
  std::unique_ptr<sicql::service::Service> service;
};

namespace {

thread_local std::string g_last_error;

sicql_status to_status(sicql::ErrorCode code) {
  return static_cast<sicql_status>(static_cast<int>(code) + 1);
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <typename F>
sicql_status guarded(F&& fn) {
  try {
    fn();
    g_last_error.clear();
    return SICQL_OK;
  } catch (const sicql::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SICQL_ERR_INTERNAL;
  }
}

sicql_status missing(const char* what) {
  g_last_error = std::string(what) + " must not be NULL";
  return SICQL_ERR_INVALID_ARGUMENT;
}

sicql::model::ModelClient& client_of(sicql_engine* e) {
  if (!e->client) e->client = sicql::make_client(e->config);
  return *e->client;
}

void init(sicql_engine* e) {
  e->store = std::make_shared<sicql::store::ConstraintStore>(e->config.store);
  e->cache = std::make_unique<sicql::engine::ExemplarCache>();
}

}  // namespace

extern "C" {

const char* sicql_version(void) { return "0.1.0"; }

const char* sicql_status_name(sicql_status status) {
  if (status == SICQL_OK) return "ok";
  if (status < SICQL_OK || status > SICQL_ERR_INTERNAL) return "unknown";
  return sicql::error_code_name(static_cast<sicql::ErrorCode>(static_cast<int>(status) - 1));
}

const char* sicql_last_error(void) { return g_last_error.c_str(); }

void sicql_string_free(char* s) { std::free(s); }

sicql_status sicql_engine_create(const char* config_json, const char* base_dir, sicql_engine** out) {
  if (!out) return missing("out");
  *out = nullptr;
  return guarded([&] {
    auto e = std::make_unique<sicql_engine>();
    if (config_json) e->config = sicql::parse_config(config_json, base_dir ? base_dir : "");
    init(e.get());
    *out = e.release();
  });
}

sicql_status sicql_engine_create_from_file(const char* config_path, sicql_engine** out) {
  if (!config_path) return missing("config_path");
  if (!out) return missing("out");
  *out = nullptr;
  return guarded([&] {
    auto e = std::make_unique<sicql_engine>();
    e->config = sicql::load_config(config_path);
    init(e.get());
    *out = e.release();
  });
}

void sicql_engine_destroy(sicql_engine* engine) { delete engine; }

sicql_status sicql_engine_config(sicql_engine* engine, char** out_json) {
  if (!engine) return missing("engine");
  if (!out_json) return missing("out_json");
  return guarded([&] { *out_json = dup(sicql::config_to_json(engine->config).dump(2)); });
}

sicql_status sicql_explain(sicql_engine* engine, const char* query, const char* level, const char* data_dir,
                           char** out_text) {
  if (!engine) return missing("engine");
  if (!query) return missing("query");
  if (!out_text) return missing("out_text");
  return guarded([&] {
    auto lv = sicql::explain_level_from_name(level ? level : "logical");
    if (!lv) throw sicql::Error(sicql::ErrorCode::kInvalidArgument, "level must be parsed, logical or physical");
    *out_text = dup(sicql::explain_query(query, *lv, engine->config, client_of(engine), engine->store.get(),
                                         data_dir ? data_dir : ""));
  });
}

sicql_status sicql_run(sicql_engine* engine, const char* query, const char* data_dir, const char* run_id,
                       char** out_json, int* out_exit_code) {
  if (!engine) return missing("engine");
  if (!query) return missing("query");
  if (!data_dir) return missing("data_dir");
  return guarded([&] {
    auto r = sicql::run_query(query, data_dir, engine->config, client_of(engine), engine->store.get(),
                              run_id ? run_id : "", engine->cache.get());
    nlohmann::json totals = {{"cost", r.outcome.totals.cost},
                             {"tuples_in", r.outcome.totals.tuples_in},
                             {"tuples_out", r.outcome.totals.tuples_out},
                             {"flagged", r.outcome.totals.flagged},
                             {"op_invocations", r.outcome.totals.op_invocations},
                             {"constraint_invocations", r.outcome.totals.constraint_invocations}};
    nlohmann::json j = {{"run_id", r.run_id}, {"run_dir", r.run_dir}, {"status", r.status},
                        {"error", r.error},   {"totals", totals},     {"warnings", r.warnings}};
    if (out_json) *out_json = dup(j.dump());
    if (out_exit_code) *out_exit_code = r.exit_code();
  });
}

sicql_status sicql_store_register(sicql_engine* engine, const char* constraint_text, const char* metadata_json,
                                  char** out_id) {
  if (!engine) return missing("engine");
  if (!constraint_text) return missing("constraint_text");
  return guarded([&] {
    sicql::store::Metadata meta;
    if (metadata_json) {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(metadata_json);
        for (auto it = j.begin(); it != j.end(); ++it) {
          const std::string& k = it.key();
          if (k == "id") meta.id = it->get<std::string>();
          else if (k == "description") meta.description = it->get<std::string>();
          else if (k == "tags") meta.tags = it->get<std::vector<std::string>>();
          else if (k == "provenance") meta.provenance = it->get<std::string>();
          else if (k == "soft") meta.soft = it->get<bool>();
          else throw sicql::Error(sicql::ErrorCode::kInvalidArgument, "unknown metadata key '" + k + "'");
        }
      } catch (const nlohmann::json::exception& e) {
        throw sicql::Error(sicql::ErrorCode::kInvalidArgument, std::string("metadata: ") + e.what());
      }
    }
    std::string id = engine->store->register_constraint(constraint_text, meta);
    if (out_id) *out_id = dup(id);
  });
}

sicql_status sicql_store_recommend(sicql_engine* engine, const char* query, int k, char** out_json) {
  if (!engine) return missing("engine");
  if (!query) return missing("query");
  if (!out_json) return missing("out_json");
  if (k < 0) {
    g_last_error = "k must be >= 0";
    return SICQL_ERR_INVALID_ARGUMENT;
  }
  return guarded([&] {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : engine->store->recommend(query, static_cast<size_t>(k))) arr.push_back(sicql::store::to_json(r));
    *out_json = dup(nlohmann::json{{"recommendations", arr}}.dump());
  });
}

sicql_status sicql_store_conflicts(sicql_engine* engine, char** out_json) {
  if (!engine) return missing("engine");
  if (!out_json) return missing("out_json");
  return guarded([&] {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : engine->store->conflicts()) arr.push_back(sicql::store::to_json(c));
    *out_json = dup(nlohmann::json{{"conflicts", arr}}.dump());
  });
}

sicql_status sicql_handle_request(sicql_engine* engine, const char* method, const char* path, const char* query_string,
                                  const char* body, int* out_http_status, char** out_json) {
  if (!engine) return missing("engine");
  if (!method) return missing("method");
  if (!path) return missing("path");
  if (!out_http_status) return missing("out_http_status");
  if (!out_json) return missing("out_json");
  return guarded([&] {
    std::call_once(engine->service_once, [&] {
      engine->service = std::make_unique<sicql::service::Service>(engine->config.run_dir, engine->store);
    });
    auto resp = engine->service->handle(method, path, sicql::service::parse_query_string(query_string ? query_string : ""),
                                        body ? body : "");
    *out_http_status = resp.status;
    *out_json = dup(resp.body);
  });
}

}  // extern "C"
