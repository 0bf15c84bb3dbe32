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

// Configuration and the parse, optimize, select, execute pipeline shared by
// the CLI, the HTTP service and the C API.

#pragma once

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "sicql/engine.hpp"
#include "sicql/logical.hpp"
#include "sicql/model.hpp"
#include "sicql/physical.hpp"
#include "sicql/store.hpp"

namespace sicql {

struct ModelConfig {
  std::string kind = "fake";  // fake or http
  std::string script;         // fake model script path
  model::HttpModelConfig http;
};

struct Config {
  physical::PlanDefaults defaults;
  bool default_relevance = true;
  bool inject_prompts = true;
  std::set<std::string> decode_allowlist = {"domain-regex", "grounding-extractive"};
  ModelConfig model;
  std::string profile;  // path, optional
  std::string run_dir = "runs";
  std::string store;  // constraint store JSONL path, optional
  std::string host = "127.0.0.1";
  int port = 8080;
  uint64_t seed = 0;
  std::optional<Date> current_date;  // today (UTC) when unset
  int workers = 1;
  bool normalize_whitespace_grounding = false;
  automata::GuardPolicy stream_policy = automata::GuardPolicy::kBacktrack;
  std::string segment_terminators = ".!?";
  std::string web_root;  // static files served by `serve`, optional
};

/// Strict: unknown keys and ill-typed values are kInvalidArgument. Relative
/// paths resolve against `base_dir`.
Config parse_config(const std::string& json_text, const std::string& base_dir = "");
Config load_config(const std::string& path);
nlohmann::json config_to_json(const Config& c);

/// A fake model without a script has no completion rules and one default
/// judge, which is enough for planning.
std::unique_ptr<model::ModelClient> make_client(const Config& c);
physical::Capabilities capabilities_of(const Config& c, const model::ModelClient& client);
engine::EngineConfig engine_config(const Config& c);
physical::Profile load_profile(const Config& c);

struct PlannedQuery {
  lang::LogicalPlan parsed;
  lang::LogicalPlan optimized;
  physical::PhysicalPlan physical;
  std::vector<store::Conflict> conflicts;
  std::vector<std::string> warnings;
};

/// Parses with `catalog` when given, then optimizes and selects the
/// physical plan. Conflicts among the query's constraints and with the
/// store become warnings.
PlannedQuery plan_query(const std::string& query_text, const Config& config, const model::ModelClient& client,
                        const lang::Catalog* catalog = nullptr, const store::ConstraintStore* store = nullptr);

enum class ExplainLevel { kParsed, kLogical, kPhysical };
std::optional<ExplainLevel> explain_level_from_name(std::string_view name);

/// Plan text for the level followed by one "WARNING ..." line per warning.
std::string explain_query(const std::string& query_text, ExplainLevel level, const Config& config,
                          const model::ModelClient& client, const store::ConstraintStore* store = nullptr,
                          const std::string& data_dir = "");

struct RunResult {
  std::string run_id;
  std::string run_dir;
  std::string status;  // completed, aborted, failed
  std::string error;
  engine::RunOutcome outcome;
  std::vector<std::string> warnings;

  /// 0 completed, 2 aborted, 1 otherwise.
  int exit_code() const;
};

/// Content-derived id, suffixed "-n" when the directory already exists.
std::string default_run_id(const std::string& runs_root, const std::string& query_text, const std::string& data_digest,
                           const Config& config);

/// Loads the scanned table from `data_dir`, plans, executes and writes
/// `<run_dir>/<run_id>`. Planning errors throw; execution errors are
/// reported in the result and in run.json.
RunResult run_query(const std::string& query_text, const std::string& data_dir, const Config& config,
                    model::ModelClient& client, const store::ConstraintStore* store = nullptr,
                    const std::string& run_id = "", engine::ExemplarCache* cache = nullptr);

}  // namespace sicql
