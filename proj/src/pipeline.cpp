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

#include "sicql/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>

#include "sicql/error.hpp"
#include "sicql/format.hpp"
#include "sicql/parser.hpp"
#include "sicql/relation.hpp"

namespace sicql {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> known) {
  if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "config: " + where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw Error(ErrorCode::kInvalidArgument, "config: unknown key '" + where + it.key() + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::kInvalidArgument, std::string("config: '") + where + key + "' has the wrong type");
  }
}

std::string resolve(const std::string& path, const std::string& base) {
  if (path.empty() || base.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base) / path).lexically_normal().string();
}

std::string guard_policy_name(automata::GuardPolicy p) {
  return p == automata::GuardPolicy::kFail ? "fail" : "backtrack";
}

}  // namespace

Config parse_config(const std::string& json_text, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("config: ") + e.what());
  }
  reject_unknown(j, "",
                 {"defaults", "model", "profile", "run_dir", "store", "host", "port", "seed", "current_date", "workers",
                  "normalize_whitespace_grounding", "stream_policy", "segment_terminators", "web_root"});
  Config c;
  if (auto it = j.find("defaults"); it != j.end()) {
    const json& d = *it;
    reject_unknown(d, "defaults.",
                   {"retry", "failure_mode", "default_relevance", "inject_prompts", "decode_allowlist", "selectivity",
                    "semantic_op_cost", "expression_op_cost"});
    read(d, "retry", c.defaults.retry, "defaults.");
    if (c.defaults.retry < 0) throw Error(ErrorCode::kInvalidArgument, "config: defaults.retry must be >= 0");
    std::string mode;
    read(d, "failure_mode", mode, "defaults.");
    if (!mode.empty()) {
      auto m = lang::failure_mode_from_name(mode);
      if (!m) throw Error(ErrorCode::kInvalidArgument, "config: unknown failure mode '" + mode + "'");
      c.defaults.mode = *m;
    }
    read(d, "default_relevance", c.default_relevance, "defaults.");
    read(d, "inject_prompts", c.inject_prompts, "defaults.");
    read(d, "decode_allowlist", c.decode_allowlist, "defaults.");
    for (const auto& k : c.decode_allowlist)
      if (k != "domain-regex" && k != "domain-type" && k != "domain-set" && k != "domain-length" &&
          k != "grounding-extractive")
        throw Error(ErrorCode::kInvalidArgument, "config: unknown decode mask kind '" + k + "'");
    read(d, "selectivity", c.defaults.selectivity, "defaults.");
    read(d, "semantic_op_cost", c.defaults.semantic_op_cost, "defaults.");
    read(d, "expression_op_cost", c.defaults.expression_op_cost, "defaults.");
  }
  if (auto it = j.find("model"); it != j.end()) {
    const json& m = *it;
    reject_unknown(m, "model.",
                   {"kind", "script", "base_url", "model", "api_key_env", "timeout_s", "judge_name", "judge_cost",
                    "judge_precision", "judge_recall", "complete_cost"});
    read(m, "kind", c.model.kind, "model.");
    if (c.model.kind != "fake" && c.model.kind != "http")
      throw Error(ErrorCode::kInvalidArgument, "config: model.kind must be 'fake' or 'http'");
    read(m, "script", c.model.script, "model.");
    c.model.script = resolve(c.model.script, base_dir);
    read(m, "base_url", c.model.http.base_url, "model.");
    read(m, "model", c.model.http.model, "model.");
    read(m, "api_key_env", c.model.http.api_key_env, "model.");
    read(m, "timeout_s", c.model.http.timeout_s, "model.");
    read(m, "judge_name", c.model.http.judge_name, "model.");
    read(m, "judge_cost", c.model.http.judge_cost, "model.");
    read(m, "judge_precision", c.model.http.judge_precision, "model.");
    read(m, "judge_recall", c.model.http.judge_recall, "model.");
    read(m, "complete_cost", c.model.http.complete_cost, "model.");
  }
  read(j, "profile", c.profile, "");
  c.profile = resolve(c.profile, base_dir);
  read(j, "run_dir", c.run_dir, "");
  c.run_dir = resolve(c.run_dir, base_dir);
  read(j, "store", c.store, "");
  c.store = resolve(c.store, base_dir);
  read(j, "host", c.host, "");
  read(j, "port", c.port, "");
  if (c.port < 0 || c.port > 65535) throw Error(ErrorCode::kInvalidArgument, "config: port out of range");
  read(j, "seed", c.seed, "");
  std::string date;
  read(j, "current_date", date, "");
  if (!date.empty()) {
    c.current_date = Date::parse(date);
    if (!c.current_date) throw Error(ErrorCode::kInvalidArgument, "config: current_date must be YYYY-MM-DD");
  }
  read(j, "workers", c.workers, "");
  if (c.workers < 1) throw Error(ErrorCode::kInvalidArgument, "config: workers must be >= 1");
  read(j, "normalize_whitespace_grounding", c.normalize_whitespace_grounding, "");
  std::string policy;
  read(j, "stream_policy", policy, "");
  if (policy == "fail") {
    c.stream_policy = automata::GuardPolicy::kFail;
  } else if (!policy.empty() && policy != "backtrack") {
    throw Error(ErrorCode::kInvalidArgument, "config: stream_policy must be 'backtrack' or 'fail'");
  }
  read(j, "segment_terminators", c.segment_terminators, "");
  read(j, "web_root", c.web_root, "");
  c.web_root = resolve(c.web_root, base_dir);
  return c;
}

Config load_config(const std::string& path) {
  return parse_config(read_text_file(path), fs::path(path).parent_path().string());
}

json config_to_json(const Config& c) {
  json j = {{"defaults",
             {{"retry", c.defaults.retry},
              {"failure_mode", lang::failure_mode_name(c.defaults.mode)},
              {"default_relevance", c.default_relevance},
              {"inject_prompts", c.inject_prompts},
              {"decode_allowlist", c.decode_allowlist},
              {"selectivity", c.defaults.selectivity},
              {"semantic_op_cost", c.defaults.semantic_op_cost},
              {"expression_op_cost", c.defaults.expression_op_cost}}},
            {"model",
             {{"kind", c.model.kind},
              {"script", c.model.script},
              {"base_url", c.model.http.base_url},
              {"model", c.model.http.model},
              {"api_key_env", c.model.http.api_key_env},
              {"timeout_s", c.model.http.timeout_s},
              {"judge_name", c.model.http.judge_name},
              {"judge_cost", c.model.http.judge_cost},
              {"judge_precision", c.model.http.judge_precision},
              {"judge_recall", c.model.http.judge_recall},
              {"complete_cost", c.model.http.complete_cost}}},
            {"profile", c.profile},
            {"run_dir", c.run_dir},
            {"store", c.store},
            {"host", c.host},
            {"port", c.port},
            {"seed", c.seed},
            {"workers", c.workers},
            {"normalize_whitespace_grounding", c.normalize_whitespace_grounding},
            {"stream_policy", guard_policy_name(c.stream_policy)},
            {"segment_terminators", c.segment_terminators},
            {"web_root", c.web_root}};
  if (c.current_date) j["current_date"] = c.current_date->to_string();
  return j;
}

std::unique_ptr<model::ModelClient> make_client(const Config& c) {
  if (c.model.kind == "http") return std::make_unique<model::HttpModel>(c.model.http);
  if (c.model.script.empty()) return std::make_unique<model::FakeModel>(model::FakeModelScript{});
  return std::make_unique<model::FakeModel>(model::parse_fake_script(read_text_file(c.model.script)));
}

physical::Capabilities capabilities_of(const Config& c, const model::ModelClient& client) {
  physical::Capabilities caps;
  caps.judges = client.judges();
  caps.token_masking = client.token_level();
  caps.decode_allowlist = c.decode_allowlist;
  return caps;
}

namespace {

Date today_utc() {
  auto days = std::chrono::floor<std::chrono::days>(std::chrono::system_clock::now());
  std::chrono::year_month_day ymd{days};
  return Date{static_cast<int>(ymd.year()), static_cast<int>(static_cast<unsigned>(ymd.month())),
              static_cast<int>(static_cast<unsigned>(ymd.day()))};
}

}  // namespace

engine::EngineConfig engine_config(const Config& c) {
  engine::EngineConfig e;
  e.defaults = c.defaults;
  e.current_date = c.current_date.value_or(today_utc());
  e.seed = c.seed;
  e.workers = c.workers;
  e.normalize_whitespace_grounding = c.normalize_whitespace_grounding;
  e.segmenter.terminators = c.segment_terminators;
  e.stream_policy = c.stream_policy;
  return e;
}

physical::Profile load_profile(const Config& c) {
  if (c.profile.empty()) return {};
  return physical::parse_profile(read_text_file(c.profile));
}

PlannedQuery plan_query(const std::string& query_text, const Config& config, const model::ModelClient& client,
                        const lang::Catalog* catalog, const store::ConstraintStore* store) {
  PlannedQuery q;
  q.parsed = lang::parse_query(query_text, catalog);
  physical::Profile profile = load_profile(config);

  logical::LogicalOptions opts;
  opts.default_relevance = config.default_relevance;
  opts.inject_prompts = config.inject_prompts;
  opts.stats.defaults.selectivity = config.defaults.selectivity;
  for (const auto& [id, cp] : profile.constraints) {
    logical::ConstraintStats s;
    s.selectivity = config.defaults.selectivity;
    if (auto v = cp.violation()) s.selectivity = 1.0 - *v;
    if (!cp.candidates.empty() && cp.candidates.front().cost) s.cost = *cp.candidates.front().cost;
    opts.stats.by_id[id] = s;
  }
  q.optimized = logical::optimize(q.parsed, opts);
  profile = physical::fill_profile_defaults(q.optimized, profile, config.defaults);
  q.physical = physical::select_plan(q.optimized, profile, capabilities_of(config, client), config.defaults);

  std::vector<lang::ConstraintDecl> declared;
  for (const auto& s : q.optimized.stages)
    if (s.kind == lang::StageKind::kAssert && s.constraint.origin == lang::Origin::kDeclared) declared.push_back(s.constraint);
  q.conflicts = store ? store->conflicts_with(declared) : store::detect_conflicts(declared);
  for (const auto& c : q.conflicts)
    q.warnings.push_back(std::string("conflict ") + store::conflict_kind_name(c.kind) + " between " + c.first +
                         " and " + c.second + ": " + c.explanation);
  return q;
}

std::optional<ExplainLevel> explain_level_from_name(std::string_view name) {
  if (name == "parsed") return ExplainLevel::kParsed;
  if (name == "logical") return ExplainLevel::kLogical;
  if (name == "physical") return ExplainLevel::kPhysical;
  return std::nullopt;
}

namespace {

lang::Catalog catalog_for(const std::string& query_text, const std::string& data_dir, Relation* loaded) {
  lang::LogicalPlan probe = lang::parse_query(query_text);
  const std::string& table = probe.stages.front().table;
  Relation rel = load_table(data_dir, table);
  lang::Catalog cat;
  cat.tables[table] = relation_schema(rel);
  if (loaded) *loaded = std::move(rel);
  return cat;
}

}  // namespace

std::string explain_query(const std::string& query_text, ExplainLevel level, const Config& config,
                          const model::ModelClient& client, const store::ConstraintStore* store,
                          const std::string& data_dir) {
  std::optional<lang::Catalog> cat;
  if (!data_dir.empty()) cat = catalog_for(query_text, data_dir, nullptr);
  PlannedQuery q = plan_query(query_text, config, client, cat ? &*cat : nullptr, store);
  std::string out;
  switch (level) {
    case ExplainLevel::kParsed: out = lang::format_logical(q.parsed); break;
    case ExplainLevel::kLogical: out = lang::format_logical(q.optimized); break;
    case ExplainLevel::kPhysical: out = physical::format_physical(q.physical, config.defaults); break;
  }
  if (!out.empty() && out.back() != '\n') out += '\n';
  for (const auto& w : q.warnings) out += "WARNING " + w + "\n";
  return out;
}

int RunResult::exit_code() const {
  if (status == "completed") return 0;
  if (status == "aborted") return 2;
  return 1;
}

std::string default_run_id(const std::string& runs_root, const std::string& query_text, const std::string& data_digest,
                           const Config& config) {
  json cj = config_to_json(config);
  cj.erase("run_dir");
  cj.erase("port");
  cj.erase("host");
  char buf[32];
  std::snprintf(buf, sizeof buf, "r%08llx",
                static_cast<unsigned long long>(model::content_hash({query_text, data_digest, cj.dump()}) & 0xffffffffULL));
  std::string base = buf;
  std::string id = base;
  for (int n = 2; fs::exists(fs::path(runs_root) / id); ++n) id = base + "-" + std::to_string(n);
  return id;
}

RunResult run_query(const std::string& query_text, const std::string& data_dir, const Config& config,
                    model::ModelClient& client, const store::ConstraintStore* store, const std::string& run_id,
                    engine::ExemplarCache* cache) {
  Relation data;
  lang::Catalog cat = catalog_for(query_text, data_dir, &data);
  PlannedQuery q = plan_query(query_text, config, client, &cat, store);

  engine::EngineConfig ecfg = engine_config(config);
  if (store)
    for (const auto& s : q.optimized.stages)
      if (s.kind == lang::StageKind::kAssert) {
        for (const auto& sc : store->list())
          if (sc.soft && sc.id == s.constraint.id) ecfg.soft_constraints.insert(sc.id);
      }

  fs::create_directories(config.run_dir);
  RunResult result;
  result.run_id = run_id.empty() ? default_run_id(config.run_dir, query_text, results_jsonl(data), config) : run_id;
  obs::RunWriter writer(config.run_dir, result.run_id);
  result.run_dir = writer.dir();
  result.warnings = q.warnings;

  obs::RunRecord rec;
  rec.run_id = result.run_id;
  rec.query = query_text;
  rec.logical_plan = lang::format_logical(q.optimized);
  rec.physical_plan = physical::format_physical(q.physical, config.defaults);
  rec.started_at = obs::utc_now_iso8601();
  rec.seed = config.seed;
  rec.current_date = ecfg.current_date.to_string();
  rec.warnings = q.warnings;
  writer.write_run(rec);

  std::map<std::string, Relation> datasets;
  datasets[q.parsed.stages.front().table] = std::move(data);
  engine::Engine eng(client, ecfg, cache);
  result.outcome = eng.execute(q.physical, datasets, &writer);
  result.status = result.outcome.status;
  result.error = result.outcome.error;

  if (result.status == "completed") writer.write_results(results_jsonl(result.outcome.output));
  rec.status = result.status;
  rec.error = result.error;
  rec.totals = result.outcome.totals;
  rec.stages = result.outcome.stages;
  rec.finished_at = obs::utc_now_iso8601();
  writer.flush();
  writer.write_run(rec);
  return result;
}

}  // namespace sicql
