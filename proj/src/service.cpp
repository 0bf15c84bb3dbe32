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

#include "sicql/service.hpp"

#include <charconv>

#include "sicql/error.hpp"

namespace sicql::service {

using nlohmann::json;

namespace {

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

std::string url_decode(std::string_view s) {
  std::string out;
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '+') {
      out += ' ';
    } else if (s[i] == '%' && i + 2 < s.size() && hex_value(s[i + 1]) >= 0 && hex_value(s[i + 2]) >= 0) {
      out += static_cast<char>(hex_value(s[i + 1]) * 16 + hex_value(s[i + 2]));
      i += 2;
    } else {
      out += s[i];
    }
  }
  return out;
}

int64_t parse_int(const std::string& text, const std::string& what) {
  int64_t v = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size())
    throw Error(ErrorCode::kInvalidArgument, what + " must be an integer, got '" + text + "'");
  return v;
}

std::string param(const Params& p, const std::string& key, const std::string& fallback = "") {
  auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}

Response ok(const json& j, int status = 200) { return {status, j.dump(), "application/json"}; }

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  size_t i = 0;
  while (i < path.size()) {
    while (i < path.size() && path[i] == '/') ++i;
    size_t j = path.find('/', i);
    if (j == std::string::npos) j = path.size();
    if (j > i) parts.push_back(url_decode(path.substr(i, j - i)));
    i = j;
  }
  return parts;
}

json task_json(const obs::LabelTask& t) {
  const auto& r = t.record;
  return {{"key", t.key},
          {"run_id", r.run_id},
          {"invocation_id", r.invocation_id},
          {"constraint_id", r.constraint_id},
          {"op_id", r.op_id},
          {"tuple_id", r.tuple_id},
          {"attempt", r.attempt},
          {"constraint", r.constraint_text},
          {"description", r.description},
          {"input", r.input},
          {"predicted", r.predicted},
          {"confidence", r.confidence},
          {"impl", r.impl}};
}

}  // namespace

Params parse_query_string(std::string_view text) {
  Params out;
  if (!text.empty() && text.front() == '?') text.remove_prefix(1);
  size_t i = 0;
  while (i <= text.size() && !text.empty()) {
    size_t amp = text.find('&', i);
    if (amp == std::string_view::npos) amp = text.size();
    std::string_view pair = text.substr(i, amp - i);
    if (!pair.empty()) {
      size_t eq = pair.find('=');
      if (eq == std::string_view::npos) {
        out[url_decode(pair)] = "";
      } else {
        out[url_decode(pair.substr(0, eq))] = url_decode(pair.substr(eq + 1));
      }
    }
    if (amp == text.size()) break;
    i = amp + 1;
  }
  return out;
}

int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kParse: return 400;
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kConflict: return 409;
    case ErrorCode::kPlan:
    case ErrorCode::kEstimate:
    case ErrorCode::kInfeasible: return 422;
    case ErrorCode::kUnsupported: return 501;
    default: return 500;
  }
}

Response error_response(ErrorCode code, const std::string& message) {
  return {http_status_for(code), json{{"code", error_code_name(code)}, {"message", message}}.dump(), "application/json"};
}

Service::Service(std::string runs_root, std::shared_ptr<store::ConstraintStore> store, model::ModelClient* judge,
                 std::string judge_name)
    : runs_(std::move(runs_root)),
      store_(store ? std::move(store) : std::make_shared<store::ConstraintStore>()),
      judge_(judge),
      judge_name_(std::move(judge_name)) {}

Response Service::handle(const std::string& method, const std::string& path, const Params& params,
                         const std::string& body) const {
  auto parts = split_path(path);
  auto method_not_allowed = [&] {
    return Response{405, json{{"code", "method_not_allowed"}, {"message", method + " is not allowed on " + path}}.dump(),
                    "application/json"};
  };
  try {
    const size_t n = parts.size();
    if (n >= 1 && parts[0] == "runs") {
      if (method != "GET") return method_not_allowed();
      if (n == 1) {
        json runs = json::array();
        for (const auto& r : runs_.list_runs()) runs.push_back(obs::to_json(r));
        return ok({{"runs", runs}});
      }
      const std::string& id = parts[1];
      if (n == 2) {
        json j = obs::to_json(runs_.run(id));
        j["result_count"] = runs_.results(id).size();
        return ok(j);
      }
      if (n == 3 && parts[2] == "metrics") return ok(obs::to_json(runs_.metrics(id)));
      if (n == 3 && parts[2] == "tuples") {
        std::string flagged = param(params, "flagged");
        if (!flagged.empty() && flagged != "true" && flagged != "false" && flagged != "1" && flagged != "0")
          throw Error(ErrorCode::kInvalidArgument, "flagged must be true or false");
        runs_.run(id);
        std::vector<json> rows;
        if (flagged == "true" || flagged == "1") {
          rows = runs_.flagged_tuples(id);
        } else {
          rows = runs_.results(id);
          if (flagged == "false" || flagged == "0") {
            std::vector<json> kept;
            for (auto& r : rows)
              if (r.value("_flags", json::array()).empty()) kept.push_back(std::move(r));
            rows = std::move(kept);
          }
        }
        return ok({{"run_id", id}, {"tuples", rows}});
      }
    } else if (n == 3 && parts[0] == "tuples" && parts[2] == "lineage") {
      if (method != "GET") return method_not_allowed();
      int64_t tuple = parse_int(parts[1], "tuple id");
      std::string run = param(params, "run");
      if (run.empty()) run = runs_.find_run_for_tuple(tuple);
      json tree = runs_.lineage_tree(run, tuple);
      tree["run_id"] = run;
      return ok(tree);
    } else if (n >= 1 && parts[0] == "labels") {
      if (n == 2 && parts[1] == "next") {
        if (method != "GET") return method_not_allowed();
        auto queue = runs_.label_queue(param(params, "run"), param(params, "constraint"));
        json task = queue.empty() ? json(nullptr) : task_json(queue.front());
        return ok({{"task", task}, {"remaining", queue.size()}});
      }
      if (n == 1) {
        if (method != "POST") return method_not_allowed();
        json j;
        try {
          j = json::parse(body);
        } catch (const json::exception& e) {
          throw Error(ErrorCode::kInvalidArgument, std::string("body is not JSON: ") + e.what());
        }
        if (!j.is_object() || !j.contains("invocation_id") || !j.contains("true_label"))
          throw Error(ErrorCode::kInvalidArgument, "body needs invocation_id and true_label");
        for (auto it = j.begin(); it != j.end(); ++it)
          if (it.key() != "invocation_id" && it.key() != "true_label" && it.key() != "run")
            throw Error(ErrorCode::kInvalidArgument, "unknown field '" + it.key() + "'");
        std::string run;
        int64_t inv = 0;
        const json& id = j.at("invocation_id");
        if (id.is_string()) {
          std::tie(run, inv) = obs::parse_record_key(id.get<std::string>());
        } else if (id.is_number_integer()) {
          inv = id.get<int64_t>();
        } else {
          throw Error(ErrorCode::kInvalidArgument, "invocation_id must be \"<run>:<n>\" or an integer");
        }
        if (j.contains("run")) run = j.at("run").get<std::string>();
        if (run.empty()) throw Error(ErrorCode::kInvalidArgument, "invocation_id needs a run, as \"<run>:<n>\"");
        const json& label = j.at("true_label");
        bool holds;
        if (label.is_boolean()) {
          holds = label.get<bool>();
        } else if (label == "pass") {
          holds = true;
        } else if (label == "violation") {
          holds = false;
        } else {
          throw Error(ErrorCode::kInvalidArgument, "true_label must be a boolean, \"pass\" or \"violation\"");
        }
        runs_.submit_label(run, inv, holds);
        return ok({{"key", run + ":" + std::to_string(inv)}, {"true_label", holds}}, 201);
      }
    } else if (n >= 1 && parts[0] == "constraints") {
      if (n == 1 && method == "GET") {
        json items = json::array();
        for (const auto& c : store_->list()) items.push_back(store::to_json(c));
        return ok({{"constraints", items}});
      }
      if (n == 1 && method == "POST") {
        json j;
        try {
          j = json::parse(body);
        } catch (const json::exception& e) {
          throw Error(ErrorCode::kInvalidArgument, std::string("body is not JSON: ") + e.what());
        }
        if (!j.is_object() || !j.contains("text") || !j.at("text").is_string())
          throw Error(ErrorCode::kInvalidArgument, "body needs a text field");
        store::Metadata meta;
        try {
          for (auto it = j.begin(); it != j.end(); ++it) {
            const std::string& k = it.key();
            if (k == "text") continue;
            if (k == "id") meta.id = it->get<std::string>();
            else if (k == "description") meta.description = it->get<std::string>();
            else if (k == "tags") meta.tags = it->get<std::vector<std::string>>();
            else if (k == "provenance") meta.provenance = it->get<std::string>();
            else if (k == "soft") meta.soft = it->get<bool>();
            else throw Error(ErrorCode::kInvalidArgument, "unknown field '" + k + "'");
          }
        } catch (const json::exception& e) {
          throw Error(ErrorCode::kInvalidArgument, std::string("bad field type: ") + e.what());
        }
        std::string id = store_->register_constraint(j.at("text").get<std::string>(), meta);
        return ok(store::to_json(store_->lookup(id)), 201);
      }
      if (n == 2 && parts[1] == "recommend") {
        if (method != "GET") return method_not_allowed();
        int64_t k = parse_int(param(params, "k", "5"), "k");
        if (k < 0) throw Error(ErrorCode::kInvalidArgument, "k must be >= 0");
        json recs = json::array();
        for (const auto& r : store_->recommend(param(params, "q"), static_cast<size_t>(k), judge_, judge_name_))
          recs.push_back(store::to_json(r));
        return ok({{"recommendations", recs}});
      }
      if (n == 2 && parts[1] == "conflicts") {
        if (method != "GET") return method_not_allowed();
        json cs = json::array();
        for (const auto& c : store_->conflicts(judge_, judge_name_)) cs.push_back(store::to_json(c));
        return ok({{"conflicts", cs}});
      }
      if (n == 2 && method == "GET") return ok(store::to_json(store_->lookup(parts[1])));
      if (n == 2) return method_not_allowed();
    }
    return error_response(ErrorCode::kNotFound, "no route for " + method + " " + path);
  } catch (const Error& e) {
    return error_response(e.code(), e.what());
  } catch (const json::exception& e) {
    return error_response(ErrorCode::kInvalidArgument, e.what());
  } catch (const std::exception& e) {
    return error_response(ErrorCode::kInternal, e.what());
  }
}

}  // namespace sicql::service
