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

#include <cctype>
#include <cstdlib>

#include "httplib.h"
#include "json.hpp"
#include "sicql/error.hpp"
#include "sicql/model.hpp"

namespace sicql::model {

using json = nlohmann::json;

namespace {

struct Endpoint {
  std::string scheme_host_port;
  std::string path_prefix;
};

Endpoint split_url(const std::string& url) {
  size_t scheme = url.find("://");
  if (scheme == std::string::npos) throw Error(ErrorCode::kInvalidArgument, "base_url needs a scheme: " + url);
  size_t slash = url.find('/', scheme + 3);
  Endpoint e;
  e.scheme_host_port = url.substr(0, slash);
  e.path_prefix = slash == std::string::npos ? "" : url.substr(slash);
  while (!e.path_prefix.empty() && e.path_prefix.back() == '/') e.path_prefix.pop_back();
  return e;
}

const char* mode_question(JudgeMode m) {
  switch (m) {
    case JudgeMode::kFactCheck: return "Is every claim in the output supported by the input?";
    case JudgeMode::kRelevance: return "Does the output follow the task instruction for this input?";
    case JudgeMode::kSoundnessSteps: return "Is every reasoning step valid, and does the conclusion follow from them?";
    case JudgeMode::kSemanticMatch: return "Does the output contain content matching the task description?";
  }
  return "";
}

}  // namespace

HttpModel::HttpModel(HttpModelConfig config) : config_(std::move(config)) {
  split_url(config_.base_url);
  if (config_.model.empty()) throw Error(ErrorCode::kInvalidArgument, "http model needs a model name");
}

std::string HttpModel::chat(const std::string& prompt, uint64_t seed) {
  Endpoint ep = split_url(config_.base_url);
  httplib::Client client(ep.scheme_host_port);
  auto secs = static_cast<time_t>(config_.timeout_s);
  auto usecs = static_cast<time_t>((config_.timeout_s - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key)
    headers.emplace("Authorization", std::string("Bearer ") + key);
  json body = {{"model", config_.model}, {"messages", json::array({{{"role", "user"}, {"content", prompt}}})}};
  if (seed) body["seed"] = seed;
  auto res = client.Post(ep.path_prefix + "/chat/completions", headers, body.dump(), "application/json");
  if (!res) throw Error(ErrorCode::kModel, "model endpoint unreachable: " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw Error(ErrorCode::kModel, "model endpoint returned HTTP " + std::to_string(res->status) + ": " +
                                       res->body.substr(0, 200));
  try {
    json doc = json::parse(res->body);
    return doc.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kModel, std::string("malformed chat-completions response: ") + e.what());
  }
}

ModelResponse HttpModel::complete(const ModelRequest& request) {
  if (request.mask) throw Error(ErrorCode::kUnsupported, "the HTTP model client cannot mask tokens");
  std::string prompt = request.prompt;
  if (request.contract == Contract::kBooleanCot)
    prompt += "\nRespond in exactly this format:\nPREMISES:\n- <fact from the input>\nSTEPS:\n- <reasoning step>\n"
              "ANSWER: true|false";
  ModelResponse resp;
  resp.text = chat(prompt, request.seed);
  resp.cost = config_.complete_cost;
  resp.tokens = tokenize(resp.text, Tokenizer::kWhitespace);
  if (request.guard) {
    // Segments are checked after the full response arrives.
    for (const auto& t : resp.tokens)
      if (!request.guard->feed(t)) break;
    resp.guard_outcome = request.guard->finish();
    resp.guard_backtracks = request.guard->backtracks();
    resp.text = request.guard->failed() ? request.guard->output() : request.guard->committed();
    while (!resp.text.empty() && std::isspace(static_cast<unsigned char>(resp.text.back()))) resp.text.pop_back();
  }
  if (request.contract == Contract::kBooleanCot) resp.cot = parse_cot(resp.text);
  return resp;
}

std::string HttpModel::judge_prompt(const JudgeRequest& r) {
  return std::string("You are a strict evaluator.\nTask: ") + r.task + "\nInput: " + r.input + "\nOutput: " + r.output +
         "\nQuestion: " + mode_question(r.mode) + "\nAnswer with exactly one word: true or false.";
}

JudgeVerdict HttpModel::judge(const JudgeRequest& request) {
  std::string text = chat(judge_prompt(request), request.seed);
  std::string word;
  for (char c : text) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      word += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!word.empty()) {
      break;
    }
  }
  if (word != "true" && word != "false")
    throw Error(ErrorCode::kModel, "judge answer is not true/false: '" + text.substr(0, 80) + "'");
  JudgeVerdict v;
  v.yes = word == "true";
  v.rationale = text;
  v.cost = config_.judge_cost;
  return v;
}

std::vector<physical::JudgeSpec> HttpModel::judges() const {
  physical::JudgeSpec s;
  s.name = config_.judge_name;
  s.cost = config_.judge_cost;
  s.precision = config_.judge_precision;
  s.recall = config_.judge_recall;
  s.confidence_capable = false;
  s.confidence = 0.0;
  return {s};
}

}  // namespace sicql::model
