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

// Model clients: completion, judging and token-level decoding with mask
// hooks. A seeded scripted fake stands in for the LLM in tests and demos;
// the HTTP client talks to a chat-completions endpoint.

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sicql/automaton.hpp"
#include "sicql/decoding.hpp"
#include "sicql/physical.hpp"
#include "sicql/value.hpp"

namespace sicql::model {

struct Cot {
  std::vector<std::string> premises;
  std::vector<std::string> steps;
  bool answer = false;

  friend bool operator==(const Cot&, const Cot&) = default;
};

/// Parses `PREMISES:\n- ...\nSTEPS:\n- ...\nANSWER: true|false`.
std::optional<Cot> parse_cot(std::string_view text, std::string* reason = nullptr);
std::string format_cot(const Cot& cot);

enum class Contract { kText, kBooleanCot };

struct ModelRequest {
  std::string op_id;
  std::string prompt;
  Contract contract = Contract::kText;
  /// Rendered placeholder values, by attribute name.
  std::map<std::string, std::string> inputs;
  /// Token mask; only honored by token-level clients.
  std::shared_ptr<const automata::CharAutomaton> mask;
  automata::StreamGuard* guard = nullptr;
  int attempt = 0;
  uint64_t seed = 0;
};

struct ModelResponse {
  std::string text;
  std::optional<Cot> cot;
  std::optional<double> confidence;
  std::vector<std::string> tokens;
  double cost = 0.0;
  /// Constrained decoding ended without an accepted output.
  bool mask_exhausted = false;
  int mask_backtracks = 0;
  /// Set when a stream guard was attached.
  std::optional<CheckOutcome> guard_outcome;
  int guard_backtracks = 0;
};

enum class JudgeMode { kFactCheck, kRelevance, kSoundnessSteps, kSemanticMatch };

const char* judge_mode_name(JudgeMode m);  // fact-check, relevance, soundness-steps, semantic-match
std::optional<JudgeMode> judge_mode_from_name(std::string_view name);

struct JudgeRequest {
  std::string judge = "judge";
  JudgeMode mode = JudgeMode::kFactCheck;
  std::string task;
  std::string input;
  std::string output;
  uint64_t seed = 0;
};

/// `yes` means supported (fact-check), relevant, valid (soundness-steps) or
/// present (semantic-match).
struct JudgeVerdict {
  bool yes = true;
  std::optional<double> confidence;
  std::string rationale;
  double cost = 0.0;
};

class ModelClient {
 public:
  virtual ~ModelClient() = default;

  /// Decodes under `request.mask` when set; throws kUnsupported on clients
  /// without token-level access. Transport failures throw kModel.
  virtual ModelResponse complete(const ModelRequest& request) = 0;
  virtual JudgeVerdict judge(const JudgeRequest& request) = 0;
  virtual bool token_level() const = 0;
  virtual std::vector<physical::JudgeSpec> judges() const = 0;
};

enum class Tokenizer { kChar, kWhitespace };

/// Whitespace tokens keep their trailing whitespace.
std::vector<std::string> tokenize(std::string_view text, Tokenizer kind);

struct CopySpec {
  std::string field;
  /// Span starts after the first occurrence of `after` (or at 0 when empty
  /// or absent) and ends before the next `until` (or at the end).
  std::string after;
  std::string until;
};

struct FakeRule {
  std::string pattern;  // searched in the prompt
  std::vector<std::string> responses;  // per attempt; the last one repeats
  std::optional<CopySpec> copy;
  double noise = 0.0;
  std::optional<double> cost;
};

struct JudgeRule {
  std::optional<JudgeMode> mode;  // any mode when absent
  std::string field = "output";   // output, input or task
  std::string pattern;
  /// Verdict is whether the output occurs in the input, ignoring case and
  /// runs of whitespace.
  bool contained = false;
  bool verdict = true;
  std::optional<double> margin;
  std::string rationale;
};

struct FakeJudge {
  std::string name = "judge";
  double flip_prob = 0.0;
  double cost = 1.0;
  /// Logit gap between the chosen and the other answer; confidence is its
  /// logistic.
  double margin = 2.2;
  bool default_verdict = true;
  double precision = 0.9;
  double recall = 0.9;
  std::vector<JudgeRule> rules;
};

struct FakeModelScript {
  uint64_t seed = 0;
  Tokenizer tokenizer = Tokenizer::kWhitespace;
  double complete_cost = 1.0;
  std::vector<std::string> noise_tokens = {"~"};
  std::vector<FakeRule> rules;
  std::vector<FakeJudge> judges = {FakeJudge{}};
};

FakeModelScript parse_fake_script(const std::string& json_text);
std::string fake_script_to_json(const FakeModelScript& script);

/// Deterministic given (script, request): the RNG is seeded from the script
/// seed, the request seed and the request content, never call order.
class FakeModel final : public ModelClient {
 public:
  explicit FakeModel(FakeModelScript script);

  ModelResponse complete(const ModelRequest& request) override;
  JudgeVerdict judge(const JudgeRequest& request) override;
  bool token_level() const override { return true; }
  std::vector<physical::JudgeSpec> judges() const override;

  const FakeModelScript& script() const { return script_; }

 private:
  const FakeRule& match(const std::string& prompt) const;
  std::string target_text(const FakeRule& rule, const ModelRequest& request) const;

  FakeModelScript script_;
};

struct HttpModelConfig {
  std::string base_url;  // e.g. http://127.0.0.1:8000/v1
  std::string model;
  std::string api_key_env = "SICQL_API_KEY";
  double timeout_s = 60.0;
  std::string judge_name = "judge";
  double judge_cost = 1.0;
  double judge_precision = 0.9;
  double judge_recall = 0.9;
  double complete_cost = 1.0;
};

/// Chat-completions client. POSTs {model, messages, seed} to
/// `<base_url>/chat/completions` and reads choices[0].message.content.
class HttpModel final : public ModelClient {
 public:
  explicit HttpModel(HttpModelConfig config);

  ModelResponse complete(const ModelRequest& request) override;
  JudgeVerdict judge(const JudgeRequest& request) override;
  bool token_level() const override { return false; }
  std::vector<physical::JudgeSpec> judges() const override;

  static std::string judge_prompt(const JudgeRequest& request);

 private:
  std::string chat(const std::string& prompt, uint64_t seed);

  HttpModelConfig config_;
};

/// FNV-1a over the concatenation of `parts`, each terminated by 0xff.
uint64_t content_hash(std::initializer_list<std::string_view> parts);

}  // namespace sicql::model
