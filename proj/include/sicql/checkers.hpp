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

// Violation detection for every constraint class. Deterministic checks are
// pure; judge-backed checks delegate to a model client, and judge transport
// errors propagate as exceptions rather than violations.

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "sicql/ast.hpp"
#include "sicql/eval.hpp"
#include "sicql/model.hpp"
#include "sicql/outcome.hpp"

namespace sicql::checks {

struct JudgeRef {
  model::ModelClient* client = nullptr;
  std::string name = "judge";
  uint64_t seed = 0;
};

/// Human-readable rendering of a domain, used in feedback.
std::string describe_domain(const lang::DomainSpec& spec);

/// NULL passes type domains and violates every other domain.
CheckOutcome check_domain(const Value& value, const lang::DomainSpec& spec);

/// Include passes when some match is present, exclude when none is. Prompt
/// matchers need a judge and return its confidence unchanged.
CheckOutcome check_ie(const Value& value, const lang::Matcher& matcher, bool include, const JudgeRef& judge = {});

/// Exact, case-sensitive containment. With `normalize_whitespace` both sides
/// have whitespace runs collapsed first.
CheckOutcome check_grounding_extractive(std::string_view output, std::string_view source,
                                        bool normalize_whitespace = false);
/// Passes when the output is contained in at least one source.
CheckOutcome check_grounding_extractive(std::string_view output, const std::vector<std::string>& sources,
                                        bool normalize_whitespace = false);

CheckOutcome check_grounding_abstractive(const std::string& output, const std::string& source, const JudgeRef& judge);

/// Premise grounding (each premise fact-checked against the input), then one
/// judgement over the steps and conclusion. The CoT answer must agree with
/// the returned result.
CheckOutcome check_soundness(const std::string& input, const model::Cot& cot, bool result, const JudgeRef& judge);

CheckOutcome check_relevance(const std::string& task, const std::string& input, const std::string& output,
                             const JudgeRef& judge);

/// Passes iff the expression is TRUE; NULL is a violation.
CheckOutcome eval_assertion(const lang::Expr& expr, const Row& row, const EvalContext& ctx);

/// Brief form of a value for feedback text.
std::string excerpt(std::string_view text, size_t limit = 200);

}  // namespace sicql::checks
