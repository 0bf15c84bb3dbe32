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

#include "sicql/checkers.hpp"

#include <cctype>

#include "sicql/error.hpp"
#include "sicql/format.hpp"

namespace sicql::checks {

using lang::DomainSpec;
using lang::Matcher;

namespace {

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = true;
      continue;
    }
    if (space && !out.empty()) out += ' ';
    space = false;
    out += c;
  }
  return out;
}

bool blank(std::string_view s) {
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  return true;
}

std::string quoted(std::string_view s) { return "'" + excerpt(s) + "'"; }

std::string mech(const JudgeRef& j) { return "model:" + j.name; }

model::ModelClient& need(const JudgeRef& j, const char* what) {
  if (!j.client) throw Error(ErrorCode::kCheck, std::string(what) + " needs a judge and none is configured");
  return *j.client;
}

CheckOutcome from_verdict(const model::JudgeVerdict& v, bool pass, const JudgeRef& j, std::string feedback) {
  CheckOutcome out;
  out.pass = pass;
  out.confidence = v.confidence.value_or(1.0);
  out.mechanism = mech(j);
  out.cost = v.cost;
  if (!pass) out.feedback = std::move(feedback);
  return out;
}

std::string fmt_bound(double v) { return format_double(v); }

bool value_equals(const Value& a, const Value& b) {
  if (a.is_number() && b.is_number()) return a.as_number() == b.as_number();
  return a.to_text() == b.to_text();
}

}  // namespace

std::string excerpt(std::string_view text, size_t limit) {
  if (text.size() <= limit) return std::string(text);
  return std::string(text.substr(0, limit)) + "...";
}

std::string describe_domain(const DomainSpec& spec) {
  switch (spec.kind) {
    case DomainSpec::Kind::kType:
      return std::string("type ") + type_name(spec.type);
    case DomainSpec::Kind::kRegex:
      return "regex " + spec.pattern;
    case DomainSpec::Kind::kRange: {
      std::string out = "range ";
      out += spec.lo ? (spec.lo_inclusive ? "[" : "(") + fmt_bound(*spec.lo) : "(-inf";
      out += ", ";
      out += spec.hi ? fmt_bound(*spec.hi) + (spec.hi_inclusive ? "]" : ")") : "+inf)";
      return out;
    }
    case DomainSpec::Kind::kMaxLength:
      return "length below " + std::to_string(spec.max_length);
    case DomainSpec::Kind::kValueSet: {
      std::string out = "one of {";
      for (size_t i = 0; i < spec.values.size(); ++i) out += (i ? ", " : "") + spec.values[i].to_text();
      return out + "}";
    }
  }
  return "domain";
}

CheckOutcome check_domain(const Value& value, const DomainSpec& spec) {
  static const char* kinds[] = {"type", "regex", "range", "length", "value_set"};
  std::string m = std::string("deterministic:") + kinds[static_cast<int>(spec.kind)];
  if (value.is_null()) {
    if (spec.kind == DomainSpec::Kind::kType) return CheckOutcome::ok(m);
    return CheckOutcome::violation(m, "value is NULL, expected " + describe_domain(spec));
  }
  switch (spec.kind) {
    case DomainSpec::Kind::kType: {
      if (spec.type == Type::kAny || value.type() == spec.type) return CheckOutcome::ok(m);
      if (spec.type == Type::kFloat && value.is_int()) return CheckOutcome::ok(m);
      std::string reason;
      if (value.is_text() && parse_typed(value.as_text(), spec.type, &reason)) return CheckOutcome::ok(m);
      if (reason.empty())
        reason = std::string("expected ") + type_name(spec.type) + ", got " + type_name(value.type());
      return CheckOutcome::violation(m, excerpt(reason));
    }
    case DomainSpec::Kind::kRegex: {
      std::string text = value.to_text();
      if (regex_contains(text, spec.pattern)) return CheckOutcome::ok(m);
      return CheckOutcome::violation(m, "value " + quoted(text) + " does not match regex " + spec.pattern);
    }
    case DomainSpec::Kind::kRange: {
      std::optional<double> x;
      if (value.is_number()) {
        x = value.as_number();
      } else if (value.is_text()) {
        if (auto v = parse_typed(value.as_text(), Type::kFloat)) x = v->as_float();
      }
      if (!x) return CheckOutcome::violation(m, "value " + quoted(value.to_text()) + " is not a number");
      bool ok = true;
      if (spec.lo) ok &= spec.lo_inclusive ? *x >= *spec.lo : *x > *spec.lo;
      if (spec.hi) ok &= spec.hi_inclusive ? *x <= *spec.hi : *x < *spec.hi;
      if (ok) return CheckOutcome::ok(m);
      return CheckOutcome::violation(m, "value " + format_double(*x) + " is outside " + describe_domain(spec));
    }
    case DomainSpec::Kind::kMaxLength: {
      int64_t n = utf8_length(value.to_text());
      if (n < spec.max_length) return CheckOutcome::ok(m);
      return CheckOutcome::violation(m, "length " + std::to_string(n) + " is not below " + std::to_string(spec.max_length));
    }
    case DomainSpec::Kind::kValueSet: {
      for (const auto& v : spec.values)
        if (value_equals(value, v)) return CheckOutcome::ok(m);
      return CheckOutcome::violation(m, "value " + quoted(value.to_text()) + " is not " + describe_domain(spec));
    }
  }
  return CheckOutcome::ok(m);
}

CheckOutcome check_ie(const Value& value, const Matcher& matcher, bool include, const JudgeRef& judge) {
  const char* verb = include ? "include" : "exclude";
  if (matcher.kind == Matcher::Kind::kPrompt) {
    model::ModelClient& client = need(judge, "a prompt matcher");
    if (value.is_null()) return CheckOutcome::violation(mech(judge), "value is NULL");
    model::JudgeRequest req;
    req.judge = judge.name;
    req.mode = model::JudgeMode::kSemanticMatch;
    req.task = matcher.prompt.raw_text;
    req.output = value.to_text();
    req.seed = judge.seed;
    auto v = client.judge(req);
    bool pass = include ? v.yes : !v.yes;
    std::string fb = include ? "output does not mention " + quoted(matcher.prompt.raw_text)
                             : "output mentions " + quoted(matcher.prompt.raw_text);
    if (!v.rationale.empty()) fb += " (judge: " + excerpt(v.rationale) + ")";
    return from_verdict(v, pass, judge, fb);
  }

  static const char* kinds[] = {"literal", "regex", "literal_set", "prompt"};
  std::string m = std::string("deterministic:") + kinds[static_cast<int>(matcher.kind)];
  if (value.is_null()) return CheckOutcome::violation(m, "value is NULL");
  std::string text = value.to_text();
  std::optional<std::string> found;
  switch (matcher.kind) {
    case Matcher::Kind::kLiteral:
      if (text.find(matcher.text) != std::string::npos) found = matcher.text;
      break;
    case Matcher::Kind::kRegex:
      if (regex_contains(text, matcher.text)) found = "regex " + matcher.text;
      break;
    case Matcher::Kind::kLiteralSet:
      for (const auto& item : matcher.items)
        if (text.find(item) != std::string::npos) {
          found = item;
          break;
        }
      break;
    case Matcher::Kind::kPrompt:
      break;
  }
  if (include) {
    if (found) return CheckOutcome::ok(m);
    return CheckOutcome::violation(m, std::string("output must ") + verb + " " + lang::format_matcher(matcher));
  }
  if (!found) return CheckOutcome::ok(m);
  return CheckOutcome::violation(m, "output contains " + quoted(*found) + ", which must be excluded");
}

CheckOutcome check_grounding_extractive(std::string_view output, std::string_view source, bool normalize_whitespace) {
  return check_grounding_extractive(output, std::vector<std::string>{std::string(source)}, normalize_whitespace);
}

CheckOutcome check_grounding_extractive(std::string_view output, const std::vector<std::string>& sources,
                                        bool normalize_whitespace) {
  const std::string m = "deterministic:substring";
  std::string out = normalize_whitespace ? collapse_whitespace(output) : std::string(output);
  for (const auto& s : sources) {
    bool hit = normalize_whitespace ? collapse_whitespace(s).find(out) != std::string::npos
                                    : s.find(out) != std::string::npos;
    if (hit) return CheckOutcome::ok(m);
  }
  return CheckOutcome::violation(m, "output " + quoted(output) + " is not contained verbatim in the operator input");
}

CheckOutcome check_grounding_abstractive(const std::string& output, const std::string& source, const JudgeRef& judge) {
  model::ModelClient& client = need(judge, "abstractive grounding");
  model::JudgeRequest req;
  req.judge = judge.name;
  req.mode = model::JudgeMode::kFactCheck;
  req.task = "Is the output factually consistent with the input?";
  req.input = source;
  req.output = output;
  req.seed = judge.seed;
  auto v = client.judge(req);
  return from_verdict(v, v.yes, judge,
                      "output is not supported by the operator input (judge: " + excerpt(v.rationale) + ")");
}

CheckOutcome check_soundness(const std::string& input, const model::Cot& cot, bool result, const JudgeRef& judge) {
  model::ModelClient& client = need(judge, "soundness");
  CheckOutcome out = CheckOutcome::ok(mech(judge));
  if (cot.premises.empty()) return CheckOutcome::violation(mech(judge), "the reasoning lists no premises");
  if (cot.answer != result)
    return CheckOutcome::violation(mech(judge), std::string("the reasoning concludes ") +
                                                    (cot.answer ? "true" : "false") + " but the operator returned " +
                                                    (result ? "true" : "false"));
  double confidence = 1.0;
  for (size_t i = 0; i < cot.premises.size(); ++i) {
    model::JudgeRequest req;
    req.judge = judge.name;
    req.mode = model::JudgeMode::kFactCheck;
    req.task = "Is this premise supported by the input?";
    req.input = input;
    req.output = cot.premises[i];
    req.seed = judge.seed;
    auto v = client.judge(req);
    out.cost += v.cost;
    confidence = std::min(confidence, v.confidence.value_or(1.0));
    if (!v.yes) {
      CheckOutcome bad = from_verdict(v, false, judge,
                                      "premise " + std::to_string(i + 1) + " " + quoted(cot.premises[i]) +
                                          " is not supported by the input");
      bad.cost = out.cost;
      return bad;
    }
  }
  model::JudgeRequest req;
  req.judge = judge.name;
  req.mode = model::JudgeMode::kSoundnessSteps;
  req.task = "Do the steps follow from the premises and entail the conclusion?";
  for (size_t i = 0; i < cot.premises.size(); ++i) req.input += "Premise " + std::to_string(i + 1) + ": " + cot.premises[i] + "\n";
  for (size_t i = 0; i < cot.steps.size(); ++i) req.output += "Step " + std::to_string(i + 1) + ": " + cot.steps[i] + "\n";
  req.output += std::string("Conclusion: ") + (cot.answer ? "true" : "false");
  req.seed = judge.seed;
  auto v = client.judge(req);
  out.cost += v.cost;
  confidence = std::min(confidence, v.confidence.value_or(1.0));
  if (!v.yes) {
    CheckOutcome bad =
        from_verdict(v, false, judge, "reasoning steps do not support the conclusion (judge: " + excerpt(v.rationale) + ")");
    bad.cost = out.cost;
    return bad;
  }
  out.confidence = confidence;
  return out;
}

CheckOutcome check_relevance(const std::string& task, const std::string& input, const std::string& output,
                             const JudgeRef& judge) {
  model::ModelClient& client = need(judge, "relevance");
  if (blank(output)) return CheckOutcome::violation(mech(judge), "the output is empty");
  model::JudgeRequest req;
  req.judge = judge.name;
  req.mode = model::JudgeMode::kRelevance;
  req.task = task;
  req.input = input;
  req.output = output;
  req.seed = judge.seed;
  auto v = client.judge(req);
  return from_verdict(v, v.yes, judge,
                      "output does not follow the instruction " + quoted(task) + " (judge: " + excerpt(v.rationale) + ")");
}

CheckOutcome eval_assertion(const lang::Expr& expr, const Row& row, const EvalContext& ctx) {
  const std::string m = "deterministic:expression";
  Value v = eval_expr(expr, row, ctx);
  if (v.is_null()) return CheckOutcome::violation(m, "predicate evaluated to NULL");
  if (!v.is_bool()) throw Error(ErrorCode::kCheck, "assertion " + lang::format_expr(expr) + " is not boolean");
  if (v.as_bool()) return CheckOutcome::ok(m);
  return CheckOutcome::violation(m, "predicate " + lang::format_expr(expr) + " is false");
}

}  // namespace sicql::checks
