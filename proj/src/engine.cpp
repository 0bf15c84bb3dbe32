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

#include "sicql/engine.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <thread>

#include "sicql/automaton.hpp"
#include "sicql/checkers.hpp"
#include "sicql/error.hpp"
#include "sicql/format.hpp"
#include "sicql/logical.hpp"

namespace sicql::engine {

using lang::ConstraintClass;
using lang::ConstraintDecl;
using lang::FailureMode;
using lang::Stage;
using lang::StageKind;
using physical::EnforceMode;
using physical::ImplCandidate;

// ---------------------------------------------------------------------------
// Exemplar cache

void ExemplarCache::add(const std::string& op_id, const std::string& prompt, const std::string& output) {
  if (capacity_ == 0) return;
  std::lock_guard<std::mutex> lock(mu_);
  for (auto it = entries_.begin(); it != entries_.end(); ++it) {
    if (it->op_id == op_id && it->prompt == prompt) {
      it->output = output;
      entries_.splice(entries_.begin(), entries_, it);
      return;
    }
  }
  entries_.push_front({op_id, prompt, output, embed(prompt)});
  while (entries_.size() > capacity_) entries_.pop_back();
}

std::vector<Exemplar> ExemplarCache::nearest(const std::string& op_id, const std::string& prompt, size_t k) {
  if (k == 0) return {};
  Embedding q = embed(prompt);
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<std::pair<double, std::list<Entry>::iterator>> scored;
  for (auto it = entries_.begin(); it != entries_.end(); ++it) {
    if (it->op_id != op_id || it->prompt == prompt) continue;
    double s = cosine(q, it->vec);
    if (s > 0) scored.emplace_back(s, it);
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  if (scored.size() > k) scored.resize(k);
  std::vector<Exemplar> out;
  for (auto& [s, it] : scored) out.push_back({it->op_id, it->prompt, it->output, s});
  for (auto& [s, it] : scored) entries_.splice(entries_.begin(), entries_, it);
  return out;
}

size_t ExemplarCache::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return entries_.size();
}

// ---------------------------------------------------------------------------
// Prompt rendering

std::string render_prompt(const lang::PromptTemplate& tmpl, const Row& row) {
  std::string out;
  const std::string& raw = tmpl.raw_text;
  for (size_t i = 0; i < raw.size();) {
    if (raw[i] == '{') {
      size_t close = raw.find('}', i + 1);
      if (close != std::string::npos) {
        auto it = row.find(raw.substr(i + 1, close - i - 1));
        if (it != row.end()) {
          out += it->second.to_text();
          i = close + 1;
          continue;
        }
      }
    }
    out += raw[i++];
  }
  return out;
}

std::string feedback_block(const std::string& previous_output, const std::string& constraint, const std::string& reason) {
  return "\n\nPrevious output: " + previous_output + "\nViolated constraint: " + constraint + "\nReason: " + reason;
}

namespace {

std::string type_mask_pattern(Type t) {
  switch (t) {
    case Type::kInt: return R"(^-?\d+$)";
    case Type::kFloat: return R"(^-?\d+(\.\d+)?([eE][-+]?\d+)?$)";
    case Type::kBool: return "^(true|false)$";
    case Type::kDate: return R"(^\d{4}-\d{2}-\d{2}$)";
    default: return "";
  }
}

}  // namespace

std::shared_ptr<const automata::CharAutomaton> build_mask(const ConstraintDecl& c, const Stage& producer,
                                                          const std::vector<std::string>& sources) {
  auto kind = physical::mask_kind(c, producer);
  if (!kind) throw Error(ErrorCode::kPlan, "constraint " + c.id + " has no mask encoding");
  if (*kind == "grounding-extractive") {
    std::string joined;
    for (size_t i = 0; i < sources.size(); ++i) {
      if (i) joined += '\0';
      joined += sources[i];
    }
    return std::make_shared<automata::SuffixAutomaton>(joined);
  }
  const auto& d = *c.domain;
  std::string pattern;
  if (*kind == "domain-regex") {
    pattern = d.pattern;
  } else if (*kind == "domain-type") {
    pattern = type_mask_pattern(d.type);
  } else if (*kind == "domain-set") {
    pattern = "^(";
    for (size_t i = 0; i < d.values.size(); ++i) pattern += (i ? "|" : "") + automata::regex_escape(d.values[i].to_text());
    pattern += ")$";
  } else if (*kind == "domain-length") {
    pattern = "^[\\s\\S]{0," + std::to_string(std::max<int64_t>(d.max_length - 1, 0)) + "}$";
  }
  if (pattern.empty()) throw Error(ErrorCode::kPlan, "constraint " + c.id + " has no mask encoding");
  return std::make_shared<automata::RegexDfa>(automata::RegexDfa::compile(pattern).minimized());
}

namespace {

enum class Disposition { kKept, kFlagged, kFiltered, kIgnored, kAborted };

const char* disposition_name(Disposition d) {
  switch (d) {
    case Disposition::kKept: return "kept";
    case Disposition::kFlagged: return "flagged";
    case Disposition::kFiltered: return "filtered";
    case Disposition::kIgnored: return "ignored";
    case Disposition::kAborted: return "aborted";
  }
  return "kept";
}

int severity(FailureMode m) {
  switch (m) {
    case FailureMode::kContinue: return 0;
    case FailureMode::kIgnore: return 1;
    case FailureMode::kAbort: return 2;
  }
  return 0;
}

const char* kind_name(StageKind k) {
  switch (k) {
    case StageKind::kScan: return "scan";
    case StageKind::kSet: return "set";
    case StageKind::kExtend: return "extend";
    case StageKind::kWhere: return "where";
    case StageKind::kAggregate: return "aggregate";
    case StageKind::kAssert: return "assert";
  }
  return "";
}

std::optional<bool> parse_bool_text(const std::string& text) {
  std::string w;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c)) && c != '.') w += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (w == "true" || w == "yes") return true;
  if (w == "false" || w == "no") return false;
  return std::nullopt;
}

struct TupleWork {
  Disposition disposition = Disposition::kKept;
  bool processed = false;
  Tuple tuple;
  std::vector<obs::OpInvocationRecord> ops;
  std::vector<obs::ConstraintInvocationRecord> checks;
  std::vector<std::pair<std::string, std::string>> exemplars;  // prompt, output
  double cost = 0.0;
  std::exception_ptr error;
  std::string abort_reason;
};

struct Block {
  const Stage* op = nullptr;
  std::vector<const ConstraintDecl*> constraints;
};

// Everything a check needs about one operator attempt.
struct AttemptView {
  const Stage* op = nullptr;
  const Row* row = nullptr;  // candidate output row
  std::string output;        // raw output text
  std::vector<std::string> sources;
  std::string inputs_text;
  std::optional<model::Cot> cot;
  std::optional<bool> verdict;
  const model::ModelResponse* response = nullptr;
};

class Runner {
 public:
  Runner(model::ModelClient& client, const EngineConfig& config, ExemplarCache& cache,
         const physical::PhysicalPlan& plan, obs::RunWriter* sink)
      : client_(client), config_(config), cache_(cache), plan_(plan), sink_(sink) {
    eval_ctx_.current_date = config.current_date;
  }

  RunOutcome run(const std::map<std::string, Relation>& datasets);

 private:
  const ImplCandidate& impl_of(const ConstraintDecl& c) const {
    auto it = plan_.impls.find(c.id);
    if (it == plan_.impls.end()) throw Error(ErrorCode::kPlan, "no implementation chosen for constraint " + c.id);
    return it->second;
  }

  FailureMode effective_mode(const ConstraintDecl& c) const {
    if (config_.soft_constraints.count(c.id)) return FailureMode::kContinue;
    return physical::mode_of(c, config_.defaults);
  }

  checks::JudgeRef judge_for(const ImplCandidate& impl) const {
    return {&client_, impl.mechanism.name, config_.seed};
  }

  CheckOutcome check_one(const ConstraintDecl& c, const ImplCandidate& impl, const AttemptView& a) const;
  void record_check(TupleWork& w, const ConstraintDecl& c, const ImplCandidate& impl, const AttemptView& a,
                    int64_t tuple_id, int attempt, const CheckOutcome& out) const;

  model::ModelResponse call_model(const model::ModelRequest& req) const;

  /// Runs the operator for one input row (a tuple, or a group for
  /// aggregates) through the attempt loop. Fills the output value or
  /// verdict into \`out_row\` / \`verdict\`.
  void enforce(const Block& b, const Row& input_row, int64_t tuple_id, const std::vector<int64_t>& members,
               TupleWork& w, Row& out_row, std::optional<bool>& verdict) const;

  /// Checks once without retry (scan and expression stages).
  void check_once(const Block& b, const Row& row, int64_t tuple_id, TupleWork& w) const;

  void finish_dispositions(const Block& b, const std::vector<std::pair<const ConstraintDecl*, CheckOutcome>>& violations,
                           TupleWork& w) const;

  void process_stage(const Block& b, std::vector<Tuple>& live, obs::StageCounts& counts);
  void process_aggregate(const Block& b, std::vector<Tuple>& live, obs::StageCounts& counts);
  void for_each_parallel(size_t n, const std::function<void(size_t)>& fn);
  void flush_work(std::vector<TupleWork>& works);

  model::ModelClient& client_;
  const EngineConfig& config_;
  ExemplarCache& cache_;
  const physical::PhysicalPlan& plan_;
  obs::RunWriter* sink_;
  EvalContext eval_ctx_;
  std::atomic<bool> aborted_{false};
  std::string abort_reason_;
  std::vector<Tuple> tombstones_;  // tuples dropped by IGNORE
  int64_t next_id_ = 1;
  RunOutcome outcome_;
};

model::ModelResponse Runner::call_model(const model::ModelRequest& req) const {
  try {
    return client_.complete(req);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kModel) throw;
  }
  return client_.complete(req);
}

CheckOutcome Runner::check_one(const ConstraintDecl& c, const ImplCandidate& impl, const AttemptView& a) const {
  auto value_of = [&](const std::string& name) -> Value {
    auto it = a.row->find(name);
    return it == a.row->end() ? Value() : it->second;
  };
  CheckOutcome out;
  switch (c.cls) {
    case ConstraintClass::kDomain:
      if (c.domain) {
        out = checks::check_domain(value_of(c.target), *c.domain);
      } else {
        out = checks::eval_assertion(*c.expr, *a.row, eval_ctx_);
      }
      break;
    case ConstraintClass::kInclude:
    case ConstraintClass::kExclude:
      out = checks::check_ie(value_of(c.target), *c.matcher, c.cls == ConstraintClass::kInclude, judge_for(impl));
      break;
    case ConstraintClass::kGrounded: {
      Value v = value_of(c.target);
      std::string text = v.is_null() ? "" : v.to_text();
      if (v.is_null()) {
        out = CheckOutcome::violation(impl.mechanism.to_string(), "value is NULL");
      } else if (impl.mechanism.deterministic) {
        out = checks::check_grounding_extractive(text, a.sources, config_.normalize_whitespace_grounding);
      } else {
        std::string src;
        for (size_t i = 0; i < a.sources.size(); ++i) src += (i ? "\n" : "") + a.sources[i];
        out = checks::check_grounding_abstractive(text, src, judge_for(impl));
      }
      break;
    }
    case ConstraintClass::kSound:
      if (!a.cot) {
        out = CheckOutcome::violation(impl.mechanism.to_string(),
                                      "the operator did not return reasoning in the PREMISES/STEPS/ANSWER format");
      } else {
        out = checks::check_soundness(a.inputs_text, *a.cot, a.verdict.value_or(a.cot->answer), judge_for(impl));
      }
      break;
    case ConstraintClass::kRelevant:
      out = checks::check_relevance(a.op->prompt ? a.op->prompt->raw_text : "", a.inputs_text, a.output,
                                    judge_for(impl));
      break;
    case ConstraintClass::kAssertion:
      out = checks::eval_assertion(*c.expr, *a.row, eval_ctx_);
      break;
  }
  if (impl.mode == EnforceMode::kProactiveMask) {
    out.mechanism = impl.mechanism.to_string();
    if (a.response && a.response->mask_exhausted) {
      out.pass = false;
      out.feedback = "constrained decoding found no output accepted by the " + impl.mechanism.name + " mask";
    }
  }
  return out;
}

void Runner::record_check(TupleWork& w, const ConstraintDecl& c, const ImplCandidate& impl, const AttemptView& a,
                          int64_t tuple_id, int attempt, const CheckOutcome& out) const {
  obs::ConstraintInvocationRecord r;
  r.constraint_id = c.id;
  r.op_id = a.op->op_id;
  r.tuple_id = tuple_id;
  r.attempt = attempt;
  obs::json values = obs::json::object();
  std::vector<std::string> names = c.refs;
  if (!c.target.empty() && std::find(names.begin(), names.end(), c.target) == names.end()) names.insert(names.begin(), c.target);
  for (const auto& n : names) {
    auto it = a.row->find(n);
    if (it != a.row->end()) values[n] = obs::snapshot_text(it->second.is_null() ? "NULL" : it->second.to_text());
  }
  if (c.cls == ConstraintClass::kSound || c.cls == ConstraintClass::kRelevant) values["output"] = obs::snapshot_text(a.output);
  r.input = {{"values", values}, {"source", obs::snapshot_text(a.inputs_text)}};
  r.predicted = out.pass ? "pass" : "violation";
  r.confidence = out.confidence;
  r.impl = impl.mechanism.to_string();
  r.stochastic = !impl.mechanism.deterministic;
  r.mode = physical::enforce_mode_name(impl.mode);
  r.constraint_text = lang::format_predicate(c);
  r.description = lang::describe_constraint(c);
  r.feedback = out.feedback;
  r.cost = out.cost;
  w.cost += out.cost;
  w.checks.push_back(std::move(r));
}

void Runner::finish_dispositions(const Block& b,
                                 const std::vector<std::pair<const ConstraintDecl*, CheckOutcome>>& violations,
                                 TupleWork& w) const {
  (void)b;
  if (violations.empty()) return;
  int worst = -1;
  const ConstraintDecl* worst_c = nullptr;
  for (const auto& [c, out] : violations) {
    int s = severity(effective_mode(*c));
    if (s > worst) {
      worst = s;
      worst_c = c;
    }
  }
  switch (effective_mode(*worst_c)) {
    case FailureMode::kContinue:
      for (const auto& [c, out] : violations) w.tuple.flag(c->id);
      if (w.disposition == Disposition::kKept) w.disposition = Disposition::kFlagged;
      break;
    case FailureMode::kIgnore:
      w.disposition = Disposition::kIgnored;
      break;
    case FailureMode::kAbort:
      w.disposition = Disposition::kAborted;
      w.abort_reason = "constraint " + worst_c->id + " failed with ABORT: " + violations.front().second.feedback;
      break;
  }
}

void Runner::check_once(const Block& b, const Row& row, int64_t tuple_id, TupleWork& w) const {
  AttemptView a;
  a.op = b.op;
  a.row = &row;
  std::vector<std::pair<const ConstraintDecl*, CheckOutcome>> violations;
  for (const ConstraintDecl* c : b.constraints) {
    const ImplCandidate& impl = impl_of(*c);
    CheckOutcome out = check_one(*c, impl, a);
    record_check(w, *c, impl, a, tuple_id, 0, out);
    if (!out.pass) violations.emplace_back(c, out);
  }
  finish_dispositions(b, violations, w);
}

void Runner::enforce(const Block& b, const Row& input_row, int64_t tuple_id, const std::vector<int64_t>& members,
                     TupleWork& w, Row& out_row, std::optional<bool>& verdict) const {
  const Stage& op = *b.op;
  const bool is_filter = op.kind == StageKind::kWhere;
  AttemptView base;
  base.op = &op;
  std::vector<std::string> seen;
  for (const auto& p : op.prompt->placeholders) {
    if (std::find(seen.begin(), seen.end(), p) != seen.end()) continue;
    seen.push_back(p);
    auto it = input_row.find(p);
    std::string text = it == input_row.end() || it->second.is_null() ? "" : it->second.to_text();
    base.sources.push_back(text);
    base.inputs_text += p + ": " + text + "\n";
  }
  if (!base.inputs_text.empty()) base.inputs_text.pop_back();

  std::string prompt = render_prompt(*op.prompt, input_row);
  std::string full = logical::prompt_with_constraints(op);
  if (full.size() > op.prompt->raw_text.size()) prompt += full.substr(op.prompt->raw_text.size());

  std::map<std::string, std::string> inputs;
  for (size_t i = 0; i < seen.size(); ++i) inputs[seen[i]] = base.sources[i];

  std::shared_ptr<const automata::CharAutomaton> mask;
  std::vector<const ConstraintDecl*> streamed;
  for (const ConstraintDecl* c : b.constraints) {
    const ImplCandidate& impl = impl_of(*c);
    if (impl.mode == EnforceMode::kProactiveMask) {
      auto m = build_mask(*c, op, base.sources);
      mask = mask ? std::make_shared<automata::ProductAutomaton>(mask, m) : m;
    } else if (impl.mode == EnforceMode::kProactiveStream) {
      streamed.push_back(c);
    }
  }

  std::string suffix;
  const int default_retry = config_.defaults.retry;
  for (int attempt = 0;; ++attempt) {
    model::ModelRequest req;
    req.op_id = op.op_id;
    req.prompt = prompt + suffix;
    req.contract = is_filter ? model::Contract::kBooleanCot : model::Contract::kText;
    req.inputs = inputs;
    req.mask = mask;
    req.attempt = attempt;
    req.seed = config_.seed;
    std::unique_ptr<automata::StreamGuard> guard;
    if (!streamed.empty()) {
      std::string src;
      for (size_t i = 0; i < base.sources.size(); ++i) src += (i ? "\n" : "") + base.sources[i];
      std::vector<checks::JudgeRef> judges;
      for (const auto* c : streamed) judges.push_back(judge_for(impl_of(*c)));
      guard = std::make_unique<automata::StreamGuard>(
          config_.segmenter,
          [judges, src](const std::string& partial) {
            CheckOutcome total = CheckOutcome::ok(judges.front().client ? "model:" + judges.front().name : "");
            for (const auto& j : judges) {
              CheckOutcome o = checks::check_grounding_abstractive(partial, src, j);
              total.cost += o.cost;
              if (!o.pass) {
                o.cost = total.cost;
                return o;
              }
              total.confidence = std::min(total.confidence, o.confidence);
            }
            return total;
          },
          config_.stream_policy);
      req.guard = guard.get();
    }

    model::ModelResponse resp = call_model(req);
    w.cost += resp.cost;

    Row cand = input_row;
    AttemptView a = base;
    a.row = &cand;
    a.output = resp.text;
    a.response = &resp;
    a.cot = resp.cot;
    Value stored;
    std::string status = "ok";
    if (is_filter) {
      a.verdict = resp.cot ? std::optional<bool>(resp.cot->answer) : parse_bool_text(resp.text);
      if (!a.verdict) status = "unparseable";
    } else {
      Type t = op.out_type.value_or(Type::kAny);
      if (t == Type::kAny || t == Type::kString) {
        stored = Value(resp.text);
        cand[op.attr] = stored;
      } else if (auto typed = parse_typed(resp.text, t)) {
        stored = *typed;
        cand[op.attr] = stored;
      } else {
        cand[op.attr] = Value(resp.text);
      }
    }
    if (resp.mask_exhausted) status = "mask_exhausted";

    std::vector<std::pair<const ConstraintDecl*, CheckOutcome>> violations;
    bool final_attempt = false;
    bool retry = false;
    for (const ConstraintDecl* c : b.constraints) {
      const ImplCandidate& impl = impl_of(*c);
      CheckOutcome out;
      if (impl.mode == EnforceMode::kProactiveStream && resp.guard_outcome) {
        out = *resp.guard_outcome;
        out.mechanism = impl.mechanism.to_string();
      } else {
        out = check_one(*c, impl, a);
      }
      record_check(w, *c, impl, a, tuple_id, attempt, out);
      if (out.pass) continue;
      violations.emplace_back(c, out);
      if (!final_attempt) {
        if (attempt < physical::retry_of(*c, config_.defaults)) {
          retry = true;
          break;
        }
        final_attempt = true;
      }
    }
    bool unparseable_filter = is_filter && !a.verdict;
    if (unparseable_filter && violations.empty() && attempt < default_retry) retry = true;
    if (!violations.empty() && status == "ok") status = "violation";

    obs::OpInvocationRecord rec;
    rec.op_id = op.op_id;
    rec.kind = kind_name(op.kind);
    rec.tuple_id = tuple_id;
    rec.inputs = members;
    rec.attempt = attempt;
    rec.prompt = req.prompt;
    rec.output = resp.text;
    rec.cost = resp.cost;
    rec.status = status;
    w.ops.push_back(std::move(rec));

    if (retry) {
      std::string reason, constraint;
      if (!violations.empty()) {
        constraint = lang::describe_constraint(*violations.front().first);
        reason = violations.front().second.feedback;
      } else {
        constraint = "the answer must be true or false";
        reason = "the output could not be read as a boolean";
      }
      suffix = feedback_block(resp.text, constraint, reason);
      auto ex = cache_.nearest(op.op_id, prompt, config_.exemplars_per_retry);
      if (!ex.empty()) {
        suffix += "\nExamples of accepted outputs:";
        for (const auto& e : ex) suffix += "\nInput: " + e.prompt + "\nOutput: " + e.output;
      }
      continue;
    }

    w.ops.back().final = true;
    if (violations.empty() && !unparseable_filter) w.exemplars.emplace_back(prompt, resp.text);
    finish_dispositions(b, violations, w);
    if (is_filter) {
      verdict = a.verdict;
      if (w.disposition != Disposition::kIgnored && w.disposition != Disposition::kAborted && !(verdict && *verdict))
        w.disposition = Disposition::kFiltered;
    } else {
      out_row = input_row;
      out_row[op.attr] = stored;
    }
    w.ops.back().disposition = disposition_name(w.disposition);
    return;
  }
}

void Runner::for_each_parallel(size_t n, const std::function<void(size_t)>& fn) {
  size_t workers = static_cast<size_t>(std::max(1, config_.workers));
  if (workers <= 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> threads;
  for (size_t t = 0; t < std::min(workers, n); ++t)
    threads.emplace_back([&] {
      for (size_t i = next++; i < n; i = next++) fn(i);
    });
  for (auto& t : threads) t.join();
}

void Runner::flush_work(std::vector<TupleWork>& works) {
  for (auto& w : works) {
    for (auto& e : w.exemplars) cache_.add(w.ops.empty() ? "" : w.ops.front().op_id, e.first, e.second);
    for (auto& r : w.ops) {
      outcome_.totals.cost += r.cost;
      ++outcome_.totals.op_invocations;
      if (sink_) sink_->append(r);
    }
    for (auto& r : w.checks) {
      outcome_.totals.cost += r.cost;
      ++outcome_.totals.constraint_invocations;
      if (sink_) sink_->append(r);
    }
  }
  if (sink_) sink_->flush();
}

void Runner::process_stage(const Block& b, std::vector<Tuple>& live, obs::StageCounts& counts) {
  const Stage& op = *b.op;
  std::vector<TupleWork> works(live.size());
  for_each_parallel(live.size(), [&](size_t i) {
    TupleWork& w = works[i];
    if (aborted_) return;
    w.tuple = live[i];
    try {
      if (op.is_semantic()) {
        Row out_row;
        std::optional<bool> verdict;
        enforce(b, w.tuple.values, w.tuple.id, {}, w, out_row, verdict);
        if (op.kind != StageKind::kWhere) w.tuple.values = std::move(out_row);
      } else {
        obs::OpInvocationRecord rec;
        rec.op_id = op.op_id;
        rec.kind = kind_name(op.kind);
        rec.tuple_id = w.tuple.id;
        rec.final = true;
        if (op.kind == StageKind::kWhere) {
          Value v = eval_expr(*op.expr, w.tuple.values, eval_ctx_);
          if (!v.is_null() && !v.is_bool()) throw Error(ErrorCode::kCheck, "WHERE predicate of " + op.op_id + " is not boolean");
          rec.output = v.to_text();
          check_once(b, w.tuple.values, w.tuple.id, w);
          if (w.disposition == Disposition::kKept || w.disposition == Disposition::kFlagged)
            if (!(v.is_bool() && v.as_bool())) w.disposition = Disposition::kFiltered;
        } else if (op.kind != StageKind::kScan) {
          Value v = eval_expr(*op.expr, w.tuple.values, eval_ctx_);
          if (op.out_type) v = cast_value(v, *op.out_type);
          rec.output = v.is_null() ? "NULL" : v.to_text();
          w.tuple.values[op.attr] = v;
          check_once(b, w.tuple.values, w.tuple.id, w);
        } else {
          check_once(b, w.tuple.values, w.tuple.id, w);
        }
        rec.disposition = disposition_name(w.disposition);
        w.ops.insert(w.ops.begin(), std::move(rec));
      }
    } catch (...) {
      w.error = std::current_exception();
      aborted_ = true;
    }
    w.processed = true;
    if (w.disposition == Disposition::kAborted) aborted_ = true;
  });

  for (auto& w : works)
    if (w.error) {
      flush_work(works);
      std::rethrow_exception(w.error);
    }

  counts.in = static_cast<int64_t>(live.size());
  std::vector<Tuple> next;
  bool aborting = false;
  for (auto& w : works) {
    if (w.processed && w.disposition == Disposition::kAborted && !aborting) {
      aborting = true;
      abort_reason_ = w.abort_reason;
    }
  }
  for (auto& w : works) {
    if (!w.processed) continue;
    if (w.disposition == Disposition::kFiltered) ++counts.filtered;
    if (w.disposition == Disposition::kIgnored) {
      ++counts.ignored;
      tombstones_.push_back(w.tuple);
    }
    if (!aborting && (w.disposition == Disposition::kKept || w.disposition == Disposition::kFlagged)) {
      ++counts.out;
      next.push_back(w.tuple);
    }
  }
  if (aborting) counts.aborted_discarded = counts.in - counts.filtered - counts.ignored;
  flush_work(works);
  live = std::move(next);
}

void Runner::process_aggregate(const Block& b, std::vector<Tuple>& live, obs::StageCounts& counts) {
  const Stage& op = *b.op;
  auto key_of = [&](const Tuple& t) -> std::optional<std::vector<std::string>> {
    std::vector<std::string> key;
    for (const auto& g : op.group_by) {
      auto it = t.values.find(g);
      if (it == t.values.end()) return std::nullopt;
      key.push_back(it->second.is_null() ? std::string("\x01NULL") : it->second.to_text());
    }
    return key;
  };
  std::vector<std::vector<std::string>> order;
  std::map<std::vector<std::string>, std::vector<size_t>> groups;
  for (size_t i = 0; i < live.size(); ++i) {
    auto k = *key_of(live[i]);
    if (!groups.count(k)) order.push_back(k);
    groups[k].push_back(i);
  }
  std::set<std::vector<std::string>> poisoned;
  for (const auto& t : tombstones_)
    if (auto k = key_of(t); k && groups.count(*k)) poisoned.insert(*k);

  counts.in = static_cast<int64_t>(live.size());
  std::vector<TupleWork> works(order.size());
  std::vector<int64_t> ids(order.size());
  for (size_t g = 0; g < order.size(); ++g) ids[g] = next_id_++;

  for_each_parallel(order.size(), [&](size_t g) {
    TupleWork& w = works[g];
    if (aborted_) return;
    const auto& idx = groups.at(order[g]);
    std::vector<int64_t> members;
    for (size_t i : idx) members.push_back(live[i].id);
    w.tuple.id = ids[g];
    w.tuple.parents = members;
    for (size_t i : idx)
      for (const auto& f : live[i].flags) w.tuple.flag(f);
    try {
      if (poisoned.count(order[g])) {
        obs::OpInvocationRecord rec;
        rec.op_id = op.op_id;
        rec.kind = kind_name(op.kind);
        rec.tuple_id = w.tuple.id;
        rec.inputs = members;
        rec.status = "skipped";
        rec.final = true;
        rec.disposition = "ignored";
        w.ops.push_back(rec);
        w.disposition = Disposition::kIgnored;
      } else {
        Row group_row;
        const Tuple& first = live[idx.front()];
        for (const auto& gname : op.group_by) group_row[gname] = first.values.at(gname);
        for (const auto& p : op.prompt->placeholders) {
          if (group_row.count(p)) continue;
          std::string joined;
          for (size_t k = 0; k < idx.size(); ++k) {
            auto it = live[idx[k]].values.find(p);
            joined += (k ? "\n" : "") + (it == live[idx[k]].values.end() ? std::string() : it->second.to_text());
          }
          group_row[p] = Value(joined);
        }
        Row out_row;
        std::optional<bool> verdict;
        enforce(b, group_row, w.tuple.id, members, w, out_row, verdict);
        w.tuple.values.clear();
        for (const auto& gname : op.group_by) w.tuple.values[gname] = first.values.at(gname);
        w.tuple.values[op.attr] = out_row[op.attr];
      }
    } catch (...) {
      w.error = std::current_exception();
      aborted_ = true;
    }
    w.processed = true;
    if (w.disposition == Disposition::kAborted) aborted_ = true;
  });

  for (auto& w : works)
    if (w.error) {
      flush_work(works);
      std::rethrow_exception(w.error);
    }

  bool aborting = false;
  for (auto& w : works)
    if (w.processed && w.disposition == Disposition::kAborted && !aborting) {
      aborting = true;
      abort_reason_ = w.abort_reason;
    }
  std::vector<Tuple> next;
  int64_t dropped_members = 0;
  for (size_t g = 0; g < works.size(); ++g) {
    auto& w = works[g];
    if (!w.processed) continue;
    int64_t n = static_cast<int64_t>(groups.at(order[g]).size());
    if (w.disposition == Disposition::kIgnored) {
      counts.ignored += n;
      dropped_members += n;
      continue;
    }
    if (!aborting && (w.disposition == Disposition::kKept || w.disposition == Disposition::kFlagged)) {
      ++counts.out;
      counts.merged += n - 1;
      for (int64_t parent : w.tuple.parents)
        if (sink_) sink_->append(obs::LineageRecord{w.tuple.id, parent, op.op_id});
      next.push_back(w.tuple);
    }
  }
  if (aborting) {
    counts.out = 0;
    counts.merged = 0;
    counts.aborted_discarded = counts.in - counts.ignored;
  }
  flush_work(works);
  tombstones_.clear();
  live = std::move(next);
}

RunOutcome Runner::run(const std::map<std::string, Relation>& datasets) {
  const auto& stages = plan_.logical.stages;
  if (stages.empty() || stages.front().kind != StageKind::kScan) throw Error(ErrorCode::kPlan, "plan must start with a scan");
  const Stage& scan = stages.front();
  auto ds = datasets.find(scan.table);
  if (ds == datasets.end()) throw Error(ErrorCode::kNotFound, "missing table '" + scan.table + "'");
  const Relation& source = ds->second;
  for (const auto& a : scan.output_schema)
    if (std::find(source.columns.begin(), source.columns.end(), a.name) == source.columns.end())
      throw Error(ErrorCode::kInvalidArgument, "table '" + scan.table + "' has no column '" + a.name + "'");

  std::vector<Block> blocks;
  for (const auto& ob : logical::operator_blocks(plan_.logical)) {
    Block b;
    b.op = &stages[ob.op_index];
    for (size_t ci : ob.constraint_indices) b.constraints.push_back(&stages[ci].constraint);
    blocks.push_back(std::move(b));
  }

  std::vector<Tuple> live;
  for (const auto& t : source.tuples) {
    Tuple copy = t;
    copy.id = next_id_++;
    copy.flags.clear();
    copy.parents.clear();
    live.push_back(std::move(copy));
  }
  outcome_.totals.tuples_in = static_cast<int64_t>(live.size());
  std::vector<std::string> columns = source.columns;

  try {
    for (const Block& b : blocks) {
      obs::StageCounts counts;
      counts.op_id = b.op->op_id;
      counts.kind = kind_name(b.op->kind);
      if (b.op->kind == StageKind::kAggregate) {
        process_aggregate(b, live, counts);
        columns = b.op->group_by;
        columns.push_back(b.op->attr);
      } else {
        process_stage(b, live, counts);
        if ((b.op->kind == StageKind::kSet || b.op->kind == StageKind::kExtend) &&
            std::find(columns.begin(), columns.end(), b.op->attr) == columns.end())
          columns.push_back(b.op->attr);
      }
      outcome_.stages.push_back(counts);
      if (counts.aborted_discarded > 0 || aborted_) {
        outcome_.status = "aborted";
        outcome_.error = abort_reason_;
        live.clear();
        break;
      }
    }
  } catch (const Error& e) {
    outcome_.status = "failed";
    outcome_.error = std::string(error_code_name(e.code())) + ": " + e.what();
    live.clear();
  } catch (const std::exception& e) {
    outcome_.status = "failed";
    outcome_.error = e.what();
    live.clear();
  }

  outcome_.output.name = "results";
  outcome_.output.columns = columns;
  outcome_.output.tuples = std::move(live);
  outcome_.totals.tuples_out = static_cast<int64_t>(outcome_.output.tuples.size());
  for (const auto& t : outcome_.output.tuples) outcome_.totals.flagged += !t.flags.empty();
  return std::move(outcome_);
}

}  // namespace

Engine::Engine(model::ModelClient& client, EngineConfig config, ExemplarCache* cache)
    : client_(client), config_(std::move(config)) {
  if (!cache) {
    own_cache_ = std::make_unique<ExemplarCache>(config_.exemplar_capacity);
    cache = own_cache_.get();
  }
  cache_ = cache;
}

RunOutcome Engine::execute(const physical::PhysicalPlan& plan, const std::map<std::string, Relation>& datasets,
                           obs::RunWriter* sink) {
  Runner runner(client_, config_, *cache_, plan, sink);
  return runner.run(datasets);
}

}  // namespace sicql::engine
