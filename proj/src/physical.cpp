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

#include "sicql/physical.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "json.hpp"
#include "sicql/error.hpp"
#include "sicql/format.hpp"
#include "sicql/logical.hpp"

namespace sicql::physical {

using json = nlohmann::json;
using lang::Annotation;
using lang::ConstraintClass;
using lang::DomainSpec;
using lang::FailureMode;
using lang::Matcher;
using lang::StageKind;

namespace {

constexpr double kExhaustiveLimit = 1e4;

bool generates_attribute(const Stage& s) {
  return s.is_semantic() &&
         (s.kind == StageKind::kSet || s.kind == StageKind::kExtend || s.kind == StageKind::kAggregate);
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

ImplCandidate deterministic(const ConstraintDecl& c, EnforceMode mode, const std::string& kind, double cost) {
  ImplCandidate out;
  out.constraint_id = c.id;
  out.mode = mode;
  out.mechanism = {true, kind};
  out.cost = cost;
  return out;
}

ImplCandidate judged(const ConstraintDecl& c, EnforceMode mode, const JudgeSpec& j, double cost) {
  ImplCandidate out;
  out.constraint_id = c.id;
  out.mode = mode;
  out.mechanism = {false, j.name};
  out.cost = cost;
  out.precision = j.precision;
  out.recall = j.recall;
  out.confidence_capable = j.confidence_capable;
  out.confidence = j.confidence;
  return out;
}

const char* domain_kind(const DomainSpec& d) {
  switch (d.kind) {
    case DomainSpec::Kind::kType: return "type";
    case DomainSpec::Kind::kRegex: return "regex";
    case DomainSpec::Kind::kRange: return "range";
    case DomainSpec::Kind::kMaxLength: return "length";
    case DomainSpec::Kind::kValueSet: return "value_set";
  }
  return "type";
}

const char* matcher_kind(const Matcher& m) {
  switch (m.kind) {
    case Matcher::Kind::kLiteral: return "literal";
    case Matcher::Kind::kRegex: return "regex";
    case Matcher::Kind::kLiteralSet: return "literal_set";
    case Matcher::Kind::kPrompt: return "prompt";
  }
  return "literal";
}

void check_probability(double v, const std::string& what) {
  if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::kInvalidArgument, what + " must be in [0, 1], got " + num(v));
}

void check_cost(double v, const std::string& what) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, what + " must be a finite cost >= 0");
}

void reject_unknown(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known |= it.key() == k;
    if (!known) throw Error(ErrorCode::kInvalidArgument, "unknown key '" + it.key() + "' in " + where);
  }
}

std::optional<double> opt_number(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key) || obj[key].is_null()) return std::nullopt;
  if (!obj[key].is_number()) throw Error(ErrorCode::kInvalidArgument, std::string(key) + " in " + where + " must be a number");
  return obj[key].get<double>();
}

ThresholdSet parse_threshold_set(const json& obj, const std::string& where) {
  ThresholdSet t;
  t.min_precision = opt_number(obj, "min_precision", where);
  t.min_recall = opt_number(obj, "min_recall", where);
  t.min_confidence = opt_number(obj, "min_confidence", where);
  for (auto* v : {&t.min_precision, &t.min_recall, &t.min_confidence})
    if (*v) check_probability(**v, "threshold in " + where);
  return t;
}

json threshold_set_json(const ThresholdSet& t) {
  json o = json::object();
  if (t.min_precision) o["min_precision"] = *t.min_precision;
  if (t.min_recall) o["min_recall"] = *t.min_recall;
  if (t.min_confidence) o["min_confidence"] = *t.min_confidence;
  return o;
}

bool candidate_matches(const CandidateProfile& p, const ImplCandidate& c) {
  if (p.mode != c.mode || p.mechanism.deterministic != c.mechanism.deterministic) return false;
  return p.mechanism.name.empty() || p.mechanism.name == c.mechanism.name;
}

// Names the thresholds that rule out every candidate of one constraint.
std::string binding_thresholds(const std::vector<ImplCandidate>& cands, const ThresholdSet& t) {
  std::vector<std::string> parts;
  auto best = [&](auto field) {
    double b = 0.0;
    for (const auto& c : cands) b = std::max(b, field(c));
    return b;
  };
  if (t.min_precision) {
    double b = best([](const ImplCandidate& c) { return c.precision; });
    if (b < *t.min_precision) parts.push_back("min_precision " + num(*t.min_precision) + " (best available " + num(b) + ")");
  }
  if (t.min_recall) {
    double b = best([](const ImplCandidate& c) { return c.recall; });
    if (b < *t.min_recall) parts.push_back("min_recall " + num(*t.min_recall) + " (best available " + num(b) + ")");
  }
  if (t.min_confidence) {
    double b = best([](const ImplCandidate& c) { return c.confidence_capable ? c.confidence : 0.0; });
    if (b < *t.min_confidence)
      parts.push_back("min_confidence " + num(*t.min_confidence) + " (best available " + num(b) + ")");
  }
  if (parts.empty()) parts.push_back("the combination of precision, recall and confidence thresholds");
  std::string out;
  for (const auto& p : parts) out += (out.empty() ? "" : ", ") + p;
  return out;
}

}  // namespace

const char* enforce_mode_name(EnforceMode m) {
  switch (m) {
    case EnforceMode::kReactive: return "reactive";
    case EnforceMode::kProactiveMask: return "proactive-mask";
    case EnforceMode::kProactiveStream: return "proactive-stream";
  }
  return "reactive";
}

std::optional<EnforceMode> enforce_mode_from_name(std::string_view name) {
  if (name == "reactive") return EnforceMode::kReactive;
  if (name == "proactive-mask") return EnforceMode::kProactiveMask;
  if (name == "proactive-stream") return EnforceMode::kProactiveStream;
  return std::nullopt;
}

std::string Mechanism::to_string() const {
  std::string out = deterministic ? "deterministic" : "model";
  if (!name.empty()) out += ":" + name;
  return out;
}

std::optional<Mechanism> Mechanism::parse(std::string_view text) {
  std::string_view head = text;
  std::string_view tail;
  if (auto colon = text.find(':'); colon != std::string_view::npos) {
    head = text.substr(0, colon);
    tail = text.substr(colon + 1);
    if (tail.empty()) return std::nullopt;
  }
  if (head == "deterministic") return Mechanism{true, std::string(tail)};
  if (head == "model") return Mechanism{false, std::string(tail)};
  return std::nullopt;
}

std::string ImplCandidate::tags() const {
  std::string out = mechanism.deterministic ? "[deterministic]" : "[stochastic:" + mechanism.name + "]";
  return out + (is_proactive() ? " [proactive]" : " [reactive]");
}

bool is_extractive_grounding(const ConstraintDecl& c, const Stage& producer) {
  return c.cls == ConstraintClass::kGrounded && producer.annotation == Annotation::kExtractive;
}

std::optional<std::string> mask_kind(const ConstraintDecl& c, const Stage& producer) {
  if (!generates_attribute(producer) || c.target != producer.attr) return std::nullopt;
  if (c.cls == ConstraintClass::kGrounded) {
    if (is_extractive_grounding(c, producer)) return "grounding-extractive";
    return std::nullopt;
  }
  if (c.cls != ConstraintClass::kDomain || !c.domain) return std::nullopt;
  switch (c.domain->kind) {
    case DomainSpec::Kind::kRegex: return "domain-regex";
    case DomainSpec::Kind::kType:
      if (c.domain->type == Type::kString || c.domain->type == Type::kAny) return std::nullopt;
      return "domain-type";
    case DomainSpec::Kind::kValueSet: return "domain-set";
    case DomainSpec::Kind::kMaxLength: return "domain-length";
    case DomainSpec::Kind::kRange: return std::nullopt;
  }
  return std::nullopt;
}

std::vector<ImplCandidate> enumerate_impls(const ConstraintDecl& c, const Stage& producer, const Capabilities& caps) {
  std::vector<ImplCandidate> out;
  auto add_mask = [&](const char* kind) {
    auto mk = mask_kind(c, producer);
    if (mk && caps.token_masking && caps.decode_allowlist.count(*mk))
      out.push_back(deterministic(c, EnforceMode::kProactiveMask, kind, caps.mask_cost));
  };
  auto add_judges = [&](bool stream) {
    if (caps.judges.empty())
      throw Error(ErrorCode::kPlan, "no implementation for constraint " + c.id + ": it needs a judge and none is configured");
    for (const auto& j : caps.judges) out.push_back(judged(c, EnforceMode::kReactive, j, j.cost));
    if (stream && caps.streaming && generates_attribute(producer))
      for (const auto& j : caps.judges)
        out.push_back(judged(c, EnforceMode::kProactiveStream, j, j.cost * caps.stream_segments));
  };
  switch (c.cls) {
    case ConstraintClass::kDomain:
      out.push_back(deterministic(c, EnforceMode::kReactive, c.domain ? domain_kind(*c.domain) : "expression",
                                  caps.deterministic_cost));
      add_mask("regex_dfa");
      break;
    case ConstraintClass::kInclude:
    case ConstraintClass::kExclude:
      if (c.matcher && c.matcher->kind == Matcher::Kind::kPrompt) {
        add_judges(false);
      } else {
        out.push_back(deterministic(c, EnforceMode::kReactive, c.matcher ? matcher_kind(*c.matcher) : "literal",
                                    caps.deterministic_cost));
      }
      break;
    case ConstraintClass::kGrounded:
      if (is_extractive_grounding(c, producer)) {
        out.push_back(deterministic(c, EnforceMode::kReactive, "substring", caps.deterministic_cost));
        add_mask("suffix_automaton");
        for (const auto& j : caps.judges) out.push_back(judged(c, EnforceMode::kReactive, j, j.cost));
      } else {
        add_judges(true);
      }
      break;
    case ConstraintClass::kSound:
    case ConstraintClass::kRelevant: add_judges(false); break;
    case ConstraintClass::kAssertion:
      out.push_back(deterministic(c, EnforceMode::kReactive, "expression", caps.deterministic_cost));
      break;
  }
  return out;
}

double expected_attempts(double v, int r) {
  v = std::clamp(v, 0.0, 1.0);
  double total = 0.0;
  double term = 1.0;
  for (int k = 0; k <= std::max(r, 0); ++k) {
    total += term;
    term *= v;
  }
  return total;
}

std::optional<double> ConstraintProfile::violation() const {
  if (violation_prob) return violation_prob;
  if (selectivity) return 1.0 - *selectivity;
  return std::nullopt;
}

ThresholdSet Thresholds::for_constraint(const std::string& id) const {
  ThresholdSet out = global;
  auto it = per_constraint.find(id);
  if (it == per_constraint.end()) return out;
  if (it->second.min_precision) out.min_precision = it->second.min_precision;
  if (it->second.min_recall) out.min_recall = it->second.min_recall;
  if (it->second.min_confidence) out.min_confidence = it->second.min_confidence;
  return out;
}

Profile parse_profile(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("profile is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::kInvalidArgument, "profile must be a JSON object");
  reject_unknown(doc, {"cardinality", "operators", "constraints", "thresholds"}, "profile");
  Profile p;
  if (auto n = opt_number(doc, "cardinality", "profile")) {
    check_cost(*n, "cardinality");
    p.cardinality = *n;
  }
  if (doc.contains("operators")) {
    for (auto& [name, o] : doc["operators"].items()) {
      std::string where = "operators." + name;
      if (!o.is_object()) throw Error(ErrorCode::kInvalidArgument, where + " must be an object");
      reject_unknown(o, {"cost", "cardinality_factor"}, where);
      OperatorProfile op;
      if (auto c = opt_number(o, "cost", where)) op.cost = *c;
      if (auto f = opt_number(o, "cardinality_factor", where)) op.cardinality_factor = *f;
      check_cost(op.cost, where + ".cost");
      check_cost(op.cardinality_factor, where + ".cardinality_factor");
      p.operators[name] = op;
    }
  }
  if (doc.contains("constraints")) {
    for (auto& [id, o] : doc["constraints"].items()) {
      std::string where = "constraints." + id;
      if (!o.is_object()) throw Error(ErrorCode::kInvalidArgument, where + " must be an object");
      reject_unknown(o, {"candidates", "violation_prob", "selectivity"}, where);
      ConstraintProfile cp;
      cp.violation_prob = opt_number(o, "violation_prob", where);
      cp.selectivity = opt_number(o, "selectivity", where);
      if (cp.violation_prob) check_probability(*cp.violation_prob, where + ".violation_prob");
      if (cp.selectivity) check_probability(*cp.selectivity, where + ".selectivity");
      if (o.contains("candidates")) {
        for (const auto& c : o["candidates"]) {
          std::string cw = where + ".candidates";
          reject_unknown(c, {"mode", "mechanism", "cost", "precision", "recall", "confidence"}, cw);
          CandidateProfile cand;
          auto mode = enforce_mode_from_name(c.value("mode", "reactive"));
          if (!mode) throw Error(ErrorCode::kInvalidArgument, "unknown mode in " + cw);
          cand.mode = *mode;
          auto mech = Mechanism::parse(c.value("mechanism", ""));
          if (!mech) throw Error(ErrorCode::kInvalidArgument, "mechanism in " + cw + " must be deterministic[:kind] or model[:judge]");
          cand.mechanism = *mech;
          cand.cost = opt_number(c, "cost", cw);
          cand.precision = opt_number(c, "precision", cw);
          cand.recall = opt_number(c, "recall", cw);
          cand.confidence = opt_number(c, "confidence", cw);
          if (cand.cost) check_cost(*cand.cost, cw + ".cost");
          for (auto* v : {&cand.precision, &cand.recall, &cand.confidence})
            if (*v) check_probability(**v, cw);
          cp.candidates.push_back(cand);
        }
      }
      p.constraints[id] = cp;
    }
  }
  if (doc.contains("thresholds")) {
    const json& t = doc["thresholds"];
    reject_unknown(t, {"max_plan_cost", "min_precision", "min_recall", "min_confidence", "constraints"},
                         "thresholds");
    p.thresholds.max_plan_cost = opt_number(t, "max_plan_cost", "thresholds");
    p.thresholds.global = parse_threshold_set(t, "thresholds");
    if (t.contains("constraints"))
      for (auto& [id, o] : t["constraints"].items()) {
        reject_unknown(o, {"min_precision", "min_recall", "min_confidence"}, "thresholds.constraints." + id);
        p.thresholds.per_constraint[id] = parse_threshold_set(o, "thresholds.constraints." + id);
      }
  }
  return p;
}

std::string profile_to_json(const Profile& p) {
  json doc;
  doc["cardinality"] = p.cardinality;
  doc["operators"] = json::object();
  for (const auto& [name, op] : p.operators)
    doc["operators"][name] = {{"cost", op.cost}, {"cardinality_factor", op.cardinality_factor}};
  doc["constraints"] = json::object();
  for (const auto& [id, cp] : p.constraints) {
    json o = json::object();
    if (cp.violation_prob) o["violation_prob"] = *cp.violation_prob;
    if (cp.selectivity) o["selectivity"] = *cp.selectivity;
    if (!cp.candidates.empty()) {
      o["candidates"] = json::array();
      for (const auto& c : cp.candidates) {
        json cj = {{"mode", enforce_mode_name(c.mode)}, {"mechanism", c.mechanism.to_string()}};
        if (c.cost) cj["cost"] = *c.cost;
        if (c.precision) cj["precision"] = *c.precision;
        if (c.recall) cj["recall"] = *c.recall;
        if (c.confidence) cj["confidence"] = *c.confidence;
        o["candidates"].push_back(cj);
      }
    }
    doc["constraints"][id] = o;
  }
  json t = threshold_set_json(p.thresholds.global);
  if (p.thresholds.max_plan_cost) t["max_plan_cost"] = *p.thresholds.max_plan_cost;
  if (!p.thresholds.per_constraint.empty()) {
    t["constraints"] = json::object();
    for (const auto& [id, ts] : p.thresholds.per_constraint) t["constraints"][id] = threshold_set_json(ts);
  }
  doc["thresholds"] = t;
  return doc.dump(2) + "\n";
}

Profile fill_profile_defaults(const LogicalPlan& plan, Profile p, const PlanDefaults& d) {
  for (const auto& s : plan.stages) {
    if (s.is_operator()) {
      if (s.kind != StageKind::kScan && !p.operators.count(s.op_id))
        p.operators[s.op_id] = {s.is_semantic() ? d.semantic_op_cost : d.expression_op_cost, 1.0};
      continue;
    }
    ConstraintProfile& cp = p.constraints[s.constraint.id];
    if (!cp.violation()) cp.selectivity = d.selectivity;
  }
  return p;
}

int retry_of(const ConstraintDecl& c, const PlanDefaults& d) { return c.retry.value_or(d.retry); }
FailureMode mode_of(const ConstraintDecl& c, const PlanDefaults& d) { return c.mode.value_or(d.mode); }

PlanEstimate estimate_plan(const LogicalPlan& plan, const std::map<std::string, ImplCandidate>& impls,
                           const Profile& profile, const PlanDefaults& d) {
  PlanEstimate out;
  double card = profile.cardinality;
  for (const auto& block : logical::operator_blocks(plan)) {
    const Stage& op = plan.stages[block.op_index];
    OperatorProfile opp;
    auto oit = profile.operators.find(op.op_id);
    if (oit != profile.operators.end()) {
      opp = oit->second;
    } else if (op.kind != StageKind::kScan) {
      throw Error(ErrorCode::kEstimate, "profile has no entry for operator " + op.op_id);
    }
    bool scan = op.kind == StageKind::kScan;

    double base = opp.cost;
    double checks = 0.0;
    double reach = 1.0;
    double pass_all = 1.0;
    int r = 0;
    std::vector<ConstraintEstimate> local;
    std::vector<double> reach_of;
    for (size_t i : block.constraint_indices) {
      const ConstraintDecl& c = plan.stages[i].constraint;
      auto cit = profile.constraints.find(c.id);
      if (cit == profile.constraints.end() || !cit->second.violation())
        throw Error(ErrorCode::kEstimate, "profile has no violation probability for constraint " + c.id);
      auto iit = impls.find(c.id);
      if (iit == impls.end()) throw Error(ErrorCode::kEstimate, "no implementation chosen for constraint " + c.id);
      ConstraintEstimate ce;
      ce.constraint_id = c.id;
      ce.impl = iit->second;
      ce.violation_prob = ce.impl.is_proactive() ? 0.0 : *cit->second.violation();
      if (ce.impl.is_proactive()) {
        base += ce.impl.cost;
        reach_of.push_back(1.0);
      } else {
        checks += ce.impl.cost * reach;
        reach_of.push_back(reach);
        reach *= 1.0 - ce.violation_prob;
      }
      pass_all *= 1.0 - ce.violation_prob;
      int rc = scan ? 0 : retry_of(c, d);
      r = std::max(r, rc);
      ce.adherence = mode_of(c, d) == FailureMode::kContinue ? 1.0 - std::pow(ce.violation_prob, rc + 1) : 1.0;
      local.push_back(ce);
    }

    OperatorEstimate oe;
    oe.op_index = block.op_index;
    oe.op_id = op.op_id;
    oe.input_cardinality = card;
    oe.attempts = expected_attempts(1.0 - pass_all, r);
    oe.cost_per_tuple = (base + checks) * oe.attempts;
    oe.cost = oe.cost_per_tuple * card;
    for (size_t k = 0; k < local.size(); ++k) {
      local[k].expected_checks = reach_of[k] * oe.attempts * card;
      local[k].expected_retries = (oe.attempts - 1.0) * card;
      oe.reliability *= local[k].adherence;
      out.per_constraint.push_back(local[k]);
    }
    out.expected_cost += oe.cost;
    out.per_operator.push_back(oe);
    card *= opp.cardinality_factor;
  }
  return out;
}

std::vector<std::pair<std::string, std::vector<ImplCandidate>>> candidate_table(const LogicalPlan& plan,
                                                                                const Profile& profile,
                                                                                const Capabilities& caps) {
  std::vector<std::pair<std::string, std::vector<ImplCandidate>>> out;
  for (size_t i = 0; i < plan.stages.size(); ++i) {
    if (plan.stages[i].is_operator()) continue;
    const ConstraintDecl& c = plan.stages[i].constraint;
    const Stage& producer = plan.stages[logical::find_producer(plan, i)];
    std::vector<ImplCandidate> cands = enumerate_impls(c, producer, caps);
    auto pit = profile.constraints.find(c.id);
    if (pit != profile.constraints.end() && !pit->second.candidates.empty()) {
      std::vector<ImplCandidate> chosen;
      for (const auto& pc : pit->second.candidates) {
        auto match = std::find_if(cands.begin(), cands.end(), [&](const ImplCandidate& x) { return candidate_matches(pc, x); });
        if (match == cands.end())
          throw Error(ErrorCode::kEstimate, std::string("profile candidate ") + enforce_mode_name(pc.mode) + " " +
                                                pc.mechanism.to_string() + " is not available for constraint " + c.id);
        ImplCandidate x = *match;
        if (pc.cost) x.cost = *pc.cost;
        if (!x.mechanism.deterministic) {
          if (pc.precision) x.precision = *pc.precision;
          if (pc.recall) x.recall = *pc.recall;
          if (pc.confidence) x.confidence = *pc.confidence;
        }
        chosen.push_back(x);
      }
      cands = std::move(chosen);
    }
    out.emplace_back(c.id, std::move(cands));
  }
  return out;
}

bool meets_thresholds(const ImplCandidate& c, const ThresholdSet& t) {
  if (c.mechanism.deterministic) return true;
  if (t.min_precision && c.precision < *t.min_precision) return false;
  if (t.min_recall && c.recall < *t.min_recall) return false;
  if (t.min_confidence && (!c.confidence_capable || c.confidence < *t.min_confidence)) return false;
  return true;
}

PhysicalPlan select_plan(const LogicalPlan& plan, const Profile& profile, const Capabilities& caps,
                         const PlanDefaults& d) {
  auto table = candidate_table(plan, profile, caps);
  std::vector<std::vector<ImplCandidate>> feasible;
  double assignments = 1.0;
  for (auto& [id, cands] : table) {
    ThresholdSet t = profile.thresholds.for_constraint(id);
    std::vector<ImplCandidate> ok;
    for (const auto& c : cands)
      if (meets_thresholds(c, t)) ok.push_back(c);
    if (ok.empty())
      throw Error(ErrorCode::kInfeasible,
                  "no implementation of constraint " + id + " meets " + binding_thresholds(cands, t));
    assignments *= static_cast<double>(ok.size());
    feasible.push_back(std::move(ok));
  }

  std::vector<size_t> pick(feasible.size(), 0);
  auto assignment = [&]() {
    std::map<std::string, ImplCandidate> m;
    for (size_t k = 0; k < feasible.size(); ++k) m[table[k].first] = feasible[k][pick[k]];
    return m;
  };

  PhysicalPlan out;
  out.logical = plan;
  out.assignments = assignments;
  std::optional<std::map<std::string, ImplCandidate>> best;
  PlanEstimate best_est;
  double cheapest = INFINITY;
  auto consider = [&]() {
    auto m = assignment();
    PlanEstimate e = estimate_plan(plan, m, profile, d);
    cheapest = std::min(cheapest, e.expected_cost);
    if (profile.thresholds.max_plan_cost && e.expected_cost > *profile.thresholds.max_plan_cost) return;
    if (!best || e.expected_cost < best_est.expected_cost) {
      best = std::move(m);
      best_est = std::move(e);
    }
  };

  if (assignments <= kExhaustiveLimit) {
    out.search = "exhaustive";
    // Odometer over candidate indices, last constraint fastest, so ties go
    // to the lexicographically first assignment.
    while (true) {
      consider();
      bool done = true;
      for (size_t k = feasible.size(); k-- > 0;) {
        if (++pick[k] < feasible[k].size()) {
          done = false;
          break;
        }
        pick[k] = 0;
      }
      if (done) break;
    }
  } else {
    // One pass of coordinate descent from the cheapest candidate of each
    // constraint.
    out.search = "greedy";
    for (size_t k = 0; k < feasible.size(); ++k) {
      size_t arg = 0;
      for (size_t j = 1; j < feasible[k].size(); ++j)
        if (feasible[k][j].cost < feasible[k][arg].cost) arg = j;
      pick[k] = arg;
    }
    for (size_t k = 0; k < feasible.size(); ++k) {
      size_t arg = pick[k];
      double arg_cost = estimate_plan(plan, assignment(), profile, d).expected_cost;
      for (size_t j = 0; j < feasible[k].size(); ++j) {
        pick[k] = j;
        double c = estimate_plan(plan, assignment(), profile, d).expected_cost;
        if (c < arg_cost) {
          arg = j;
          arg_cost = c;
        }
      }
      pick[k] = arg;
    }
    consider();
  }

  if (!best)
    throw Error(ErrorCode::kInfeasible, "max_plan_cost " + num(*profile.thresholds.max_plan_cost) +
                                            " is below the cheapest feasible plan cost " + num(cheapest));
  out.impls = std::move(*best);
  out.estimate = std::move(best_est);
  return out;
}

std::string format_physical(const PhysicalPlan& plan, const PlanDefaults& d) {
  std::map<size_t, const OperatorEstimate*> ops;
  for (const auto& o : plan.estimate.per_operator) ops[o.op_index] = &o;
  std::map<std::string, const ConstraintEstimate*> cons;
  for (const auto& c : plan.estimate.per_constraint) cons[c.constraint_id] = &c;

  std::string out;
  const auto& stages = plan.logical.stages;
  for (size_t i = 0; i < stages.size(); ++i) {
    const Stage& s = stages[i];
    std::string line = s.kind == StageKind::kScan ? lang::format_stage(s) : "|> " + lang::format_stage(s);
    if (s.is_operator()) {
      if (auto it = ops.find(i); it != ops.end()) {
        const OperatorEstimate& o = *it->second;
        line += "  -- rows=" + num(o.input_cardinality) + " attempts=" + num(o.attempts) + " cost=" + num(o.cost) +
                " reliability=" + num(o.reliability);
      }
    } else {
      const ConstraintDecl& c = s.constraint;
      auto impl = plan.impls.find(c.id);
      if (impl != plan.impls.end()) {
        const ImplCandidate& x = impl->second;
        line += "  " + x.tags() + " " + x.mechanism.name + " id=" + c.id + " check_cost=" + num(x.cost);
        if (!x.mechanism.deterministic) line += " precision=" + num(x.precision) + " recall=" + num(x.recall);
        line += std::string(" retry=") + std::to_string(retry_of(c, d)) + " " + lang::failure_mode_name(mode_of(c, d));
      }
      if (c.origin != lang::Origin::kDeclared) line += std::string("  -- ") + lang::origin_name(c.origin);
    }
    out += line + "\n";
  }
  out += "-- search: " + plan.search + " over " + num(plan.assignments) + " assignments\n";
  out += "-- expected cost: " + num(plan.estimate.expected_cost) + "\n";
  return out;
}

}  // namespace sicql::physical
