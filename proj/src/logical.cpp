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

#include "sicql/logical.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include "sicql/error.hpp"
#include "sicql/format.hpp"

namespace sicql::logical {

using lang::Annotation;
using lang::ConstraintClass;
using lang::Origin;
using lang::StageKind;

namespace {

bool contains(const std::vector<std::string>& v, const std::string& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

bool has_attr(const Stage& s, const std::string& name) {
  for (const auto& a : s.output_schema)
    if (a.name == name) return true;
  return false;
}

bool generates_attribute(const Stage& s) {
  return s.is_semantic() &&
         (s.kind == StageKind::kSet || s.kind == StageKind::kExtend || s.kind == StageKind::kAggregate);
}

std::set<std::string> all_ids(const LogicalPlan& plan) {
  std::set<std::string> ids;
  for (const auto& s : plan.stages)
    if (s.kind == StageKind::kAssert) ids.insert(s.constraint.id);
  return ids;
}

std::string fresh_id(std::set<std::string>& ids, const std::string& base) {
  std::string id = base;
  for (int n = 2; ids.count(id); ++n) id = base + "#" + std::to_string(n);
  ids.insert(id);
  return id;
}

Stage make_assert(const Stage& producer, ConstraintClass cls, Origin origin, std::set<std::string>& ids) {
  Stage a;
  a.kind = StageKind::kAssert;
  a.line = producer.line;
  a.constraint.target = producer.attr;
  a.constraint.cls = cls;
  a.constraint.origin = origin;
  a.constraint.refs = {producer.attr};
  a.constraint.line = producer.line;
  a.constraint.id = fresh_id(ids, producer.attr + ":" + lang::class_name(cls));
  a.output_schema = producer.output_schema;
  return a;
}

// Rebuilds the plan with `extra[i]` appended to the block of operator i.
LogicalPlan append_to_blocks(const LogicalPlan& plan, std::map<size_t, std::vector<Stage>>& extra) {
  LogicalPlan out;
  out.open_schema = plan.open_schema;
  for (const auto& b : operator_blocks(plan)) {
    out.stages.push_back(plan.stages[b.op_index]);
    for (size_t i : b.constraint_indices) out.stages.push_back(plan.stages[i]);
    auto it = extra.find(b.op_index);
    if (it != extra.end())
      for (auto& s : it->second) out.stages.push_back(std::move(s));
  }
  return out;
}

void validate(const LogicalPlan& plan, size_t assert_index, size_t producer) {
  const ConstraintDecl& c = plan.stages[assert_index].constraint;
  const Stage& p = plan.stages[producer];
  switch (c.cls) {
    case ConstraintClass::kSound:
      if (p.kind != StageKind::kWhere || !p.is_semantic() || p.op_id != c.target)
        throw Error(ErrorCode::kPlan,
                    "constraint " + c.id + ": SOUND must name a prompt-evaluated WHERE alias, got " + c.target);
      break;
    case ConstraintClass::kGrounded:
      if (!generates_attribute(p) || p.attr != c.target)
        throw Error(ErrorCode::kPlan, "constraint " + c.id + ": GROUNDED needs an attribute generated by a prompt, " +
                                          c.target + " is not one");
      if (c.origin == Origin::kDeclared && p.annotation == Annotation::kNone)
        throw Error(ErrorCode::kPlan, "constraint " + c.id + ": the operator producing " + c.target +
                                          " needs an EXTRACTIVE or ABSTRACTIVE annotation");
      break;
    case ConstraintClass::kRelevant:
      if (!p.is_semantic())
        throw Error(ErrorCode::kPlan,
                    "constraint " + c.id + ": RELEVANT needs a prompt-evaluated producer for " + c.target);
      break;
    default: break;
  }
}

// Names read by the stage when it computes its output.
std::vector<std::string> stage_inputs(const Stage& s) {
  if (s.prompt) return s.prompt->placeholders;
  if (s.expr) return lang::referenced_attrs(*s.expr);
  return {};
}

}  // namespace

ConstraintStats StatsTable::get(const std::string& id) const {
  auto it = by_id.find(id);
  return it == by_id.end() ? defaults : it->second;
}

std::vector<std::string> constraint_dependencies(const ConstraintDecl& c) {
  std::vector<std::string> out;
  auto add = [&](const std::string& n) {
    if (!n.empty() && !contains(out, n)) out.push_back(n);
  };
  add(c.target);
  for (const auto& r : c.refs) add(r);
  if (c.matcher && c.matcher->kind == lang::Matcher::Kind::kPrompt)
    for (const auto& p : c.matcher->prompt.placeholders) add(p);
  return out;
}

std::optional<size_t> find_writer(const LogicalPlan& plan, const std::string& name, size_t before) {
  for (size_t j = std::min(before, plan.stages.size()); j-- > 0;) {
    const Stage& s = plan.stages[j];
    switch (s.kind) {
      case StageKind::kAssert: break;
      case StageKind::kScan:
        if (has_attr(s, name)) return j;
        break;
      case StageKind::kSet:
      case StageKind::kExtend:
      case StageKind::kWhere:
        if (s.attr == name || s.op_id == name) return j;
        break;
      case StageKind::kAggregate:
        if (s.attr == name || s.op_id == name || contains(s.group_by, name)) return j;
        return std::nullopt;  // nothing upstream survives grouping
    }
  }
  return std::nullopt;
}

size_t find_producer(const LogicalPlan& plan, size_t assert_index) {
  const ConstraintDecl& c = plan.stages[assert_index].constraint;
  size_t producer = 0;
  for (const auto& dep : constraint_dependencies(c)) {
    auto w = find_writer(plan, dep, assert_index);
    if (!w) throw Error(ErrorCode::kPlan, "constraint " + c.id + " refers to " + dep + ", which no earlier stage produces");
    producer = std::max(producer, *w);
  }
  return producer;
}

std::vector<OperatorBlock> operator_blocks(const LogicalPlan& plan) {
  std::vector<OperatorBlock> out;
  for (size_t i = 0; i < plan.stages.size(); ++i) {
    if (plan.stages[i].is_operator()) {
      out.push_back({i, {}});
    } else if (!out.empty()) {
      out.back().constraint_indices.push_back(i);
    }
  }
  return out;
}

LogicalPlan pushdown_constraints(const LogicalPlan& plan) {
  std::map<size_t, std::vector<size_t>> attached;
  for (size_t i = 0; i < plan.stages.size(); ++i) {
    if (plan.stages[i].is_operator()) continue;
    size_t p = find_producer(plan, i);
    validate(plan, i, p);
    attached[p].push_back(i);
  }
  LogicalPlan out;
  out.open_schema = plan.open_schema;
  for (size_t i = 0; i < plan.stages.size(); ++i) {
    const Stage& s = plan.stages[i];
    if (!s.is_operator()) continue;
    out.stages.push_back(s);
    for (size_t a : attached[i]) {
      Stage moved = plan.stages[a];
      moved.output_schema = s.output_schema;
      out.stages.push_back(std::move(moved));
    }
  }
  return out;
}

LogicalPlan expand_grounding_lineage(const LogicalPlan& plan) {
  std::set<size_t> grounded;  // producers already carrying a grounding check
  std::vector<size_t> roots;
  for (size_t i = 0; i < plan.stages.size(); ++i) {
    const Stage& s = plan.stages[i];
    if (s.kind != StageKind::kAssert || s.constraint.cls != ConstraintClass::kGrounded) continue;
    size_t p = find_producer(plan, i);
    grounded.insert(p);
    roots.push_back(p);
  }

  std::set<std::string> ids = all_ids(plan);
  std::map<size_t, std::vector<Stage>> extra;
  std::set<size_t> visited;
  std::vector<size_t> stack(roots.rbegin(), roots.rend());
  while (!stack.empty()) {
    size_t op = stack.back();
    stack.pop_back();
    if (!visited.insert(op).second) continue;
    std::vector<size_t> next;
    for (const auto& name : stage_inputs(plan.stages[op])) {
      auto w = find_writer(plan, name, op);
      if (!w || plan.stages[*w].kind == StageKind::kScan) continue;
      const Stage& ws = plan.stages[*w];
      if (generates_attribute(ws) && grounded.insert(*w).second)
        extra[*w].push_back(make_assert(ws, ConstraintClass::kGrounded, Origin::kLineage, ids));
      next.push_back(*w);
    }
    stack.insert(stack.end(), next.rbegin(), next.rend());
  }
  if (extra.empty()) return plan;
  return append_to_blocks(plan, extra);
}

LogicalPlan attach_default_relevance(const LogicalPlan& plan, bool enabled) {
  if (!enabled) return plan;
  std::set<size_t> covered;
  for (size_t i = 0; i < plan.stages.size(); ++i) {
    const Stage& s = plan.stages[i];
    if (s.kind != StageKind::kAssert || s.constraint.cls != ConstraintClass::kRelevant) continue;
    size_t p = find_producer(plan, i);
    if (plan.stages[p].attr == s.constraint.target) covered.insert(p);
  }
  std::set<std::string> ids = all_ids(plan);
  std::map<size_t, std::vector<Stage>> extra;
  for (size_t i = 0; i < plan.stages.size(); ++i) {
    const Stage& s = plan.stages[i];
    if (!generates_attribute(s) || covered.count(i)) continue;
    extra[i].push_back(make_assert(s, ConstraintClass::kRelevant, Origin::kDefault, ids));
  }
  if (extra.empty()) return plan;
  return append_to_blocks(plan, extra);
}

LogicalPlan inject_constraint_prompts(const LogicalPlan& plan) {
  LogicalPlan out = plan;
  for (const auto& b : operator_blocks(plan)) {
    Stage& op = out.stages[b.op_index];
    op.constraint_notes.clear();
    if (!op.is_semantic()) continue;
    for (size_t i : b.constraint_indices) {
      const ConstraintDecl& c = plan.stages[i].constraint;
      // A default relevance check and a STRING type add nothing the prompt
      // does not already ask for.
      if (c.origin == Origin::kDefault) continue;
      if (c.origin == Origin::kImplicit && c.domain && c.domain->type == Type::kString) continue;
      op.constraint_notes.push_back(lang::describe_constraint(c));
    }
  }
  return out;
}

double rank(const ConstraintStats& s) {
  if (s.selectivity >= 1.0) return std::numeric_limits<double>::infinity();
  return s.cost / (1.0 - s.selectivity);
}

double expected_check_cost(const std::vector<ConstraintStats>& order) {
  double total = 0.0;
  double reach = 1.0;
  for (const auto& s : order) {
    total += s.cost * reach;
    reach *= s.selectivity;
  }
  return total;
}

LogicalPlan reorder_constraints(const LogicalPlan& plan, const StatsTable& stats) {
  LogicalPlan out;
  out.open_schema = plan.open_schema;
  for (const auto& b : operator_blocks(plan)) {
    out.stages.push_back(plan.stages[b.op_index]);
    // Implicit type checks stay first: the other checks read the typed value.
    std::vector<size_t> pinned;
    std::vector<size_t> ordered;
    for (size_t i : b.constraint_indices)
      (plan.stages[i].constraint.origin == Origin::kImplicit ? pinned : ordered).push_back(i);
    std::stable_sort(ordered.begin(), ordered.end(), [&](size_t x, size_t y) {
      return rank(stats.get(plan.stages[x].constraint.id)) < rank(stats.get(plan.stages[y].constraint.id));
    });
    for (size_t i : pinned) out.stages.push_back(plan.stages[i]);
    for (size_t i : ordered) out.stages.push_back(plan.stages[i]);
  }
  return out;
}

std::string prompt_with_constraints(const Stage& s) {
  if (!s.prompt) return "";
  std::string out = s.prompt->raw_text;
  if (s.constraint_notes.empty()) return out;
  out += "\nConstraints: ";
  for (size_t i = 0; i < s.constraint_notes.size(); ++i) out += (i ? "; " : "") + s.constraint_notes[i];
  return out;
}

LogicalPlan optimize(const LogicalPlan& plan, const LogicalOptions& options) {
  LogicalPlan p = pushdown_constraints(plan);
  p = expand_grounding_lineage(p);
  p = attach_default_relevance(p, options.default_relevance);
  if (options.inject_prompts) p = inject_constraint_prompts(p);
  return reorder_constraints(p, options.stats);
}

}  // namespace sicql::logical
