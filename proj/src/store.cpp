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

#include "sicql/store.hpp"

#include <algorithm>
#include <filesystem>
#include <mutex>
#include <set>
#include <sstream>

#include "sicql/automaton.hpp"
#include "sicql/embedding.hpp"
#include "sicql/error.hpp"
#include "sicql/format.hpp"
#include "sicql/parser.hpp"
#include "sicql/relation.hpp"

namespace sicql::store {

using lang::ConstraintClass;
using lang::ConstraintDecl;
using lang::DomainSpec;
using lang::Matcher;
using nlohmann::json;

const char* conflict_kind_name(ConflictKind k) {
  switch (k) {
    case ConflictKind::kDisjointDomain: return "disjoint-domain";
    case ConflictKind::kEmptyRegexIntersection: return "empty-regex-intersection";
    case ConflictKind::kIncludeExcludeContradiction: return "include-exclude-contradiction";
    case ConflictKind::kFlaggedByJudge: return "flagged-by-judge";
  }
  return "";
}

json to_json(const StoredConstraint& c) {
  return {{"id", c.id},
          {"text", c.text},
          {"class", lang::class_name(c.decl.cls)},
          {"target", c.decl.target},
          {"description", c.description},
          {"tags", c.tags},
          {"provenance", c.provenance},
          {"usage_count", c.usage_count},
          {"soft", c.soft}};
}

json to_json(const Conflict& c) {
  return {{"first", c.first}, {"second", c.second}, {"kind", conflict_kind_name(c.kind)}, {"explanation", c.explanation}};
}

json to_json(const Recommendation& r) {
  json j = {{"constraint", to_json(r.constraint)}, {"score", r.score}};
  if (r.judge_relevant) j["judge_relevant"] = *r.judge_relevant;
  return j;
}

ConstraintDecl parse_single_constraint(const std::string& text) {
  auto decls = lang::parse_constraints(text);
  if (decls.size() != 1)
    throw Error(ErrorCode::kInvalidArgument, "expected exactly one constraint, got " + std::to_string(decls.size()));
  return std::move(decls.front());
}

namespace {

std::optional<std::string> regex_of(const ConstraintDecl& c) {
  if (c.cls == ConstraintClass::kDomain && c.domain && c.domain->kind == DomainSpec::Kind::kRegex) return c.domain->pattern;
  if (c.cls == ConstraintClass::kInclude && c.matcher && c.matcher->kind == Matcher::Kind::kRegex) return c.matcher->text;
  return std::nullopt;
}

const std::vector<Value>* value_set_of(const ConstraintDecl& c) {
  if (c.cls == ConstraintClass::kDomain && c.domain && c.domain->kind == DomainSpec::Kind::kValueSet)
    return &c.domain->values;
  return nullptr;
}

// Literal alternatives of a literal matcher: one for a literal, the items
// for a set.
std::optional<std::vector<std::string>> literals_of(const ConstraintDecl& c) {
  if (!c.matcher) return std::nullopt;
  if (c.matcher->kind == Matcher::Kind::kLiteral) return std::vector<std::string>{c.matcher->text};
  if (c.matcher->kind == Matcher::Kind::kLiteralSet) return c.matcher->items;
  return std::nullopt;
}

std::string join_quoted(const std::vector<std::string>& items) {
  std::string out;
  for (size_t i = 0; i < items.size(); ++i) out += (i ? ", " : "") + lang::quote_string(items[i]);
  return out;
}

std::optional<Conflict> include_exclude(const ConstraintDecl& inc, const ConstraintDecl& exc) {
  auto must = literals_of(inc);
  auto banned = literals_of(exc);
  if (!must || !banned || must->empty()) return std::nullopt;
  // Every way to satisfy the include contains an excluded literal.
  for (const auto& m : *must) {
    bool hit = false;
    for (const auto& b : *banned) hit = hit || m.find(b) != std::string::npos;
    if (!hit) return std::nullopt;
  }
  Conflict c;
  c.kind = ConflictKind::kIncludeExcludeContradiction;
  c.explanation = "every output including " + join_quoted(*must) + " contains an excluded literal from " +
                  join_quoted(*banned);
  return c;
}

std::optional<Conflict> check_pair(const ConstraintDecl& a, const ConstraintDecl& b, model::ModelClient* judge,
                                   const std::string& judge_name) {
  if (const auto* va = value_set_of(a)) {
    if (const auto* vb = value_set_of(b)) {
      std::set<std::string> left;
      for (const auto& v : *va) left.insert(v.to_text());
      bool overlap = false;
      for (const auto& v : *vb) overlap = overlap || left.count(v.to_text());
      if (!overlap) {
        Conflict c;
        c.kind = ConflictKind::kDisjointDomain;
        c.explanation = "value sets of " + a.target + " share no value, so no output satisfies both";
        return c;
      }
    }
  }
  auto ra = regex_of(a);
  auto rb = regex_of(b);
  if (ra && rb) {
    auto da = automata::RegexDfa::compile(*ra);
    auto db = automata::RegexDfa::compile(*rb);
    if (automata::intersection_empty(da, db)) {
      Conflict c;
      c.kind = ConflictKind::kEmptyRegexIntersection;
      c.explanation = "no string matches both r'" + *ra + "' and r'" + *rb + "'";
      return c;
    }
  }
  if (a.cls == ConstraintClass::kInclude && b.cls == ConstraintClass::kExclude) {
    if (auto c = include_exclude(a, b)) return c;
  }
  if (b.cls == ConstraintClass::kInclude && a.cls == ConstraintClass::kExclude) {
    if (auto c = include_exclude(b, a)) return c;
  }
  if (judge && a.matcher && b.matcher && a.matcher->kind == Matcher::Kind::kPrompt &&
      b.matcher->kind == Matcher::Kind::kPrompt && a.cls != b.cls &&
      (a.cls == ConstraintClass::kInclude || a.cls == ConstraintClass::kExclude) &&
      (b.cls == ConstraintClass::kInclude || b.cls == ConstraintClass::kExclude)) {
    const ConstraintDecl& inc = a.cls == ConstraintClass::kInclude ? a : b;
    const ConstraintDecl& exc = a.cls == ConstraintClass::kInclude ? b : a;
    model::JudgeRequest req;
    req.judge = judge_name;
    req.mode = model::JudgeMode::kSemanticMatch;
    req.task = exc.matcher->prompt.raw_text;
    req.output = inc.matcher->prompt.raw_text;
    auto v = judge->judge(req);
    if (v.yes) {
      Conflict c;
      c.kind = ConflictKind::kFlaggedByJudge;
      c.explanation = "required content '" + inc.matcher->prompt.raw_text + "' appears to fall under excluded '" +
                      exc.matcher->prompt.raw_text + "'";
      if (!v.rationale.empty()) c.explanation += ": " + v.rationale;
      return c;
    }
  }
  return std::nullopt;
}

}  // namespace

std::vector<Conflict> detect_conflicts(const std::vector<ConstraintDecl>& decls, model::ModelClient* judge,
                                       const std::string& judge_name) {
  std::vector<Conflict> out;
  for (size_t i = 0; i < decls.size(); ++i)
    for (size_t j = i + 1; j < decls.size(); ++j) {
      if (decls[i].target != decls[j].target || decls[i].target.empty()) continue;
      if (auto c = check_pair(decls[i], decls[j], judge, judge_name)) {
        c->first = decls[i].id;
        c->second = decls[j].id;
        out.push_back(std::move(*c));
      }
    }
  return out;
}

ConstraintStore::ConstraintStore(std::string path) : path_(std::move(path)) {
  if (path_.empty()) return;
  if (!std::filesystem::exists(path_)) return;
  std::string text = read_text_file(path_);
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      StoredConstraint c;
      c.id = j.at("id").get<std::string>();
      c.text = j.at("text").get<std::string>();
      c.decl = parse_single_constraint(c.text);
      c.decl.id = c.id;
      c.description = j.value("description", lang::describe_constraint(c.decl));
      c.tags = j.value("tags", std::vector<std::string>{});
      c.provenance = j.value("provenance", "");
      c.usage_count = j.value("usage_count", int64_t{0});
      c.soft = j.value("soft", false);
      items_.push_back(std::move(c));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kInvalidArgument, path_ + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void ConstraintStore::save_locked() const {
  if (path_.empty()) return;
  std::string body;
  for (const auto& c : items_) body += to_json(c).dump() + "\n";
  write_text_file(path_ + ".tmp", body);
  std::filesystem::rename(path_ + ".tmp", path_);
}

std::string ConstraintStore::register_constraint(const std::string& text, const Metadata& meta) {
  StoredConstraint c;
  c.text = text;
  c.decl = parse_single_constraint(text);
  c.id = meta.id.empty() ? lang::base_constraint_id(c.decl) : meta.id;
  c.decl.id = c.id;
  c.description = meta.description.empty() ? lang::describe_constraint(c.decl) : meta.description;
  c.tags = meta.tags;
  c.provenance = meta.provenance;
  c.soft = meta.soft;
  std::unique_lock lock(mu_);
  for (const auto& e : items_)
    if (e.id == c.id) throw Error(ErrorCode::kConflict, "constraint id '" + c.id + "' is already registered");
  items_.push_back(c);
  save_locked();
  return c.id;
}

StoredConstraint ConstraintStore::lookup(const std::string& id) const {
  std::shared_lock lock(mu_);
  for (const auto& e : items_)
    if (e.id == id) return e;
  throw Error(ErrorCode::kNotFound, "no constraint with id '" + id + "'");
}

std::vector<StoredConstraint> ConstraintStore::list() const {
  std::shared_lock lock(mu_);
  return items_;
}

size_t ConstraintStore::size() const {
  std::shared_lock lock(mu_);
  return items_.size();
}

std::vector<Recommendation> ConstraintStore::recommend(const std::string& query, size_t k, model::ModelClient* judge,
                                                       const std::string& judge_name) const {
  std::vector<Recommendation> ranked;
  {
    std::shared_lock lock(mu_);
    if (items_.empty()) throw Error(ErrorCode::kNotFound, "constraint store is empty");
    if (k == 0) return {};
    Embedding q = embed(query);
    for (const auto& c : items_) {
      std::string doc = c.description;
      for (const auto& t : c.tags) doc += " " + t;
      ranked.push_back({c, cosine(q, embed(doc)), std::nullopt});
    }
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const Recommendation& a, const Recommendation& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.constraint.id < b.constraint.id;
  });
  if (judge) {
    ranked.resize(std::min(ranked.size(), 2 * k));
    for (auto& r : ranked) {
      model::JudgeRequest req;
      req.judge = judge_name;
      req.mode = model::JudgeMode::kRelevance;
      req.task = "Is this constraint relevant to the query?";
      req.input = query;
      req.output = r.constraint.description;
      r.judge_relevant = judge->judge(req).yes;
    }
    std::stable_partition(ranked.begin(), ranked.end(), [](const Recommendation& r) { return *r.judge_relevant; });
  }
  if (ranked.size() > k) ranked.resize(k);
  return ranked;
}

void ConstraintStore::accept(const std::string& id) {
  std::unique_lock lock(mu_);
  for (auto& e : items_)
    if (e.id == id) {
      ++e.usage_count;
      save_locked();
      return;
    }
  throw Error(ErrorCode::kNotFound, "no constraint with id '" + id + "'");
}

void ConstraintStore::set_soft(const std::string& id, bool soft) {
  std::unique_lock lock(mu_);
  for (auto& e : items_)
    if (e.id == id) {
      e.soft = soft;
      save_locked();
      return;
    }
  throw Error(ErrorCode::kNotFound, "no constraint with id '" + id + "'");
}

std::vector<Conflict> ConstraintStore::conflicts(model::ModelClient* judge, const std::string& judge_name) const {
  std::vector<ConstraintDecl> decls;
  {
    std::shared_lock lock(mu_);
    for (const auto& c : items_) decls.push_back(c.decl);
  }
  return detect_conflicts(decls, judge, judge_name);
}

std::vector<Conflict> ConstraintStore::conflicts_with(const std::vector<ConstraintDecl>& decls) const {
  std::vector<ConstraintDecl> all = decls;
  {
    std::shared_lock lock(mu_);
    for (const auto& c : items_) all.push_back(c.decl);
  }
  std::vector<Conflict> out;
  for (auto& c : detect_conflicts(all)) {
    bool involves_query = false;
    for (const auto& d : decls) involves_query = involves_query || d.id == c.first || d.id == c.second;
    if (involves_query) out.push_back(std::move(c));
  }
  return out;
}

}  // namespace sicql::store
