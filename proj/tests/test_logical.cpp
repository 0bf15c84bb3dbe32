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

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "doctest.h"
#include "sicql/error.hpp"
#include "sicql/format.hpp"
#include "sicql/logical.hpp"
#include "sicql/parser.hpp"
#include "support/files.hpp"
#include "support/oracles.hpp"
#include "support/query_gen.hpp"

using namespace sicql;
using namespace sicql::lang;
using namespace sicql::logical;
using sicql::testing::brute_force_min;
using sicql::testing::Rng;
using sicql::testing::same_cost;

namespace {

LogicalPlan listing() {
  return parse_query(sicql::testing::read_file(sicql::testing::data_path("ehr_sepsis.sicql")));
}

size_t index_of_op(const LogicalPlan& p, const std::string& op_id) {
  for (size_t i = 0; i < p.stages.size(); ++i)
    if (p.stages[i].is_operator() && p.stages[i].op_id == op_id) return i;
  FAIL("no operator " << op_id);
  return 0;
}

const Stage* find_constraint(const LogicalPlan& p, const std::string& id) {
  for (const auto& s : p.stages)
    if (s.kind == StageKind::kAssert && s.constraint.id == id) return &s;
  return nullptr;
}

std::vector<std::string> ids_in_block(const LogicalPlan& p, const std::string& op_id) {
  std::vector<std::string> out;
  for (const auto& b : operator_blocks(p))
    if (p.stages[b.op_index].op_id == op_id)
      for (size_t i : b.constraint_indices) out.push_back(p.stages[i].constraint.id);
  return out;
}

int count_class(const LogicalPlan& p, ConstraintClass cls) {
  int n = 0;
  for (const auto& s : p.stages)
    if (s.kind == StageKind::kAssert && s.constraint.cls == cls) ++n;
  return n;
}

ErrorCode plan_error(const std::string& q, const Catalog* cat = nullptr, std::string* message = nullptr) {
  try {
    optimize(parse_query(q, cat), {});
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.code();
  }
  FAIL("expected a planning error for: " << q);
  return ErrorCode::kInternal;
}

// Every assert sits in the block of the operator that produces it.
void check_adjacent(const LogicalPlan& p) {
  for (const auto& b : operator_blocks(p))
    for (size_t i : b.constraint_indices) CHECK(find_producer(p, i) == b.op_index);
}

// Queries whose prompt attributes form a random DAG over source columns.
struct DagQuery {
  std::string text;
  // attribute -> names it is computed from
  std::map<std::string, std::vector<std::string>> inputs;
  std::set<std::string> prompt_generated;
  std::string root;
};

DagQuery random_dag(Rng& rng, int n) {
  DagQuery q;
  q.text = "FROM src";
  std::vector<std::string> names = {"s0", "s1"};
  for (int i = 0; i < n; ++i) {
    std::string name = "x" + std::to_string(i);
    std::vector<std::string> in;
    int fanin = rng.uniform(1, 2);
    for (int k = 0; k < fanin; ++k) {
      const std::string& pick = names[static_cast<size_t>(rng.uniform(0, static_cast<int>(names.size()) - 1))];
      if (std::find(in.begin(), in.end(), pick) == in.end()) in.push_back(pick);
    }
    if (rng.chance(0.25)) {
      q.text += "\n|> EXTEND LENGTH(" + in[0] + ") AS " + name;
      in.resize(1);
    } else {
      std::string prompt = "combine";
      for (const auto& x : in) prompt += " {" + x + "}";
      q.text += "\n|> EXTEND " + std::string(rng.chance(0.5) ? "EXTRACTIVE" : "ABSTRACTIVE") + " p'" + prompt + "' AS " + name;
      q.prompt_generated.insert(name);
    }
    q.inputs[name] = in;
    names.push_back(name);
  }
  // The grounded root is the last prompt-generated attribute.
  for (int i = n - 1; i >= 0; --i)
    if (q.prompt_generated.count("x" + std::to_string(i))) {
      q.root = "x" + std::to_string(i);
      break;
    }
  if (!q.root.empty()) q.text += "\n|> ASSERT " + q.root + " GROUNDED";
  return q;
}

// Ancestors of `root` by fixed-point iteration over the input relation.
std::set<std::string> reachable(const DagQuery& q) {
  std::set<std::string> seen = {q.root};
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& [attr, in] : q.inputs) {
      if (!seen.count(attr)) continue;
      for (const auto& x : in) changed |= seen.insert(x).second;
    }
  }
  return seen;
}

}  // namespace

TEST_CASE("optimized EHR plan matches the golden rendering") {
  LogicalPlan p = optimize(listing(), {});
  CHECK(format_logical(p) == sicql::testing::read_file(sicql::testing::data_path("ehr_sepsis.optimized.txt")));
  check_adjacent(p);
}

TEST_CASE("pushdown moves each assert next to its producer") {
  LogicalPlan p = pushdown_constraints(listing());
  size_t phys = index_of_op(p, "phys_exam");
  // the implicit STRING check comes first, then the pushed grounding check
  CHECK(p.stages[phys + 1].constraint.id == "phys_exam:type");
  CHECK(p.stages[phys + 2].constraint.id == "phys_exam:grounded");
  CHECK(ids_in_block(p, "med_hist_sum") ==
        std::vector<std::string>{"med_hist_sum:type", "med_hist_sum:grounded", "med_hist_sum:domain",
                                 "med_hist_sum:exclude"});
  CHECK(ids_in_block(p, "sepsis_filter") == std::vector<std::string>{"sepsis_filter:sound"});
  CHECK(ids_in_block(p, "dob") == std::vector<std::string>{"dob:domain"});
  check_adjacent(p);

  SUBCASE("fixed point") {
    CHECK(equal(pushdown_constraints(p), p));
    LogicalPlan adjacent = parse_query("FROM t |> EXTEND p'x {a}' AS g |> ASSERT g INCLUDES 'q'");
    CHECK(equal(pushdown_constraints(adjacent), adjacent));
  }

  SUBCASE("scan columns are checked right after the scan") {
    LogicalPlan q = parse_query("FROM t |> EXTEND p'x {a}' AS g |> ASSERT LENGTH(b) < 5");
    LogicalPlan r = pushdown_constraints(q);
    CHECK(r.stages[1].kind == StageKind::kAssert);
    CHECK(r.stages[1].constraint.id == "b:domain");
  }

  SUBCASE("assertions follow the latest of their references") {
    LogicalPlan q = parse_query(
        "FROM t |> EXTEND p'x {a}' AS g |> EXTEND p'y {a}' AS h |> WHERE a = 'z' |> ASSERT LENGTH(g) > LENGTH(h)");
    LogicalPlan r = pushdown_constraints(q);
    CHECK(ids_in_block(r, "h") == std::vector<std::string>{"g+h:assertion"});
  }

  SUBCASE("overwritten attributes bind to the writer before the assert") {
    LogicalPlan q = parse_query(
        "FROM t |> SET a = p'one {a}' |> WHERE b = 'x' |> ASSERT a INCLUDES 'k' |> SET a = p'two {a}' AS second");
    LogicalPlan r = pushdown_constraints(q);
    CHECK(ids_in_block(r, "a") == std::vector<std::string>{"a:include"});
    CHECK(ids_in_block(r, "second").empty());
  }

  SUBCASE("same-operator asserts keep declaration order") {
    LogicalPlan q = parse_query(
        "FROM t |> EXTEND p'x {a}' AS g |> WHERE a = 'z' |> ASSERT g EXCLUDES 'b' |> ASSERT g INCLUDES 'a' "
        "|> ASSERT LENGTH(g) < 9");
    CHECK(ids_in_block(pushdown_constraints(q), "g") ==
          std::vector<std::string>{"g:exclude", "g:include", "g:domain"});
  }
}

TEST_CASE("planning errors") {
  Catalog cat;
  cat.tables["t"] = {Attribute{"a", Type::kString, false}};
  std::string msg;
  CHECK(plan_error("FROM t |> EXTEND p'x {a}' AS g |> ASSERT zzz INCLUDES 'q'", &cat, &msg) == ErrorCode::kPlan);
  CHECK(msg.find("zzz") != std::string::npos);
  CHECK(plan_error("FROM t |> EXTEND p'x {a}' AS g |> ASSERT g SOUND") == ErrorCode::kPlan);
  CHECK(plan_error("FROM t |> WHERE a = 'x' AS f |> ASSERT f SOUND") == ErrorCode::kPlan);
  CHECK(plan_error("FROM t |> EXTEND p'x {a}' AS g |> ASSERT g GROUNDED", nullptr, &msg) == ErrorCode::kPlan);
  CHECK(msg.find("EXTRACTIVE") != std::string::npos);
  CHECK(plan_error("FROM t |> EXTEND LENGTH(a) AS n |> ASSERT n GROUNDED") == ErrorCode::kPlan);
  CHECK(plan_error("FROM t |> ASSERT a RELEVANT") == ErrorCode::kPlan);
  CHECK(plan_error("FROM t |> AGGREGATE p'sum {a}' AS s GROUP BY b |> ASSERT LENGTH(a) < 3", nullptr, &msg) ==
        ErrorCode::kPlan);
  CHECK(msg.find(" a,") != std::string::npos);
}

TEST_CASE("grounding lineage") {
  SUBCASE("summary over an extracted history grounds both steps") {
    LogicalPlan p = expand_grounding_lineage(pushdown_constraints(listing()));
    CHECK(count_class(p, ConstraintClass::kGrounded) == 4);
    const Stage* added = find_constraint(p, "med_hist:grounded");
    REQUIRE(added);
    CHECK(added->constraint.origin == Origin::kLineage);
    CHECK(ids_in_block(p, "med_hist") == std::vector<std::string>{"med_hist:type", "med_hist:grounded"});
    check_adjacent(p);
  }

  SUBCASE("chain of length one") {
    LogicalPlan p = expand_grounding_lineage(
        pushdown_constraints(parse_query("FROM t |> EXTEND EXTRACTIVE p'x {a}' AS g |> ASSERT g GROUNDED")));
    CHECK(count_class(p, ConstraintClass::kGrounded) == 1);
  }

  SUBCASE("three-deep chain through an expression stage") {
    LogicalPlan p = expand_grounding_lineage(pushdown_constraints(parse_query(
        "FROM t |> EXTEND EXTRACTIVE p'a {src}' AS x |> EXTEND x || '!' AS y |> EXTEND p'b {y}' AS z "
        "|> SET z = ABSTRACTIVE p'c {z}' |> ASSERT z GROUNDED")));
    CHECK(count_class(p, ConstraintClass::kGrounded) == 3);
    CHECK(ids_in_block(p, "x") == std::vector<std::string>{"x:grounded"});
    CHECK(ids_in_block(p, "y").empty());
    CHECK(ids_in_block(p, "z") == std::vector<std::string>{"z:grounded#2"});
    CHECK(ids_in_block(p, "z#2") == std::vector<std::string>{"z:grounded"});
  }

  SUBCASE("diamond") {
    LogicalPlan p = expand_grounding_lineage(pushdown_constraints(parse_query(
        "FROM t |> EXTEND EXTRACTIVE p'{s}' AS b |> EXTEND EXTRACTIVE p'{s}' AS c "
        "|> EXTEND ABSTRACTIVE p'{b} {c} {b}' AS a |> ASSERT a GROUNDED")));
    CHECK(count_class(p, ConstraintClass::kGrounded) == 3);
    for (const char* op : {"a", "b", "c"}) CHECK(ids_in_block(p, op).size() == 1);
  }

  SUBCASE("random DAGs match a reachability oracle") {
    Rng rng(41);
    for (int trial = 0; trial < 200; ++trial) {
      DagQuery q = random_dag(rng, rng.uniform(1, 8));
      if (q.root.empty()) continue;
      CAPTURE(q.text);
      LogicalPlan p = expand_grounding_lineage(pushdown_constraints(parse_query(q.text)));
      std::set<std::string> expected;
      for (const auto& a : reachable(q))
        if (q.prompt_generated.count(a)) expected.insert(a);
      std::multiset<std::string> got;
      for (const auto& s : p.stages)
        if (s.kind == StageKind::kAssert && s.constraint.cls == ConstraintClass::kGrounded)
          got.insert(s.constraint.target);
      CHECK(std::set<std::string>(got.begin(), got.end()) == expected);
      CHECK(got.size() == expected.size());
      CHECK(equal(expand_grounding_lineage(p), p));
      check_adjacent(p);
    }
  }
}

TEST_CASE("default relevance") {
  LogicalPlan base = pushdown_constraints(listing());
  CHECK(equal(attach_default_relevance(base, false), base));

  LogicalPlan p = attach_default_relevance(base, true);
  std::vector<std::string> targets;
  for (const auto& s : p.stages)
    if (s.kind == StageKind::kAssert && s.constraint.cls == ConstraintClass::kRelevant) {
      targets.push_back(s.constraint.target);
      CHECK(s.constraint.origin == Origin::kDefault);
      CHECK_FALSE(s.constraint.retry);
      CHECK_FALSE(s.constraint.mode);
    }
  CHECK(targets == std::vector<std::string>{"dob", "phys_exam", "lab_res", "med_hist", "med_hist_sum"});
  CHECK(equal(attach_default_relevance(p, true), p));

  LogicalPlan explicit_rel = pushdown_constraints(
      parse_query("FROM t |> EXTEND p'x {a}' AS g |> EXTEND p'y {a}' AS h |> ASSERT g RELEVANT RETRY 3"));
  LogicalPlan r = attach_default_relevance(explicit_rel, true);
  CHECK(ids_in_block(r, "g") == std::vector<std::string>{"g:relevant"});
  CHECK(ids_in_block(r, "h") == std::vector<std::string>{"h:relevant"});
  CHECK(find_constraint(r, "g:relevant")->constraint.origin == Origin::kDeclared);
}

TEST_CASE("prompt injection") {
  LogicalPlan p = inject_constraint_prompts(pushdown_constraints(listing()));
  const Stage& dob = p.stages[index_of_op(p, "dob")];
  CHECK(prompt_with_constraints(dob) ==
        "canonicalize {dob} into YYYY-MM-DD\nConstraints: output must match regex "
        "^\\d{4}-(0[1-9]|1[0-2])-(0[1-9]|[12]\\d|3[01])$");

  const Stage& age = p.stages[index_of_op(p, "age_yrs")];
  CHECK(age.constraint_notes.empty());

  SUBCASE("declaration order, canonical rendering") {
    const Stage& sum = p.stages[index_of_op(p, "med_hist_sum")];
    std::vector<std::string> expected;
    for (const char* id : {"med_hist_sum:grounded", "med_hist_sum:domain", "med_hist_sum:exclude"})
      expected.push_back(describe_constraint(find_constraint(p, id)->constraint));
    CHECK(sum.constraint_notes == expected);
    CHECK(prompt_with_constraints(sum) ==
          "summarize {med_hist}\nConstraints: output must be supported by the input; output must be shorter than "
          "1000 characters; output must not include test results");
  }

  SUBCASE("operator without constraints keeps its prompt") {
    LogicalPlan q = inject_constraint_prompts(pushdown_constraints(parse_query("FROM t |> EXTEND p'x {a}' AS g")));
    CHECK(prompt_with_constraints(q.stages[1]) == "x {a}");
  }

  SUBCASE("non-string implicit types are injected") {
    LogicalPlan q =
        inject_constraint_prompts(pushdown_constraints(parse_query("FROM t |> EXTEND p'count {a}' AS n INT")));
    CHECK(q.stages[1].constraint_notes == std::vector<std::string>{"output must be a valid INT"});
  }
}

TEST_CASE("reorder by rank") {
  SUBCASE("two constraints") {
    LogicalPlan q = pushdown_constraints(
        parse_query("FROM t |> EXTEND p'x {a}' AS g |> ASSERT g INCLUDES 'b' |> ASSERT g EXCLUDES 'a'"));
    StatsTable stats;
    stats.by_id["g:include"] = {4.0, 0.9};
    stats.by_id["g:exclude"] = {1.0, 0.5};
    CHECK(ids_in_block(reorder_constraints(q, stats), "g") == std::vector<std::string>{"g:exclude", "g:include"});
    CHECK(expected_check_cost({{1.0, 0.5}, {4.0, 0.9}}) == doctest::Approx(3.0));
    CHECK(expected_check_cost({{4.0, 0.9}, {1.0, 0.5}}) == doctest::Approx(4.9));
  }

  SUBCASE("ties keep declaration order and certain passes go last") {
    LogicalPlan q = pushdown_constraints(parse_query(
        "FROM t |> EXTEND p'x {a}' AS g INT |> ASSERT g > 1 |> ASSERT g < 100 |> ASSERT g IN (1, 2, 3)"));
    StatsTable stats;
    stats.by_id["g:domain"] = {0.0, 1.0};
    CHECK(ids_in_block(reorder_constraints(q, stats), "g") ==
          std::vector<std::string>{"g:type", "g:domain#2", "g:domain#3", "g:domain"});
  }

  SUBCASE("single constraint unchanged") {
    LogicalPlan q = pushdown_constraints(parse_query("FROM t |> EXTEND p'x {a}' AS g |> ASSERT g INCLUDES 'b'"));
    CHECK(equal(reorder_constraints(q, {}), q));
  }

  SUBCASE("rank order is optimal against every permutation") {
    Rng rng(7);
    for (int trial = 0; trial < 300; ++trial) {
      int n = trial < 100 ? 4 : rng.uniform(1, 6);
      std::string q = "FROM t |> EXTEND p'x {a}' AS g";
      StatsTable stats;
      std::vector<ConstraintStats> declared;
      for (int i = 0; i < n; ++i) {
        q += " |> ASSERT g INCLUDES '" + std::string(1, static_cast<char>('a' + i)) + "'";
        ConstraintStats s{rng.real(0.0, 10.0), rng.chance(0.1) ? 1.0 : rng.real(0.0, 1.0)};
        declared.push_back(s);
        stats.by_id[i == 0 ? "g:include" : "g:include#" + std::to_string(i + 1)] = s;
      }
      LogicalPlan r = reorder_constraints(pushdown_constraints(parse_query(q)), stats);
      std::vector<ConstraintStats> chosen;
      for (const auto& id : ids_in_block(r, "g")) chosen.push_back(stats.get(id));
      REQUIRE(chosen.size() == declared.size());
      CHECK(same_cost(expected_check_cost(chosen), brute_force_min(declared)));
    }
  }
}

TEST_CASE("rewrites over generated queries") {
  Rng rng(2026);
  sicql::testing::QueryGenerator gen(rng);
  for (int trial = 0; trial < 150; ++trial) {
    auto g = gen.generate(7);
    CAPTURE(g.text);
    LogicalPlan parsed = parse_query(g.text);
    LogicalPlan pushed = pushdown_constraints(parsed);
    CHECK(equal(pushdown_constraints(pushed), pushed));
    check_adjacent(pushed);

    // declared order is preserved within each operator
    std::map<size_t, std::vector<std::string>> before;
    for (size_t i = 0; i < parsed.stages.size(); ++i)
      if (!parsed.stages[i].is_operator())
        before[find_producer(parsed, i)].push_back(parsed.stages[i].constraint.id);
    std::vector<std::vector<std::string>> a;
    std::vector<std::vector<std::string>> b;
    for (auto& [k, v] : before) a.push_back(v);
    for (const auto& blk : operator_blocks(pushed)) {
      std::vector<std::string> ids;
      for (size_t i : blk.constraint_indices) ids.push_back(pushed.stages[i].constraint.id);
      if (!ids.empty()) b.push_back(ids);
    }
    CHECK(a == b);

    LogicalPlan lin = expand_grounding_lineage(pushed);
    CHECK(equal(expand_grounding_lineage(lin), lin));
    LogicalPlan rel = attach_default_relevance(lin, true);
    CHECK(equal(attach_default_relevance(rel, true), rel));

    StatsTable stats;
    for (const auto& s : rel.stages)
      if (s.kind == StageKind::kAssert) stats.by_id[s.constraint.id] = {rng.real(0.1, 5.0), rng.real(0.0, 1.0)};
    LogicalPlan full = optimize(parsed, {true, true, stats});
    check_adjacent(full);
    for (const auto& blk : operator_blocks(full)) {
      std::vector<ConstraintStats> chosen;
      for (size_t i : blk.constraint_indices)
        if (full.stages[i].constraint.origin != Origin::kImplicit) chosen.push_back(stats.get(full.stages[i].constraint.id));
      if (chosen.size() > 6) continue;
      CHECK(same_cost(expected_check_cost(chosen), brute_force_min(chosen)));
    }
  }
}
