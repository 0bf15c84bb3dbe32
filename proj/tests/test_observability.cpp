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

#include <string>
#include <thread>
#include <vector>

#include "doctest.h"
#include "sicql/error.hpp"
#include "sicql/observability.hpp"
#include "support/files.hpp"

using namespace sicql;
using namespace sicql::obs;
using sicql::testing::TempDir;

namespace {

ConstraintInvocationRecord ci(const std::string& id, int64_t tuple, int attempt, bool pass, bool stochastic) {
  ConstraintInvocationRecord r;
  r.constraint_id = id;
  r.op_id = "op";
  r.tuple_id = tuple;
  r.attempt = attempt;
  r.predicted = pass ? "pass" : "violation";
  r.stochastic = stochastic;
  r.impl = stochastic ? "model:judge" : "deterministic:regex";
  r.confidence = stochastic ? 0.8 : 1.0;
  r.cost = stochastic ? 1.0 : 0.01;
  return r;
}

OpInvocationRecord op(int64_t tuple, bool final, const std::string& disposition) {
  OpInvocationRecord r;
  r.op_id = "op";
  r.kind = "extend";
  r.tuple_id = tuple;
  r.cost = 2.0;
  r.final = final;
  r.disposition = disposition;
  return r;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInternal;
}

void write_run(RunWriter& w) {
  RunRecord rec;
  rec.run_id = w.run_id();
  rec.status = "completed";
  w.write_run(rec);
  w.flush();
}

}  // namespace

TEST_CASE("writer assigns monotone ids and refuses existing runs") {
  TempDir root;
  RunWriter w(root.str(), "r1");
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t)
    threads.emplace_back([&] {
      for (int i = 0; i < 50; ++i) w.append(ci("c", i, 0, true, false));
    });
  for (auto& t : threads) t.join();
  CHECK(w.constraint_count() == 200);
  write_run(w);
  RunStore store(root.str());
  auto recs = store.constraint_invocations("r1");
  REQUIRE(recs.size() == 200);
  for (size_t i = 0; i < recs.size(); ++i) CHECK(recs[i].invocation_id == static_cast<int64_t>(i + 1));
  CHECK(code_of([&] { RunWriter again(root.str(), "r1"); }) == ErrorCode::kConflict);
  CHECK(code_of([&] { RunWriter bad(root.str(), "../x"); }) == ErrorCode::kInvalidArgument);
  CHECK(store.list_runs().size() == 1);
  CHECK(store.run("r1").status == "completed");
  CHECK(code_of([&] { store.run("nope"); }) == ErrorCode::kNotFound);
}

TEST_CASE("records round trip through json") {
  auto r = ci("c", 3, 1, false, true);
  r.input = {{"value", "x"}};
  r.feedback = "bad";
  r.true_label = false;
  auto back = constraint_invocation_from_json(to_json(r));
  CHECK(back.constraint_id == "c");
  CHECK(back.attempt == 1);
  CHECK(back.predicted == "violation");
  CHECK(back.true_label == std::optional<bool>(false));
  CHECK(back.input == r.input);
  OpInvocationRecord o = op(4, true, "flagged");
  o.inputs = {1, 2};
  auto ob = op_invocation_from_json(to_json(o));
  CHECK(ob.inputs == o.inputs);
  CHECK(ob.disposition == "flagged");
}

TEST_CASE("long texts are truncated with a hash") {
  std::string big(5000, 'a');
  auto s = snapshot_text(big);
  REQUIRE(s.is_object());
  CHECK(s["truncated"].get<std::string>().size() == 4096);
  CHECK(s["length"] == 5000);
  CHECK(s["hash"].get<std::string>().size() == 16);
  CHECK(snapshot_text("short") == "short");
}

TEST_CASE("selectivity counts first attempts only") {
  TempDir root;
  RunWriter w(root.str(), "r");
  w.append(ci("c", 1, 0, true, false));
  w.append(ci("c", 2, 0, false, false));
  w.append(ci("c", 2, 1, true, false));
  w.append(ci("c", 3, 0, true, false));
  write_run(w);
  RunStore store(root.str());
  CHECK(store.selectivity("r", "c") == doctest::Approx(2.0 / 3.0));
  CHECK(code_of([&] { store.selectivity("r", "other"); }) == ErrorCode::kNotFound);
}

TEST_CASE("confusion treats violation as positive") {
  std::vector<ConstraintInvocationRecord> rs;
  auto add = [&](bool predicted_pass, std::optional<bool> holds) {
    auto r = ci("c", 0, 0, predicted_pass, true);
    r.true_label = holds;
    rs.push_back(r);
  };
  add(false, false);  // tp
  add(false, false);  // tp
  add(false, true);   // fp
  add(true, false);   // fn
  add(true, true);    // tn
  add(true, std::nullopt);
  auto c = confusion(rs);
  CHECK(c.tp == 2);
  CHECK(c.fp == 1);
  CHECK(c.fn == 1);
  CHECK(c.tn == 1);
  CHECK(*c.precision().value == doctest::Approx(2.0 / 3.0));
  CHECK(*c.recall().value == doctest::Approx(2.0 / 3.0));
  CHECK_FALSE(Confusion{}.precision().value);
}

TEST_CASE("labels are write-once and feed metrics") {
  TempDir root;
  RunWriter w(root.str(), "r");
  w.append(ci("det", 1, 0, true, false));
  w.append(ci("judge", 1, 0, false, true));
  w.append(ci("judge", 2, 0, true, true));
  w.append(op(1, true, "kept"));
  w.append(op(2, false, ""));
  w.append(op(2, true, "flagged"));
  write_run(w);
  RunStore store(root.str());
  auto queue = store.label_queue("r");
  REQUIRE(queue.size() == 2);
  CHECK(queue[0].key == "r:2");
  CHECK(store.label_queue("", "det").empty());
  store.submit_label("r", 2, false);
  CHECK(code_of([&] { store.submit_label("r", 2, true); }) == ErrorCode::kConflict);
  CHECK(code_of([&] { store.submit_label("r", 1, true); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([&] { store.submit_label("r", 99, true); }) == ErrorCode::kNotFound);
  CHECK(store.label_queue("r").size() == 1);
  store.submit_label("r", 3, true);

  auto m = store.metrics("r");
  REQUIRE(m.constraints.size() == 2);
  const auto& judge = m.constraints[1];
  CHECK(judge.constraint_id == "judge");
  CHECK(judge.labeled == 2);
  CHECK(*judge.precision.value == 1.0);
  CHECK(*judge.recall.value == 1.0);
  CHECK(*judge.selectivity.value == 0.5);
  CHECK(judge.mean_confidence == doctest::Approx(0.8));
  CHECK_FALSE(m.constraints[0].precision.value);
  REQUIRE(m.operators.size() == 1);
  CHECK(m.operators[0].invocations == 3);
  CHECK(m.operators[0].tuples == 2);
  CHECK(*m.operators[0].reliability == 0.5);
  CHECK(m.cost == doctest::Approx(6.0 + 2.01));
}

TEST_CASE("lineage trees and flagged tuples") {
  TempDir root;
  RunWriter w(root.str(), "r");
  w.append(op(1, true, "kept"));
  w.append(op(2, true, "kept"));
  w.append(LineageRecord{3, 1, "agg"});
  w.append(LineageRecord{3, 2, "agg"});
  w.write_results("{\"x\":1,\"_tuple_id\":3,\"_flags\":[\"c\"],\"_parents\":[1,2]}\n"
                  "{\"x\":2,\"_tuple_id\":4,\"_flags\":[],\"_parents\":[]}\n");
  write_run(w);
  RunStore store(root.str());
  auto tree = store.lineage_tree("r", 3);
  CHECK(tree["tuple_id"] == 3);
  REQUIRE(tree["parents"].size() == 2);
  CHECK(tree["parents"][0]["tuple_id"] == 1);
  CHECK(tree["parents"][0]["op_id"] == "agg");
  CHECK(tree["parents"][0]["invocations"].size() == 1);
  CHECK(store.lineage_tree("r", 1)["parents"].empty());
  CHECK(code_of([&] { store.lineage_tree("r", 42); }) == ErrorCode::kNotFound);
  auto flagged = store.flagged_tuples("r");
  REQUIRE(flagged.size() == 1);
  CHECK(flagged[0]["_tuple_id"] == 3);
  CHECK(store.find_run_for_tuple(1) == "r");
}

TEST_CASE("record keys") {
  CHECK(parse_record_key("run-1:12") == std::make_pair(std::string("run-1"), int64_t{12}));
  CHECK(parse_record_key("5") == std::make_pair(std::string(), int64_t{5}));
  CHECK(code_of([] { parse_record_key("r:x"); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("stage conservation") {
  StageCounts s{"op", "where", 10, 6, 3, 1, 0, 0};
  CHECK(s.conserved());
  s.out = 7;
  CHECK_FALSE(s.conserved());
}
