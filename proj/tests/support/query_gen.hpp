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

// Random well-formed queries. Constraints are placed at random points after
// their producers so rewrites have something to move.

#pragma once

#include <string>
#include <vector>

#include "support/generators.hpp"

namespace sicql::testing {

struct GeneratedQuery {
  std::string text;
  int operator_count = 0;
  int assert_lines = 0;
};

class QueryGenerator {
 public:
  explicit QueryGenerator(Rng& rng) : rng_(rng) {}

  /// Source columns are always c0..c2 of table t.
  GeneratedQuery generate(int max_operators = 6) {
    attrs_.clear();
    aliases_.clear();
    counter_ = 0;
    for (int i = 0; i < 3; ++i) attrs_.push_back({"c" + std::to_string(i), false, false, false});
    GeneratedQuery q;
    q.text = rng_.chance(0.5) ? "FROM t" : "Scan(t)";
    int n_ops = rng_.uniform(1, max_operators);
    std::vector<std::string> pending;
    for (int i = 0; i < n_ops; ++i) {
      q.text += "\n|> " + operator_stage();
      ++q.operator_count;
      int asserts = rng_.uniform(0, 2);
      for (int k = 0; k < asserts; ++k) pending.push_back(assert_stage());
      // flush a random prefix of the pending asserts here
      int flush = rng_.uniform(0, static_cast<int>(pending.size()));
      for (int k = 0; k < flush; ++k) {
        q.text += "\n|> " + pending[static_cast<size_t>(k)];
        ++q.assert_lines;
      }
      pending.erase(pending.begin(), pending.begin() + flush);
    }
    for (const auto& p : pending) {
      q.text += "\n|> " + p;
      ++q.assert_lines;
    }
    return q;
  }

 private:
  struct Attr {
    std::string name;
    bool generated;
    bool annotated;
    bool numeric;
  };

  const Attr& any_attr() { return attrs_[static_cast<size_t>(rng_.uniform(0, static_cast<int>(attrs_.size()) - 1))]; }

  const Attr* generated_attr() {
    std::vector<const Attr*> gen;
    for (const auto& a : attrs_)
      if (a.generated && a.annotated && a.name[0] == 'g') gen.push_back(&a);
    if (gen.empty()) return nullptr;
    return gen[static_cast<size_t>(rng_.uniform(0, static_cast<int>(gen.size()) - 1))];
  }

  // Any attribute last written by a prompt, which RELEVANT requires.
  std::string relevant_target() {
    std::vector<const Attr*> gen;
    for (const auto& a : attrs_)
      if (a.generated) gen.push_back(&a);
    if (gen.empty()) return text_attr() + " INCLUDES 'x'";
    return gen[static_cast<size_t>(rng_.uniform(0, static_cast<int>(gen.size()) - 1))]->name + " RELEVANT";
  }

  std::string text_attr() {
    for (int tries = 0; tries < 10; ++tries) {
      const Attr& a = any_attr();
      if (!a.numeric) return a.name;
    }
    return "c0";
  }

  std::string fresh(const char* prefix) { return prefix + std::to_string(++counter_); }

  std::string annotation() {
    int k = rng_.uniform(0, 2);
    return k == 0 ? "" : k == 1 ? "EXTRACTIVE " : "ABSTRACTIVE ";
  }

  std::string operator_stage() {
    int kind = rng_.uniform(0, 4);
    if (kind == 0) {
      // Only source columns are overwritten so that GROUNDED targets keep
      // their annotated producer until the assert is placed.
      std::string target = "c" + std::to_string(rng_.uniform(0, 2));
      std::string ann = annotation();
      std::string src = text_attr();
      for (auto& a : attrs_)
        if (a.name == target) {
          a.generated = true;
          a.annotated = !ann.empty();
        }
      return "SET " + target + " = " + ann + "p'rewrite {" + src + "} briefly'";
    }
    if (kind == 1 || kind == 2) {
      std::string name = fresh("g");
      std::string ann = annotation();
      std::string src = text_attr();
      std::string type = rng_.chance(0.5) ? " STRING" : "";
      attrs_.push_back({name, true, !ann.empty(), false});
      return "EXTEND " + ann + "p'extract the part of {" + src + "} that matters, don''t guess' AS " + name + type;
    }
    if (kind == 3) {
      std::string name = fresh("n");
      std::string src = text_attr();
      attrs_.push_back({name, false, false, true});
      return "EXTEND LENGTH(" + src + ") + " + std::to_string(rng_.uniform(0, 9)) + " AS " + name;
    }
    std::string alias = fresh("w");
    if (rng_.chance(0.5)) {
      aliases_.push_back(alias);
      return "WHERE p'keep rows where {" + text_attr() + "} is useful' AS " + alias;
    }
    return "WHERE LENGTH(" + text_attr() + ") > " + std::to_string(rng_.uniform(0, 5)) + " AS " + alias;
  }

  std::string settings() {
    std::string out;
    if (rng_.chance(0.3)) out += " RETRY " + std::to_string(rng_.uniform(0, 3));
    if (rng_.chance(0.3)) {
      int m = rng_.uniform(0, 2);
      out += m == 0 ? " CONTINUE ON FAIL" : m == 1 ? " IGNORE ON FAIL" : " ABORT ON FAIL";
    }
    return out;
  }

  std::string predicate() {
    int kind = rng_.uniform(0, 8);
    switch (kind) {
      case 0:
        if (const Attr* g = generated_attr()) return g->name + " GROUNDED";
        [[fallthrough]];
      case 1: return text_attr() + " INCLUDES 'x'";
      case 2: return text_attr() + " EXCLUDES ('a', 'b''c')";
      case 3: return text_attr() + " EXCLUDES p'private details about {" + text_attr() + "}'";
      case 4: return "REGEXP_CONTAINS(" + text_attr() + ", r'^[a-z]+\\d?$')";
      case 5: return "LENGTH(" + text_attr() + ") < " + std::to_string(rng_.uniform(5, 500));
      case 6:
        if (!aliases_.empty()) return aliases_.back() + " SOUND";
        return relevant_target();
      case 7: return relevant_target();
      default: return "(LENGTH(" + text_attr() + ") + LENGTH(" + text_attr() + ") > 2 OR " + text_attr() + " = 'n/a')";
    }
  }

  std::string assert_stage() {
    std::string out = "ASSERT " + predicate();
    int extra = rng_.uniform(0, 2);
    for (int i = 0; i < extra; ++i) out += " AND " + predicate();
    return out + settings();
  }

  Rng& rng_;
  std::vector<Attr> attrs_;
  std::vector<std::string> aliases_;
  int counter_ = 0;
};

}  // namespace sicql::testing
