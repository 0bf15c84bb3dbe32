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

// Organization-wide constraint registry: persistence, recommendation by
// embedding similarity, and static conflict detection.

#pragma once

#include <cstdint>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "sicql/ast.hpp"
#include "sicql/model.hpp"

namespace sicql::store {

struct StoredConstraint {
  std::string id;
  /// ASSERT body, e.g. `summary EXCLUDES ('SSN', 'MRN')`.
  std::string text;
  lang::ConstraintDecl decl;
  std::string description;
  std::vector<std::string> tags;
  std::string provenance;
  int64_t usage_count = 0;
  bool soft = false;
};

struct Metadata {
  std::string id;  // derived from the constraint when empty
  std::string description;
  std::vector<std::string> tags;
  std::string provenance;
  bool soft = false;
};

enum class ConflictKind { kDisjointDomain, kEmptyRegexIntersection, kIncludeExcludeContradiction, kFlaggedByJudge };
const char* conflict_kind_name(ConflictKind k);

struct Conflict {
  std::string first;
  std::string second;
  ConflictKind kind = ConflictKind::kDisjointDomain;
  std::string explanation;
};

struct Recommendation {
  StoredConstraint constraint;
  double score = 0.0;
  std::optional<bool> judge_relevant;
};

nlohmann::json to_json(const StoredConstraint& c);
nlohmann::json to_json(const Conflict& c);
nlohmann::json to_json(const Recommendation& r);

/// Parses a single-constraint ASSERT body. kInvalidArgument when the text
/// holds a conjunction.
lang::ConstraintDecl parse_single_constraint(const std::string& text);

/// Pairwise checks over constraints that share a target. Ids name the
/// decls. Prompt matcher pairs go to `judge` when one is given.
std::vector<Conflict> detect_conflicts(const std::vector<lang::ConstraintDecl>& decls,
                                       model::ModelClient* judge = nullptr, const std::string& judge_name = "judge");

/// Registry persisted as one JSONL file, rewritten atomically on each
/// change. An empty path keeps it in memory.
class ConstraintStore {
 public:
  explicit ConstraintStore(std::string path = "");

  /// kConflict on a duplicate id, kParse or kInvalidArgument on bad text.
  std::string register_constraint(const std::string& text, const Metadata& meta = {});
  StoredConstraint lookup(const std::string& id) const;
  std::vector<StoredConstraint> list() const;
  size_t size() const;

  /// Top-k by cosine between the query and each description plus tags.
  /// With a judge, the top 2k are reranked with judged-relevant first.
  std::vector<Recommendation> recommend(const std::string& query, size_t k, model::ModelClient* judge = nullptr,
                                        const std::string& judge_name = "judge") const;
  /// Records that a recommendation was adopted.
  void accept(const std::string& id);
  void set_soft(const std::string& id, bool soft);

  std::vector<Conflict> conflicts(model::ModelClient* judge = nullptr, const std::string& judge_name = "judge") const;
  /// Conflicts between `decls` and registered constraints on the same
  /// target, including those among `decls` themselves.
  std::vector<Conflict> conflicts_with(const std::vector<lang::ConstraintDecl>& decls) const;

  const std::string& path() const { return path_; }

 private:
  void save_locked() const;

  std::string path_;
  mutable std::shared_mutex mu_;
  std::vector<StoredConstraint> items_;
};

}  // namespace sicql::store
