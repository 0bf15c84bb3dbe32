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

// Plan-to-plan rewrites over constraint nodes. All functions are pure.

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sicql/ast.hpp"

namespace sicql::logical {

using lang::ConstraintDecl;
using lang::LogicalPlan;
using lang::Stage;

struct ConstraintStats {
  double cost = 1.0;
  /// Probability that a tuple satisfies the constraint.
  double selectivity = 0.9;
};

struct StatsTable {
  std::map<std::string, ConstraintStats> by_id;
  ConstraintStats defaults;

  ConstraintStats get(const std::string& id) const;
};

/// An operator stage and the Assert stages that directly follow it.
struct OperatorBlock {
  size_t op_index = 0;
  std::vector<size_t> constraint_indices;
};

/// Names a constraint reads: target, expression references and prompt
/// placeholders. Sound targets name an operator rather than an attribute.
std::vector<std::string> constraint_dependencies(const ConstraintDecl& c);

/// Index of the most recent operator stage before `before` that writes
/// attribute `name` or carries operator name `name`.
std::optional<size_t> find_writer(const LogicalPlan& plan, const std::string& name, size_t before);

/// Operator stage a constraint belongs to: the latest writer among its
/// dependencies. Throws kPlan when a dependency is never produced.
size_t find_producer(const LogicalPlan& plan, size_t assert_index);

/// Groups stages into operator blocks. Asserts are assigned to the nearest
/// preceding operator, which is their producer once pushdown has run.
std::vector<OperatorBlock> operator_blocks(const LogicalPlan& plan);

LogicalPlan pushdown_constraints(const LogicalPlan& plan);
LogicalPlan expand_grounding_lineage(const LogicalPlan& plan);
LogicalPlan attach_default_relevance(const LogicalPlan& plan, bool enabled);
LogicalPlan inject_constraint_prompts(const LogicalPlan& plan);
LogicalPlan reorder_constraints(const LogicalPlan& plan, const StatsTable& stats);

/// Expected cost of checking in the given order with short-circuit on the
/// first violation: sum of c_i times the product of s_j for j < i.
double expected_check_cost(const std::vector<ConstraintStats>& order);

/// cost / (1 - selectivity); infinite when selectivity is 1.
double rank(const ConstraintStats& s);

/// Prompt text sent to the model before placeholder substitution: the raw
/// template followed by the injected constraints section, if any.
std::string prompt_with_constraints(const Stage& s);

struct LogicalOptions {
  bool default_relevance = true;
  bool inject_prompts = true;
  StatsTable stats;
};

/// pushdown, lineage expansion, default relevance, prompt injection, reorder.
LogicalPlan optimize(const LogicalPlan& plan, const LogicalOptions& options);

}  // namespace sicql::logical
