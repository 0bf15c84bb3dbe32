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

#pragma once

#include <string>

#include "sicql/ast.hpp"

namespace sicql::lang {

/// Canonical source text with the minimum parentheses needed to reparse to
/// the same tree.
std::string format_expr(const Expr& e);
std::string quote_string(const std::string& text);
std::string format_prompt(const PromptTemplate& p);
std::string format_matcher(const Matcher& m);

/// Predicate text of one constraint, e.g. `med_hist_sum EXCLUDES p'x'`.
std::string format_predicate(const ConstraintDecl& c);
/// Predicate plus any explicit RETRY / ON FAIL clauses.
std::string format_constraint(const ConstraintDecl& c);

/// Single-line rendering of a stage without the leading `|> `.
std::string format_stage(const Stage& s);

/// `Scan(t)` followed by one `|> ...` line per stage. Implicit type
/// constraints are omitted; constraints added by the optimizer carry a
/// trailing `-- <origin>` comment so the text still parses.
std::string format_logical(const LogicalPlan& plan);

/// Natural-language rendering used when injecting constraints into prompts.
std::string describe_constraint(const ConstraintDecl& c);

}  // namespace sicql::lang
