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

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "sicql/ast.hpp"
#include "sicql/error.hpp"

namespace sicql::lang {

/// Parses a query into a logical plan with resolved schemas. ASSERT
/// conjunctions are split into one stage per constraint, and every prompt
/// stage with a declared output type is followed by an implicit type
/// constraint. Throws ParseError with a 1-based position.
///
///   query := (FROM ident | Scan '(' ident ')') stage*
///   stage := '|>' (set | extend | where | aggregate | assert)
///   set := SET ident '=' value [type] [AS ident]
///   extend := EXTEND value AS ident [type]
///   where := WHERE value [AS ident]
///   aggregate := AGGREGATE value AS ident [type] [GROUP BY ident (',' ident)*]
///   value := [EXTRACTIVE | ABSTRACTIVE] (prompt | expr)
///   assert := ASSERT pred (AND pred)* [RETRY int] [(CONTINUE|IGNORE|ABORT) ON FAIL]
///   pred := expr | ident (GROUNDED | SOUND | RELEVANT | (INCLUDES | EXCLUDES) matcher)
///   matcher := string | r'regex' | p'prompt' | '(' string (',' string)* ')'
LogicalPlan parse_query(std::string_view text, const Catalog* catalog = nullptr);

/// Parses `p'...'` (the prefix and quotes included).
PromptTemplate parse_prompt_string(std::string_view text);

/// Extracts placeholders from already-unescaped prompt text.
PromptTemplate make_prompt(std::string raw_text);

/// Parses an ASSERT body (without the keyword) in isolation, as stored in
/// the constraint registry. Targets are not resolved.
std::vector<ConstraintDecl> parse_constraints(std::string_view text);

ExprPtr parse_expr(std::string_view text);

/// Derives a DomainSpec from a single-attribute expression when it has one
/// of the recognized shapes; otherwise the decl is classified as Assertion.
void classify_expression_constraint(ConstraintDecl& decl);

/// Assigns `<target>:<class>` ids, suffixing `#n` on repeats. Decls that
/// already carry an id keep it and reserve it.
void assign_constraint_ids(std::vector<ConstraintDecl*>& decls);
std::string base_constraint_id(const ConstraintDecl& decl);

/// Static result type of `e`; `lookup` resolves attribute names and throws
/// for unknown ones.
using AttrLookup = std::function<Type(const std::string& name, int line, int column)>;
Type infer_type(const Expr& e, const AttrLookup& lookup);

}  // namespace sicql::lang
