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

#include <map>
#include <string>
#include <string_view>

#include "sicql/ast.hpp"
#include "sicql/value.hpp"

namespace sicql {

using Row = std::map<std::string, Value>;

struct EvalContext {
  Date current_date;
};

/// Null-propagating evaluation. AND/OR/NOT follow three-valued logic; a
/// failed cast and division by zero yield NULL. Type errors throw kCheck.
Value eval_expr(const lang::Expr& e, const Row& row, const EvalContext& ctx);

/// Code points in a UTF-8 string; invalid bytes count as one each.
int64_t utf8_length(std::string_view text);

/// Unanchored search with the DFA engine; compiled patterns are cached.
bool regex_contains(std::string_view text, const std::string& pattern);

Value cast_value(const Value& v, Type target);

}  // namespace sicql
