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

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "sicql/ast.hpp"
#include "sicql/eval.hpp"
#include "sicql/value.hpp"

namespace sicql {

struct Tuple {
  int64_t id = 0;
  Row values;
  /// Constraint ids violated after retries under CONTINUE, sorted.
  std::vector<std::string> flags;
  std::vector<int64_t> parents;

  void flag(const std::string& constraint_id);
};

struct Relation {
  std::string name;
  std::vector<std::string> columns;
  std::vector<Tuple> tuples;
};

/// RFC-4180 CSV with a header row. Empty unquoted fields are NULL; columns
/// whose non-null values all parse as INT, FLOAT or BOOL get that type,
/// everything else stays text.
Relation parse_csv(std::string_view text, const std::string& name);

/// One JSON object per line; JSON types map to NULL, BOOL, INT, FLOAT and
/// text. Columns are ordered by first appearance.
Relation parse_jsonl(std::string_view text, const std::string& name);

/// Loads `<dir>/<table>.jsonl` or `<dir>/<table>.csv`; kNotFound when
/// neither exists.
Relation load_table(const std::string& dir, const std::string& table);

/// Catalog entry for a loaded relation, typed by the first non-null value of
/// each column.
std::vector<lang::Attribute> relation_schema(const Relation& r);

/// Results JSONL: the relation's columns in order, then `_tuple_id`,
/// `_flags` and `_parents`. Dates and intervals render as text.
std::string results_jsonl(const Relation& r);
Relation parse_results_jsonl(std::string_view text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view content);

}  // namespace sicql
