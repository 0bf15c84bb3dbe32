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

#include "sicql/relation.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "sicql/error.hpp"

namespace sicql {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

void Tuple::flag(const std::string& constraint_id) {
  auto it = std::lower_bound(flags.begin(), flags.end(), constraint_id);
  if (it == flags.end() || *it != constraint_id) flags.insert(it, constraint_id);
}

namespace {

struct CsvField {
  std::string text;
  bool quoted = false;
};

std::vector<std::vector<CsvField>> split_csv(std::string_view text) {
  std::vector<std::vector<CsvField>> rows;
  std::vector<CsvField> row;
  CsvField field;
  bool in_quotes = false;
  bool field_started = false;
  int line = 1;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field = {};
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    if (!(row.size() == 1 && row[0].text.empty() && !row[0].quoted)) rows.push_back(std::move(row));
    row.clear();
  };
  for (size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.text += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.text += c;
      }
      continue;
    }
    if (c == '"') {
      if (field_started) throw ParseError(line, 0, "quote inside an unquoted CSV field");
      in_quotes = true;
      field.quoted = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      continue;
    } else if (c == '\n') {
      end_row();
      ++line;
    } else {
      if (field.quoted) throw ParseError(line, 0, "text after a closing quote in CSV");
      field.text += c;
      field_started = true;
    }
  }
  if (in_quotes) throw ParseError(line, 0, "unterminated quoted CSV field");
  if (field_started || !row.empty()) end_row();
  return rows;
}

Value from_json(const json& v) {
  if (v.is_null()) return Value();
  if (v.is_boolean()) return Value(v.get<bool>());
  if (v.is_number_integer()) return Value(v.get<int64_t>());
  if (v.is_number()) return Value(v.get<double>());
  if (v.is_string()) return Value(v.get<std::string>());
  return Value(v.dump());
}

ordered_json to_json(const Value& v) {
  if (v.is_null()) return nullptr;
  if (v.is_bool()) return v.as_bool();
  if (v.is_int()) return v.as_int();
  if (v.is_float()) return v.as_float();
  return v.to_text();
}

}  // namespace

Relation parse_csv(std::string_view text, const std::string& name) {
  auto rows = split_csv(text);
  if (rows.empty()) throw Error(ErrorCode::kInvalidArgument, "CSV table '" + name + "' has no header row");
  Relation r;
  r.name = name;
  std::set<std::string> seen;
  for (const auto& f : rows[0]) {
    if (f.text.empty()) throw Error(ErrorCode::kInvalidArgument, "CSV table '" + name + "' has an empty column name");
    if (!seen.insert(f.text).second)
      throw Error(ErrorCode::kInvalidArgument, "CSV table '" + name + "' repeats column '" + f.text + "'");
    r.columns.push_back(f.text);
  }
  std::vector<Type> types(r.columns.size(), Type::kAny);
  for (size_t c = 0; c < r.columns.size(); ++c) {
    for (Type candidate : {Type::kInt, Type::kFloat, Type::kBool}) {
      bool all = true, any = false;
      for (size_t i = 1; i < rows.size() && all; ++i) {
        if (c >= rows[i].size()) continue;
        const auto& f = rows[i][c];
        if (f.text.empty() && !f.quoted) continue;
        any = true;
        all = parse_typed(f.text, candidate).has_value();
      }
      if (all && any) {
        types[c] = candidate;
        break;
      }
    }
  }
  for (size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != r.columns.size())
      throw Error(ErrorCode::kInvalidArgument, "CSV table '" + name + "' row " + std::to_string(i + 1) + " has " +
                                                   std::to_string(rows[i].size()) + " fields, expected " +
                                                   std::to_string(r.columns.size()));
    Tuple t;
    for (size_t c = 0; c < r.columns.size(); ++c) {
      const auto& f = rows[i][c];
      Value v;
      if (!f.text.empty() || f.quoted) v = types[c] == Type::kAny ? Value(f.text) : *parse_typed(f.text, types[c]);
      t.values[r.columns[c]] = std::move(v);
    }
    r.tuples.push_back(std::move(t));
  }
  return r;
}

Relation parse_jsonl(std::string_view text, const std::string& name) {
  Relation r;
  r.name = name;
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ordered_json obj;
    try {
      obj = ordered_json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(n, 0, "invalid JSON in table '" + name + "': " + e.what());
    }
    if (!obj.is_object()) throw ParseError(n, 0, "table '" + name + "' rows must be JSON objects");
    Tuple t;
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (seen.insert(it.key()).second) r.columns.push_back(it.key());
      t.values[it.key()] = from_json(json(it.value()));
    }
    r.tuples.push_back(std::move(t));
  }
  for (auto& t : r.tuples)
    for (const auto& c : r.columns) t.values.try_emplace(c, Value());
  return r;
}

Relation load_table(const std::string& dir, const std::string& table) {
  namespace fs = std::filesystem;
  fs::path base(dir);
  if (fs::exists(base / (table + ".jsonl"))) return parse_jsonl(read_text_file((base / (table + ".jsonl")).string()), table);
  if (fs::exists(base / (table + ".csv"))) return parse_csv(read_text_file((base / (table + ".csv")).string()), table);
  throw Error(ErrorCode::kNotFound, "no data file for table '" + table + "' in " + dir + " (expected " + table +
                                        ".jsonl or " + table + ".csv)");
}

std::vector<lang::Attribute> relation_schema(const Relation& r) {
  std::vector<lang::Attribute> out;
  for (const auto& c : r.columns) {
    lang::Attribute a;
    a.name = c;
    a.type = Type::kAny;
    for (const auto& t : r.tuples) {
      auto it = t.values.find(c);
      if (it != t.values.end() && !it->second.is_null()) {
        a.type = it->second.type();
        break;
      }
    }
    out.push_back(a);
  }
  return out;
}

std::string results_jsonl(const Relation& r) {
  std::string out;
  for (const auto& t : r.tuples) {
    ordered_json o = ordered_json::object();
    for (const auto& c : r.columns) {
      auto it = t.values.find(c);
      o[c] = it == t.values.end() ? ordered_json(nullptr) : to_json(it->second);
    }
    o["_tuple_id"] = t.id;
    o["_flags"] = t.flags;
    o["_parents"] = t.parents;
    out += o.dump() + "\n";
  }
  return out;
}

Relation parse_results_jsonl(std::string_view text) {
  Relation r = parse_jsonl(text, "results");
  std::istringstream in{std::string(text)};
  std::string line;
  size_t k = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj = json::parse(line);
    Tuple& t = r.tuples.at(k++);
    t.id = obj.value("_tuple_id", int64_t{0});
    t.flags = obj.value("_flags", std::vector<std::string>{});
    t.parents = obj.value("_parents", std::vector<int64_t>{});
    t.values.erase("_tuple_id");
    t.values.erase("_flags");
    t.values.erase("_parents");
  }
  std::erase_if(r.columns, [](const std::string& c) { return c == "_tuple_id" || c == "_flags" || c == "_parents"; });
  return r;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path);
}

}  // namespace sicql
