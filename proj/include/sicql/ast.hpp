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
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sicql/value.hpp"

namespace sicql::lang {

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

enum class ExprKind { kLiteral, kAttr, kUnary, kBinary, kCall, kCast };
enum class UnaryOp { kNot, kNeg };
enum class BinaryOp { kOr, kAnd, kEq, kNe, kLt, kLe, kGt, kGe, kConcat, kAdd, kSub, kMul, kDiv, kMod };

/// Builtins are LENGTH, REGEXP_CONTAINS, DATE_PART, AGE and CURRENT_DATE.
/// `x IN (a, b)` is represented as a call named "IN" with x first.
struct Expr {
  ExprKind kind = ExprKind::kLiteral;
  Value literal;
  bool raw = false;  // literal came from r'...'
  std::string name;  // attribute or function name (upper-cased)
  UnaryOp unary = UnaryOp::kNot;
  BinaryOp binary = BinaryOp::kEq;
  Type cast_type = Type::kAny;
  std::vector<ExprPtr> args;
  int line = 0;
  int column = 0;

  static std::shared_ptr<Expr> make_literal(Value v, bool raw = false);
  static std::shared_ptr<Expr> make_attr(std::string name);
  static std::shared_ptr<Expr> make_unary(UnaryOp op, ExprPtr operand);
  static std::shared_ptr<Expr> make_binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs);
  static std::shared_ptr<Expr> make_call(std::string name, std::vector<ExprPtr> args);
  static std::shared_ptr<Expr> make_cast(ExprPtr operand, Type type);
};

/// Structural equality; source positions are ignored.
bool equal(const Expr& a, const Expr& b);
bool equal(const ExprPtr& a, const ExprPtr& b);

/// Attribute names referenced by `e`, first-occurrence order.
std::vector<std::string> referenced_attrs(const Expr& e);

const char* binary_op_text(BinaryOp op);

struct PromptTemplate {
  std::string raw_text;
  std::vector<std::string> placeholders;

  friend bool operator==(const PromptTemplate&, const PromptTemplate&) = default;
};

struct Matcher {
  enum class Kind { kLiteral, kRegex, kLiteralSet, kPrompt };
  Kind kind = Kind::kLiteral;
  std::string text;                // literal text or regex pattern
  std::vector<std::string> items;  // literal set
  PromptTemplate prompt;

  friend bool operator==(const Matcher&, const Matcher&) = default;
};

struct DomainSpec {
  enum class Kind { kType, kRegex, kRange, kMaxLength, kValueSet };
  Kind kind = Kind::kType;
  Type type = Type::kAny;
  std::string pattern;
  std::optional<double> lo;
  std::optional<double> hi;
  bool lo_inclusive = true;
  bool hi_inclusive = true;
  /// Exclusive bound: a value passes when its length is below it.
  int64_t max_length = 0;
  std::vector<Value> values;

  friend bool operator==(const DomainSpec&, const DomainSpec&) = default;
};

enum class ConstraintClass { kDomain, kInclude, kExclude, kGrounded, kSound, kRelevant, kAssertion };
enum class FailureMode { kContinue, kIgnore, kAbort };
enum class Origin { kDeclared, kImplicit, kLineage, kDefault };

const char* class_name(ConstraintClass c);
const char* failure_mode_name(FailureMode m);
std::optional<FailureMode> failure_mode_from_name(std::string_view name);
const char* origin_name(Origin o);

struct ConstraintDecl {
  std::string id;
  /// Attribute name or operator alias; empty for assertions, which use refs.
  std::string target;
  ConstraintClass cls = ConstraintClass::kAssertion;
  ExprPtr expr;  // Domain (when declared as an expression) and Assertion
  std::optional<DomainSpec> domain;
  std::optional<Matcher> matcher;
  std::optional<int> retry;
  std::optional<FailureMode> mode;
  Origin origin = Origin::kDeclared;
  std::vector<std::string> refs;
  int line = 0;
};

/// Structural equality over everything but source lines.
bool equal(const ConstraintDecl& a, const ConstraintDecl& b);

enum class StageKind { kScan, kSet, kExtend, kWhere, kAggregate, kAssert };
enum class Annotation { kNone, kExtractive, kAbstractive };

const char* stage_kind_name(StageKind k);
const char* annotation_name(Annotation a);

struct Attribute {
  std::string name;
  Type type = Type::kAny;
  bool generated = false;  // written by a prompt-evaluated stage

  friend bool operator==(const Attribute&, const Attribute&) = default;
};

struct Stage {
  StageKind kind = StageKind::kScan;
  std::string table;  // Scan
  std::string attr;   // Set target, Extend/Aggregate output
  ExprPtr expr;
  std::optional<PromptTemplate> prompt;
  Annotation annotation = Annotation::kNone;
  std::optional<Type> out_type;
  std::string alias;  // explicit alias only
  std::string op_id;  // unique operator name (alias, output attribute, or synthesized)
  std::vector<std::string> group_by;
  ConstraintDecl constraint;  // Assert
  /// Constraint rendering appended to the prompt by prompt injection.
  std::vector<std::string> constraint_notes;
  std::vector<Attribute> output_schema;
  int line = 0;

  bool is_operator() const { return kind != StageKind::kAssert; }
  bool is_semantic() const { return prompt.has_value(); }
};

bool equal(const Stage& a, const Stage& b);

struct LogicalPlan {
  std::vector<Stage> stages;
  bool open_schema = false;
};

bool equal(const LogicalPlan& a, const LogicalPlan& b);

/// Known tables. Tables absent from the catalog get an open schema whose
/// columns are discovered from references.
struct Catalog {
  std::map<std::string, std::vector<Attribute>> tables;
};

}  // namespace sicql::lang
