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

#include <algorithm>
#include <cctype>

#include "sicql/ast.hpp"

namespace sicql::lang {

std::shared_ptr<Expr> Expr::make_literal(Value v, bool raw) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::kLiteral;
  e->literal = std::move(v);
  e->raw = raw;
  return e;
}

std::shared_ptr<Expr> Expr::make_attr(std::string name) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::kAttr;
  e->name = std::move(name);
  return e;
}

std::shared_ptr<Expr> Expr::make_unary(UnaryOp op, ExprPtr operand) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::kUnary;
  e->unary = op;
  e->args.push_back(std::move(operand));
  return e;
}

std::shared_ptr<Expr> Expr::make_binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::kBinary;
  e->binary = op;
  e->args.push_back(std::move(lhs));
  e->args.push_back(std::move(rhs));
  return e;
}

std::shared_ptr<Expr> Expr::make_call(std::string name, std::vector<ExprPtr> args) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::kCall;
  e->name = std::move(name);
  e->args = std::move(args);
  return e;
}

std::shared_ptr<Expr> Expr::make_cast(ExprPtr operand, Type type) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::kCast;
  e->cast_type = type;
  e->args.push_back(std::move(operand));
  return e;
}

bool equal(const Expr& a, const Expr& b) {
  if (a.kind != b.kind || a.args.size() != b.args.size()) return false;
  switch (a.kind) {
    case ExprKind::kLiteral:
      if (!(a.literal == b.literal) || a.raw != b.raw) return false;
      break;
    case ExprKind::kAttr:
    case ExprKind::kCall:
      if (a.name != b.name) return false;
      break;
    case ExprKind::kUnary:
      if (a.unary != b.unary) return false;
      break;
    case ExprKind::kBinary:
      if (a.binary != b.binary) return false;
      break;
    case ExprKind::kCast:
      if (a.cast_type != b.cast_type) return false;
      break;
  }
  for (size_t i = 0; i < a.args.size(); ++i)
    if (!equal(a.args[i], b.args[i])) return false;
  return true;
}

bool equal(const ExprPtr& a, const ExprPtr& b) {
  if (!a || !b) return !a && !b;
  return equal(*a, *b);
}

namespace {

void collect_refs(const Expr& e, std::vector<std::string>& out) {
  if (e.kind == ExprKind::kAttr) {
    if (std::find(out.begin(), out.end(), e.name) == out.end()) out.push_back(e.name);
    return;
  }
  for (const auto& a : e.args) collect_refs(*a, out);
}

}  // namespace

std::vector<std::string> referenced_attrs(const Expr& e) {
  std::vector<std::string> out;
  collect_refs(e, out);
  return out;
}

const char* binary_op_text(BinaryOp op) {
  switch (op) {
    case BinaryOp::kOr: return "OR";
    case BinaryOp::kAnd: return "AND";
    case BinaryOp::kEq: return "=";
    case BinaryOp::kNe: return "<>";
    case BinaryOp::kLt: return "<";
    case BinaryOp::kLe: return "<=";
    case BinaryOp::kGt: return ">";
    case BinaryOp::kGe: return ">=";
    case BinaryOp::kConcat: return "||";
    case BinaryOp::kAdd: return "+";
    case BinaryOp::kSub: return "-";
    case BinaryOp::kMul: return "*";
    case BinaryOp::kDiv: return "/";
    case BinaryOp::kMod: return "%";
  }
  return "?";
}

const char* class_name(ConstraintClass c) {
  switch (c) {
    case ConstraintClass::kDomain: return "domain";
    case ConstraintClass::kInclude: return "include";
    case ConstraintClass::kExclude: return "exclude";
    case ConstraintClass::kGrounded: return "grounded";
    case ConstraintClass::kSound: return "sound";
    case ConstraintClass::kRelevant: return "relevant";
    case ConstraintClass::kAssertion: return "assertion";
  }
  return "?";
}

const char* failure_mode_name(FailureMode m) {
  switch (m) {
    case FailureMode::kContinue: return "CONTINUE";
    case FailureMode::kIgnore: return "IGNORE";
    case FailureMode::kAbort: return "ABORT";
  }
  return "?";
}

std::optional<FailureMode> failure_mode_from_name(std::string_view name) {
  std::string up(name);
  for (auto& c : up) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (up == "CONTINUE") return FailureMode::kContinue;
  if (up == "IGNORE") return FailureMode::kIgnore;
  if (up == "ABORT") return FailureMode::kAbort;
  return std::nullopt;
}

const char* origin_name(Origin o) {
  switch (o) {
    case Origin::kDeclared: return "declared";
    case Origin::kImplicit: return "implicit";
    case Origin::kLineage: return "lineage";
    case Origin::kDefault: return "default";
  }
  return "?";
}

const char* stage_kind_name(StageKind k) {
  switch (k) {
    case StageKind::kScan: return "Scan";
    case StageKind::kSet: return "SET";
    case StageKind::kExtend: return "EXTEND";
    case StageKind::kWhere: return "WHERE";
    case StageKind::kAggregate: return "AGGREGATE";
    case StageKind::kAssert: return "ASSERT";
  }
  return "?";
}

const char* annotation_name(Annotation a) {
  switch (a) {
    case Annotation::kNone: return "NONE";
    case Annotation::kExtractive: return "EXTRACTIVE";
    case Annotation::kAbstractive: return "ABSTRACTIVE";
  }
  return "?";
}

bool equal(const ConstraintDecl& a, const ConstraintDecl& b) {
  return a.id == b.id && a.target == b.target && a.cls == b.cls && equal(a.expr, b.expr) &&
         a.domain == b.domain && a.matcher == b.matcher && a.retry == b.retry && a.mode == b.mode &&
         a.origin == b.origin && a.refs == b.refs;
}

bool equal(const Stage& a, const Stage& b) {
  if (a.kind != b.kind || a.table != b.table || a.attr != b.attr || !equal(a.expr, b.expr) ||
      a.prompt != b.prompt || a.annotation != b.annotation || a.out_type != b.out_type || a.alias != b.alias ||
      a.op_id != b.op_id || a.group_by != b.group_by || a.constraint_notes != b.constraint_notes ||
      a.output_schema != b.output_schema)
    return false;
  return a.kind != StageKind::kAssert || equal(a.constraint, b.constraint);
}

bool equal(const LogicalPlan& a, const LogicalPlan& b) {
  if (a.stages.size() != b.stages.size() || a.open_schema != b.open_schema) return false;
  for (size_t i = 0; i < a.stages.size(); ++i)
    if (!equal(a.stages[i], b.stages[i])) return false;
  return true;
}

}  // namespace sicql::lang
