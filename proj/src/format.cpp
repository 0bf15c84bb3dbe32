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

#include "sicql/format.hpp"

namespace sicql::lang {
namespace {

enum Prec { kOr = 1, kAnd, kNot, kCmp, kConcat, kAdd, kMul, kNeg, kCast, kPrimary };

int binary_prec(BinaryOp op) {
  switch (op) {
    case BinaryOp::kOr: return kOr;
    case BinaryOp::kAnd: return kAnd;
    case BinaryOp::kConcat: return kConcat;
    case BinaryOp::kAdd:
    case BinaryOp::kSub: return kAdd;
    case BinaryOp::kMul:
    case BinaryOp::kDiv:
    case BinaryOp::kMod: return kMul;
    default: return kCmp;
  }
}

int prec(const Expr& e) {
  switch (e.kind) {
    case ExprKind::kBinary: return binary_prec(e.binary);
    case ExprKind::kUnary: return e.unary == UnaryOp::kNot ? kNot : kNeg;
    case ExprKind::kCast: return kCast;
    case ExprKind::kCall: return e.name == "IN" ? kCmp : kPrimary;
    case ExprKind::kLiteral:
      if (e.literal.is_number() && e.literal.as_number() < 0) return kNeg;
      return kPrimary;
    default: return kPrimary;
  }
}

std::string literal_text(const Expr& e) {
  const Value& v = e.literal;
  if (v.is_null()) return "NULL";
  if (v.is_bool()) return v.as_bool() ? "TRUE" : "FALSE";
  if (v.is_int()) return std::to_string(v.as_int());
  if (v.is_float()) return format_double(v.as_float());
  if (v.is_text()) return e.raw ? "r'" + v.as_text() + "'" : quote_string(v.as_text());
  return quote_string(v.to_text()) + "::" + type_name(v.type());
}

std::string fmt(const Expr& e, int min_prec);

std::string render(const Expr& e) {
  switch (e.kind) {
    case ExprKind::kLiteral: return literal_text(e);
    case ExprKind::kAttr: return e.name;
    case ExprKind::kUnary: {
      if (e.unary == UnaryOp::kNot) return "NOT " + fmt(*e.args[0], kNot);
      std::string inner = fmt(*e.args[0], kNeg);
      if (!inner.empty() && inner[0] == '-') inner = "(" + inner + ")";
      return "-" + inner;
    }
    case ExprKind::kBinary: {
      int p = binary_prec(e.binary);
      bool cmp = p == kCmp;
      return fmt(*e.args[0], cmp ? p + 1 : p) + " " + binary_op_text(e.binary) + " " + fmt(*e.args[1], p + 1);
    }
    case ExprKind::kCast: return fmt(*e.args[0], kCast) + "::" + type_name(e.cast_type);
    case ExprKind::kCall: {
      if (e.name == "IN") {
        std::string out = fmt(*e.args[0], kCmp + 1) + " IN (";
        for (size_t i = 1; i < e.args.size(); ++i) out += (i > 1 ? ", " : "") + fmt(*e.args[i], kOr);
        return out + ")";
      }
      if (e.name == "CURRENT_DATE" && e.args.empty()) return "CURRENT_DATE";
      std::string out = e.name + "(";
      for (size_t i = 0; i < e.args.size(); ++i) out += (i ? ", " : "") + fmt(*e.args[i], kOr);
      return out + ")";
    }
  }
  return "";
}

std::string fmt(const Expr& e, int min_prec) {
  std::string s = render(e);
  return prec(e) < min_prec ? "(" + s + ")" : s;
}

std::string join_values(const std::vector<Value>& values) {
  std::string out;
  for (const auto& v : values) out += (out.empty() ? "" : ", ") + v.to_text();
  return out;
}

std::string join_items(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& v : items) out += (out.empty() ? "" : ", ") + v;
  return out;
}

std::string describe_range(const DomainSpec& d) {
  std::string out;
  if (d.lo) out += std::string(d.lo_inclusive ? "at least " : "greater than ") + format_double(*d.lo);
  if (d.hi) out += std::string(out.empty() ? "" : " and ") + (d.hi_inclusive ? "at most " : "less than ") + format_double(*d.hi);
  return out;
}

}  // namespace

std::string format_expr(const Expr& e) { return fmt(e, kOr); }

std::string quote_string(const std::string& text) {
  std::string out = "'";
  for (char c : text) {
    if (c == '\'') out += "''";
    else out.push_back(c);
  }
  return out + "'";
}

std::string format_prompt(const PromptTemplate& p) { return "p" + quote_string(p.raw_text); }

std::string format_matcher(const Matcher& m) {
  switch (m.kind) {
    case Matcher::Kind::kLiteral: return quote_string(m.text);
    case Matcher::Kind::kRegex: return "r'" + m.text + "'";
    case Matcher::Kind::kPrompt: return format_prompt(m.prompt);
    case Matcher::Kind::kLiteralSet: {
      std::string out = "(";
      for (size_t i = 0; i < m.items.size(); ++i) out += (i ? ", " : "") + quote_string(m.items[i]);
      return out + ")";
    }
  }
  return "";
}

std::string format_predicate(const ConstraintDecl& c) {
  if (c.expr) return format_expr(*c.expr);
  switch (c.cls) {
    case ConstraintClass::kGrounded: return c.target + " GROUNDED";
    case ConstraintClass::kSound: return c.target + " SOUND";
    case ConstraintClass::kRelevant: return c.target + " RELEVANT";
    case ConstraintClass::kInclude: return c.target + " INCLUDES " + format_matcher(*c.matcher);
    case ConstraintClass::kExclude: return c.target + " EXCLUDES " + format_matcher(*c.matcher);
    case ConstraintClass::kDomain:
      if (c.domain && c.domain->kind == DomainSpec::Kind::kType)
        return c.target + " IS " + type_name(c.domain->type);
      break;
    default: break;
  }
  return c.target + " " + class_name(c.cls);
}

std::string format_constraint(const ConstraintDecl& c) {
  std::string out = format_predicate(c);
  if (c.retry) out += " RETRY " + std::to_string(*c.retry);
  if (c.mode) out += std::string(" ") + failure_mode_name(*c.mode) + " ON FAIL";
  return out;
}

std::string format_stage(const Stage& s) {
  auto value = [&]() {
    std::string out;
    if (s.annotation != Annotation::kNone) out += std::string(annotation_name(s.annotation)) + " ";
    out += s.prompt ? format_prompt(*s.prompt) : format_expr(*s.expr);
    return out;
  };
  auto type_suffix = [&]() { return s.out_type ? std::string(" ") + type_name(*s.out_type) : std::string(); };
  switch (s.kind) {
    case StageKind::kScan: return "Scan(" + s.table + ")";
    case StageKind::kSet: {
      std::string out = "SET " + s.attr + " = " + value() + type_suffix();
      if (!s.alias.empty()) out += " AS " + s.alias;
      return out;
    }
    case StageKind::kExtend: return "EXTEND " + value() + " AS " + s.attr + type_suffix();
    case StageKind::kWhere: {
      std::string out = "WHERE " + value();
      if (!s.alias.empty()) out += " AS " + s.alias;
      return out;
    }
    case StageKind::kAggregate: {
      std::string out = "AGGREGATE " + value() + " AS " + s.attr + type_suffix();
      if (!s.group_by.empty()) out += " GROUP BY " + join_items(s.group_by);
      return out;
    }
    case StageKind::kAssert: return "ASSERT " + format_constraint(s.constraint);
  }
  return "";
}

std::string format_logical(const LogicalPlan& plan) {
  std::string out;
  for (const auto& s : plan.stages) {
    if (s.kind == StageKind::kAssert && s.constraint.origin == Origin::kImplicit) continue;
    if (s.kind == StageKind::kScan) {
      out += format_stage(s) + "\n";
      continue;
    }
    out += "|> " + format_stage(s);
    if (s.kind == StageKind::kAssert && s.constraint.origin != Origin::kDeclared)
      out += std::string("  -- ") + origin_name(s.constraint.origin);
    out += "\n";
  }
  return out;
}

std::string describe_constraint(const ConstraintDecl& c) {
  switch (c.cls) {
    case ConstraintClass::kDomain: {
      if (!c.domain) return "output must satisfy " + format_predicate(c);
      const DomainSpec& d = *c.domain;
      switch (d.kind) {
        case DomainSpec::Kind::kType: return std::string("output must be a valid ") + type_name(d.type);
        case DomainSpec::Kind::kRegex: return "output must match regex " + d.pattern;
        case DomainSpec::Kind::kRange: return "output must be " + describe_range(d);
        case DomainSpec::Kind::kMaxLength:
          return "output must be shorter than " + std::to_string(d.max_length) + " characters";
        case DomainSpec::Kind::kValueSet: return "output must be one of: " + join_values(d.values);
      }
      break;
    }
    case ConstraintClass::kInclude:
    case ConstraintClass::kExclude: {
      std::string verb = c.cls == ConstraintClass::kInclude ? "output must include " : "output must not include ";
      const Matcher& m = *c.matcher;
      switch (m.kind) {
        case Matcher::Kind::kLiteral: return verb + quote_string(m.text);
        case Matcher::Kind::kRegex: return verb + "text matching regex " + m.text;
        case Matcher::Kind::kLiteralSet:
          return verb + (c.cls == ConstraintClass::kInclude ? "at least one of: " : "any of: ") + join_items(m.items);
        case Matcher::Kind::kPrompt: return verb + m.prompt.raw_text;
      }
      break;
    }
    case ConstraintClass::kGrounded: return "output must be supported by the input";
    case ConstraintClass::kSound:
      return "list premises taken from the input and valid reasoning steps before the answer";
    case ConstraintClass::kRelevant: return "output must be relevant to the task";
    case ConstraintClass::kAssertion: return "the following must hold: " + format_predicate(c);
  }
  return format_predicate(c);
}

}  // namespace sicql::lang
