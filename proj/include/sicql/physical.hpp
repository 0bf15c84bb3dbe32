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

// Enforcement implementations, cost and reliability estimates, and plan
// selection under user thresholds.

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sicql/ast.hpp"

namespace sicql::physical {

using lang::ConstraintDecl;
using lang::LogicalPlan;
using lang::Stage;

enum class EnforceMode { kReactive, kProactiveMask, kProactiveStream };

const char* enforce_mode_name(EnforceMode m);  // reactive, proactive-mask, proactive-stream
std::optional<EnforceMode> enforce_mode_from_name(std::string_view name);

/// Deterministic mechanisms are named by kind (regex, type, range, length,
/// value_set, literal, substring, regex_dfa, suffix_automaton, expression);
/// model mechanisms by judge name.
struct Mechanism {
  bool deterministic = true;
  std::string name;

  std::string to_string() const;  // "deterministic:regex", "model:judge"
  static std::optional<Mechanism> parse(std::string_view text);
  friend bool operator==(const Mechanism&, const Mechanism&) = default;
};

struct ImplCandidate {
  std::string constraint_id;
  EnforceMode mode = EnforceMode::kReactive;
  Mechanism mechanism;
  double cost = 0.0;
  double precision = 1.0;
  double recall = 1.0;
  bool confidence_capable = false;
  /// Mean judge confidence, used by the confidence-threshold proxy.
  double confidence = 1.0;

  bool is_proactive() const { return mode != EnforceMode::kReactive; }
  /// EXPLAIN tags: `[deterministic]` or `[stochastic:<judge>]`, then
  /// `[reactive]` or `[proactive]`.
  std::string tags() const;
};

struct JudgeSpec {
  std::string name = "judge";
  double cost = 1.0;
  double precision = 0.9;
  double recall = 0.9;
  bool confidence_capable = true;
  double confidence = 0.9;
};

/// What the configured model client and the planner defaults offer.
struct Capabilities {
  std::vector<JudgeSpec> judges = {JudgeSpec{}};
  bool token_masking = true;
  bool streaming = true;
  /// Mask kinds allowed for proactive decoding: domain-regex, domain-type,
  /// domain-set, domain-length, grounding-extractive.
  std::set<std::string> decode_allowlist = {"domain-regex", "grounding-extractive"};
  double deterministic_cost = 0.01;
  double mask_cost = 0.1;
  int stream_segments = 3;
};

/// Mask kind for a constraint whose producer is `producer`, if any.
std::optional<std::string> mask_kind(const ConstraintDecl& c, const Stage& producer);

/// Grounding on an operator without EXTRACTIVE is checked as abstractive.
bool is_extractive_grounding(const ConstraintDecl& c, const Stage& producer);

/// Candidate implementations with default costs. Throws kPlan when a
/// constraint needs a judge and none is configured.
std::vector<ImplCandidate> enumerate_impls(const ConstraintDecl& c, const Stage& producer, const Capabilities& caps);

/// Expected operator invocations with per-attempt violation probability v
/// and at most r retries: sum of v^k for k in 0..r.
double expected_attempts(double v, int r);

struct CandidateProfile {
  EnforceMode mode = EnforceMode::kReactive;
  Mechanism mechanism;
  std::optional<double> cost;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> confidence;
};

struct ConstraintProfile {
  std::vector<CandidateProfile> candidates;
  std::optional<double> violation_prob;
  std::optional<double> selectivity;

  /// Per-attempt violation probability; 1 - selectivity when only that is set.
  std::optional<double> violation() const;
};

struct OperatorProfile {
  double cost = 0.0;
  double cardinality_factor = 1.0;
};

struct ThresholdSet {
  std::optional<double> min_precision;
  std::optional<double> min_recall;
  std::optional<double> min_confidence;
};

struct Thresholds {
  std::optional<double> max_plan_cost;
  ThresholdSet global;
  std::map<std::string, ThresholdSet> per_constraint;

  ThresholdSet for_constraint(const std::string& id) const;
};

struct Profile {
  /// Expected number of scanned tuples.
  double cardinality = 1.0;
  std::map<std::string, OperatorProfile> operators;
  std::map<std::string, ConstraintProfile> constraints;
  Thresholds thresholds;
};

Profile parse_profile(const std::string& json_text);
std::string profile_to_json(const Profile& p);

struct PlanDefaults {
  double semantic_op_cost = 10.0;
  double expression_op_cost = 0.01;
  double selectivity = 0.9;
  int retry = 1;
  lang::FailureMode mode = lang::FailureMode::kContinue;
};

/// Copy of `p` with entries added for every operator and constraint of the
/// plan that the profile does not mention.
Profile fill_profile_defaults(const LogicalPlan& plan, Profile p, const PlanDefaults& d);

struct ConstraintEstimate {
  std::string constraint_id;
  ImplCandidate impl;
  double violation_prob = 0.0;  // per attempt, after the implementation is applied
  double expected_checks = 0.0;
  double expected_retries = 0.0;
  double adherence = 1.0;
};

struct OperatorEstimate {
  size_t op_index = 0;
  std::string op_id;
  double input_cardinality = 0.0;
  double attempts = 1.0;
  double cost_per_tuple = 0.0;
  double cost = 0.0;
  double reliability = 1.0;
};

struct PlanEstimate {
  double expected_cost = 0.0;
  std::vector<ConstraintEstimate> per_constraint;
  std::vector<OperatorEstimate> per_operator;
};

struct PhysicalPlan {
  LogicalPlan logical;
  /// Chosen implementation per constraint id.
  std::map<std::string, ImplCandidate> impls;
  PlanEstimate estimate;
  std::string search;  // exhaustive or greedy
  double assignments = 0;
};

/// Effective retry threshold and failure mode once defaults are applied.
int retry_of(const ConstraintDecl& c, const PlanDefaults& d);
lang::FailureMode mode_of(const ConstraintDecl& c, const PlanDefaults& d);

/// Estimate for a fixed assignment. Throws kEstimate naming the first
/// operator or constraint missing from the profile.
PlanEstimate estimate_plan(const LogicalPlan& plan, const std::map<std::string, ImplCandidate>& impls,
                           const Profile& profile, const PlanDefaults& d);

/// Candidates per constraint with profile overrides applied, in plan order.
/// A profile candidate that matches no available implementation is a
/// kEstimate error.
std::vector<std::pair<std::string, std::vector<ImplCandidate>>> candidate_table(const LogicalPlan& plan,
                                                                                const Profile& profile,
                                                                                const Capabilities& caps);

bool meets_thresholds(const ImplCandidate& c, const ThresholdSet& t);

/// Min-cost feasible assignment. Throws kInfeasible naming the binding
/// threshold.
PhysicalPlan select_plan(const LogicalPlan& plan, const Profile& profile, const Capabilities& caps,
                         const PlanDefaults& d = {});

/// Logical rendering with per-constraint implementation tags, per-operator
/// estimates and a summary line.
std::string format_physical(const PhysicalPlan& plan, const PlanDefaults& d = {});

}  // namespace sicql::physical
