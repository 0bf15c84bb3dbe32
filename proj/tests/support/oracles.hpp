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

// Reference computations written directly from the cost model, shared by the
// unit tests and the acceptance binary.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "sicql/logical.hpp"
#include "sicql/physical.hpp"

namespace sicql::testing {

/// Short-circuit check cost of an order: sum of c_i times prod_{j<i} s_j.
inline double order_cost(const std::vector<logical::ConstraintStats>& order) {
  double total = 0.0;
  double reach = 1.0;
  for (const auto& s : order) {
    total += s.cost * reach;
    reach *= s.selectivity;
  }
  return total;
}

/// Minimum order cost over every permutation.
inline double brute_force_min(const std::vector<logical::ConstraintStats>& stats) {
  std::vector<size_t> perm(stats.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    std::vector<logical::ConstraintStats> order;
    for (size_t i : perm) order.push_back(stats[i]);
    best = std::min(best, order_cost(order));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

inline bool same_cost(double a, double b) { return std::fabs(a - b) <= 1e-12 * std::max(1.0, std::fabs(b)); }

/// Cost of a fixed assignment:
/// (op + proactive + sum c_i prod_{j<i} s_j) * sum_{k<=r} V^k * cardinality.
inline double oracle_plan_cost(const lang::LogicalPlan& plan,
                               const std::map<std::string, physical::ImplCandidate>& impls,
                               const physical::Profile& prof) {
  using lang::StageKind;
  double card = prof.cardinality;
  double total = 0.0;
  size_t i = 0;
  while (i < plan.stages.size()) {
    const lang::Stage& op = plan.stages[i];
    double op_cost = op.kind == StageKind::kScan ? 0.0 : prof.operators.at(op.op_id).cost;
    double factor = op.kind == StageKind::kScan ? 1.0 : prof.operators.at(op.op_id).cardinality_factor;
    double per_attempt = op_cost;
    double reach = 1.0;
    double pass = 1.0;
    int r = 0;
    size_t j = i + 1;
    for (; j < plan.stages.size() && plan.stages[j].kind == StageKind::kAssert; ++j) {
      const lang::ConstraintDecl& c = plan.stages[j].constraint;
      const physical::ImplCandidate& x = impls.at(c.id);
      double v = *prof.constraints.at(c.id).violation();
      if (x.mode != physical::EnforceMode::kReactive) {
        per_attempt += x.cost;
      } else {
        per_attempt += reach * x.cost;
        reach *= 1 - v;
        pass *= 1 - v;
      }
      if (op.kind != StageKind::kScan) r = std::max(r, c.retry.value_or(1));
    }
    double attempts = 0.0;
    for (int k = 0; k <= r; ++k) attempts += std::pow(1 - pass, k);
    total += per_attempt * attempts * card;
    card *= factor;
    i = j;
  }
  return total;
}

inline bool oracle_feasible(const physical::ImplCandidate& c, const physical::ThresholdSet& t) {
  if (c.mechanism.deterministic) return true;
  return (!t.min_precision || c.precision >= *t.min_precision) && (!t.min_recall || c.recall >= *t.min_recall) &&
         (!t.min_confidence || (c.confidence_capable && c.confidence >= *t.min_confidence));
}

struct BruteForcePlan {
  double best_cost = INFINITY;  // infinite when no assignment is feasible
  size_t assignments = 0;
  /// First constraint, in plan order, without a candidate meeting its
  /// thresholds; empty when every constraint has one.
  std::string unsatisfiable;
};

/// Enumerates every assignment of the candidate table.
inline BruteForcePlan brute_force_plan(
    const lang::LogicalPlan& plan,
    const std::vector<std::pair<std::string, std::vector<physical::ImplCandidate>>>& table,
    const physical::Profile& prof) {
  BruteForcePlan out;
  for (const auto& [id, cands] : table) {
    bool any = std::any_of(cands.begin(), cands.end(), [&, &id = id](const physical::ImplCandidate& x) {
      return oracle_feasible(x, prof.thresholds.for_constraint(id));
    });
    if (!any && out.unsatisfiable.empty()) out.unsatisfiable = id;
  }
  std::vector<size_t> idx(table.size(), 0);
  while (true) {
    std::map<std::string, physical::ImplCandidate> m;
    bool ok = true;
    for (size_t k = 0; k < table.size(); ++k) {
      const physical::ImplCandidate& x = table[k].second[idx[k]];
      ok &= oracle_feasible(x, prof.thresholds.for_constraint(table[k].first));
      m[table[k].first] = x;
    }
    ++out.assignments;
    if (ok) {
      double c = oracle_plan_cost(plan, m, prof);
      if (!prof.thresholds.max_plan_cost || c <= *prof.thresholds.max_plan_cost) out.best_cost = std::min(out.best_cost, c);
    }
    size_t k = table.size();
    bool done = true;
    while (k-- > 0) {
      if (++idx[k] < table[k].second.size()) {
        done = false;
        break;
      }
      idx[k] = 0;
    }
    if (done) break;
  }
  return out;
}

}  // namespace sicql::testing
