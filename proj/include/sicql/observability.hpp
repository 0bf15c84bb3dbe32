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

// Run records as append-only JSONL relations under
// runs/<run_id>/{run.json, op_invocations.jsonl, constraint_invocations.jsonl,
// lineage.jsonl, results.jsonl}, plus labels.jsonl for human labels.

#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace sicql::obs {

using nlohmann::json;

struct OpInvocationRecord {
  int64_t invocation_id = 0;
  std::string run_id;
  std::string op_id;
  std::string kind;  // scan, set, extend, where, aggregate
  int64_t tuple_id = 0;
  std::vector<int64_t> inputs;  // aggregate members
  int attempt = 0;
  std::string prompt;
  std::string output;
  double cost = 0.0;
  /// ok, violation, unparseable, mask_exhausted, skipped, error
  std::string status = "ok";
  bool final = false;
  /// Set on the final attempt: kept, flagged, filtered, ignored, aborted.
  std::string disposition;
};

struct ConstraintInvocationRecord {
  int64_t invocation_id = 0;
  std::string run_id;
  std::string constraint_id;
  std::string op_id;
  int64_t tuple_id = 0;
  int attempt = 0;
  /// Checked values and source excerpt; texts over 4 KiB are truncated and
  /// carry a content hash.
  json input = json::object();
  std::string predicted;  // pass or violation
  double confidence = 1.0;
  /// True when the constraint actually holds; positive class is violation.
  std::optional<bool> true_label;
  std::string impl;  // deterministic:regex, model:judge
  bool stochastic = false;
  std::string mode;  // reactive, proactive-mask, proactive-stream
  std::string constraint_text;
  std::string description;
  std::string feedback;
  double cost = 0.0;
};

struct LineageRecord {
  int64_t child = 0;
  int64_t parent = 0;
  std::string op_id;
};

struct StageCounts {
  std::string op_id;
  std::string kind;
  int64_t in = 0;
  int64_t out = 0;
  int64_t filtered = 0;
  int64_t ignored = 0;
  int64_t merged = 0;  // aggregate inputs folded into an emitted group
  int64_t aborted_discarded = 0;

  bool conserved() const { return in == out + filtered + ignored + merged + aborted_discarded; }
};

struct RunTotals {
  double cost = 0.0;
  int64_t tuples_in = 0;
  int64_t tuples_out = 0;
  int64_t flagged = 0;
  int64_t op_invocations = 0;
  int64_t constraint_invocations = 0;
};

struct RunRecord {
  std::string run_id;
  std::string query;
  std::string logical_plan;
  std::string physical_plan;
  std::string status = "running";  // running, completed, aborted, failed
  std::string error;
  std::string started_at;
  std::string finished_at;
  uint64_t seed = 0;
  std::string current_date;
  RunTotals totals;
  std::vector<StageCounts> stages;
  std::vector<std::string> warnings;
};

json to_json(const OpInvocationRecord& r);
json to_json(const ConstraintInvocationRecord& r);
json to_json(const LineageRecord& r);
json to_json(const RunRecord& r);
OpInvocationRecord op_invocation_from_json(const json& j);
ConstraintInvocationRecord constraint_invocation_from_json(const json& j);
LineageRecord lineage_from_json(const json& j);
RunRecord run_from_json(const json& j);

/// Snapshot of one text: at most 4 KiB plus a hash of the full content.
json snapshot_text(const std::string& text);

std::string utc_now_iso8601();

/// Appends records for one run. Safe for concurrent producers; ids are
/// assigned in append order and are monotone per relation.
class RunWriter {
 public:
  /// Creates `<root>/<run_id>`; kConflict when it already exists.
  RunWriter(const std::string& root, const std::string& run_id);

  const std::string& run_id() const { return run_id_; }
  const std::string& dir() const { return dir_; }

  int64_t append(OpInvocationRecord r);
  int64_t append(ConstraintInvocationRecord r);
  void append(const LineageRecord& r);
  void write_results(const std::string& jsonl);
  /// Atomically replaces run.json.
  void write_run(const RunRecord& r);
  void flush();

  int64_t op_count() const;
  int64_t constraint_count() const;

 private:
  std::string run_id_;
  std::string dir_;
  mutable std::mutex mu_;
  std::ofstream ops_;
  std::ofstream constraints_;
  std::ofstream lineage_;
  int64_t next_op_ = 1;
  int64_t next_constraint_ = 1;
};

struct Rate {
  std::optional<double> value;  // undefined on a zero denominator
  int64_t numerator = 0;
  int64_t denominator = 0;
};

struct ConstraintMetrics {
  std::string constraint_id;
  std::string op_id;
  std::string impl;
  bool stochastic = false;
  int64_t invocations = 0;
  int64_t first_attempts = 0;
  Rate selectivity;
  Rate precision;
  Rate recall;
  int64_t labeled = 0;
  double mean_confidence = 0.0;
  double cost = 0.0;
};

struct OperatorMetrics {
  std::string op_id;
  int64_t invocations = 0;
  int64_t tuples = 0;
  double cost = 0.0;
  /// Fraction of final outputs that passed every check.
  std::optional<double> reliability;
};

struct RunMetrics {
  std::string run_id;
  double cost = 0.0;
  std::vector<ConstraintMetrics> constraints;
  std::vector<OperatorMetrics> operators;
};

json to_json(const RunMetrics& m);

/// Confusion counts with violation as the positive class.
struct Confusion {
  int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  Rate precision() const;
  Rate recall() const;
};
Confusion confusion(const std::vector<ConstraintInvocationRecord>& labeled);

struct LabelTask {
  ConstraintInvocationRecord record;
  std::string key;  // <run_id>:<invocation_id>
};

/// Read side over a runs directory. Metrics read only stored files.
class RunStore {
 public:
  explicit RunStore(std::string root);

  std::vector<RunRecord> list_runs() const;
  RunRecord run(const std::string& run_id) const;
  std::vector<OpInvocationRecord> op_invocations(const std::string& run_id) const;
  /// With labels merged in.
  std::vector<ConstraintInvocationRecord> constraint_invocations(const std::string& run_id) const;
  std::vector<LineageRecord> lineage(const std::string& run_id) const;
  /// Results rows as JSON objects; empty when the run wrote none.
  std::vector<json> results(const std::string& run_id) const;

  /// First-attempt pass rate; kNotFound ("no data") without invocations.
  double selectivity(const std::string& run_id, const std::string& constraint_id) const;
  RunMetrics metrics(const std::string& run_id) const;

  std::vector<json> flagged_tuples(const std::string& run_id) const;
  /// {tuple_id, op_id?, invocations: [...], parents: [subtree...]}.
  json lineage_tree(const std::string& run_id, int64_t tuple_id) const;
  /// Run holding the tuple id when it is unique across runs.
  std::string find_run_for_tuple(int64_t tuple_id) const;

  /// Unlabeled stochastic records in invocation order.
  std::vector<LabelTask> label_queue(const std::string& run_id = "", const std::string& constraint_id = "") const;
  /// Write-once. kNotFound for an unknown record, kConflict on relabeling,
  /// kInvalidArgument for deterministic records.
  void submit_label(const std::string& run_id, int64_t invocation_id, bool holds);

  const std::string& root() const { return root_; }

 private:
  std::string run_dir(const std::string& run_id) const;
  std::map<int64_t, bool> labels(const std::string& run_id) const;

  std::string root_;
  mutable std::mutex label_mu_;
};

/// Splits "<run_id>:<n>"; a bare number yields an empty run id.
std::pair<std::string, int64_t> parse_record_key(const std::string& key);

}  // namespace sicql::obs
