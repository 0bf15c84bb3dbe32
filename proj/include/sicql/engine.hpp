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

// Plan execution with retry-with-feedback enforcement, failure modes and
// lineage recording.

#pragma once

#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "sicql/decoding.hpp"
#include "sicql/embedding.hpp"
#include "sicql/model.hpp"
#include "sicql/observability.hpp"
#include "sicql/physical.hpp"
#include "sicql/relation.hpp"

namespace sicql::engine {

struct EngineConfig {
  physical::PlanDefaults defaults;
  Date current_date;
  uint64_t seed = 0;
  /// Tuples of one stage run on this many threads.
  int workers = 1;
  bool normalize_whitespace_grounding = false;
  size_t exemplar_capacity = 256;
  size_t exemplars_per_retry = 2;
  automata::Segmenter segmenter;
  automata::GuardPolicy stream_policy = automata::GuardPolicy::kBacktrack;
  /// Soft constraints never escalate beyond CONTINUE.
  std::set<std::string> soft_constraints;
};

struct Exemplar {
  std::string op_id;
  std::string prompt;
  std::string output;
  double similarity = 0.0;
};

/// Accepted (prompt, output) pairs per operator, nearest-neighbour by cosine
/// over bag-of-words prompt embeddings, least-recently-used eviction.
class ExemplarCache {
 public:
  explicit ExemplarCache(size_t capacity = 256) : capacity_(capacity) {}

  void add(const std::string& op_id, const std::string& prompt, const std::string& output);
  /// Up to k exemplars of `op_id` with positive similarity, most similar
  /// first, excluding an identical prompt. Hits refresh recency.
  std::vector<Exemplar> nearest(const std::string& op_id, const std::string& prompt, size_t k);
  size_t size() const;

 private:
  struct Entry {
    std::string op_id;
    std::string prompt;
    std::string output;
    Embedding vec;
  };
  size_t capacity_;
  mutable std::mutex mu_;
  std::list<Entry> entries_;  // most recent first
};

/// Prompt raw text with each {attr} replaced by the value's text.
std::string render_prompt(const lang::PromptTemplate& tmpl, const Row& row);

/// Retry suffix: "Previous output: ...\nViolated constraint: ...\nReason: ...".
std::string feedback_block(const std::string& previous_output, const std::string& constraint, const std::string& reason);

struct RunOutcome {
  std::string status = "completed";  // completed, aborted, failed
  std::string error;
  Relation output;
  std::vector<obs::StageCounts> stages;
  obs::RunTotals totals;
};

class Engine {
 public:
  /// `cache` may be shared across runs; a private one is used when null.
  Engine(model::ModelClient& client, EngineConfig config, ExemplarCache* cache = nullptr);

  /// Scan tables are looked up in `datasets` by name. Records go to `sink`
  /// when given. Errors other than aborts are reported as status "failed".
  RunOutcome execute(const physical::PhysicalPlan& plan, const std::map<std::string, Relation>& datasets,
                     obs::RunWriter* sink = nullptr);

  const EngineConfig& config() const { return config_; }

 private:
  model::ModelClient& client_;
  EngineConfig config_;
  std::unique_ptr<ExemplarCache> own_cache_;
  ExemplarCache* cache_;
};

/// Mask automaton for a proactive-mask implementation of `c` on `producer`
/// given the rendered operator inputs.
std::shared_ptr<const automata::CharAutomaton> build_mask(const lang::ConstraintDecl& c, const lang::Stage& producer,
                                                          const std::vector<std::string>& sources);

}  // namespace sicql::engine
