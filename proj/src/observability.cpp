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

#include "sicql/observability.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>

#include "sicql/error.hpp"
#include "sicql/model.hpp"
#include "sicql/relation.hpp"

namespace sicql::obs {

namespace fs = std::filesystem;

namespace {

constexpr size_t kSnapshotLimit = 4096;

std::vector<json> read_jsonl(const std::string& path) {
  std::vector<json> out;
  if (!fs::exists(path)) return out;
  std::istringstream in(read_text_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error&) {
      // A torn final line from an interrupted run is skipped.
    }
  }
  return out;
}

json rate_json(const Rate& r) {
  return {{"value", r.value ? json(*r.value) : json(nullptr)}, {"numerator", r.numerator}, {"denominator", r.denominator}};
}

Rate make_rate(int64_t num, int64_t den) {
  Rate r;
  r.numerator = num;
  r.denominator = den;
  if (den > 0) r.value = static_cast<double>(num) / static_cast<double>(den);
  return r;
}

void open_append(std::ofstream& f, const std::string& path) {
  f.open(path, std::ios::app | std::ios::binary);
  if (!f) throw Error(ErrorCode::kIo, "cannot open " + path);
}

}  // namespace

std::string utc_now_iso8601() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json snapshot_text(const std::string& text) {
  if (text.size() <= kSnapshotLimit) return text;
  size_t cut = kSnapshotLimit;
  while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
  char hash[24];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(model::content_hash({text})));
  return {{"truncated", text.substr(0, cut)}, {"length", text.size()}, {"hash", hash}};
}

json to_json(const OpInvocationRecord& r) {
  json j = {{"invocation_id", r.invocation_id}, {"run_id", r.run_id}, {"op_id", r.op_id},   {"kind", r.kind},
            {"tuple_id", r.tuple_id},           {"attempt", r.attempt}, {"prompt", snapshot_text(r.prompt)},
            {"output", snapshot_text(r.output)}, {"cost", r.cost},     {"status", r.status}, {"final", r.final}};
  if (!r.inputs.empty()) j["inputs"] = r.inputs;
  if (!r.disposition.empty()) j["disposition"] = r.disposition;
  return j;
}

json to_json(const ConstraintInvocationRecord& r) {
  return {{"invocation_id", r.invocation_id},
          {"run_id", r.run_id},
          {"constraint_id", r.constraint_id},
          {"op_id", r.op_id},
          {"tuple_id", r.tuple_id},
          {"attempt", r.attempt},
          {"input", r.input},
          {"predicted", r.predicted},
          {"confidence", r.confidence},
          {"true_label", r.true_label ? json(*r.true_label) : json(nullptr)},
          {"impl", r.impl},
          {"stochastic", r.stochastic},
          {"mode", r.mode},
          {"constraint", r.constraint_text},
          {"description", r.description},
          {"feedback", r.feedback},
          {"cost", r.cost}};
}

json to_json(const LineageRecord& r) { return {{"child", r.child}, {"parent", r.parent}, {"op_id", r.op_id}}; }

json to_json(const RunRecord& r) {
  json stages = json::array();
  for (const auto& s : r.stages)
    stages.push_back({{"op_id", s.op_id},
                      {"kind", s.kind},
                      {"in", s.in},
                      {"out", s.out},
                      {"filtered", s.filtered},
                      {"ignored", s.ignored},
                      {"merged", s.merged},
                      {"aborted_discarded", s.aborted_discarded}});
  return {{"run_id", r.run_id},
          {"query", r.query},
          {"logical_plan", r.logical_plan},
          {"physical_plan", r.physical_plan},
          {"status", r.status},
          {"error", r.error},
          {"started_at", r.started_at},
          {"finished_at", r.finished_at},
          {"seed", r.seed},
          {"current_date", r.current_date},
          {"totals",
           {{"cost", r.totals.cost},
            {"tuples_in", r.totals.tuples_in},
            {"tuples_out", r.totals.tuples_out},
            {"flagged", r.totals.flagged},
            {"op_invocations", r.totals.op_invocations},
            {"constraint_invocations", r.totals.constraint_invocations}}},
          {"stages", stages},
          {"warnings", r.warnings}};
}

namespace {

std::string text_of(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_object() && v.contains("truncated")) return v.at("truncated").get<std::string>();
  return "";
}

}  // namespace

OpInvocationRecord op_invocation_from_json(const json& j) {
  OpInvocationRecord r;
  r.invocation_id = j.value("invocation_id", int64_t{0});
  r.run_id = j.value("run_id", "");
  r.op_id = j.value("op_id", "");
  r.kind = j.value("kind", "");
  r.tuple_id = j.value("tuple_id", int64_t{0});
  r.inputs = j.value("inputs", std::vector<int64_t>{});
  r.attempt = j.value("attempt", 0);
  r.prompt = text_of(j.value("prompt", json()));
  r.output = text_of(j.value("output", json()));
  r.cost = j.value("cost", 0.0);
  r.status = j.value("status", "");
  r.final = j.value("final", false);
  r.disposition = j.value("disposition", "");
  return r;
}

ConstraintInvocationRecord constraint_invocation_from_json(const json& j) {
  ConstraintInvocationRecord r;
  r.invocation_id = j.value("invocation_id", int64_t{0});
  r.run_id = j.value("run_id", "");
  r.constraint_id = j.value("constraint_id", "");
  r.op_id = j.value("op_id", "");
  r.tuple_id = j.value("tuple_id", int64_t{0});
  r.attempt = j.value("attempt", 0);
  r.input = j.value("input", json::object());
  r.predicted = j.value("predicted", "");
  r.confidence = j.value("confidence", 1.0);
  if (j.contains("true_label") && j.at("true_label").is_boolean()) r.true_label = j.at("true_label").get<bool>();
  r.impl = j.value("impl", "");
  r.stochastic = j.value("stochastic", false);
  r.mode = j.value("mode", "");
  r.constraint_text = j.value("constraint", "");
  r.description = j.value("description", "");
  r.feedback = j.value("feedback", "");
  r.cost = j.value("cost", 0.0);
  return r;
}

LineageRecord lineage_from_json(const json& j) {
  return {j.value("child", int64_t{0}), j.value("parent", int64_t{0}), j.value("op_id", "")};
}

RunRecord run_from_json(const json& j) {
  RunRecord r;
  r.run_id = j.value("run_id", "");
  r.query = j.value("query", "");
  r.logical_plan = j.value("logical_plan", "");
  r.physical_plan = j.value("physical_plan", "");
  r.status = j.value("status", "");
  r.error = j.value("error", "");
  r.started_at = j.value("started_at", "");
  r.finished_at = j.value("finished_at", "");
  r.seed = j.value("seed", uint64_t{0});
  r.current_date = j.value("current_date", "");
  json t = j.value("totals", json::object());
  r.totals.cost = t.value("cost", 0.0);
  r.totals.tuples_in = t.value("tuples_in", int64_t{0});
  r.totals.tuples_out = t.value("tuples_out", int64_t{0});
  r.totals.flagged = t.value("flagged", int64_t{0});
  r.totals.op_invocations = t.value("op_invocations", int64_t{0});
  r.totals.constraint_invocations = t.value("constraint_invocations", int64_t{0});
  for (const auto& s : j.value("stages", json::array())) {
    StageCounts c;
    c.op_id = s.value("op_id", "");
    c.kind = s.value("kind", "");
    c.in = s.value("in", int64_t{0});
    c.out = s.value("out", int64_t{0});
    c.filtered = s.value("filtered", int64_t{0});
    c.ignored = s.value("ignored", int64_t{0});
    c.merged = s.value("merged", int64_t{0});
    c.aborted_discarded = s.value("aborted_discarded", int64_t{0});
    r.stages.push_back(c);
  }
  r.warnings = j.value("warnings", std::vector<std::string>{});
  return r;
}

// ---------------------------------------------------------------------------
// Writer

RunWriter::RunWriter(const std::string& root, const std::string& run_id) : run_id_(run_id) {
  if (run_id.empty() || run_id.find_first_of("/\\:") != std::string::npos || run_id == "." || run_id == "..")
    throw Error(ErrorCode::kInvalidArgument, "invalid run id '" + run_id + "'");
  fs::path dir = fs::path(root) / run_id;
  std::error_code ec;
  fs::create_directories(root, ec);
  if (!fs::create_directory(dir, ec)) {
    if (ec) throw Error(ErrorCode::kIo, "cannot create run directory " + dir.string() + ": " + ec.message());
    throw Error(ErrorCode::kConflict, "run directory already exists: " + dir.string());
  }
  dir_ = dir.string();
  open_append(ops_, (dir / "op_invocations.jsonl").string());
  open_append(constraints_, (dir / "constraint_invocations.jsonl").string());
  open_append(lineage_, (dir / "lineage.jsonl").string());
}

int64_t RunWriter::append(OpInvocationRecord r) {
  std::lock_guard<std::mutex> lock(mu_);
  r.invocation_id = next_op_++;
  r.run_id = run_id_;
  ops_ << to_json(r).dump() << '\n';
  return r.invocation_id;
}

int64_t RunWriter::append(ConstraintInvocationRecord r) {
  std::lock_guard<std::mutex> lock(mu_);
  r.invocation_id = next_constraint_++;
  r.run_id = run_id_;
  constraints_ << to_json(r).dump() << '\n';
  return r.invocation_id;
}

void RunWriter::append(const LineageRecord& r) {
  std::lock_guard<std::mutex> lock(mu_);
  lineage_ << to_json(r).dump() << '\n';
}

void RunWriter::write_results(const std::string& jsonl) {
  std::lock_guard<std::mutex> lock(mu_);
  write_text_file((fs::path(dir_) / "results.jsonl").string(), jsonl);
}

void RunWriter::write_run(const RunRecord& r) {
  std::lock_guard<std::mutex> lock(mu_);
  fs::path tmp = fs::path(dir_) / "run.json.tmp";
  write_text_file(tmp.string(), to_json(r).dump(2) + "\n");
  fs::rename(tmp, fs::path(dir_) / "run.json");
}

void RunWriter::flush() {
  std::lock_guard<std::mutex> lock(mu_);
  ops_.flush();
  constraints_.flush();
  lineage_.flush();
  if (!ops_ || !constraints_ || !lineage_) throw Error(ErrorCode::kIo, "failed to flush run records in " + dir_);
}

int64_t RunWriter::op_count() const {
  std::lock_guard<std::mutex> lock(mu_);
  return next_op_ - 1;
}

int64_t RunWriter::constraint_count() const {
  std::lock_guard<std::mutex> lock(mu_);
  return next_constraint_ - 1;
}

// ---------------------------------------------------------------------------
// Metrics

Rate Confusion::precision() const { return make_rate(tp, tp + fp); }
Rate Confusion::recall() const { return make_rate(tp, tp + fn); }

Confusion confusion(const std::vector<ConstraintInvocationRecord>& records) {
  Confusion c;
  for (const auto& r : records) {
    if (!r.true_label) continue;
    bool predicted_violation = r.predicted == "violation";
    bool actual_violation = !*r.true_label;
    if (predicted_violation && actual_violation) ++c.tp;
    if (predicted_violation && !actual_violation) ++c.fp;
    if (!predicted_violation && actual_violation) ++c.fn;
    if (!predicted_violation && !actual_violation) ++c.tn;
  }
  return c;
}

json to_json(const RunMetrics& m) {
  json cs = json::array();
  for (const auto& c : m.constraints)
    cs.push_back({{"constraint_id", c.constraint_id},
                  {"op_id", c.op_id},
                  {"impl", c.impl},
                  {"stochastic", c.stochastic},
                  {"invocations", c.invocations},
                  {"first_attempts", c.first_attempts},
                  {"selectivity", rate_json(c.selectivity)},
                  {"precision", rate_json(c.precision)},
                  {"recall", rate_json(c.recall)},
                  {"labeled", c.labeled},
                  {"mean_confidence", c.mean_confidence},
                  {"cost", c.cost}});
  json ops = json::array();
  for (const auto& o : m.operators)
    ops.push_back({{"op_id", o.op_id},
                   {"invocations", o.invocations},
                   {"tuples", o.tuples},
                   {"cost", o.cost},
                   {"reliability", o.reliability ? json(*o.reliability) : json(nullptr)}});
  return {{"run_id", m.run_id}, {"cost", m.cost}, {"constraints", cs}, {"operators", ops}};
}

// ---------------------------------------------------------------------------
// Reader

RunStore::RunStore(std::string root) : root_(std::move(root)) {}

std::string RunStore::run_dir(const std::string& run_id) const {
  if (run_id.empty() || run_id.find_first_of("/\\") != std::string::npos || run_id == "." || run_id == "..")
    throw Error(ErrorCode::kNotFound, "no run '" + run_id + "'");
  fs::path dir = fs::path(root_) / run_id;
  if (!fs::exists(dir / "run.json")) throw Error(ErrorCode::kNotFound, "no run '" + run_id + "'");
  return dir.string();
}

std::vector<RunRecord> RunStore::list_runs() const {
  std::vector<RunRecord> out;
  if (!fs::exists(root_)) return out;
  std::vector<std::string> ids;
  for (const auto& e : fs::directory_iterator(root_))
    if (e.is_directory() && fs::exists(e.path() / "run.json")) ids.push_back(e.path().filename().string());
  std::sort(ids.begin(), ids.end());
  for (const auto& id : ids) out.push_back(run(id));
  return out;
}

RunRecord RunStore::run(const std::string& run_id) const {
  std::string dir = run_dir(run_id);
  try {
    return run_from_json(json::parse(read_text_file(dir + "/run.json")));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kIo, "corrupt run.json for " + run_id + ": " + e.what());
  }
}

std::vector<OpInvocationRecord> RunStore::op_invocations(const std::string& run_id) const {
  std::vector<OpInvocationRecord> out;
  for (const auto& j : read_jsonl(run_dir(run_id) + "/op_invocations.jsonl")) out.push_back(op_invocation_from_json(j));
  return out;
}

std::map<int64_t, bool> RunStore::labels(const std::string& run_id) const {
  std::map<int64_t, bool> out;
  for (const auto& j : read_jsonl(run_dir(run_id) + "/labels.jsonl"))
    out.emplace(j.value("invocation_id", int64_t{0}), j.value("true_label", false));
  return out;
}

std::vector<ConstraintInvocationRecord> RunStore::constraint_invocations(const std::string& run_id) const {
  auto lab = labels(run_id);
  std::vector<ConstraintInvocationRecord> out;
  for (const auto& j : read_jsonl(run_dir(run_id) + "/constraint_invocations.jsonl")) {
    auto r = constraint_invocation_from_json(j);
    if (auto it = lab.find(r.invocation_id); it != lab.end()) r.true_label = it->second;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<LineageRecord> RunStore::lineage(const std::string& run_id) const {
  std::vector<LineageRecord> out;
  for (const auto& j : read_jsonl(run_dir(run_id) + "/lineage.jsonl")) out.push_back(lineage_from_json(j));
  return out;
}

std::vector<json> RunStore::results(const std::string& run_id) const {
  return read_jsonl(run_dir(run_id) + "/results.jsonl");
}

double RunStore::selectivity(const std::string& run_id, const std::string& constraint_id) const {
  int64_t pass = 0, total = 0;
  for (const auto& r : constraint_invocations(run_id)) {
    if (r.constraint_id != constraint_id || r.attempt != 0) continue;
    ++total;
    pass += r.predicted == "pass";
  }
  if (total == 0) throw Error(ErrorCode::kNotFound, "no data for constraint '" + constraint_id + "'");
  return static_cast<double>(pass) / static_cast<double>(total);
}

RunMetrics RunStore::metrics(const std::string& run_id) const {
  RunMetrics m;
  m.run_id = run_id;
  auto cis = constraint_invocations(run_id);
  std::vector<std::string> order;
  std::map<std::string, std::vector<ConstraintInvocationRecord>> by;
  for (auto& r : cis) {
    if (!by.count(r.constraint_id)) order.push_back(r.constraint_id);
    by[r.constraint_id].push_back(r);
  }
  for (const auto& id : order) {
    const auto& rs = by[id];
    ConstraintMetrics c;
    c.constraint_id = id;
    c.op_id = rs.front().op_id;
    c.impl = rs.front().impl;
    c.stochastic = rs.front().stochastic;
    int64_t first_pass = 0;
    double conf = 0.0;
    for (const auto& r : rs) {
      ++c.invocations;
      conf += r.confidence;
      c.cost += r.cost;
      if (r.attempt == 0) {
        ++c.first_attempts;
        first_pass += r.predicted == "pass";
      }
      c.labeled += r.true_label.has_value();
    }
    c.mean_confidence = conf / static_cast<double>(rs.size());
    c.selectivity = make_rate(first_pass, c.first_attempts);
    Confusion cm = confusion(rs);
    c.precision = cm.precision();
    c.recall = cm.recall();
    m.cost += c.cost;
    m.constraints.push_back(std::move(c));
  }
  std::vector<std::string> op_order;
  std::map<std::string, OperatorMetrics> ops;
  std::map<std::string, std::pair<int64_t, int64_t>> clean;  // passed, judged
  for (const auto& r : op_invocations(run_id)) {
    if (!ops.count(r.op_id)) {
      op_order.push_back(r.op_id);
      ops[r.op_id].op_id = r.op_id;
    }
    auto& o = ops[r.op_id];
    if (r.status != "skipped") ++o.invocations;
    o.cost += r.cost;
    if (r.final) {
      ++o.tuples;
      if (r.disposition == "kept") ++clean[r.op_id].first;
      if (r.disposition != "filtered") ++clean[r.op_id].second;
    }
    m.cost += r.cost;
  }
  for (const auto& id : op_order) {
    auto o = ops[id];
    auto [good, all] = clean[id];
    if (all > 0) o.reliability = static_cast<double>(good) / static_cast<double>(all);
    m.operators.push_back(o);
  }
  return m;
}

std::vector<json> RunStore::flagged_tuples(const std::string& run_id) const {
  std::vector<json> out;
  for (auto& row : results(run_id))
    if (!row.value("_flags", json::array()).empty()) out.push_back(row);
  return out;
}

json RunStore::lineage_tree(const std::string& run_id, int64_t tuple_id) const {
  auto edges = lineage(run_id);
  auto ops = op_invocations(run_id);
  std::set<int64_t> known;
  for (const auto& o : ops) known.insert(o.tuple_id);
  for (const auto& e : edges) {
    known.insert(e.child);
    known.insert(e.parent);
  }
  if (!known.count(tuple_id))
    throw Error(ErrorCode::kNotFound, "no tuple " + std::to_string(tuple_id) + " in run '" + run_id + "'");
  std::map<int64_t, std::vector<const LineageRecord*>> parents;
  for (const auto& e : edges) parents[e.child].push_back(&e);
  std::set<int64_t> visiting;
  std::function<json(int64_t, const std::string&)> build = [&](int64_t id, const std::string& via) {
    json node = {{"tuple_id", id}, {"invocations", json::array()}, {"parents", json::array()}};
    if (!via.empty()) node["op_id"] = via;
    for (const auto& o : ops)
      if (o.tuple_id == id && o.final)
        node["invocations"].push_back({{"op_id", o.op_id},
                                       {"kind", o.kind},
                                       {"invocation_id", o.invocation_id},
                                       {"attempt", o.attempt},
                                       {"disposition", o.disposition}});
    if (!visiting.insert(id).second) return node;
    for (const auto* e : parents[id]) node["parents"].push_back(build(e->parent, e->op_id));
    visiting.erase(id);
    return node;
  };
  return build(tuple_id, "");
}

std::string RunStore::find_run_for_tuple(int64_t tuple_id) const {
  std::string found;
  for (const auto& r : list_runs()) {
    for (const auto& o : op_invocations(r.run_id)) {
      if (o.tuple_id != tuple_id) continue;
      if (!found.empty())
        throw Error(ErrorCode::kInvalidArgument,
                    "tuple " + std::to_string(tuple_id) + " exists in several runs; pass run=<id>");
      found = r.run_id;
      break;
    }
  }
  if (found.empty()) throw Error(ErrorCode::kNotFound, "no tuple " + std::to_string(tuple_id));
  return found;
}

std::vector<LabelTask> RunStore::label_queue(const std::string& run_id, const std::string& constraint_id) const {
  std::vector<LabelTask> out;
  std::vector<std::string> runs;
  if (!run_id.empty()) {
    run_dir(run_id);
    runs.push_back(run_id);
  } else {
    for (const auto& r : list_runs()) runs.push_back(r.run_id);
  }
  for (const auto& id : runs)
    for (auto& r : constraint_invocations(id)) {
      if (!r.stochastic || r.true_label) continue;
      if (!constraint_id.empty() && r.constraint_id != constraint_id) continue;
      std::string key = id + ":" + std::to_string(r.invocation_id);
      out.push_back({std::move(r), key});
    }
  return out;
}

void RunStore::submit_label(const std::string& run_id, int64_t invocation_id, bool holds) {
  std::lock_guard<std::mutex> lock(label_mu_);
  std::string dir = run_dir(run_id);
  const ConstraintInvocationRecord* target = nullptr;
  auto records = constraint_invocations(run_id);
  for (const auto& r : records)
    if (r.invocation_id == invocation_id) target = &r;
  if (!target)
    throw Error(ErrorCode::kNotFound,
                "no constraint invocation " + std::to_string(invocation_id) + " in run '" + run_id + "'");
  if (!target->stochastic)
    throw Error(ErrorCode::kInvalidArgument, "invocation " + std::to_string(invocation_id) +
                                                 " used a deterministic implementation and cannot be labeled");
  if (target->true_label)
    throw Error(ErrorCode::kConflict, "invocation " + std::to_string(invocation_id) + " is already labeled");
  std::ofstream f(dir + "/labels.jsonl", std::ios::app | std::ios::binary);
  if (!f) throw Error(ErrorCode::kIo, "cannot append labels in " + dir);
  f << json{{"invocation_id", invocation_id}, {"true_label", holds}, {"labeled_at", utc_now_iso8601()}}.dump() << '\n';
  f.flush();
  if (!f) throw Error(ErrorCode::kIo, "cannot append labels in " + dir);
}

std::pair<std::string, int64_t> parse_record_key(const std::string& key) {
  size_t colon = key.rfind(':');
  std::string run = colon == std::string::npos ? "" : key.substr(0, colon);
  std::string num = colon == std::string::npos ? key : key.substr(colon + 1);
  try {
    size_t used = 0;
    int64_t n = std::stoll(num, &used);
    if (used != num.size()) throw std::invalid_argument(num);
    return {run, n};
  } catch (const std::exception&) {
    throw Error(ErrorCode::kInvalidArgument, "bad record id '" + key + "'");
  }
}

}  // namespace sicql::obs
