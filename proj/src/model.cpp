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
#include <cmath>
#include <random>
#include <set>

#include "json.hpp"
#include "sicql/error.hpp"
#include "sicql/eval.hpp"
#include "sicql/model.hpp"

namespace sicql::model {

using json = nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Lowercased with whitespace runs collapsed to one space and trimmed.
std::string normalize(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : trim(s)) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = true;
      continue;
    }
    if (space && !out.empty()) out += ' ';
    space = false;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  size_t index(size_t n) { return static_cast<size_t>(gen_() % n); }

 private:
  std::mt19937_64 gen_;
};

std::string substitute(const std::string& tmpl, const std::map<std::string, std::string>& inputs) {
  std::string out;
  for (size_t i = 0; i < tmpl.size();) {
    if (tmpl[i] == '{') {
      size_t close = tmpl.find('}', i + 1);
      if (close != std::string::npos) {
        auto it = inputs.find(tmpl.substr(i + 1, close - i - 1));
        if (it != inputs.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += tmpl[i++];
  }
  return out;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void reject_unknown(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
  if (!obj.is_object()) throw Error(ErrorCode::kInvalidArgument, where + " must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known |= it.key() == k;
    if (!known) throw Error(ErrorCode::kInvalidArgument, "unknown key '" + it.key() + "' in " + where);
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::kInvalidArgument, std::string("bad value for '") + key + "' in " + where);
  }
}

void check_unit(double v, const std::string& what) {
  if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::kInvalidArgument, what + " must be in [0, 1]");
}

}  // namespace

uint64_t content_hash(std::initializer_list<std::string_view> parts) {
  uint64_t h = 1469598103934665603ull;
  for (auto part : parts) {
    for (unsigned char c : part) {
      h ^= c;
      h *= 1099511628211ull;
    }
    h ^= 0xff;
    h *= 1099511628211ull;
  }
  return h;
}

std::optional<Cot> parse_cot(std::string_view text, std::string* reason) {
  auto fail = [&](const std::string& why) -> std::optional<Cot> {
    if (reason) *reason = why;
    return std::nullopt;
  };
  enum { kBefore, kPremises, kSteps, kDone } section = kBefore;
  Cot cot;
  bool answered = false;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    if (line.empty()) continue;
    std::string up = lower(line);
    if (up == "premises:") {
      if (section != kBefore) return fail("PREMISES header repeated or out of order");
      section = kPremises;
    } else if (up == "steps:") {
      if (section != kPremises) return fail("STEPS header before PREMISES");
      section = kSteps;
    } else if (up.rfind("answer:", 0) == 0) {
      if (section != kSteps) return fail("ANSWER before STEPS");
      std::string v = std::string(trim(std::string_view(up).substr(7)));
      if (v == "true") {
        cot.answer = true;
      } else if (v == "false") {
        cot.answer = false;
      } else {
        return fail("ANSWER must be true or false, got '" + v + "'");
      }
      answered = true;
      section = kDone;
    } else if (line.front() == '-' && (section == kPremises || section == kSteps)) {
      std::string item(trim(line.substr(1)));
      (section == kPremises ? cot.premises : cot.steps).push_back(item);
    } else if (section == kBefore) {
      continue;
    } else {
      return fail("unexpected line '" + std::string(line) + "'");
    }
  }
  if (section == kBefore) return fail("missing PREMISES header");
  if (!answered) return fail(section == kPremises ? "missing STEPS header" : "missing ANSWER line");
  return cot;
}

std::string format_cot(const Cot& cot) {
  std::string out = "PREMISES:\n";
  for (const auto& p : cot.premises) out += "- " + p + "\n";
  out += "STEPS:\n";
  for (const auto& s : cot.steps) out += "- " + s + "\n";
  out += std::string("ANSWER: ") + (cot.answer ? "true" : "false");
  return out;
}

const char* judge_mode_name(JudgeMode m) {
  switch (m) {
    case JudgeMode::kFactCheck: return "fact-check";
    case JudgeMode::kRelevance: return "relevance";
    case JudgeMode::kSoundnessSteps: return "soundness-steps";
    case JudgeMode::kSemanticMatch: return "semantic-match";
  }
  return "fact-check";
}

std::optional<JudgeMode> judge_mode_from_name(std::string_view name) {
  for (auto m : {JudgeMode::kFactCheck, JudgeMode::kRelevance, JudgeMode::kSoundnessSteps, JudgeMode::kSemanticMatch})
    if (name == judge_mode_name(m)) return m;
  return std::nullopt;
}

std::vector<std::string> tokenize(std::string_view text, Tokenizer kind) {
  std::vector<std::string> out;
  if (kind == Tokenizer::kChar) {
    for (char c : text) out.emplace_back(1, c);
    return out;
  }
  size_t i = 0;
  while (i < text.size()) {
    size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    while (j < text.size() && std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Script files

FakeModelScript parse_fake_script(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("fake model script is not valid JSON: ") + e.what());
  }
  reject_unknown(doc, {"seed", "tokenizer", "complete_cost", "noise_tokens", "rules", "judges"}, "fake model script");
  FakeModelScript s;
  s.seed = get_or<uint64_t>(doc, "seed", 0, "script");
  std::string tok = get_or<std::string>(doc, "tokenizer", "whitespace", "script");
  if (tok == "char") {
    s.tokenizer = Tokenizer::kChar;
  } else if (tok == "whitespace") {
    s.tokenizer = Tokenizer::kWhitespace;
  } else {
    throw Error(ErrorCode::kInvalidArgument, "tokenizer must be char or whitespace");
  }
  s.complete_cost = get_or<double>(doc, "complete_cost", 1.0, "script");
  s.noise_tokens = get_or<std::vector<std::string>>(doc, "noise_tokens", s.noise_tokens, "script");
  for (const auto& t : s.noise_tokens)
    if (t.empty()) throw Error(ErrorCode::kInvalidArgument, "noise tokens must be non-empty");
  for (const auto& r : doc.value("rules", json::array())) {
    reject_unknown(r, {"pattern", "responses", "response", "copy", "noise", "cost"}, "rule");
    FakeRule rule;
    rule.pattern = get_or<std::string>(r, "pattern", "", "rule");
    if (r.contains("response")) rule.responses.push_back(get_or<std::string>(r, "response", "", "rule"));
    auto more = get_or<std::vector<std::string>>(r, "responses", {}, "rule");
    rule.responses.insert(rule.responses.end(), more.begin(), more.end());
    if (r.contains("copy")) {
      const json& c = r.at("copy");
      reject_unknown(c, {"field", "after", "until"}, "copy");
      CopySpec cs;
      cs.field = get_or<std::string>(c, "field", "", "copy");
      cs.after = get_or<std::string>(c, "after", "", "copy");
      cs.until = get_or<std::string>(c, "until", "", "copy");
      if (cs.field.empty()) throw Error(ErrorCode::kInvalidArgument, "copy needs a field");
      rule.copy = cs;
    }
    if (rule.responses.empty() && !rule.copy)
      throw Error(ErrorCode::kInvalidArgument, "rule '" + rule.pattern + "' has neither responses nor copy");
    rule.noise = get_or<double>(r, "noise", 0.0, "rule");
    check_unit(rule.noise, "noise");
    if (r.contains("cost")) rule.cost = get_or<double>(r, "cost", 0.0, "rule");
    s.rules.push_back(std::move(rule));
  }
  if (doc.contains("judges")) {
    s.judges.clear();
    for (const auto& j : doc.at("judges")) {
      reject_unknown(j, {"name", "flip_prob", "cost", "margin", "default_verdict", "precision", "recall", "rules"},
                     "judge");
      FakeJudge fj;
      fj.name = get_or<std::string>(j, "name", fj.name, "judge");
      fj.flip_prob = get_or<double>(j, "flip_prob", 0.0, "judge");
      fj.cost = get_or<double>(j, "cost", fj.cost, "judge");
      fj.margin = get_or<double>(j, "margin", fj.margin, "judge");
      fj.default_verdict = get_or<bool>(j, "default_verdict", true, "judge");
      fj.precision = get_or<double>(j, "precision", fj.precision, "judge");
      fj.recall = get_or<double>(j, "recall", fj.recall, "judge");
      for (double v : {fj.flip_prob, fj.precision, fj.recall}) check_unit(v, "judge '" + fj.name + "' probability");
      for (const auto& r : j.value("rules", json::array())) {
        reject_unknown(r, {"mode", "field", "pattern", "contained", "verdict", "margin", "rationale"}, "judge rule");
        JudgeRule jr;
        if (r.contains("mode")) {
          auto m = judge_mode_from_name(get_or<std::string>(r, "mode", "", "judge rule"));
          if (!m) throw Error(ErrorCode::kInvalidArgument, "unknown judge mode in judge rule");
          jr.mode = m;
        }
        jr.field = get_or<std::string>(r, "field", "output", "judge rule");
        if (jr.field != "output" && jr.field != "input" && jr.field != "task")
          throw Error(ErrorCode::kInvalidArgument, "judge rule field must be output, input or task");
        jr.pattern = get_or<std::string>(r, "pattern", "", "judge rule");
        jr.contained = get_or<bool>(r, "contained", false, "judge rule");
        jr.verdict = get_or<bool>(r, "verdict", true, "judge rule");
        if (r.contains("margin")) jr.margin = get_or<double>(r, "margin", 0.0, "judge rule");
        jr.rationale = get_or<std::string>(r, "rationale", "", "judge rule");
        fj.rules.push_back(std::move(jr));
      }
      s.judges.push_back(std::move(fj));
    }
    if (s.judges.empty()) throw Error(ErrorCode::kInvalidArgument, "judges must not be empty when given");
  }
  return s;
}

std::string fake_script_to_json(const FakeModelScript& s) {
  json doc;
  doc["seed"] = s.seed;
  doc["tokenizer"] = s.tokenizer == Tokenizer::kChar ? "char" : "whitespace";
  doc["complete_cost"] = s.complete_cost;
  doc["noise_tokens"] = s.noise_tokens;
  doc["rules"] = json::array();
  for (const auto& r : s.rules) {
    json o;
    o["pattern"] = r.pattern;
    if (!r.responses.empty()) o["responses"] = r.responses;
    if (r.copy) o["copy"] = {{"field", r.copy->field}, {"after", r.copy->after}, {"until", r.copy->until}};
    if (r.noise > 0) o["noise"] = r.noise;
    if (r.cost) o["cost"] = *r.cost;
    doc["rules"].push_back(o);
  }
  doc["judges"] = json::array();
  for (const auto& j : s.judges) {
    json o = {{"name", j.name},           {"flip_prob", j.flip_prob}, {"cost", j.cost},
              {"margin", j.margin},       {"default_verdict", j.default_verdict},
              {"precision", j.precision}, {"recall", j.recall},       {"rules", json::array()}};
    for (const auto& r : j.rules) {
      json ro = {{"field", r.field}, {"pattern", r.pattern}, {"verdict", r.verdict}};
      if (r.mode) ro["mode"] = judge_mode_name(*r.mode);
      if (r.contained) ro["contained"] = true;
      if (r.margin) ro["margin"] = *r.margin;
      if (!r.rationale.empty()) ro["rationale"] = r.rationale;
      o["rules"].push_back(ro);
    }
    doc["judges"].push_back(o);
  }
  return doc.dump(2);
}

// ---------------------------------------------------------------------------
// Fake model

FakeModel::FakeModel(FakeModelScript script) : script_(std::move(script)) {
  for (const auto& r : script_.rules) automata::RegexDfa::compile(r.pattern);
  for (const auto& j : script_.judges)
    for (const auto& r : j.rules) automata::RegexDfa::compile(r.pattern);
}

const FakeRule& FakeModel::match(const std::string& prompt) const {
  for (const auto& r : script_.rules)
    if (regex_contains(prompt, r.pattern)) return r;
  std::string shown = prompt.size() > 120 ? prompt.substr(0, 120) + "..." : prompt;
  throw Error(ErrorCode::kModel, "fake model: no rule matches prompt '" + shown + "'");
}

std::string FakeModel::target_text(const FakeRule& rule, const ModelRequest& request) const {
  if (!rule.responses.empty()) {
    size_t k = std::min(static_cast<size_t>(std::max(request.attempt, 0)), rule.responses.size() - 1);
    return substitute(rule.responses[k], request.inputs);
  }
  auto it = request.inputs.find(rule.copy->field);
  if (it == request.inputs.end())
    throw Error(ErrorCode::kModel, "fake model: copy field '" + rule.copy->field + "' is not a prompt input");
  const std::string& src = it->second;
  size_t begin = 0;
  if (!rule.copy->after.empty()) {
    size_t at = src.find(rule.copy->after);
    if (at == std::string::npos) return "";
    begin = at + rule.copy->after.size();
  }
  size_t end = src.size();
  if (!rule.copy->until.empty()) {
    size_t at = src.find(rule.copy->until, begin);
    if (at != std::string::npos) end = at;
  }
  return src.substr(begin, end - begin);
}

ModelResponse FakeModel::complete(const ModelRequest& request) {
  const FakeRule& rule = match(request.prompt);
  std::string target = target_text(rule, request);
  std::vector<std::string> plan = tokenize(target, script_.tokenizer);
  Rng rng(content_hash({std::to_string(script_.seed), std::to_string(request.seed), request.op_id, request.prompt,
                        std::to_string(request.attempt)}));

  std::vector<std::string> fallback;
  std::optional<automata::MaskState> mask;
  if (request.mask) {
    mask.emplace(request.mask);
    std::set<std::string> seen;
    auto add = [&](const std::string& t) {
      if (!t.empty() && seen.insert(t).second) fallback.push_back(t);
    };
    for (const auto& t : plan) add(t);
    for (const auto& [name, value] : request.inputs)
      for (const auto& t : tokenize(value, script_.tokenizer)) add(t);
    for (int c = 0x20; c < 0x7f; ++c) add(std::string(1, static_cast<char>(c)));
  }

  ModelResponse resp;
  std::string text;
  std::vector<bool> advanced;  // per emitted token: whether it consumed a plan token
  std::set<std::pair<size_t, std::string>> banned;
  const size_t max_steps = 4 * plan.size() + 64;
  const int max_backtracks = 32;
  size_t i = 0;
  for (size_t step = 0; step < max_steps; ++step) {
    std::vector<const std::string*> proposals;
    static const std::string kEnd;
    if (i < plan.size()) {
      if (rule.noise > 0 && rng.uniform() < rule.noise)
        proposals.push_back(&script_.noise_tokens[rng.index(script_.noise_tokens.size())]);
      proposals.push_back(&plan[i]);
    }
    proposals.push_back(&kEnd);
    if (mask)
      for (const auto& t : fallback) proposals.push_back(&t);

    const std::string* chosen = nullptr;
    bool stop = false;
    for (const std::string* p : proposals) {
      if (p == &kEnd) {
        if (i >= plan.size() || mask) {
          if (!mask || mask->accepting()) {
            stop = true;
            break;
          }
        }
        continue;
      }
      if (banned.count({text.size(), *p})) continue;
      if (!mask || mask->allowed(*p)) {
        chosen = p;
        break;
      }
    }
    if (stop) break;
    if (!chosen) {
      if (resp.mask_backtracks >= max_backtracks || resp.tokens.empty()) {
        resp.mask_exhausted = true;
        break;
      }
      ++resp.mask_backtracks;
      std::string last = resp.tokens.back();
      resp.tokens.pop_back();
      mask->pop_token();
      text.resize(text.size() - last.size());
      if (advanced.back()) --i;
      advanced.pop_back();
      banned.insert({text.size(), last});
      continue;
    }
    if (mask) mask->try_emit(*chosen);
    bool consumes = i < plan.size() && chosen == &plan[i];
    if (!consumes && i < plan.size() && *chosen == plan[i]) consumes = true;
    advanced.push_back(consumes);
    if (consumes) ++i;
    resp.tokens.push_back(*chosen);
    text += *chosen;
    if (mask && mask->prefix().size() != text.size()) throw Error(ErrorCode::kInternal, "mask prefix out of sync");
  }
  if (mask && !resp.mask_exhausted && !mask->accepting()) resp.mask_exhausted = true;
  if (resp.mask_exhausted) text.clear();

  if (request.guard) {
    for (const auto& t : resp.tokens)
      if (!request.guard->feed(t)) break;
    resp.guard_outcome = request.guard->finish();
    resp.guard_backtracks = request.guard->backtracks();
    text = request.guard->failed() ? request.guard->output() : request.guard->committed();
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.pop_back();
  }

  resp.text = text;
  resp.cost = rule.cost.value_or(script_.complete_cost);
  if (request.contract == Contract::kBooleanCot) resp.cot = parse_cot(resp.text);
  return resp;
}

JudgeVerdict FakeModel::judge(const JudgeRequest& request) {
  const FakeJudge* judge = nullptr;
  for (const auto& j : script_.judges)
    if (j.name == request.judge) judge = &j;
  if (!judge) throw Error(ErrorCode::kModel, "fake model: no judge named '" + request.judge + "'");

  JudgeVerdict v;
  v.cost = judge->cost;
  double margin = judge->margin;
  bool decided = false;
  for (const auto& r : judge->rules) {
    if (r.mode && *r.mode != request.mode) continue;
    const std::string& field = r.field == "input" ? request.input : r.field == "task" ? request.task : request.output;
    if (!regex_contains(field, r.pattern)) continue;
    v.yes = r.contained ? normalize(request.input).find(normalize(request.output)) != std::string::npos : r.verdict;
    if (r.margin) margin = *r.margin;
    v.rationale = r.rationale.empty() ? std::string("rule '") + r.pattern + "' matched" : r.rationale;
    decided = true;
    break;
  }
  if (!decided) {
    if (request.mode == JudgeMode::kSemanticMatch) {
      v.yes = normalize(request.output).find(normalize(request.task)) != std::string::npos;
      v.rationale = v.yes ? "the output mentions '" + request.task + "'" : "no mention of '" + request.task + "'";
    } else {
      v.yes = judge->default_verdict;
      v.rationale = "default verdict";
    }
  }
  if (judge->flip_prob > 0) {
    Rng rng(content_hash({std::to_string(script_.seed), std::to_string(request.seed), judge->name,
                          judge_mode_name(request.mode), request.task, request.input, request.output}));
    if (rng.uniform() < judge->flip_prob) v.yes = !v.yes;
  }
  v.confidence = logistic(std::fabs(margin));
  return v;
}

std::vector<physical::JudgeSpec> FakeModel::judges() const {
  std::vector<physical::JudgeSpec> out;
  for (const auto& j : script_.judges) {
    physical::JudgeSpec s;
    s.name = j.name;
    s.cost = j.cost;
    s.precision = j.precision;
    s.recall = j.recall;
    s.confidence_capable = true;
    s.confidence = logistic(std::fabs(j.margin));
    out.push_back(s);
  }
  return out;
}

}  // namespace sicql::model
