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

// sicql command line: run, explain, serve, store.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "httplib.h"
#include "json.hpp"
#include "sicql/sicql.h"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kExitError = 1;

struct Common {
  std::string config_path;
  std::string profile;
  std::string run_dir;
  std::string store;
  std::string script;
  std::string current_date;
  int64_t seed = -1;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct EngineDeleter {
  void operator()(sicql_engine* e) const { sicql_engine_destroy(e); }
};
using EnginePtr = std::unique_ptr<sicql_engine, EngineDeleter>;

struct CString {
  char* p = nullptr;
  ~CString() { sicql_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

[[noreturn]] void fail(sicql_status s) {
  throw std::runtime_error(std::string(sicql_status_name(s)) + ": " + sicql_last_error());
}

// Config file values, then flags. Flag paths are relative to the working
// directory, so they are made absolute before merging.
EnginePtr open_engine(const Common& c) {
  json cfg = json::object();
  std::string base;
  if (!c.config_path.empty()) {
    cfg = json::parse(read_file(c.config_path));
    base = fs::absolute(c.config_path).parent_path().string();
  }
  auto abs = [](const std::string& p) { return fs::absolute(p).lexically_normal().string(); };
  if (!c.profile.empty()) cfg["profile"] = abs(c.profile);
  if (!c.run_dir.empty()) cfg["run_dir"] = abs(c.run_dir);
  if (!c.store.empty()) cfg["store"] = abs(c.store);
  if (!c.script.empty()) {
    cfg["model"]["kind"] = "fake";
    cfg["model"]["script"] = abs(c.script);
  }
  if (!c.current_date.empty()) cfg["current_date"] = c.current_date;
  if (c.seed >= 0) cfg["seed"] = c.seed;
  sicql_engine* e = nullptr;
  sicql_status s = sicql_engine_create(cfg.dump().c_str(), base.empty() ? nullptr : base.c_str(), &e);
  if (s != SICQL_OK) fail(s);
  return EnginePtr(e);
}

void add_common(CLI::App* app, Common& c, bool planning) {
  app->add_option("-c,--config", c.config_path, "JSON config file")->check(CLI::ExistingFile);
  app->add_option("--run-dir", c.run_dir, "Runs directory");
  app->add_option("--store", c.store, "Constraint store file (JSONL)");
  if (planning) {
    app->add_option("-p,--profile", c.profile, "Cost and reliability profile (JSON)")->check(CLI::ExistingFile);
    app->add_option("--script", c.script, "Fake model script (JSON)")->check(CLI::ExistingFile);
    app->add_option("--current-date", c.current_date, "Value of CURRENT_DATE (YYYY-MM-DD)");
    app->add_option("-s,--seed", c.seed, "Run seed")->check(CLI::NonNegativeNumber);
  }
}

int cmd_run(const Common& c, const std::string& query_path, const std::string& data_dir, const std::string& run_id,
            const std::string& out) {
  EnginePtr e = open_engine(c);
  std::string query = read_file(query_path);
  CString summary;
  int exit_code = kExitError;
  sicql_status s = sicql_run(e.get(), query.c_str(), data_dir.c_str(), run_id.empty() ? nullptr : run_id.c_str(),
                             &summary.p, &exit_code);
  if (s != SICQL_OK) fail(s);
  json j = json::parse(summary.str());
  for (const auto& w : j["warnings"]) std::cerr << "warning: " << w.get<std::string>() << "\n";
  if (!j["error"].get<std::string>().empty()) std::cerr << "error: " << j["error"].get<std::string>() << "\n";
  fs::path results = fs::path(j["run_dir"].get<std::string>()) / "results.jsonl";
  if (!out.empty() && exit_code == 0) fs::copy_file(results, out, fs::copy_options::overwrite_existing);
  std::cout << j.dump(2) << "\n";
  return exit_code;
}

int cmd_explain(const Common& c, const std::string& query_path, const std::string& level, const std::string& data_dir) {
  EnginePtr e = open_engine(c);
  std::string query = read_file(query_path);
  CString text;
  sicql_status s = sicql_explain(e.get(), query.c_str(), level.c_str(), data_dir.empty() ? nullptr : data_dir.c_str(),
                                 &text.p);
  if (s != SICQL_OK) fail(s);
  std::cout << text.str();
  return 0;
}

httplib::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_serve(const Common& c, std::string host, int port) {
  EnginePtr e = open_engine(c);
  CString cfg_text;
  if (sicql_status s = sicql_engine_config(e.get(), &cfg_text.p); s != SICQL_OK) fail(s);
  json cfg = json::parse(cfg_text.str());
  if (host.empty()) host = cfg["host"].get<std::string>();
  if (port < 0) port = cfg["port"].get<int>();
  std::string web_root = cfg["web_root"].get<std::string>();

  httplib::Server server;
  if (!web_root.empty() && !server.set_mount_point("/ui", web_root))
    throw std::runtime_error("web root " + web_root + " is not a directory");
  auto dispatch = [&](const httplib::Request& req, httplib::Response& res) {
    std::string qs;
    for (const auto& [k, v] : req.params) {
      if (!qs.empty()) qs += '&';
      qs += httplib::detail::encode_query_param(k) + "=" + httplib::detail::encode_query_param(v);
    }
    int status = 500;
    CString body;
    sicql_status s = sicql_handle_request(e.get(), req.method.c_str(), req.path.c_str(), qs.c_str(), req.body.c_str(),
                                          &status, &body.p);
    if (s != SICQL_OK) {
      status = 500;
      res.set_content(json{{"code", sicql_status_name(s)}, {"message", sicql_last_error()}}.dump(), "application/json");
    } else {
      res.set_content(body.str(), "application/json");
    }
    res.status = status;
  };
  for (const char* prefix : {"/runs", "/tuples", "/labels", "/constraints"}) {
    std::string pattern = std::string(prefix) + "(/.*)?";
    server.Get(pattern, dispatch);
    server.Post(pattern, dispatch);
  }
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  if (port == 0) {
    port = server.bind_to_any_port(host);
    if (port < 0) throw std::runtime_error("cannot bind " + host);
  } else if (!server.bind_to_port(host, port)) {
    throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  }
  std::cout << "listening on http://" << host << ":" << port << std::endl;
  server.listen_after_bind();
  g_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sicql: semantic queries with integrity constraints"};
  app.set_version_flag("--version", std::string(sicql_version()));
  app.require_subcommand(1);

  Common common;

  auto* run = app.add_subcommand("run", "Execute a query and write a run directory");
  std::string query_path, data_dir, run_id, out;
  run->add_option("query", query_path, "Query file")->required()->check(CLI::ExistingFile);
  run->add_option("-d,--data", data_dir, "Directory holding <table>.jsonl or <table>.csv")->required();
  run->add_option("--run-id", run_id, "Run id (derived from the inputs when omitted)");
  run->add_option("-o,--out", out, "Copy results.jsonl here");
  add_common(run, common, true);

  auto* explain = app.add_subcommand("explain", "Print the plan");
  std::string level = "physical";
  explain->add_option("query", query_path, "Query file")->required()->check(CLI::ExistingFile);
  explain->add_option("-l,--level", level, "parsed, logical or physical")
      ->check(CLI::IsMember({"parsed", "logical", "physical"}));
  explain->add_option("-d,--data", data_dir, "Resolve the table schema from this directory");
  add_common(explain, common, true);

  auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
  std::string host;
  int port = -1;
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
  add_common(serve, common, false);

  auto* store = app.add_subcommand("store", "Manage the constraint store");
  store->require_subcommand(1);
  auto* reg = store->add_subcommand("register", "Register a constraint");
  std::string text, id, description, provenance;
  std::vector<std::string> tags;
  bool soft = false;
  reg->add_option("constraint", text, "ASSERT body, e.g. \"summary EXCLUDES ('SSN')\"")->required();
  reg->add_option("--id", id, "Constraint id");
  reg->add_option("--description", description, "Description used for recommendation");
  reg->add_option("--tag", tags, "Tag (repeatable)");
  reg->add_option("--provenance", provenance, "Source query id");
  reg->add_flag("--soft", soft, "Never escalate beyond CONTINUE");
  add_common(reg, common, false);
  auto* rec = store->add_subcommand("recommend", "Rank stored constraints for a query");
  std::string rec_query;
  int k = 5;
  rec->add_option("query", rec_query, "Query text or a path to a query file")->required();
  rec->add_option("-k", k, "Number of results")->check(CLI::NonNegativeNumber);
  add_common(rec, common, false);
  auto* conflicts = store->add_subcommand("conflicts", "List conflicts among stored constraints");
  add_common(conflicts, common, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(common, query_path, data_dir, run_id, out);
    if (*explain) return cmd_explain(common, query_path, level, data_dir);
    if (*serve) return cmd_serve(common, host, port);
    EnginePtr e = open_engine(common);
    if (*reg) {
      json meta = {{"soft", soft}};
      if (!id.empty()) meta["id"] = id;
      if (!description.empty()) meta["description"] = description;
      if (!tags.empty()) meta["tags"] = tags;
      if (!provenance.empty()) meta["provenance"] = provenance;
      CString out_id;
      if (auto s = sicql_store_register(e.get(), text.c_str(), meta.dump().c_str(), &out_id.p); s != SICQL_OK) fail(s);
      std::cout << out_id.str() << "\n";
    } else if (*rec) {
      std::string q = fs::is_regular_file(rec_query) ? read_file(rec_query) : rec_query;
      CString res;
      if (auto s = sicql_store_recommend(e.get(), q.c_str(), k, &res.p); s != SICQL_OK) fail(s);
      std::cout << json::parse(res.str()).dump(2) << "\n";
    } else if (*conflicts) {
      CString res;
      if (auto s = sicql_store_conflicts(e.get(), &res.p); s != SICQL_OK) fail(s);
      std::cout << json::parse(res.str()).dump(2) << "\n";
    }
    return 0;
  } catch (const std::exception& ex) {
    std::cerr << "sicql: " << ex.what() << "\n";
    return kExitError;
  }
}
