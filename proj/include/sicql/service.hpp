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

// HTTP API over the runs directory and the constraint store, independent of
// the transport. Bodies are JSON; errors are {"code", "message"}.
//
//   GET  /runs
//   GET  /runs/{id}
//   GET  /runs/{id}/metrics
//   GET  /runs/{id}/tuples?flagged=true|false
//   GET  /tuples/{id}/lineage?run=
//   GET  /labels/next?run=&constraint=
//   POST /labels {"invocation_id": "<run>:<n>", "true_label": true|false}
//   GET  /constraints
//   POST /constraints {"text", "id"?, "description"?, "tags"?, "provenance"?, "soft"?}
//   GET  /constraints/recommend?q=&k=
//   GET  /constraints/conflicts

#pragma once

#include <map>
#include <memory>
#include <string>

#include "sicql/error.hpp"
#include "sicql/observability.hpp"
#include "sicql/pipeline.hpp"
#include "sicql/store.hpp"

namespace sicql::service {

struct Response {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

using Params = std::map<std::string, std::string>;

/// Decodes "a=1&b=x%20y" into a map; later duplicates win.
Params parse_query_string(std::string_view text);

int http_status_for(ErrorCode code);
Response error_response(ErrorCode code, const std::string& message);

class Service {
 public:
  /// `judge` is used for optional reranking and conflict checks; may be null.
  Service(std::string runs_root, std::shared_ptr<store::ConstraintStore> store, model::ModelClient* judge = nullptr,
          std::string judge_name = "judge");

  Response handle(const std::string& method, const std::string& path, const Params& params,
                  const std::string& body) const;

  obs::RunStore& runs() { return runs_; }

 private:
  mutable obs::RunStore runs_;
  std::shared_ptr<store::ConstraintStore> store_;
  model::ModelClient* judge_;
  std::string judge_name_;
};

}  // namespace sicql::service
