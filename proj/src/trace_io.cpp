// Copyright 2026 The dsgd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dsgd/trace_io.hpp"

#include <istream>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace dsgd {

namespace {
using nlohmann::json;

json optional_to_json(const std::optional<double>& v) {
  if (v.has_value()) return *v;
  return nullptr;
}

std::optional<double> optional_from_json(const json& j, const char* key) {
  const json& v = j.at(key);
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}
}  // namespace

std::string trace_record_to_json_line(const TraceRecord& rec) {
  json j;
  j["run_id"] = rec.run_id;
  j["protocol"] = std::string(to_string(rec.protocol));
  j["t"] = rec.t;
  j["sim_time"] = optional_to_json(rec.sim_time);
  j["sq_err_opt"] = optional_to_json(rec.sq_err_opt);
  j["sq_err_consensus"] = rec.sq_err_consensus;
  j["loss_mean"] = rec.loss_mean;
  j["alpha"] = rec.alpha;
  return j.dump();
}

TraceRecord trace_record_from_json_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("trace line is not valid JSON: ") + e.what());
  }
  TraceRecord rec;
  try {
    rec.run_id = j.at("run_id").get<std::string>();
    const std::string proto = j.at("protocol").get<std::string>();
    const auto kind = protocol_from_string(proto);
    if (!kind) throw std::runtime_error("unknown protocol name: " + proto);
    rec.protocol = *kind;
    rec.t = j.at("t").get<std::uint64_t>();
    rec.sim_time = optional_from_json(j, "sim_time");
    rec.sq_err_opt = optional_from_json(j, "sq_err_opt");
    rec.sq_err_consensus = j.at("sq_err_consensus").get<double>();
    rec.loss_mean = j.at("loss_mean").get<double>();
    rec.alpha = j.at("alpha").get<double>();
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("trace line missing or mistyped field: ") + e.what());
  }
  return rec;
}

void write_trace_jsonl(std::ostream& out, const std::vector<TraceRecord>& trace) {
  for (const TraceRecord& rec : trace) {
    out << trace_record_to_json_line(rec) << '\n';
  }
}

std::vector<TraceRecord> read_trace_jsonl(std::istream& in) {
  std::vector<TraceRecord> trace;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    trace.push_back(trace_record_from_json_line(line));
  }
  return trace;
}

}  // namespace dsgd
