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

#ifndef DSGD_TRACE_IO_HPP_
#define DSGD_TRACE_IO_HPP_

#include <iosfwd>
#include <string>
#include <vector>

#include "dsgd/core.hpp"

namespace dsgd {

// One JSON object per record; keys sorted, numbers in shortest round-trip
// form, so equal records always serialize to equal bytes.
std::string trace_record_to_json_line(const TraceRecord& rec);

// Parses one JSONL line. Throws std::runtime_error on malformed input.
TraceRecord trace_record_from_json_line(const std::string& line);

void write_trace_jsonl(std::ostream& out, const std::vector<TraceRecord>& trace);
std::vector<TraceRecord> read_trace_jsonl(std::istream& in);

}  // namespace dsgd

#endif  // DSGD_TRACE_IO_HPP_
