#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "kairos/types.hpp"

namespace kairos {

// Trace files are newline-delimited CSV, one RequestRecord per line:
//   msg_id,agent,upstream,exec_start,exec_end,prompt_tokens,output_tokens,app_start
// `upstream` is empty for workflow entry calls. Timestamps are decimal
// seconds. The simulator writes this format and the analyzers read it.

extern const char kTraceHeader[];

void write_trace_header(std::ostream& out);
void write_trace_record(std::ostream& out, const RequestRecord& r);
void write_trace(std::ostream& out, const std::vector<RequestRecord>& records);

// Parses one data line. Throws std::invalid_argument on malformed input or
// invariant violations.
RequestRecord parse_trace_line(const std::string& line);

// Reads a whole trace stream (header optional). Throws on the first bad line
// with its line number.
std::vector<RequestRecord> read_trace(std::istream& in);
std::vector<RequestRecord> read_trace_file(const std::string& path);

// Fixed-width decimal formatting used for every float we serialize; keeps
// re-runs byte-identical.
std::string format_seconds(double t);

}  // namespace kairos
