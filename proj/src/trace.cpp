#include "kairos/trace.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace kairos {

const char kTraceHeader[] =
    "msg_id,agent,upstream,exec_start,exec_end,prompt_tokens,output_tokens,"
    "app_start";

bool validate(const RequestRecord& r, std::string* why) {
  auto fail = [&](const char* msg) {
    if (why) *why = msg;
    return false;
  };
  if (r.msg_id.empty()) return fail("empty msg_id");
  if (r.agent.empty()) return fail("empty agent");
  if (r.upstream && r.upstream->empty()) return fail("empty upstream name");
  if (r.app_start < 0.0) return fail("app_start < 0");
  if (r.exec_start < r.app_start) return fail("exec_start < app_start");
  if (r.exec_end < r.exec_start) return fail("exec_end < exec_start");
  if (r.prompt_tokens < 1) return fail("prompt_tokens < 1");
  if (r.output_tokens < 1) return fail("output_tokens < 1");
  return true;
}

std::string format_seconds(double t) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9f", t);
  return buf;
}

void write_trace_header(std::ostream& out) { out << kTraceHeader << '\n'; }

void write_trace_record(std::ostream& out, const RequestRecord& r) {
  out << r.msg_id << ',' << r.agent << ','
      << (r.upstream ? *r.upstream : std::string()) << ','
      << format_seconds(r.exec_start) << ',' << format_seconds(r.exec_end)
      << ',' << r.prompt_tokens << ',' << r.output_tokens << ','
      << format_seconds(r.app_start) << '\n';
}

void write_trace(std::ostream& out, const std::vector<RequestRecord>& records) {
  write_trace_header(out);
  for (const auto& r : records) write_trace_record(out, r);
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_double(const std::string& s, const char* field) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing chars");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument(std::string("bad numeric field '") + field +
                                "': " + s);
  }
}

std::int64_t parse_count(const std::string& s, const char* field) {
  try {
    std::size_t pos = 0;
    long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing chars");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument(std::string("bad count field '") + field +
                                "': " + s);
  }
}

}  // namespace

RequestRecord parse_trace_line(const std::string& line) {
  auto fields = split_csv(line);
  if (fields.size() != 8) {
    throw std::invalid_argument("expected 8 fields, got " +
                                std::to_string(fields.size()));
  }
  RequestRecord r;
  r.msg_id = fields[0];
  r.agent = fields[1];
  if (!fields[2].empty()) r.upstream = fields[2];
  r.exec_start = parse_double(fields[3], "exec_start");
  r.exec_end = parse_double(fields[4], "exec_end");
  r.prompt_tokens = parse_count(fields[5], "prompt_tokens");
  r.output_tokens = parse_count(fields[6], "output_tokens");
  r.app_start = parse_double(fields[7], "app_start");
  std::string why;
  if (!validate(r, &why)) {
    throw std::invalid_argument("invalid record: " + why);
  }
  return r;
}

std::vector<RequestRecord> read_trace(std::istream& in) {
  std::vector<RequestRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (lineno == 1 && line == kTraceHeader) continue;
    try {
      records.push_back(parse_trace_line(line));
    } catch (const std::exception& e) {
      throw std::invalid_argument("trace line " + std::to_string(lineno) +
                                  ": " + e.what());
    }
  }
  return records;
}

std::vector<RequestRecord> read_trace_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open trace file: " + path);
  return read_trace(in);
}

}  // namespace kairos
