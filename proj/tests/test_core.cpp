#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>
#include <unordered_set>

#include "kairos/trace.hpp"
#include "kairos/types.hpp"

using namespace kairos;

TEST_CASE("message ids count up from zero") {
  MessageIdFactory ids;
  CHECK(ids.next() == "m-0");
  CHECK(ids.next() == "m-1");
}

TEST_CASE("successive ids are distinct") {
  MessageIdFactory ids;
  const auto a = ids.next();
  const auto b = ids.next();
  CHECK(a != b);
}

TEST_CASE("a million ids stay unique") {
  MessageIdFactory ids;
  std::unordered_set<MessageId> seen;
  seen.reserve(1'000'000);
  for (int i = 0; i < 1'000'000; ++i) {
    CHECK_MESSAGE(seen.insert(ids.next()).second, "duplicate at ", i);
  }
  CHECK(seen.size() == 1'000'000);
}

TEST_CASE("record validation enforces span and token invariants") {
  RequestRecord r;
  r.msg_id = "m-0";
  r.agent = "Router";
  r.app_start = 1.0;
  r.exec_start = 2.0;
  r.exec_end = 3.0;
  r.prompt_tokens = 10;
  r.output_tokens = 5;
  CHECK(validate(r));

  std::string why;
  auto bad = r;
  bad.exec_end = 1.5;
  CHECK_FALSE(validate(bad, &why));
  CHECK(why == "exec_end < exec_start");

  bad = r;
  bad.exec_start = 0.5;  // before app_start
  CHECK_FALSE(validate(bad));

  bad = r;
  bad.prompt_tokens = 0;
  CHECK_FALSE(validate(bad));

  bad = r;
  bad.output_tokens = 0;
  CHECK_FALSE(validate(bad));

  bad = r;
  bad.msg_id.clear();
  CHECK_FALSE(validate(bad));
}

TEST_CASE("trace records survive a write/read round trip") {
  std::vector<RequestRecord> records;
  RequestRecord a;
  a.msg_id = "m-0";
  a.agent = "Router";
  a.exec_start = 0.125;
  a.exec_end = 0.875;
  a.prompt_tokens = 52;
  a.output_tokens = 11;
  a.app_start = 0.1;
  RequestRecord b = a;
  b.agent = "Math";
  b.upstream = "Router";
  b.exec_start = 1.0;
  b.exec_end = 4.5;
  records = {a, b};

  std::ostringstream out;
  write_trace(out, records);
  std::istringstream in(out.str());
  const auto parsed = read_trace(in);

  REQUIRE(parsed.size() == 2);
  CHECK(parsed[0].msg_id == "m-0");
  CHECK_FALSE(parsed[0].upstream.has_value());
  CHECK(parsed[1].upstream == AgentId("Router"));
  CHECK(parsed[1].exec_start == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(parsed[1].prompt_tokens == 52);
}

TEST_CASE("malformed trace lines carry their line number") {
  std::istringstream in("msg,agent\n");
  CHECK_THROWS_AS(read_trace(in), std::invalid_argument);

  std::istringstream bad_value(
      "m-0,Router,,0.0,1.0,10,notanumber,0.0\n");
  CHECK_THROWS_WITH_AS(read_trace(bad_value),
                       doctest::Contains("trace line 1"),
                       std::invalid_argument);
}

TEST_CASE("records with invariant violations are rejected at parse") {
  // exec_end before exec_start
  std::istringstream in("m-0,Router,,5.0,1.0,10,10,0.0\n");
  CHECK_THROWS_AS(read_trace(in), std::invalid_argument);
}
