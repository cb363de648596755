#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "kairos/priority.hpp"
#include "kairos/rng.hpp"

using namespace kairos;

namespace {

PendingRequest req(const MessageId& msg, const AgentId& agent,
                   double app_start, double queue_enter, std::uint64_t uid) {
  PendingRequest r;
  r.msg_id = msg;
  r.agent = agent;
  r.prompt_tokens = 10;
  r.app_start = app_start;
  r.queue_enter = queue_enter;
  r.uid = uid;
  return r;
}

// Distance matrix of point-mass agents plus the anchor: |a - b| exactly.
DistanceMatrix point_mass_matrix(const std::map<AgentId, double>& latencies) {
  std::map<AgentId, std::vector<double>> samples;
  for (const auto& [agent, v] : latencies) samples[agent] = {v};
  return build_distance_matrix_from_samples(samples);
}

}  // namespace

TEST_CASE("distance matrix of two point masses and the anchor") {
  const auto m = point_mass_matrix({{"A", 2.0}, {"B", 5.0}});
  REQUIRE(m.labels == std::vector<std::string>{"A", "B", kAnchorLabel});
  CHECK(m.d[0][1] == doctest::Approx(3.0));
  CHECK(m.d[0][2] == doctest::Approx(2.0));
  CHECK(m.d[1][2] == doctest::Approx(5.0));
  for (std::size_t i = 0; i < m.size(); ++i) {
    CHECK(m.d[i][i] == 0.0);
    for (std::size_t j = 0; j < m.size(); ++j) {
      CHECK(m.d[i][j] == m.d[j][i]);
      CHECK(m.d[i][j] >= 0.0);
    }
  }
}

TEST_CASE("a single agent still gets a 2x2 matrix with the anchor") {
  const auto m = point_mass_matrix({{"A", 2.0}});
  CHECK(m.size() == 2);
  CHECK(m.d[0][1] == doctest::Approx(2.0));
}

TEST_CASE("anchor distance equals the sample mean") {
  std::map<AgentId, std::vector<double>> samples{
      {"A", {1.0, 3.0}}, {"B", {2.0, 4.0}}, {"C", {10.0, 10.0}}};
  const auto m = build_distance_matrix_from_samples(samples);
  // labels are sorted: A, B, C, anchor
  CHECK(m.d[0][3] == doctest::Approx(2.0));   // mean of {1,3}
  CHECK(m.d[1][3] == doctest::Approx(3.0));   // mean of {2,4}
  CHECK(m.d[2][3] == doctest::Approx(10.0));  // mean of {10,10}
  // Cross-agent entries per the sorted-pairing computation.
  CHECK(m.d[0][1] == doctest::Approx(1.0));
  CHECK(m.d[0][2] == doctest::Approx(8.0));
  CHECK(m.d[1][2] == doctest::Approx(7.0));
}

TEST_CASE("empty input is an error") {
  std::map<AgentId, std::vector<double>> none;
  CHECK_THROWS_AS(build_distance_matrix_from_samples(none),
                  std::invalid_argument);
}

TEST_CASE("mds recovers collinear gaps exactly for two agents plus anchor") {
  // Points {0, 2, 5} on a line: recovered coordinates must reproduce the
  // gaps (2, 5, 3) up to reflection/translation.
  const auto m = point_mass_matrix({{"A", 2.0}, {"B", 5.0}});
  const auto table = mds_embed_1d(m, 1);
  const double a = table.coord.at("A");
  const double b = table.coord.at("B");
  const double anchor = table.anchor_coord;
  CHECK(std::abs(a - anchor) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(std::abs(b - anchor) == doctest::Approx(5.0).epsilon(1e-9));
  CHECK(std::abs(a - b) == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(*table.anchor_distance("A") < *table.anchor_distance("B"));
  CHECK(table.ranking() == std::vector<AgentId>{"A", "B"});
}

TEST_CASE("identical distributions embed to identical coordinates") {
  std::map<AgentId, std::vector<double>> samples{{"A", {2.0, 4.0}},
                                                 {"B", {2.0, 4.0}}};
  const auto table =
      mds_embed_1d(build_distance_matrix_from_samples(samples), 1);
  CHECK(table.coord.at("A") == doctest::Approx(table.coord.at("B")));
  CHECK(*table.anchor_distance("A") ==
        doctest::Approx(*table.anchor_distance("B")));
}

TEST_CASE("five nested point masses rank in latency order") {
  const auto table = mds_embed_1d(
      point_mass_matrix(
          {{"a1", 1.0}, {"a2", 2.0}, {"a3", 3.0}, {"a4", 4.0}, {"a5", 5.0}}),
      1);
  CHECK(table.ranking() ==
        std::vector<AgentId>{"a1", "a2", "a3", "a4", "a5"});
}

TEST_CASE("degenerate all-zero matrix collapses to one priority class") {
  const auto table =
      mds_embed_1d(point_mass_matrix({{"A", 0.0}, {"B", 0.0}}), 1);
  CHECK(*table.anchor_distance("A") == 0.0);
  CHECK(*table.anchor_distance("B") == 0.0);
}

TEST_CASE("mds needs at least two points") {
  CHECK_THROWS_AS(classical_mds_1d({{0.0}}), std::invalid_argument);
}

TEST_CASE("embedding is exact on random collinear configurations") {
  Rng rng(31337);
  for (int iter = 0; iter < 500; ++iter) {
    const std::size_t n = 2 + rng.next_u64() % 15;  // up to 16 points
    std::vector<double> xs(n);
    for (auto& x : xs) x = rng.uniform(0.0, 100.0);
    std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) d[i][j] = std::abs(xs[i] - xs[j]);
    }
    const auto coords = classical_mds_1d(d);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double got = std::abs(coords[i] - coords[j]);
        const double want = d[i][j];
        CHECK(got == doctest::Approx(want).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("priority order equals latency order for random point masses") {
  Rng rng(555);
  for (int iter = 0; iter < 200; ++iter) {
    const std::size_t n = 1 + rng.next_u64() % 16;
    std::map<AgentId, double> latencies;
    for (std::size_t i = 0; i < n; ++i) {
      char name[16];
      std::snprintf(name, sizeof(name), "a%02zu", i);
      latencies[name] = rng.uniform(0.1, 50.0) + static_cast<double>(i) * 1e-3;
    }
    const auto table = mds_embed_1d(point_mass_matrix(latencies), 1);
    std::vector<AgentId> by_latency;
    for (const auto& [agent, v] : latencies) by_latency.push_back(agent);
    std::sort(by_latency.begin(), by_latency.end(),
              [&](const AgentId& a, const AgentId& b) {
                return latencies.at(a) < latencies.at(b);
              });
    CHECK(table.ranking() == by_latency);
  }
}

TEST_CASE("priority order survives coordinate reflection") {
  const auto m = point_mass_matrix({{"A", 1.0}, {"B", 4.0}, {"C", 9.0}});
  auto table = mds_embed_1d(m, 1);
  const auto order = table.ranking();
  // Flip the embedding sign; anchor distances are unchanged.
  PriorityTable flipped = table;
  flipped.anchor_coord = -flipped.anchor_coord;
  for (auto& [agent, c] : flipped.coord) c = -c;
  CHECK(flipped.ranking() == order);
  for (const auto& [agent, c] : table.coord) {
    CHECK(*flipped.anchor_distance(agent) ==
          doctest::Approx(*table.anchor_distance(agent)));
  }
}

TEST_CASE("queue orders by priority then app start") {
  const auto table = mds_embed_1d(
      point_mass_matrix({{"Router", 1.0}, {"Math", 6.0}}), 1);
  ReadyQueue q;
  q.enqueue(req("m-0", "Math", 5.0, 5.0, 1));
  q.enqueue(req("m-1", "Router", 9.0, 9.0, 2));
  auto key = [&](const PendingRequest& r) { return table.priority_key(r.agent); };
  // Router is nearer the anchor, so it dequeues first despite arriving later.
  CHECK(q.pop(key).agent == "Router");
  CHECK(q.pop(key).agent == "Math");
}

TEST_CASE("intra-agent order follows application-level start time") {
  PriorityTable flat;  // all priorities equal
  ReadyQueue q;
  // The later queue entrant carries the earlier application-level start.
  q.enqueue(req("m-1", "Math", 7.0, 10.0, 1));
  q.enqueue(req("m-0", "Math", 3.0, 11.0, 2));
  auto key = [&](const PendingRequest& r) { return flat.priority_key(r.agent); };
  CHECK(q.pop(key).app_start == 3.0);
  CHECK(q.pop(key).app_start == 7.0);
}

TEST_CASE("empty table degrades to arrival order") {
  PriorityTable empty;
  ReadyQueue q;
  // Entry-stage requests: app_start equals queue_enter.
  q.enqueue(req("m-2", "C", 3.0, 3.0, 1));
  q.enqueue(req("m-0", "A", 1.0, 1.0, 2));
  q.enqueue(req("m-1", "B", 2.0, 2.0, 3));
  auto key = [&](const PendingRequest& r) { return empty.priority_key(r.agent); };
  CHECK(q.pop(key).agent == "A");
  CHECK(q.pop(key).agent == "B");
  CHECK(q.pop(key).agent == "C");
}

TEST_CASE("unknown agents ride at the median anchor distance") {
  const auto table = mds_embed_1d(
      point_mass_matrix({{"fast", 1.0}, {"mid", 5.0}, {"slow", 20.0}}), 1);
  const double median = table.median_anchor_distance();
  CHECK(median == doctest::Approx(*table.anchor_distance("mid")));
  CHECK(table.priority_key("newcomer") == doctest::Approx(median));
  // Cold-start places the newcomer between fast and slow.
  CHECK(table.priority_key("newcomer") > table.priority_key("fast"));
  CHECK(table.priority_key("newcomer") < table.priority_key("slow"));
}

TEST_CASE("stable order for equal priority, app start and queue enter") {
  PriorityTable empty;
  ReadyQueue q;
  q.enqueue(req("m-0", "A", 1.0, 2.0, 10));
  q.enqueue(req("m-0", "A", 1.0, 2.0, 11));
  auto key = [&](const PendingRequest& r) { return empty.priority_key(r.agent); };
  CHECK(q.pop(key).uid == 10);
  CHECK(q.pop(key).uid == 11);
}

TEST_CASE("sorting accuracy on two-element schedules") {
  std::map<std::uint64_t, double> remaining{{1, 1.0}, {2, 9.0}};
  const std::vector<PendingRequest> right{req("m-0", "A", 0, 0, 1),
                                          req("m-1", "B", 0, 0, 2)};
  const std::vector<PendingRequest> wrong{right[1], right[0]};
  CHECK(*pairwise_sorting_accuracy(right, remaining) == 1.0);
  CHECK(*pairwise_sorting_accuracy(wrong, remaining) == 0.0);
}

TEST_CASE("latency ties score half") {
  std::map<std::uint64_t, double> remaining{{1, 3.0}, {2, 3.0}};
  const std::vector<PendingRequest> order{req("m-0", "A", 0, 0, 1),
                                          req("m-1", "B", 0, 0, 2)};
  CHECK(*pairwise_sorting_accuracy(order, remaining) == 0.5);
}

TEST_CASE("same-agent pairs only count under the all-pairs scope") {
  std::map<std::uint64_t, double> remaining{{1, 1.0}, {2, 9.0}};
  const std::vector<PendingRequest> order{req("m-0", "A", 0, 0, 1),
                                          req("m-1", "A", 0, 0, 2)};
  CHECK_FALSE(pairwise_sorting_accuracy(order, remaining).has_value());
  CHECK(*pairwise_sorting_accuracy(order, remaining, PairScope::All) == 1.0);
}

TEST_CASE("random schedules score one half on average") {
  Rng rng(808);
  double total = 0.0;
  const int trials = 400;
  for (int t = 0; t < trials; ++t) {
    std::vector<PendingRequest> order;
    std::map<std::uint64_t, double> remaining;
    const std::size_t n = 8;
    for (std::size_t i = 0; i < n; ++i) {
      order.push_back(req("m-" + std::to_string(i),
                          "agent" + std::to_string(i), 0, 0, i + 1));
      remaining[i + 1] = rng.uniform(0.0, 10.0);
    }
    // Shuffle via seeded draws.
    for (std::size_t i = n - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(rng.next_u64() % (i + 1));
      std::swap(order[i], order[j]);
    }
    total += *pairwise_sorting_accuracy(order, remaining);
  }
  CHECK(total / trials == doctest::Approx(0.5).epsilon(0.1));
}
