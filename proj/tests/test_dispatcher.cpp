#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <vector>

#include "kairos/dispatcher.hpp"
#include "kairos/rng.hpp"

using namespace kairos;

namespace {

PendingRequest req(std::uint64_t uid, std::int64_t prompt) {
  PendingRequest r;
  r.msg_id = "m-" + std::to_string(uid);
  r.agent = "A";
  r.prompt_tokens = prompt;
  r.uid = uid;
  return r;
}

}  // namespace

TEST_CASE("memory ramps linearly strictly inside the execution window") {
  const MemoryModel m{100.0, 10.0, 0.0, 5.0};
  CHECK(memory_at(m, 2.5) == doctest::Approx(125.0));
  CHECK(memory_at(m, 6.0) == 0.0);  // outside the window
  CHECK(memory_at(m, 0.0) == 0.0);  // strict lower bound
  CHECK(memory_at(m, 5.0) == 0.0);  // strict upper bound
}

TEST_CASE("span slots cover the open execution interval") {
  CHECK(span_slots({10, 1, 0.0, 1.2}, 0.5) ==
        std::vector<std::int64_t>{0, 1, 2});
  CHECK(span_slots({10, 1, 0.1, 0.4}, 0.5) == std::vector<std::int64_t>{0});
  CHECK(span_slots({10, 1, 1.0, 0.5}, 0.5) == std::vector<std::int64_t>{2});
  CHECK_THROWS_AS(span_slots({10, 1, 0.0, 1.0}, 0.0), std::invalid_argument);
}

TEST_CASE("per-slot peak is the ramp at the slot end, clamped to t_end") {
  const MemoryModel m{100.0, 10.0, 0.0, 1.2};
  CHECK(peak_in_slot(m, 0, 0.5) == doctest::Approx(105.0));
  CHECK(peak_in_slot(m, 1, 0.5) == doctest::Approx(110.0));
  // Final slot evaluates at t_end, not the slot end.
  CHECK(peak_in_slot(m, 2, 0.5) == doctest::Approx(112.0));
  CHECK(peak_in_slot(m, 3, 0.5) == 0.0);

  // The slot-end evaluation upper-bounds the model anywhere in the slot.
  Rng rng(5);
  for (int iter = 0; iter < 200; ++iter) {
    const MemoryModel probe{rng.uniform(1.0, 200.0), rng.uniform(1.0, 80.0),
                            rng.uniform(0.0, 4.0), rng.uniform(0.1, 6.0)};
    for (std::int64_t s : span_slots(probe, 0.5)) {
      const double bound = peak_in_slot(probe, s, 0.5);
      for (int k = 0; k < 10; ++k) {
        const double t = std::max(static_cast<double>(s) * 0.5,
                                  probe.t_start) +
                         rng.uniform(0.0, 0.5);
        if (t >= (static_cast<double>(s) + 1.0) * 0.5) continue;
        CHECK(memory_at(probe, t) <= bound + 1e-9);
      }
    }
  }
}

TEST_CASE("an empty ledger fits a request and reports its peak") {
  SlotLedger ledger(0, 0.5, 1000.0);
  const MemoryModel m{100.0, 10.0, 0.0, 5.0};  // peaks at 150 in the last slot
  const auto p = ledger.try_place(m);
  CHECK(p.fits);
  CHECK(p.predicted_peak == doctest::Approx(150.0));
}

TEST_CASE("capacity violations report the first offending slot") {
  SlotLedger ledger(0, 0.5, 1000.0);
  // Preload slot 3 with ~900 tokens: a short request living only there.
  const MemoryModel filler{895.0, 10.0, 1.5, 0.5};
  REQUIRE(ledger.try_place(filler).fits);
  ledger.commit(1, filler);
  CHECK(ledger.usage_in_slot(3) == doctest::Approx(900.0));

  const MemoryModel incoming{140.0, 10.0, 1.5, 0.5};  // +150 in slot 3
  const auto p = ledger.try_place(incoming);
  CHECK_FALSE(p.fits);
  CHECK(p.violating_slot == 3);
  CHECK_THROWS_AS(ledger.commit(2, incoming), std::logic_error);
}

TEST_CASE("sequential placements accumulate slot-wise") {
  SlotLedger ledger(0, 0.5, 1000.0);
  const MemoryModel m{300.0, 50.0, 0.0, 2.0};  // peaks at 400
  REQUIRE(ledger.try_place(m).fits);
  ledger.commit(1, m);
  const auto p = ledger.try_place(m);
  CHECK(p.fits);
  CHECK(p.predicted_peak == doctest::Approx(800.0));
  ledger.commit(2, m);
  const auto p3 = ledger.try_place(m);
  CHECK_FALSE(p3.fits);  // 1200 > 1000
}

TEST_CASE("ledger usage is the order-independent sum of contributions") {
  Rng rng(17);
  for (int iter = 0; iter < 50; ++iter) {
    std::vector<MemoryModel> models;
    const std::size_t n = 2 + rng.next_u64() % 5;
    for (std::size_t i = 0; i < n; ++i) {
      models.push_back({rng.uniform(1.0, 100.0), rng.uniform(1.0, 40.0),
                        rng.uniform(0.0, 3.0), rng.uniform(0.1, 4.0)});
    }
    SlotLedger forward(0, 0.5, 1e9);
    SlotLedger backward(0, 0.5, 1e9);
    for (std::size_t i = 0; i < n; ++i) forward.commit(i, models[i]);
    for (std::size_t i = n; i-- > 0;) backward.commit(i, models[i]);
    for (std::int64_t s = 0; s < 20; ++s) {
      double expected = 0.0;
      for (const auto& m : models) expected += peak_in_slot(m, s, 0.5);
      CHECK(forward.usage_in_slot(s) ==
            doctest::Approx(expected).epsilon(1e-12));
      CHECK(backward.usage_in_slot(s) ==
            doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("early finish removes contributions from later slots only") {
  SlotLedger ledger(0, 0.5, 1e9);
  // Predicted to run until t=4.5 (slot 8); actually finishes at t=2.6 (slot 5).
  const MemoryModel m{100.0, 10.0, 0.0, 4.5};
  ledger.commit(1, m);
  ledger.correct_early_finish(1, 2.6);
  CHECK(ledger.usage_in_slot(5) == doctest::Approx(peak_in_slot(m, 5, 0.5)));
  for (std::int64_t s = 6; s <= 8; ++s) {
    CHECK(ledger.usage_in_slot(s) == 0.0);
  }
  CHECK(ledger.usage_in_slot(4) == doctest::Approx(peak_in_slot(m, 4, 0.5)));
}

TEST_CASE("on-schedule finish is a no-op; unknown requests throw") {
  SlotLedger ledger(0, 0.5, 1e9);
  const MemoryModel m{100.0, 10.0, 0.0, 2.0};
  ledger.commit(1, m);
  ledger.correct_early_finish(1, 2.0);
  for (std::int64_t s : span_slots(m, 0.5)) {
    CHECK(ledger.usage_in_slot(s) == doctest::Approx(peak_in_slot(m, s, 0.5)));
  }
  CHECK_THROWS_AS(ledger.correct_early_finish(99, 1.0), std::invalid_argument);
}

TEST_CASE("early finish restores the other request's solo ledger") {
  const MemoryModel a{100.0, 10.0, 0.0, 4.0};
  const MemoryModel b{200.0, 20.0, 0.5, 3.0};
  SlotLedger both(0, 0.5, 1e9);
  both.commit(1, a);
  both.commit(2, b);
  both.correct_early_finish(1, 1.0);  // a finishes in slot 2

  SlotLedger solo(0, 0.5, 1e9);
  solo.commit(2, b);
  for (std::int64_t s = 3; s <= 10; ++s) {
    CHECK(both.usage_in_slot(s) ==
          doctest::Approx(solo.usage_in_slot(s)).epsilon(1e-12));
    CHECK(both.usage_in_slot(s) >= 0.0);
  }
}

TEST_CASE("gc drops elapsed slots and finished requests") {
  SlotLedger ledger(0, 0.5, 1e9);
  const MemoryModel m{100.0, 10.0, 0.0, 1.0};
  ledger.commit(1, m);
  CHECK(ledger.slot_count() == 2);
  ledger.gc(2.0);
  CHECK(ledger.slot_count() == 0);
  CHECK_FALSE(ledger.has_request(1));
}

TEST_CASE("instance selection takes the lowest expected peak, ties to low id") {
  const MemoryModel incoming{100.0, 10.0, 0.0, 2.0};
  SlotLedger a(0, 0.5, 1000.0);
  SlotLedger b(1, 0.5, 1000.0);
  a.commit(7, MemoryModel{680.0, 0.0, 0.0, 2.0});  // peak 800 with incoming
  b.commit(8, MemoryModel{480.0, 0.0, 0.0, 2.0});  // peak 600 with incoming
  auto d = select_instance({&a, &b}, incoming, req(1, 100));
  REQUIRE(d.target.has_value());
  CHECK(*d.target == 1);
  CHECK(d.predicted_peak == doctest::Approx(600.0));

  SlotLedger c(2, 0.5, 1000.0);
  SlotLedger e(3, 0.5, 1000.0);
  d = select_instance({&c, &e}, incoming, req(1, 100));
  REQUIRE(d.target.has_value());
  CHECK(*d.target == 2);  // equal peaks: lowest instance id
}

TEST_CASE("no fitting instance leaves the request targetless") {
  const MemoryModel incoming{600.0, 0.0, 0.0, 2.0};
  SlotLedger a(0, 0.5, 1000.0);
  SlotLedger b(1, 0.5, 1000.0);
  a.commit(7, MemoryModel{500.0, 0.0, 0.0, 2.0});
  b.commit(8, MemoryModel{500.0, 0.0, 0.0, 2.0});
  const auto d = select_instance({&a, &b}, incoming, req(1, 600));
  CHECK_FALSE(d.target.has_value());
}

TEST_CASE("dispatcher round robin cycles instances regardless of memory") {
  DispatcherConfig cfg;
  cfg.policy = DispatchPolicy::RoundRobin;
  Dispatcher d(cfg, {0, 1}, {1000.0, 1000.0}, {50.0, 50.0});
  std::vector<InstanceLive> live(2);
  live[0].live_kv = 999.0;  // nearly full; round robin does not care
  CHECK(*d.choose(req(1, 10), 0.0, 1.0, live).target == 0);
  CHECK(*d.choose(req(2, 10), 0.0, 1.0, live).target == 1);
  CHECK(*d.choose(req(3, 10), 0.0, 1.0, live).target == 0);
}

TEST_CASE("static threshold skips instances at or above the bound") {
  DispatcherConfig cfg;
  cfg.policy = DispatchPolicy::StaticThreshold;
  cfg.static_threshold = 0.9;
  Dispatcher d(cfg, {0, 1}, {1000.0, 1000.0}, {50.0, 50.0});
  std::vector<InstanceLive> live(2);
  live[0].live_kv = 950.0;  // above 90%
  live[1].live_kv = 100.0;
  CHECK(*d.choose(req(1, 10), 0.0, 1.0, live).target == 1);
  live[1].live_kv = 950.0;
  CHECK_FALSE(d.choose(req(2, 10), 0.0, 1.0, live).target.has_value());
}

TEST_CASE("overload suspends an instance until the watermark clears") {
  DispatcherConfig cfg;
  cfg.policy = DispatchPolicy::TimeSlot;
  cfg.resume_watermark = 0.85;
  Dispatcher d(cfg, {0, 1}, {1000.0, 1000.0}, {50.0, 50.0});
  std::vector<InstanceLive> live(2);

  d.on_overload(0);
  CHECK(d.suspended(0));
  auto decision = d.choose(req(1, 100), 0.0, 1.0, live);
  REQUIRE(decision.target.has_value());
  CHECK(*decision.target == 1);  // 0 is excluded while suspended

  d.on_live_usage(0, 900.0);  // still at 90% of capacity
  CHECK(d.suspended(0));
  d.on_live_usage(0, 800.0);  // fell to 80%, below the watermark
  CHECK_FALSE(d.suspended(0));
  decision = d.choose(req(2, 100), 0.0, 1.0, live);
  REQUIRE(decision.target.has_value());
  CHECK(*decision.target == 0);  // re-enters the candidate set and wins ties
}

TEST_CASE("all instances suspended leaves requests queued, then resumes") {
  DispatcherConfig cfg;
  cfg.policy = DispatchPolicy::TimeSlot;
  Dispatcher d(cfg, {0, 1}, {1000.0, 1000.0}, {50.0, 50.0});
  std::vector<InstanceLive> live(2);
  d.on_overload(0);
  d.on_overload(1);
  CHECK_FALSE(d.choose(req(1, 100), 0.0, 1.0, live).target.has_value());
  d.on_live_usage(1, 100.0);
  CHECK(d.choose(req(1, 100), 0.0, 1.0, live).target.has_value());
}

TEST_CASE("time slot choice skips batch-full instances") {
  DispatcherConfig cfg;
  cfg.policy = DispatchPolicy::TimeSlot;
  Dispatcher d(cfg, {0, 1}, {1000.0, 1000.0}, {50.0, 50.0});
  std::vector<InstanceLive> live(2);
  live[0].batch_full = true;
  auto decision = d.choose(req(1, 100), 0.0, 1.0, live);
  REQUIRE(decision.target.has_value());
  CHECK(*decision.target == 1);
}

TEST_CASE("commit then finish keeps slots non-negative") {
  DispatcherConfig cfg;
  cfg.policy = DispatchPolicy::TimeSlot;
  Dispatcher d(cfg, {0}, {10000.0}, {50.0});
  std::vector<InstanceLive> live(1);
  Rng rng(23);
  for (std::uint64_t uid = 1; uid <= 40; ++uid) {
    const auto r =
        req(uid, 50 + static_cast<std::int64_t>(rng.next_u64() % 100));
    const double T = rng.uniform(0.2, 3.0);
    const double now = rng.uniform(0.0, 2.0);
    auto decision = d.choose(r, now, T, live);
    if (!decision.target) continue;
    d.commit(decision, now, T);
    // Random subset finishes early.
    if (rng.uniform() < 0.6) {
      d.on_request_finished(0, uid, now + rng.uniform(0.0, T));
    }
  }
  const auto& ledger = d.ledger(0);
  for (std::int64_t s = 0; s < 30; ++s) {
    CHECK(ledger.usage_in_slot(s) >= 0.0);
  }
}
