#include <doctest.h>

#include <cmath>
#include <set>
#include <stdexcept>

#include "tlfuzz/novelty.hpp"
#include "tlfuzz/rng.hpp"

using namespace tlfuzz;

namespace {

// Exact-Jaccard construction: |intersection| = shared, |union| = total.
struct SetPair {
  std::vector<std::uint64_t> a, b;
  double jaccard;
};

SetPair make_pair_with_jaccard(Rng& rng, std::size_t shared, std::size_t total) {
  std::set<std::uint64_t> items;
  while (items.size() < total) items.insert(rng.next_u64());
  SetPair out;
  out.jaccard = static_cast<double>(shared) / static_cast<double>(total);
  std::size_t only = total - shared;
  std::size_t a_only = only / 2;
  std::size_t i = 0;
  for (std::uint64_t item : items) {
    if (i < shared) {
      out.a.push_back(item);
      out.b.push_back(item);
    } else if (i < shared + a_only) {
      out.a.push_back(item);
    } else {
      out.b.push_back(item);
    }
    ++i;
  }
  return out;
}

double exact_jaccard(const std::vector<std::uint64_t>& a,
                     const std::vector<std::uint64_t>& b) {
  std::set<std::uint64_t> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::size_t inter = 0;
  for (std::uint64_t x : sa) inter += sb.count(x);
  std::size_t uni = sa.size() + sb.size() - inter;
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

EventHistory history_with_kinds(NodeId node, std::uint32_t first, std::uint32_t count) {
  EventHistory h;
  for (std::uint32_t c = first; c < first + count; ++c) {
    Event ev;
    ev.node = node;
    ev.kind = EventKind::code(c);
    h.update(ev);
  }
  return h;
}

}  // namespace

TEST_CASE("equal histories have equal signatures; self similarity is 1") {
  EventHistory a = history_with_kinds(0, 1, 6);
  EventHistory b = history_with_kinds(0, 1, 6);
  StateSignature sa = signature(a, 128, 7);
  StateSignature sb = signature(b, 128, 7);
  CHECK(sa == sb);
  CHECK(similarity(sa, sb) == 1.0);
  CHECK(sa.set_size == a.item_count());
}

TEST_CASE("the empty history gets the designated empty signature") {
  StateSignature empty = signature(EventHistory{}, 16, 3);
  for (std::uint64_t m : empty.minima) {
    CHECK(m == std::numeric_limits<std::uint64_t>::max());
  }
  CHECK(similarity(empty, empty) == 1.0);
}

TEST_CASE("signature families must match to compare") {
  StateSignature a = signature_of_items(std::vector<std::uint64_t>{1, 2, 3}, 64, 1);
  StateSignature b = signature_of_items(std::vector<std::uint64_t>{1, 2, 3}, 128, 1);
  StateSignature c = signature_of_items(std::vector<std::uint64_t>{1, 2, 3}, 64, 2);
  CHECK_THROWS_AS(similarity(a, b), std::invalid_argument);
  CHECK_THROWS_AS(similarity(a, c), std::invalid_argument);
}

TEST_CASE("minhash estimates stay near the exact jaccard value") {
  // Binomial noise at k = 128: std <= 0.5/sqrt(128) ~ 0.044 per pair.
  Rng rng(2024);
  for (double target : {0.2, 0.5, 0.8}) {
    double total_err = 0.0;
    int trials = 300;
    for (int t = 0; t < trials; ++t) {
      SetPair p = make_pair_with_jaccard(
          rng, static_cast<std::size_t>(target * 100.0), 100);
      REQUIRE(exact_jaccard(p.a, p.b) == doctest::Approx(target));
      StateSignature sa = signature_of_items(p.a, 128, 99);
      StateSignature sb = signature_of_items(p.b, 128, 99);
      total_err += std::fabs(similarity(sa, sb) - target);
    }
    CHECK(total_err / trials <= 0.06);
  }
}

TEST_CASE("estimates are unbiased when averaged over seeds") {
  Rng rng(11);
  SetPair p = make_pair_with_jaccard(rng, 50, 100);
  double sum = 0.0;
  int seeds = 400;
  for (int s = 0; s < seeds; ++s) {
    sum += similarity(signature_of_items(p.a, 128, 1000 + s),
                      signature_of_items(p.b, 128, 1000 + s));
  }
  CHECK(std::fabs(sum / seeds - 0.5) <= 0.02);
}

TEST_CASE("disjoint sets estimate near zero") {
  Rng rng(5);
  SetPair p = make_pair_with_jaccard(rng, 0, 120);
  StateSignature sa = signature_of_items(p.a, 128, 4);
  StateSignature sb = signature_of_items(p.b, 128, 4);
  CHECK(similarity(sa, sb) <= 0.1);
}

TEST_CASE("classification bootstraps, recognises and separates") {
  StateRegistry reg;
  EventHistory a = history_with_kinds(0, 1, 8);
  StateSignature sig_a = signature(a, 128, 7);
  Classification first = reg.classify(sig_a, 0.70);
  CHECK(first.id == 0);
  CHECK(first.is_new);
  Classification again = reg.classify(sig_a, 0.70);
  CHECK(again.id == 0);
  CHECK_FALSE(again.is_new);

  // Roughly half-overlapping item sets fall below the 0.70 threshold.
  EventHistory b = history_with_kinds(0, 5, 8);  // kinds 5..12 vs 1..8
  StateSignature sig_b = signature(b, 128, 7);
  double exact = exact_jaccard(a.items(), b.items());
  CHECK(exact < 0.6);
  CHECK(exact > 0.3);
  Classification other = reg.classify(sig_b, 0.70);
  CHECK(other.is_new);
  CHECK(other.id == 1);
  CHECK(reg.size() == 2);
}

TEST_CASE("classification breaks ties toward the lowest id") {
  StateRegistry reg;
  StateSignature s = signature_of_items(std::vector<std::uint64_t>{1, 2, 3}, 32, 5);
  reg.classify(s, 1.0);
  // Force a duplicate representative via a threshold of exactly 1.0 on a
  // slightly different set, then reclassify the original.
  StateSignature t = signature_of_items(std::vector<std::uint64_t>{1, 2, 4}, 32, 5);
  reg.classify(t, 1.0);
  Classification back = reg.classify(s, 0.5);
  CHECK(back.id == 0);
  CHECK_FALSE(back.is_new);
}

TEST_CASE("registry csv lists id, first seen step and item count") {
  StateRegistry reg;
  StateSignature s = signature_of_items(std::vector<std::uint64_t>{1, 2, 3}, 16, 5);
  auto c = reg.classify(s, 0.7);
  reg.note_first_seen(c.id, 42);
  std::string csv = reg.to_csv();
  CHECK(csv.find("state_id,first_seen_step,item_count") == 0);
  CHECK(csv.find("0,42,3") != std::string::npos);
}

TEST_CASE("calibration returns the grid maximum for identical summaries") {
  std::vector<EventHistory> steady(25, history_with_kinds(1, 1, 5));
  CalibrationResult cal = calibrate(steady, 128, 9);
  CHECK(cal.epsilon == 1.0);
  CHECK_FALSE(cal.degenerate);
  CHECK(cal.coincide_fraction >= 0.9);
}

TEST_CASE("calibration degrades gracefully on pairwise-disjoint summaries") {
  std::vector<EventHistory> steady;
  for (int i = 0; i < 25; ++i) {
    steady.push_back(history_with_kinds(static_cast<NodeId>(i % 3), 1 + 5 * i, 4));
  }
  CalibrationResult cal = calibrate(steady, 128, 9);
  CHECK(cal.degenerate);
  CHECK(cal.epsilon == 0.01);
}

TEST_CASE("calibration lands at or below the family's true similarity") {
  // Summaries share a 12-kind core and vary by one extra kind: pairwise
  // Jaccard stays around 0.75; the calibrated threshold must not exceed it.
  std::vector<EventHistory> steady;
  Rng rng(77);
  for (int i = 0; i < 30; ++i) {
    EventHistory h = history_with_kinds(0, 1, 6);
    Event extra;
    extra.node = 0;
    extra.kind = EventKind::code(20 + static_cast<std::uint32_t>(rng.below(3)));
    h.update(extra);
    steady.push_back(std::move(h));
  }
  double lo = 1.0;
  for (std::size_t i = 1; i < steady.size(); ++i) {
    lo = std::min(lo, exact_jaccard(steady[0].items(), steady[i].items()));
  }
  CalibrationResult cal = calibrate(steady, 128, 9);
  CHECK_FALSE(cal.degenerate);
  CHECK(cal.coincide_fraction >= 0.9);
  CHECK(cal.epsilon <= 0.9);  // well under 1.0: the family is not identical
}

TEST_CASE("calibration demands enough summaries") {
  std::vector<EventHistory> steady(10, history_with_kinds(0, 1, 4));
  CHECK_THROWS_AS(calibrate(steady, 128, 9), std::invalid_argument);
}
