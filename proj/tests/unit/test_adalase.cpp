#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "adalase/error.hpp"
#include "adalase/ratios.hpp"

using namespace adalase;

namespace {

double sum(std::span<const double> q) { return std::accumulate(q.begin(), q.end(), 0.0); }

void check_invariants(const AcceptanceRatios& r) {
  CHECK(std::abs(sum(r.values()) - 1.0) <= 1e-9);
  for (double v : r.values()) {
    CHECK(v >= r.lower());
    CHECK(v <= r.upper());
  }
}

}  // namespace

TEST_CASE("init_ratios") {
  const auto k2 = AcceptanceRatios::init(2, 0.1);
  CHECK(k2[0] == 0.5);
  CHECK(k2[1] == 0.5);
  CHECK(k2.lower() == doctest::Approx(0.05));
  const auto k6 = AcceptanceRatios::init(6, 0.1);
  for (double v : k6.values()) CHECK(v == doctest::Approx(1.0 / 6.0));
  CHECK(AcceptanceRatios::init(5, 0.5).lower() == doctest::Approx(0.1));
  CHECK_THROWS_AS(AcceptanceRatios::init(1, 0.1), ConfigError);
  CHECK_THROWS_AS(AcceptanceRatios::init(3, 0.0), ConfigError);
}

TEST_CASE("from_values checks the invariants") {
  CHECK_NOTHROW(AcceptanceRatios::from_values({0.1, 0.9}, 0.05));
  CHECK_THROWS_AS(AcceptanceRatios::from_values({0.02, 0.98}, 0.05), ValidationError);
  CHECK_THROWS_AS(AcceptanceRatios::from_values({0.2, 0.7}, 0.05), ValidationError);
}

TEST_CASE("sample_position") {
  SUBCASE("a point mass always picks its position") {
    const std::vector<double> q = {1.0, 0.0};
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) CHECK(sample_position(q, rng) == 0);
  }
  SUBCASE("frequencies follow q") {
    const std::vector<double> q = {0.3, 0.7};
    Rng rng(2);
    std::size_t hits = 0;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) hits += sample_position(q, rng) == 0;
    CHECK(std::abs(static_cast<double>(hits) / draws - 0.3) < 0.01);
  }
  SUBCASE("identical seeds give identical sequences") {
    const auto q = AcceptanceRatios::init(4, 0.1);
    Rng a(3), b(3);
    for (int i = 0; i < 100; ++i) CHECK(sample_position(q, a) == sample_position(q, b));
  }
}

TEST_CASE("adalase_update") {
  AdaLaseConfig cfg;
  SUBCASE("a zero dot leaves the ratios unchanged") {
    auto r = AcceptanceRatios::init(3, 0.1);
    const std::vector<double> before(r.values().begin(), r.values().end());
    adalase_update(r, 1, 0.0, cfg);
    CHECK(std::vector<double>(r.values().begin(), r.values().end()) == before);
  }
  SUBCASE("step then normalize") {
    cfg.eta = 0.1;
    auto r = AcceptanceRatios::init(2, 0.1);
    CHECK(adalase_update(r, 0, 0.2, cfg));
    // (0.5 + 0.1 * 0.2, 0.5) / 1.02
    CHECK(r[0] == doctest::Approx(0.52 / 1.02).epsilon(1e-12));
    CHECK(r[1] == doctest::Approx(0.5 / 1.02).epsilon(1e-12));
    CHECK(r[0] == doctest::Approx(0.509804).epsilon(1e-6));
  }
  SUBCASE("clamp at the lower limit then normalize") {
    cfg.eta = 1.0;
    auto r = AcceptanceRatios::from_values({0.1, 0.9}, 0.05);
    adalase_update(r, 0, -1.0, cfg);
    // (0.05, 0.9) / 0.95
    CHECK(r[0] == doctest::Approx(0.05 / 0.95).epsilon(1e-12));
    CHECK(r[1] == doctest::Approx(0.9 / 0.95).epsilon(1e-12));
  }
  SUBCASE("non-finite dots are rejected") {
    auto r = AcceptanceRatios::init(2, 0.1);
    CHECK_FALSE(adalase_update(r, 0, std::numeric_limits<double>::quiet_NaN(), cfg));
    CHECK_FALSE(adalase_update(r, 0, std::numeric_limits<double>::infinity(), cfg));
    CHECK(r[0] == 0.5);
  }
  SUBCASE("position out of range") {
    auto r = AcceptanceRatios::init(2, 0.1);
    CHECK_THROWS_AS(adalase_update(r, 2, 0.1, cfg), RangeError);
  }
  SUBCASE("normalization that pushes other entries below d is corrected") {
    // Two entries sit at d = 0.05; raising the third to 1 - d and dividing by
    // the sum 1.05 would leave them at 0.0476.
    auto r = AcceptanceRatios::from_values({0.05, 0.05, 0.9}, 0.05);
    adalase_update(r, 2, 1.0, cfg);
    check_invariants(r);
    CHECK(r[0] == doctest::Approx(0.05));
    CHECK(r[2] == doctest::Approx(0.9));
  }
}

TEST_CASE("averaged_update") {
  AdaLaseConfig cfg;
  cfg.eta = 0.3;
  SUBCASE("identical entries equal a single update") {
    auto a = AcceptanceRatios::init(3, 0.1), b = a;
    const std::vector<WindowEntry> w(5, WindowEntry{1, 0.2});
    averaged_update(a, w, cfg);
    adalase_update(b, 1, 0.2, cfg);
    for (std::size_t i = 0; i < 3; ++i) CHECK(a[i] == b[i]);
  }
  SUBCASE("opposite dots cancel") {
    auto a = AcceptanceRatios::init(3, 0.1);
    const std::vector<WindowEntry> w = {{0, 0.4}, {0, -0.4}};
    averaged_update(a, w, cfg);
    for (std::size_t i = 0; i < 3; ++i) CHECK(a[i] == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("a one-entry window is bitwise the per-iteration update") {
    Rng rng(4);
    auto a = AcceptanceRatios::init(4, 0.1), b = a;
    for (int i = 0; i < 500; ++i) {
      const WindowEntry e{rng.uniform_index(4), rng.normal()};
      averaged_update(a, std::span(&e, 1), cfg);
      adalase_update(b, e.position, e.dot, cfg);
      for (std::size_t k = 0; k < 4; ++k) CHECK(a[k] == b[k]);
    }
  }
  SUBCASE("empty window is a no-op") {
    auto a = AcceptanceRatios::init(2, 0.1);
    CHECK_FALSE(averaged_update(a, {}, cfg));
    CHECK(a[0] == 0.5);
  }
}

TEST_CASE("ratio invariants under random updates") {
  Rng rng(5);
  AdaLaseConfig cfg;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + rng.uniform_index(6);
    auto r = AcceptanceRatios::init(k, rng.uniform(0.01, 0.9));
    for (int step = 0; step < 100; ++step) {
      const double mag = std::pow(10.0, rng.uniform(-6, 6));
      adalase_update(r, rng.uniform_index(k), rng.bernoulli(0.5) ? mag : -mag, cfg);
      check_invariants(r);
    }
  }
}

TEST_CASE("sign behaviour: positive dots raise q_l and lower the rest") {
  Rng rng(6);
  AdaLaseConfig cfg;
  cfg.eta = 0.05;
  for (int trial = 0; trial < 200; ++trial) {
    auto r = AcceptanceRatios::init(4, 0.1);
    const std::size_t l = rng.uniform_index(4);
    const double dot = rng.uniform(0.01, 1.0) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
    const std::vector<double> before(r.values().begin(), r.values().end());
    adalase_update(r, l, dot, cfg);
    for (std::size_t i = 0; i < 4; ++i) {
      if (i == l) {
        CHECK((dot > 0 ? r[i] > before[i] : r[i] < before[i]));
      } else {
        CHECK((dot > 0 ? r[i] < before[i] : r[i] > before[i]));
      }
    }
  }
}

TEST_CASE("eta times dot is what matters") {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const double c = std::pow(2.0, static_cast<double>(rng.uniform_index(10)) - 5.0);
    AdaLaseConfig a, b;
    a.eta = 0.5;
    b.eta = 0.5 / c;
    auto ra = AcceptanceRatios::init(3, 0.1), rb = ra;
    std::vector<WindowEntry> wa, wb;
    for (int i = 0; i < 6; ++i) {
      const WindowEntry e{rng.uniform_index(3), rng.normal()};
      wa.push_back(e);
      wb.push_back({e.position, e.dot * c});
    }
    averaged_update(ra, wa, a);
    averaged_update(rb, wb, b);
    for (std::size_t i = 0; i < 3; ++i) CHECK(ra[i] == doctest::Approx(rb[i]).epsilon(1e-12));
  }
}

TEST_CASE("revivability: every position keeps at least d") {
  AdaLaseConfig cfg;
  auto r = AcceptanceRatios::init(3, 0.1);
  for (int i = 0; i < 1000; ++i) adalase_update(r, 0, -1e6, cfg);
  CHECK(r[0] == doctest::Approx(r.lower()));
  adalase_update(r, 0, 0.5, cfg);
  CHECK(r[0] > r.lower());
}

TEST_CASE("schedule_ratios") {
  const auto uni = schedule_ratios(RatioSchedule::parse("uniform"), 6);
  for (double v : uni) CHECK(v == doctest::Approx(1.0 / 6.0));
  CHECK(schedule_ratios(RatioSchedule::parse("fixed:0"), 6) ==
        std::vector<double>{1, 0, 0, 0, 0, 0});
  const auto inc = schedule_ratios(RatioSchedule::parse("linear_inc"), 3);
  CHECK(inc[0] == doctest::Approx(1.0 / 6.0));
  CHECK(inc[1] == doctest::Approx(2.0 / 6.0));
  CHECK(inc[2] == doctest::Approx(3.0 / 6.0));
  const auto dec = schedule_ratios(RatioSchedule::parse("linear_dec"), 3);
  CHECK(dec[0] == doctest::Approx(3.0 / 6.0));
  // Mountain favours the ends (next to input and output), valley the middle.
  const auto m = schedule_ratios(RatioSchedule::parse("mountain"), 6);
  const auto v = schedule_ratios(RatioSchedule::parse("valley"), 6);
  // weights 1, 1/2, 1/3, 1/3, 1/2, 1 (sum 11/3) and 1, 2, 3, 3, 2, 1 (sum 12)
  CHECK(m[0] == doctest::Approx(3.0 / 11.0));
  CHECK(m[2] == doctest::Approx(1.0 / 11.0));
  CHECK(v[0] == doctest::Approx(1.0 / 12.0));
  CHECK(v[2] == doctest::Approx(3.0 / 12.0));
  for (const auto* s : {&uni, &inc, &dec, &m, &v}) CHECK(sum(*s) == doctest::Approx(1.0));
  CHECK_THROWS_AS(schedule_ratios(RatioSchedule::parse("fixed:6"), 6), RangeError);
}

TEST_CASE("schedule names parse and print") {
  for (const char* s : {"adaptive", "uniform", "fixed:3", "linear_inc", "linear_dec", "mountain",
                        "valley"}) {
    CHECK(RatioSchedule::parse(s).str() == s);
  }
  CHECK_THROWS_AS(RatioSchedule::parse("fixed:"), ConfigError);
  CHECK_THROWS_AS(RatioSchedule::parse("bell"), ConfigError);
}

TEST_CASE("config validation names the field") {
  AdaLaseConfig cfg;
  cfg.eta = -1.0;
  try {
    cfg.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()) == "adalase.eta must be > 0");
    CHECK(e.field() == "adalase.eta");
  }
}
