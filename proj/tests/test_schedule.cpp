#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "schedule.hpp"

using difftv::Schedule;
using difftv::ScheduleParams;

namespace {

// deterministic pseudo-random doubles for the property test
struct XorShift {
  std::uint64_t s = 0x243F6A8885A308D3ULL;
  double next() {
    s ^= s << 13;
    s ^= s >> 7;
    s ^= s << 17;
    return (s >> 11) * 0x1.0p-53;
  }
};

}  // namespace

TEST_CASE("beta_1 equals T^-c0 and the cap bounds every beta_t") {
  const Schedule s = Schedule::build({10, 2.0, 1.5});
  CHECK(s.beta(1) == doctest::Approx(0.01).epsilon(1e-15));
  const double eta = 1.5 * std::log(10.0) / 10.0;
  for (int t = 1; t <= 10; ++t) {
    CHECK(s.beta(t) <= eta + 1e-16);
    CHECK(s.beta(t) > 0.0);
    CHECK(s.beta(t) < 1.0);
  }
}

TEST_CASE("beta_2 at (T=100, c0=2, c1=4) matches the frozen recurrence value") {
  const Schedule s = Schedule::build({100, 2.0, 4.0});
  const double eta = 4.0 * std::log(100.0) / 100.0;
  const double expected = eta * std::min(1e-4 * (1.0 + eta) * (1.0 + eta), 1.0);
  CHECK(s.beta(2) == doctest::Approx(expected).epsilon(1e-15));
  // regression constant, frozen from a direct evaluation of the recurrence
  CHECK(s.beta(2) == doctest::Approx(2.58321635889172802e-05).epsilon(1e-12));
}

TEST_CASE("alpha_bar: first value, strict decrease, sigma^2 identity") {
  const Schedule s = Schedule::build({1000, 2.0, 4.0});
  CHECK(s.alpha_bar(1) == doctest::Approx(1.0 - 1e-6).epsilon(1e-15));
  for (int t = 2; t <= 1000; ++t) {
    CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
  }
  for (int t = 1; t <= 1000; ++t) {
    const double algebraic = (1.0 - s.alpha(t)) / s.alpha(t);
    CHECK(s.sigma_sq(t) == doctest::Approx(algebraic).epsilon(1e-14));
  }
  // alpha_bar_T <= (1 - c1 log T / T)^{T/2}
  const double eta = 4.0 * std::log(1000.0) / 1000.0;
  CHECK(s.alpha_bar(1000) <= std::pow(1.0 - eta, 500.0));
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(Schedule::build({1, 2.0, 4.0}), std::invalid_argument);
  CHECK_THROWS_AS(Schedule::build({100, -1.0, 4.0}), std::invalid_argument);
  CHECK_THROWS_AS(Schedule::build({100, 2.0, 0.0}), std::invalid_argument);
  // c1 log(T)/T >= 1/2 rejected: T=10 and T=25 with c1=4 under natural log
  CHECK_THROWS_AS(Schedule::build({10, 2.0, 4.0}), std::invalid_argument);
  CHECK_THROWS_AS(Schedule::build({25, 2.0, 4.0}), std::invalid_argument);
  CHECK_NOTHROW(Schedule::build({50, 2.0, 4.0}));
  const Schedule s = Schedule::build({50, 2.0, 4.0});
  CHECK_THROWS_AS(s.beta(0), std::out_of_range);
  CHECK_THROWS_AS(s.beta(51), std::out_of_range);
}

TEST_CASE("deterministic construction") {
  const Schedule a = Schedule::build({417, 1.7, 3.3});
  const Schedule b = Schedule::build({417, 1.7, 3.3});
  for (int t = 1; t <= 417; ++t) {
    CHECK(a.beta(t) == b.beta(t));
    CHECK(a.alpha_bar(t) == b.alpha_bar(t));
  }
}

TEST_CASE("all four properties hold at the default constants, T in {100, 1000}") {
  for (int T : {100, 1000}) {
    const Schedule s = Schedule::build({T, 2.0, 4.0});
    const auto rep = s.verify_properties();
    INFO("T=", T, " margins a=", rep.a.margin, " b=", rep.b.margin, " c=", rep.c.margin,
         " d=", rep.d.margin);
    CHECK(rep.a.pass);
    CHECK(rep.b.pass);
    CHECK(rep.c.pass);
    CHECK(rep.d.pass);
  }
}

TEST_CASE("property test: randomized valid params") {
  XorShift rng;
  int d_checked = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const int T = 8 + static_cast<int>(rng.next() * 4088);
    const double c0 = 1.0 + 3.0 * rng.next();
    const double c1_max = 0.4 * T / std::log(static_cast<double>(T));
    const double c1 = 1.0 + (c1_max - 1.0) * rng.next();
    const Schedule s = Schedule::build({T, c0, c1});
    const auto r = s.verify_properties();
    INFO("T=", T, " c0=", c0, " c1=", c1);
    CHECK(r.a.pass);
    CHECK(r.b.pass);
    CHECK(r.c.pass);
    // (d) is guaranteed once the rate cap activates by step T/2; outside that
    // regime the bound can genuinely fail (e.g. T=8, c0=4, c1=1), so it is
    // asserted conditionally here and unconditionally for the defaults above.
    if (s.beta(T / 2) == s.rate_cap()) {
      CHECK(r.d.pass);
    } else {
      ++d_checked;
    }
  }
  CHECK(d_checked < 200);  // the conditional branch must not be vacuous
}

TEST_CASE("hand-built constant beta = 0.9 fails property (a)") {
  std::vector<double> beta(101, 0.9);
  const Schedule s = Schedule::from_rates({100, 2.0, 4.0}, beta);
  const auto rep = s.verify_properties();
  CHECK_FALSE(rep.a.pass);
  CHECK(rep.a.margin < 0.0);
}

TEST_CASE("csv dump has the full table") {
  const Schedule s = Schedule::build({16, 2.0, 2.0});
  std::ostringstream os;
  s.write_csv(os);
  const std::string text = os.str();
  CHECK(text.rfind("t,beta,alpha,alpha_bar,sigma_sq\n", 0) == 0);
  int lines = 0;
  for (char ch : text) {
    if (ch == '\n') ++lines;
  }
  CHECK(lines == 17);
}
