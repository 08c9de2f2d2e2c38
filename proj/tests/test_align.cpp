#include <doctest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "rtcal/align.hpp"
#include "rtcal/error.hpp"

using namespace rtcal;

namespace {

PowerDelayProfile structured(double t0 = 100.0) {
  PowerDelayProfile p;
  p.t0_ns = t0;
  p.power_dbm.assign(200, kFloorDbm);
  const std::pair<std::size_t, double> spikes[] = {{20, -65.0}, {45, -72.0}, {48, -75.0}, {90, -80.0},
                                                   {130, -70.0}, {160, -86.0}};
  for (const auto& [i, v] : spikes) {
    for (int d = -2; d <= 2; ++d) p.power_dbm[i + d] = std::max(p.power_dbm[i + d], v - 4.0 * std::abs(d));
  }
  return p;
}

PowerDelayProfile delayed(const PowerDelayProfile& p, double ns) {
  PowerDelayProfile q = p;
  q.t0_ns += ns;
  return q;
}

// Lifted dB values over [lo, hi) in whole bins, zero outside the profile.
std::vector<double> lifted_on(const PowerDelayProfile& p, long long lo, long long hi) {
  std::vector<double> v;
  const double top = p.max_power_dbm();
  for (long long k = lo; k < hi; ++k) {
    const long long i = k - std::llround(p.t0_ns / p.bin_width_ns);
    double x = 0.0;
    if (i >= 0 && i < static_cast<long long>(p.size())) x = std::max(p.power_dbm[i] - top + 25.0, 0.0);
    v.push_back(x);
  }
  return v;
}

}  // namespace

TEST_SUITE("align") {
  TEST_CASE("max-peak: identical and translated profiles") {
    const auto p = structured();
    CHECK(align_max_peak(p, p).shift_ns == 0.0);
    CHECK(align_max_peak(p, delayed(p, 37.0)).shift_ns == -37.0);
    CHECK(align_max_peak(p, p).method == AlignmentMethod::max_peak);
    CHECK_FALSE(align_max_peak(p, p).correlation);
  }

  TEST_CASE("max-peak follows the argmax, not the first arrival") {
    auto sim = structured();
    auto meas = structured();
    meas.power_dbm[130] = -60.0;  // strongest bin is now late
    const auto sim_arg = std::max_element(sim.power_dbm.begin(), sim.power_dbm.end()) - sim.power_dbm.begin();
    const auto meas_arg = std::max_element(meas.power_dbm.begin(), meas.power_dbm.end()) - meas.power_dbm.begin();
    CHECK(align_max_peak(sim, meas).shift_ns == static_cast<double>(sim_arg - meas_arg));
  }

  TEST_CASE("multi-peak: identical profiles") {
    const auto p = structured();
    const auto r = align_multi_peak(p, p, 500.0);
    CHECK(r.shift_ns == 0.0);
    CHECK(*r.correlation == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("multi-peak: exact recovery of translations") {
    const auto p = structured();
    for (int k : {-120, -23, -1, 1, 23, 77, 200}) {
      const auto r = align_multi_peak(p, delayed(p, k), 500.0);
      CHECK(r.shift_ns == -k);
      CHECK(*r.correlation == doctest::Approx(1.0).epsilon(1e-12));
    }
    // Outside the window the true shift is not reachable.
    CHECK(align_multi_peak(p, delayed(p, 23), 10.0).shift_ns != -23.0);
  }

  TEST_CASE("multi-peak correlation equals Pearson over the union extent") {
    const auto sim = structured(100.0);
    auto meas = structured(130.0);
    meas.power_dbm[90] = -70.0;
    const auto r = align_multi_peak(sim, meas, 500.0);
    const auto shifted = apply_shift(meas, r.shift_ns);
    const long long lo = std::min(std::llround(sim.t0_ns), std::llround(shifted.t0_ns));
    const long long hi = std::max(std::llround(sim.delay_at(sim.size())), std::llround(shifted.delay_at(shifted.size())));
    CHECK(*r.correlation == doctest::Approx(oracle::pearson(lifted_on(sim, lo, hi), lifted_on(shifted, lo, hi)))
                                .epsilon(1e-12));
  }

  TEST_CASE("noisy shifted copies are recovered within one bin") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> noise(-3.0, 3.0);
    std::uniform_int_distribution<int> shift(-60, 60);
    for (int trial = 0; trial < 100; ++trial) {
      const auto sim = oracle::random_profile(rng, 250, 0.0);
      const int k = shift(rng);
      auto meas = delayed(sim, k);
      for (double& v : meas.power_dbm) v += noise(rng);
      const auto r = align_multi_peak(sim, meas, 500.0);
      CHECK(std::abs(r.shift_ns + k) <= 1.0);
    }
  }

  TEST_CASE("uniform dB offsets leave the correlation unchanged") {
    const auto sim = structured();
    auto meas = delayed(structured(), 5.0);
    meas.power_dbm[45] = -66.0;
    auto louder = meas;
    for (double& v : louder.power_dbm) v += 12.0;
    const auto a = align_multi_peak(sim, meas, 500.0);
    const auto b = align_multi_peak(sim, louder, 500.0);
    CHECK(a.shift_ns == b.shift_ns);
    CHECK(*a.correlation == doctest::Approx(*b.correlation).epsilon(1e-12));
  }

  TEST_CASE("too little overlap is undefined") {
    PowerDelayProfile a, b;
    a.power_dbm = {-70.0, -80.0, -75.0};
    b.power_dbm = {-70.0, -80.0, -75.0};
    CHECK_THROWS_AS(align_multi_peak(a, b, 500.0), UndefinedCorrelationError);
    CHECK_FALSE(try_align_multi_peak(a, b));
    CHECK(select_alignment(a, b).method == AlignmentMethod::max_peak);
    CHECK_THROWS_AS(align_multi_peak(a, b, 0.0), InvalidArgument);
  }

  TEST_CASE("selection rule") {
    const auto p = structured();
    const auto same = select_alignment(p, p);
    CHECK(same.method == AlignmentMethod::multi_peak_correlation);

    const auto moved = select_alignment(p, delayed(p, 41.0));
    CHECK(moved.method == AlignmentMethod::multi_peak_correlation);
    CHECK(moved.shift_ns == -41.0);

    // A lone spike against a long shelf correlates poorly under every shift.
    PowerDelayProfile sim, meas;
    sim.power_dbm.assign(300, kFloorDbm);
    sim.power_dbm[100] = -60.0;
    meas.power_dbm.assign(300, kFloorDbm);
    for (std::size_t i = 50; i < 250; ++i) meas.power_dbm[i] = -73.0;
    meas.power_dbm[150] = -60.0;
    const auto multi = try_align_multi_peak(sim, meas);
    REQUIRE(multi);
    CHECK(*multi->correlation <= 0.5);
    const auto chosen = select_alignment(sim, meas);
    CHECK(chosen.method == AlignmentMethod::max_peak);
    CHECK(chosen.shift_ns == -50.0);
  }

  TEST_CASE("select never returns a weak multi-peak result") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 100; ++trial) {
      const auto a = oracle::random_profile(rng, 150, 0.0);
      const auto b = oracle::random_profile(rng, 150, 30.0);
      const auto r = select_alignment(a, b);
      if (r.method == AlignmentMethod::multi_peak_correlation) CHECK(*r.correlation > 0.5);
      CHECK(std::abs(r.shift_ns) <= 500.0);
    }
  }

  TEST_CASE("apply_shift") {
    const auto p = structured();
    const auto q = apply_shift(p, 10.0);
    CHECK(q.t0_ns == p.t0_ns + 10.0);
    CHECK(q.power_dbm == p.power_dbm);
    CHECK(apply_shift(q, -10.0).t0_ns == p.t0_ns);
    CHECK(apply_shift(p, 0.0).t0_ns == p.t0_ns);
    CHECK(apply_shift(p, 2.4).t0_ns == p.t0_ns + 2.0);
  }
}
