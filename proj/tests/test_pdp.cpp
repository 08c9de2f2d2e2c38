#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "rtcal/error.hpp"
#include "rtcal/fixtures.hpp"
#include "rtcal/pdp.hpp"
#include "rtcal/scene.hpp"

using namespace rtcal;

namespace {

PathList paths_of(std::initializer_list<std::pair<double, double>> dp) {
  PathList l;
  for (const auto& [d, p] : dp) l.paths.push_back({d, p, {}});
  return l;
}

PowerDelayProfile profile(double t0, std::vector<double> v) {
  PowerDelayProfile p;
  p.t0_ns = t0;
  p.power_dbm = std::move(v);
  return p;
}

}  // namespace

TEST_SUITE("pdp") {
  TEST_CASE("single path lands in one bin") {
    const auto p = synthesize_pdp(paths_of({{1000.0, -80.0}}));
    REQUIRE(p.size() == 3);
    CHECK(p.t0_ns == 999.0);
    CHECK(p.power_dbm[0] == kFloorDbm);
    CHECK(p.power_dbm[1] == -80.0);
    CHECK(p.power_dbm[2] == kFloorDbm);
    CHECK(p.max_bin() == 1);
  }

  TEST_CASE("two equal paths in one bin double the power") {
    const auto p = synthesize_pdp(paths_of({{1000.1, -80.0}, {999.8, -80.0}}));
    CHECK(p.power_dbm[1] == doctest::Approx(-76.9897).epsilon(1e-6));
    CHECK(p.power_dbm[1] == doctest::Approx(-80.0 + 10.0 * std::log10(2.0)).epsilon(1e-13));
  }

  TEST_CASE("three-path fixture matches the direct summation oracle") {
    const std::vector<std::pair<double, double>> dp = {{250.3, -71.0}, {250.6, -74.5}, {263.2, -90.0},
                                                       {270.0, -170.0}};
    PathList l;
    for (const auto& [d, pw] : dp) l.paths.push_back({d, pw, {}});
    const auto p = synthesize_pdp(l, 1.0, -160.0);
    const auto want = oracle::direct_bin_sum(dp, 1.0, -160.0);
    std::size_t non_floor = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const auto k = std::llround(p.delay_at(i));
      if (auto it = want.find(k); it != want.end()) {
        CHECK(p.power_dbm[i] == doctest::Approx(it->second).epsilon(1e-12));
        ++non_floor;
      } else {
        CHECK(p.power_dbm[i] == kFloorDbm);
      }
    }
    CHECK(non_floor == want.size());
    CHECK(p.delay_at(p.size() - 1) == 264.0);  // the -170 dBm path is below the cutoff
  }

  TEST_CASE("no surviving path gives an empty profile") {
    CHECK(synthesize_pdp(PathList{}).empty());
    CHECK(synthesize_pdp(paths_of({{10.0, -170.0}})).empty());
    CHECK_THROWS_AS(synthesize_pdp(paths_of({{10.0, -70.0}}), 0.0), InvalidArgument);
  }

  TEST_CASE("binning conserves linear power") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> d(10.0, 900.0), pw(-150.0, -60.0);
    for (int trial = 0; trial < 50; ++trial) {
      PathList l;
      double total = 0.0;
      for (int i = 0; i < 40; ++i) {
        const double p = pw(rng);
        l.paths.push_back({d(rng), p, {}});
        total += dbm_to_mw(p);
      }
      const auto prof = synthesize_pdp(l, trial % 2 ? 1.0 : 2.5);
      CHECK(std::abs(total_linear_power_mw(prof) - total) <= 1e-12 * total);
    }
  }

  TEST_CASE("canyon profile conserves the traced power") {
    const Scene s = parse_scene(fixtures::canyon_scene_json());
    const ImageMethodModel m(s);
    const auto paths = m.trace(fixtures::kCanyonTxTruth, fixtures::kCanyonRxTruth);
    double total = 0.0;
    for (const auto& p : paths.paths) total += dbm_to_mw(p.power_dbm);
    const auto prof = simulate_pdp(m, fixtures::kCanyonTxTruth, fixtures::kCanyonRxTruth);
    CHECK(std::abs(total_linear_power_mw(prof) - total) <= 1e-12 * total);
  }

  TEST_CASE("threshold: peak - 25 dB governs") {
    const auto p = profile(0, {-60.0, -84.0, -85.0, -86.0, -99.0});
    const auto t = threshold_pdp(p, -100.0);
    CHECK(t.power_dbm == std::vector<double>{-60.0, -84.0, -85.0, kFloorDbm, kFloorDbm});
  }

  TEST_CASE("threshold: noise dominated profile becomes empty") {
    const auto t = threshold_pdp(profile(0, {-60.0, -61.0}), -62.0);
    CHECK(t.empty());
    CHECK_THROWS_AS(threshold_pdp(t, -100.0), EmptyProfileError);
  }

  TEST_CASE("threshold: -90 bin removed, -60 and -70 kept") {
    const auto t = threshold_pdp(profile(0, {-60.0, -70.0, -90.0}), -100.0);
    CHECK(t.power_dbm == std::vector<double>{-60.0, -70.0, kFloorDbm});
  }

  TEST_CASE("clamp_extent keeps the first 4094 ns") {
    PowerDelayProfile p = profile(100.0, std::vector<double>(5000, -90.0));
    const auto c = clamp_extent(p, kMaxMeasurableDelayNs);
    CHECK(c.size() == 4095);
    CHECK(c.delay_at(c.size() - 1) == 4194.0);
  }

  TEST_CASE("resampling onto an offset lattice") {
    const auto p = profile(10.0, {-70.0, -80.0, kFloorDbm});
    const auto same = resample_to_lattice(p, 0.0, 1.0);
    CHECK(same.power_dbm == p.power_dbm);
    CHECK(same.t0_ns == 10.0);
    const auto moved = resample_to_lattice(p, 0.4, 1.0);
    CHECK(std::abs(total_linear_power_mw(moved) - total_linear_power_mw(p)) <= 1e-12 * total_linear_power_mw(p));
  }

  TEST_CASE("CSV round trip") {
    std::mt19937_64 rng(3);
    const auto p = oracle::random_profile(rng, 64, 123.0);
    std::stringstream ss;
    write_pdp_csv(ss, p);
    const auto q = parse_pdp_csv(ss);
    CHECK(q.t0_ns == p.t0_ns);
    CHECK(q.bin_width_ns == p.bin_width_ns);
    CHECK(q.power_dbm == p.power_dbm);
  }

  TEST_CASE("CSV errors carry the line number") {
    auto err = [](const std::string& text) -> std::string {
      std::istringstream in(text);
      try {
        parse_pdp_csv(in, "m.csv");
      } catch (const ParseError& e) {
        return e.what();
      }
      return {};
    };
    CHECK(err("delay,power\n1,2\n").find("m.csv:1:") == 0);
    CHECK(err("delay_ns,power_dbm\n0,-80\n1,-81\n3,-82\n").find("m.csv:4:") == 0);
    CHECK(err("delay_ns,power_dbm\n0,-80\n0,-81\n").find("m.csv:3:") == 0);
    CHECK(err("delay_ns,power_dbm\n0,abc\n").find("m.csv:2:") == 0);
    CHECK(err("delay_ns,power_dbm\n0\n").find("m.csv:2:") == 0);
    CHECK(err("").find("missing header") != std::string::npos);
    CHECK(err("delay_ns,power_dbm\n0,-80\n1,-81\n") == "");
  }

  TEST_CASE("header-only CSV is an empty profile") {
    std::istringstream in("delay_ns,power_dbm\n");
    CHECK(parse_pdp_csv(in).empty());
  }
}
