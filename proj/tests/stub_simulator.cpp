// Stand-in external simulator speaking the newline-JSON protocol.
// Usage: stub_simulator MODE, MODE in fixed | unsorted | negative | garbage | exit | hang | los.

#include <chrono>
#include <cmath>
#include <iostream>
#include <numbers>
#include <string>
#include <thread>

#include <json.hpp>

using nlohmann::json;

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "fixed";
  std::string line;
  while (std::getline(std::cin, line)) {
    if (mode == "exit") return 3;
    if (mode == "hang") {
      std::this_thread::sleep_for(std::chrono::hours(1));
      return 0;
    }
    if (mode == "garbage") {
      std::cout << "not json" << std::endl;
      continue;
    }
    const json req = json::parse(line);
    json paths = json::array();
    if (mode == "fixed") {
      paths.push_back({{"delay_ns", 1000.0}, {"power_dbm", -80.0}});
    } else if (mode == "unsorted") {
      paths.push_back({{"delay_ns", 1200.0}, {"power_dbm", -90.0}});
      paths.push_back({{"delay_ns", 1000.0}, {"power_dbm", -80.0}});
      paths.push_back({{"delay_ns", 1100.0}, {"power_dbm", -85.0}});
    } else if (mode == "negative") {
      paths.push_back({{"delay_ns", -5.0}, {"power_dbm", -80.0}});
    } else if (mode == "los") {
      const auto& t = req["tx"];
      const auto& r = req["rx"];
      const double d = std::hypot(t[0].get<double>() - r[0].get<double>(), t[1].get<double>() - r[1].get<double>(),
                                  t[2].get<double>() - r[2].get<double>());
      const double lambda = 299792458.0 / req["frequency_hz"].get<double>();
      paths.push_back({{"delay_ns", d / 299792458.0 * 1e9},
                       {"power_dbm", -20.0 * std::log10(4.0 * std::numbers::pi * d / lambda)}});
    }
    std::cout << json{{"paths", paths}}.dump() << std::endl;
  }
  return 0;
}
