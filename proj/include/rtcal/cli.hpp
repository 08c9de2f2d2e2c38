#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "rtcal/geo.hpp"
#include "rtcal/loss.hpp"
#include "rtcal/optimizer.hpp"

namespace rtcal::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInputError = 2;

inline constexpr double kDefaultNoiseFloorDbm = -170.0;

struct RunConfig {
  std::string scene;
  std::string meas;
  std::string tx;  // "x,y,z", "local:x,y,z" or "geo:lat,lon,h"
  std::string rx;
  std::optional<double> frequency_hz;  // overrides the scene frequency
  std::string model = "builtin";       // builtin | external
  std::string external_cmd;
  std::size_t workers = 1;
  std::string out;
  double noise_floor_dbm = kDefaultNoiseFloorDbm;
  int max_reflections = 2;
  std::string polarization = "te";
  OptimizerConfig optimizer;
  LossWeights weights;
};

/// Reads a JSON config file. Relative paths inside it resolve against the
/// file's directory. Unknown keys are rejected.
RunConfig load_run_config(const std::filesystem::path& path);
void apply_config_json(RunConfig& cfg, const nlohmann::json& j, const std::filesystem::path& base_dir);
nlohmann::json to_json(const RunConfig& cfg);
nlohmann::json to_json(const LossBreakdown& l);

LocalPosition parse_position(std::string_view text, const std::optional<ProjectionCenter>& center);

/// Writes the canyon scene, a synthetic measured profile and a matching
/// calibration config into `dir`.
void seed_fixtures(const std::filesystem::path& dir);

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rtcal::cli
