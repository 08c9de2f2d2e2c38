#pragma once

#include <chrono>
#include <complex>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "rtcal/geo.hpp"
#include "rtcal/scene.hpp"

namespace rtcal {

inline constexpr double kSpeedOfLight = 299792458.0;     // m/s
inline constexpr double kVacuumPermittivity = 8.8541878128e-12;  // F/m
inline constexpr double kMinPathPowerDbm = -160.0;
inline constexpr double kTransmitPowerDbm = 0.0;
inline constexpr int kGroundSurface = -1;

enum class Polarization { te, tm };

enum class InteractionKind { wall_reflection, ground_reflection };

struct Interaction {
  InteractionKind kind = InteractionKind::wall_reflection;
  int surface_id = kGroundSurface;  // wall index into wall_segments(), or kGroundSurface
  LocalPosition point;
};

// One multipath arrival. An empty interaction list is the direct path.
struct PathComponent {
  double delay_ns = 0.0;
  double power_dbm = 0.0;
  std::vector<Interaction> interactions;

  bool line_of_sight() const { return interactions.empty(); }
};

struct PathList {
  std::vector<PathComponent> paths;  // ascending delay
  LocalPosition tx;
  LocalPosition rx;
  double frequency_hz = 0.0;
};

class ForwardModel {
 public:
  virtual ~ForwardModel() = default;
  // Must be deterministic. Implementations used by the optimizer with more
  // than one worker must also tolerate concurrent calls.
  virtual PathList trace(const LocalPosition& tx, const LocalPosition& rx) const = 0;
};

struct TraceOptions {
  int max_reflections = 2;
  Polarization polarization = Polarization::te;
  double min_power_dbm = kMinPathPowerDbm;
};

double wavelength_m(double frequency_hz);
double free_space_path_loss_db(double distance_m, double frequency_hz);

/// epsilon = eps_r - j sigma / (2 pi f eps0)
std::complex<double> complex_permittivity(const Material& m, double frequency_hz);

/// Air to lossy half-space reflection coefficient, `incidence_angle_rad`
/// measured from the surface normal.
std::complex<double> fresnel_reflection_coeff(const Material& m, double frequency_hz,
                                              double incidence_angle_rad, Polarization pol);

// Image-method tracer over a fixed scene: direct path plus every specular
// wall/ground reflection sequence up to max_reflections.
class ImageMethodModel final : public ForwardModel {
 public:
  explicit ImageMethodModel(Scene scene, TraceOptions options = {});

  PathList trace(const LocalPosition& tx, const LocalPosition& rx) const override;

  const Scene& scene() const { return scene_; }
  const std::vector<WallSegment>& walls() const { return walls_; }
  const TraceOptions& options() const { return options_; }

 private:
  Scene scene_;
  TraceOptions options_;
  std::vector<WallSegment> walls_;
};

PathList trace_image_method(const Scene& scene, const LocalPosition& tx, const LocalPosition& rx,
                            int max_reflections, const TraceOptions& options = {});

/// Sorts by delay and checks the PathList invariants.
void normalize_path_list(PathList& list);

// Wire format helpers for the external simulator protocol (one JSON object
// per line in each direction).
std::string format_external_request(const LocalPosition& tx, const LocalPosition& rx,
                                    double frequency_hz);
PathList parse_external_response(std::string_view line, const LocalPosition& tx,
                                 const LocalPosition& rx, double frequency_hz);

// Runs `command` through /bin/sh and talks to it over stdin/stdout. Calls
// are serialized on one subprocess.
class ExternalModel final : public ForwardModel {
 public:
  ExternalModel(std::string command, double frequency_hz,
                std::chrono::milliseconds timeout = std::chrono::seconds(30));
  ~ExternalModel() override;

  ExternalModel(const ExternalModel&) = delete;
  ExternalModel& operator=(const ExternalModel&) = delete;

  PathList trace(const LocalPosition& tx, const LocalPosition& rx) const override;

  struct Process;

 private:
  std::string command_;
  double frequency_hz_;
  std::chrono::milliseconds timeout_;
  mutable std::mutex mutex_;
  mutable std::unique_ptr<Process> process_;
};

}  // namespace rtcal
