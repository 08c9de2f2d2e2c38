#pragma once

#include <cmath>

namespace rtcal {

inline constexpr double kEarthRadiusM = 6371000.0;
// Projection is only accepted this far from its center.
inline constexpr double kProjectionValidityRadiusM = 100000.0;

struct GeoPosition {
  double latitude_deg = 0.0;
  double longitude_deg = 0.0;
  double antenna_height_m = 0.0;
};

// Point in the scene frame: x east, y north, z up, meters.
struct LocalPosition {
  double x_m = 0.0;
  double y_m = 0.0;
  double z_m = 0.0;

  friend bool operator==(const LocalPosition&, const LocalPosition&) = default;
};

struct ProjectionCenter {
  double latitude_deg = 0.0;
  double longitude_deg = 0.0;
};

inline double horizontal_distance(const LocalPosition& a, const LocalPosition& b) {
  return std::hypot(a.x_m - b.x_m, a.y_m - b.y_m);
}

inline double distance(const LocalPosition& a, const LocalPosition& b) {
  const double dx = a.x_m - b.x_m;
  const double dy = a.y_m - b.y_m;
  const double dz = a.z_m - b.z_m;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

void validate(const GeoPosition& p);
void validate(const ProjectionCenter& c);

/// Great-circle distance on the spherical earth (haversine form).
double great_circle_distance_m(double lat1_deg, double lon1_deg, double lat2_deg, double lon2_deg);

/// Initial bearing from point 1 towards point 2, radians clockwise from north.
double forward_azimuth_rad(double lat1_deg, double lon1_deg, double lat2_deg, double lon2_deg);

/// Spherical azimuthal equidistant projection about `center`. The antenna
/// height becomes z unchanged. Throws InvalidArgument for out-of-range
/// coordinates or points farther than kProjectionValidityRadiusM.
LocalPosition project_to_local(const GeoPosition& p, const ProjectionCenter& center);

/// Inverse of project_to_local on the same sphere.
GeoPosition unproject_to_geo(const LocalPosition& p, const ProjectionCenter& center);

}  // namespace rtcal
