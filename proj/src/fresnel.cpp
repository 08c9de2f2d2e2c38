#include <cmath>
#include <numbers>

#include "rtcal/error.hpp"
#include "rtcal/raytrace.hpp"

namespace rtcal {

double wavelength_m(double frequency_hz) { return kSpeedOfLight / frequency_hz; }

double free_space_path_loss_db(double distance_m, double frequency_hz) {
  return 20.0 * std::log10(4.0 * std::numbers::pi * distance_m / wavelength_m(frequency_hz));
}

std::complex<double> complex_permittivity(const Material& m, double frequency_hz) {
  const double omega = 2.0 * std::numbers::pi * frequency_hz;
  return {m.rel_permittivity, -m.conductivity_s_per_m / (omega * kVacuumPermittivity)};
}

std::complex<double> fresnel_reflection_coeff(const Material& m, double frequency_hz,
                                              double incidence_angle_rad, Polarization pol) {
  if (!(incidence_angle_rad >= 0.0) || incidence_angle_rad > std::numbers::pi / 2.0) {
    throw InvalidArgument("incidence angle must lie in [0, pi/2]");
  }
  const std::complex<double> eps = complex_permittivity(m, frequency_hz);
  const double cos_i = std::cos(incidence_angle_rad);
  const double sin_i = std::sin(incidence_angle_rad);
  const std::complex<double> root = std::sqrt(eps - sin_i * sin_i);
  if (pol == Polarization::te) return (cos_i - root) / (cos_i + root);
  return (eps * cos_i - root) / (eps * cos_i + root);
}

}  // namespace rtcal
