#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "rtcal/raytrace.hpp"

namespace rtcal {

// Power value of a bin that holds no energy. Below anything physical.
inline constexpr double kFloorDbm = -200.0;
inline constexpr double kDefaultBinWidthNs = 1.0;
inline constexpr double kMaxMeasurableDelayNs = 4094.0;
// Significance window below the strongest bin.
inline constexpr double kSignificanceWindowDb = 25.0;

// Power on a uniform delay grid. A profile without a single bin above the
// floor is "empty"; that is how the outage / no-energy condition travels.
struct PowerDelayProfile {
  double t0_ns = 0.0;
  double bin_width_ns = kDefaultBinWidthNs;
  std::vector<double> power_dbm;
  double floor_dbm = kFloorDbm;

  std::size_t size() const { return power_dbm.size(); }
  double delay_at(std::size_t i) const { return t0_ns + static_cast<double>(i) * bin_width_ns; }
  bool empty() const;
  std::size_t max_bin() const;  // first bin holding the maximum; profile must not be empty
  double max_power_dbm() const;
};

struct Peak {
  double delay_ns = 0.0;
  double power_dbm = 0.0;
  double prominence_db = 0.0;
  std::size_t bin_index = 0;
};

struct PeakList {
  std::vector<Peak> peaks;  // ascending delay
};

struct PeakCriteria {
  double window_db = kSignificanceWindowDb;
  double prominence_fraction = 0.05;  // of window_db
  double min_prominence_db = 1.0;
  std::size_t min_bin_separation = 3;
  double min_separation_ns = 15.0;

  double prominence_threshold_db() const;
};

// How simulated path lists are turned into profiles for comparison.
struct PdpSettings {
  double bin_width_ns = kDefaultBinWidthNs;
  double cutoff_dbm = kMinPathPowerDbm;
  double max_extent_ns = kMaxMeasurableDelayNs;
};

/// Non-coherent power sum of each path into its nearest bin. The grid lies
/// on multiples of bin_width_ns and spans one bin beyond the first and last
/// arrivals. Returns an empty profile when no path survives the cutoff.
PowerDelayProfile synthesize_pdp(const PathList& paths, double bin_width_ns = kDefaultBinWidthNs,
                                 double cutoff_dbm = kMinPathPowerDbm);

/// Floors every bin below max(noise_floor + 5 dB, peak - 25 dB). The result
/// may be empty. Throws EmptyProfileError for an empty input.
PowerDelayProfile threshold_pdp(const PowerDelayProfile& p, double noise_floor_dbm);

/// Drops bins more than `max_span_ns` after the first bin.
PowerDelayProfile clamp_extent(const PowerDelayProfile& p, double max_span_ns);

PowerDelayProfile simulate_pdp(const ForwardModel& model, const LocalPosition& tx,
                               const LocalPosition& rx, const PdpSettings& settings = {});

/// Significant peaks: local maxima within the window below the profile
/// maximum, with enough prominence, then thinned by power priority to a
/// minimum bin separation and afterwards a minimum delay separation.
PeakList detect_peaks(const PowerDelayProfile& p, const PeakCriteria& criteria = {});

/// Topographic prominence of bin i. The profile is treated as floor-valued
/// outside its grid.
double peak_prominence_db(const PowerDelayProfile& p, std::size_t i);

/// Maps peak power linearly from [max - window, max] onto [0, 1].
std::vector<double> normalize_peak_powers(const PeakList& peaks, double window_db = kSignificanceWindowDb);

double total_linear_power_mw(const PowerDelayProfile& p);

inline double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }
inline double mw_to_dbm(double mw) { return 10.0 * std::log10(mw); }

/// Re-bins onto the lattice {grid_t0 + k * bin_width_ns}. Bins already on
/// the lattice keep their exact values.
PowerDelayProfile resample_to_lattice(const PowerDelayProfile& p, double grid_t0_ns, double bin_width_ns);

// CSV with header "delay_ns,power_dbm" and uniformly spaced, strictly
// increasing delays. Values are written with round-trip precision.
PowerDelayProfile parse_pdp_csv(std::istream& in, std::string_view source = "<csv>");
PowerDelayProfile load_pdp_csv(const std::filesystem::path& path);
void write_pdp_csv(std::ostream& out, const PowerDelayProfile& p);
void save_pdp_csv(const std::filesystem::path& path, const PowerDelayProfile& p);

}  // namespace rtcal
