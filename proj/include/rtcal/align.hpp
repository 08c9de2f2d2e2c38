#pragma once

#include <cstddef>
#include <optional>

#include "rtcal/pdp.hpp"

namespace rtcal {

enum class AlignmentMethod { max_peak, multi_peak_correlation };

// shift_ns is the simulated delay minus the matching measured delay;
// apply_shift(meas, shift_ns) puts the measured profile on top of the
// simulated one.
struct AlignmentResult {
  double shift_ns = 0.0;
  AlignmentMethod method = AlignmentMethod::max_peak;
  std::optional<double> correlation;  // set iff method is multi_peak_correlation
};

struct AlignmentOptions {
  double window_ns = 500.0;
  std::size_t min_overlap_bins = 8;
  double clamp_db = kSignificanceWindowDb;
  double min_correlation = 0.5;  // multi-peak wins only strictly above this
};

const char* to_string(AlignmentMethod m);

AlignmentResult align_max_peak(const PowerDelayProfile& sim, const PowerDelayProfile& meas);

/// Integer-bin shift in [-window, window] maximizing the Pearson correlation
/// of the two dB profiles, each normalized to 0 dB peak and clamped at
/// -clamp_db, compared on the measured grid with clamp-level padding
/// outside each profile. Ties go to the smaller |shift|, then to the
/// negative one. Throws UndefinedCorrelationError when no shift gives an
/// overlap of at least min_overlap_bins with non-constant data.
AlignmentResult align_multi_peak(const PowerDelayProfile& sim, const PowerDelayProfile& meas,
                                 double window_ns, const AlignmentOptions& options = {});

/// Same as align_multi_peak but reports the undefined case as nullopt.
std::optional<AlignmentResult> try_align_multi_peak(const PowerDelayProfile& sim,
                                                    const PowerDelayProfile& meas,
                                                    const AlignmentOptions& options = {});

/// Multi-peak result when its correlation exceeds min_correlation, else max-peak.
AlignmentResult select_alignment(const PowerDelayProfile& sim, const PowerDelayProfile& meas,
                                 const AlignmentOptions& options = {});

/// Translates the grid origin by `shift_ns` rounded to whole bins.
PowerDelayProfile apply_shift(const PowerDelayProfile& p, double shift_ns);

}  // namespace rtcal
