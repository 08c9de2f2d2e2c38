#pragma once

#include <cstddef>

#include "rtcal/align.hpp"
#include "rtcal/pdp.hpp"

namespace rtcal {

// Sentinel values. Ordered outage >> structural mismatch >> regular losses
// so every candidate, degenerate or not, can be ranked.
inline constexpr double kPeakMismatchPenalty = 10.0;
inline constexpr double kOutagePenalty = 100.0;
inline constexpr double kDisjointShapePenalty = kSignificanceWindowDb * kSignificanceWindowDb;

struct LossWeights {
  double alpha = 0.7;
  double beta = 0.05;
  double w_unmatched = 0.5;
  double tau_ref_ns = 500.0;
  double t_norm_ns = 100.0;
  double d_max_m = 10.0;

  void validate() const;
};

struct LossBreakdown {
  double l_peak = 0.0;
  double l_unmatched = 0.0;
  double l_shape = 0.0;
  double l_distance = 0.0;
  double total = 0.0;
  // Simulated profile was empty: total = kOutagePenalty + beta * l_distance
  // and the other components stay zero.
  bool outage = false;
  std::size_t n_sim_peaks = 0;
  std::size_t n_meas_peaks = 0;
  AlignmentResult alignment;
};

/// Mean over simulated peaks of the delay-weighted cost of the cheapest
/// measured peak (non-exclusive matching). kPeakMismatchPenalty when either
/// list is empty.
double peak_matching_loss(const PeakList& sim, const PeakList& meas, const LossWeights& weights);

double unmatched_peaks_penalty(std::size_t n_sim, std::size_t n_meas, const LossWeights& weights);

/// Mean squared dB difference over the bins where either profile (normalized
/// to a 0 dB maximum) lies within the significance window. Both profiles
/// must share a delay lattice.
double shape_loss(const PowerDelayProfile& sim, const PowerDelayProfile& meas);

// Two profiles laid out over the same bins.
struct CommonGrid {
  PowerDelayProfile sim;
  PowerDelayProfile meas;
};

/// Pads both profiles with floor bins to the union of their extents. `sim`
/// must lie on the lattice of `meas`.
CommonGrid to_common_grid(const PowerDelayProfile& sim, const PowerDelayProfile& meas);

double distance_regularizer(double d_tx_m, double d_rx_m, const LossWeights& weights);

double combine_loss(double l_peak, double l_unmatched, double l_shape, double l_distance,
                    const LossWeights& weights);

/// Aligns `sim` against `meas` (select_alignment on the measured grid) and
/// evaluates every component. d_tx_m / d_rx_m are the adjustments from the
/// initial positions.
LossBreakdown composite_loss(const PowerDelayProfile& sim, const PowerDelayProfile& meas, double d_tx_m,
                             double d_rx_m, const LossWeights& weights = {},
                             const AlignmentOptions& alignment = {});

}  // namespace rtcal
