#include "rtcal/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rtcal/error.hpp"

namespace rtcal {

CommonGrid to_common_grid(const PowerDelayProfile& sim, const PowerDelayProfile& meas) {
  const double w = meas.bin_width_ns;
  if (std::abs(sim.bin_width_ns - w) > 1e-9 * w) {
    throw InvalidArgument("profiles must share a bin width");
  }
  const double offset = (sim.t0_ns - meas.t0_ns) / w;
  const long long sim_start = std::llround(offset);
  if (std::abs(offset - static_cast<double>(sim_start)) > 1e-6) {
    throw InvalidArgument("profiles are not on a common delay grid");
  }
  const long long sim_end = sim_start + static_cast<long long>(sim.size());
  const long long meas_end = static_cast<long long>(meas.size());
  const long long lo = std::min(sim_start, 0LL);
  const long long hi = std::max(sim_end, meas_end);

  CommonGrid grid;
  for (auto* p : {&grid.sim, &grid.meas}) {
    p->t0_ns = meas.t0_ns + static_cast<double>(lo) * w;
    p->bin_width_ns = w;
    p->power_dbm.assign(static_cast<std::size_t>(hi - lo), kFloorDbm);
  }
  grid.sim.floor_dbm = sim.floor_dbm;
  grid.meas.floor_dbm = meas.floor_dbm;
  for (std::size_t i = 0; i < sim.size(); ++i) {
    grid.sim.power_dbm[static_cast<std::size_t>(sim_start - lo) + i] = sim.power_dbm[i];
  }
  for (std::size_t i = 0; i < meas.size(); ++i) {
    grid.meas.power_dbm[static_cast<std::size_t>(-lo) + i] = meas.power_dbm[i];
  }
  for (auto* p : {&grid.sim, &grid.meas}) {
    for (double& v : p->power_dbm) v = std::max(v, p->floor_dbm);
  }
  return grid;
}

namespace {

// Profile in dB relative to its own maximum, clamped at -window.
std::vector<double> normalized_clamped(const PowerDelayProfile& p) {
  std::vector<double> out(p.size(), -kSignificanceWindowDb);
  if (p.empty()) return out;
  const double top = p.max_power_dbm();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.power_dbm[i] > p.floor_dbm) out[i] = std::max(p.power_dbm[i] - top, -kSignificanceWindowDb);
  }
  return out;
}

}  // namespace

void LossWeights::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must lie in [0, 1]");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw InvalidArgument("beta must be >= 0");
  if (!(w_unmatched > 0.0) || !(tau_ref_ns > 0.0) || !(t_norm_ns > 0.0) || !(d_max_m > 0.0)) {
    throw InvalidArgument("w_unmatched, tau_ref_ns, t_norm_ns and d_max_m must be > 0");
  }
}

double peak_matching_loss(const PeakList& sim, const PeakList& meas, const LossWeights& weights) {
  if (sim.peaks.empty() || meas.peaks.empty()) return kPeakMismatchPenalty;
  const auto sim_norm = normalize_peak_powers(sim);
  const auto meas_norm = normalize_peak_powers(meas);
  double sum = 0.0;
  for (std::size_t i = 0; i < sim.peaks.size(); ++i) {
    const double tau = sim.peaks[i].delay_ns;
    const double weight = std::exp(-tau / weights.tau_ref_ns);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < meas.peaks.size(); ++j) {
      const double cost = std::abs(tau - meas.peaks[j].delay_ns) / weights.t_norm_ns +
                          std::abs(sim_norm[i] - meas_norm[j]);
      best = std::min(best, weight * cost);
    }
    sum += best;
  }
  return sum / static_cast<double>(sim.peaks.size());
}

double unmatched_peaks_penalty(std::size_t n_sim, std::size_t n_meas, const LossWeights& weights) {
  const std::size_t most = std::max(n_sim, n_meas);
  if (most == 0) return 0.0;
  const std::size_t diff = n_sim > n_meas ? n_sim - n_meas : n_meas - n_sim;
  return weights.w_unmatched * static_cast<double>(diff) / static_cast<double>(most);
}

double shape_loss(const PowerDelayProfile& sim, const PowerDelayProfile& meas) {
  const CommonGrid grid = to_common_grid(sim, meas);
  const auto a = normalized_clamped(grid.sim);
  const auto b = normalized_clamped(grid.meas);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > -kSignificanceWindowDb || b[i] > -kSignificanceWindowDb) {
      const double d = a[i] - b[i];
      sum += d * d;
      ++count;
    }
  }
  if (count == 0) return kDisjointShapePenalty;
  return sum / static_cast<double>(count);
}

double distance_regularizer(double d_tx_m, double d_rx_m, const LossWeights& weights) {
  if (!(d_tx_m >= 0.0) || !(d_rx_m >= 0.0)) throw InvalidArgument("adjustment distances must be >= 0");
  return (d_tx_m * d_tx_m + d_rx_m * d_rx_m) / (weights.d_max_m * weights.d_max_m);
}

double combine_loss(double l_peak, double l_unmatched, double l_shape, double l_distance,
                    const LossWeights& weights) {
  return weights.alpha * (l_peak + l_unmatched) + (1.0 - weights.alpha) * l_shape +
         weights.beta * l_distance;
}

LossBreakdown composite_loss(const PowerDelayProfile& sim, const PowerDelayProfile& meas, double d_tx_m,
                             double d_rx_m, const LossWeights& weights,
                             const AlignmentOptions& alignment) {
  weights.validate();
  LossBreakdown out;
  out.l_distance = distance_regularizer(d_tx_m, d_rx_m, weights);
  if (meas.empty()) throw EmptyProfileError("measured profile is empty");
  if (sim.empty()) {
    out.outage = true;
    out.total = kOutagePenalty + weights.beta * out.l_distance;
    return out;
  }

  const PowerDelayProfile sim_on_grid = resample_to_lattice(sim, meas.t0_ns, meas.bin_width_ns);
  out.alignment = select_alignment(sim_on_grid, meas, alignment);
  const CommonGrid grid = to_common_grid(sim_on_grid, apply_shift(meas, out.alignment.shift_ns));

  const PeakList sim_peaks = detect_peaks(grid.sim);
  const PeakList meas_peaks = detect_peaks(grid.meas);
  out.n_sim_peaks = sim_peaks.peaks.size();
  out.n_meas_peaks = meas_peaks.peaks.size();
  out.l_peak = peak_matching_loss(sim_peaks, meas_peaks, weights);
  out.l_unmatched = unmatched_peaks_penalty(out.n_sim_peaks, out.n_meas_peaks, weights);
  out.l_shape = shape_loss(grid.sim, grid.meas);
  out.total = combine_loss(out.l_peak, out.l_unmatched, out.l_shape, out.l_distance, weights);
  return out;
}

}  // namespace rtcal
