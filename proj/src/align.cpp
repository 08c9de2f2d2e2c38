#include "rtcal/align.hpp"

#include <algorithm>
#include <cmath>

#include "rtcal/error.hpp"

namespace rtcal {
namespace {

// dB values lifted so the clamp level sits at zero: max(v - peak + clamp, 0).
std::vector<double> lifted(const PowerDelayProfile& p, double clamp_db) {
  const double top = p.max_power_dbm();
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = std::max(p.power_dbm[i] - top + clamp_db, 0.0);
  return out;
}

void require_energy(const PowerDelayProfile& p, const char* label) {
  if (p.empty()) throw EmptyProfileError(std::string(label) + " profile is empty");
}

}  // namespace

const char* to_string(AlignmentMethod m) {
  return m == AlignmentMethod::max_peak ? "max-peak" : "multi-peak-correlation";
}

AlignmentResult align_max_peak(const PowerDelayProfile& sim, const PowerDelayProfile& meas) {
  require_energy(sim, "simulated");
  require_energy(meas, "measured");
  return {sim.delay_at(sim.max_bin()) - meas.delay_at(meas.max_bin()), AlignmentMethod::max_peak,
          std::nullopt};
}

std::optional<AlignmentResult> try_align_multi_peak(const PowerDelayProfile& sim,
                                                    const PowerDelayProfile& meas,
                                                    const AlignmentOptions& options) {
  require_energy(sim, "simulated");
  require_energy(meas, "measured");
  if (!(options.window_ns > 0.0)) throw InvalidArgument("alignment window must be > 0 ns");

  const double w = meas.bin_width_ns;
  const PowerDelayProfile sim_on_grid = resample_to_lattice(sim, meas.t0_ns, w);
  const auto a = lifted(sim_on_grid, options.clamp_db);
  const auto b = lifted(meas, options.clamp_db);
  const long long a_start = std::llround((sim_on_grid.t0_ns - meas.t0_ns) / w);
  const long long na = static_cast<long long>(a.size());
  const long long nb = static_cast<long long>(b.size());

  double sa = 0.0, saa = 0.0, sb = 0.0, sbb = 0.0;
  for (double v : a) {
    sa += v;
    saa += v * v;
  }
  for (double v : b) {
    sb += v;
    sbb += v * v;
  }

  const auto max_shift = static_cast<long long>(std::floor(options.window_ns / w + 1e-9));
  std::optional<AlignmentResult> best;
  for (long long step = 0; step <= 2 * max_shift; ++step) {
    // 0, -1, +1, -2, +2, ...
    const long long s = step % 2 == 1 ? -(step + 1) / 2 : step / 2;
    const long long b_start = s;
    const long long lo = std::max(a_start, b_start);
    const long long hi = std::min(a_start + na, b_start + nb);
    if (hi - lo < static_cast<long long>(options.min_overlap_bins)) continue;
    const double n = static_cast<double>(std::max(a_start + na, b_start + nb) - std::min(a_start, b_start));

    double sab = 0.0;
    for (long long k = lo; k < hi; ++k) {
      sab += a[static_cast<std::size_t>(k - a_start)] * b[static_cast<std::size_t>(k - b_start)];
    }
    const double var_a = n * saa - sa * sa;
    const double var_b = n * sbb - sb * sb;
    if (!(var_a > 0.0) || !(var_b > 0.0)) continue;
    const double corr = (n * sab - sa * sb) / std::sqrt(var_a * var_b);
    if (!best || corr > *best->correlation) {
      best = AlignmentResult{static_cast<double>(s) * w, AlignmentMethod::multi_peak_correlation, corr};
    }
  }
  return best;
}

AlignmentResult align_multi_peak(const PowerDelayProfile& sim, const PowerDelayProfile& meas,
                                 double window_ns, const AlignmentOptions& options) {
  AlignmentOptions opts = options;
  opts.window_ns = window_ns;
  auto result = try_align_multi_peak(sim, meas, opts);
  if (!result) {
    throw UndefinedCorrelationError("no shift within the window gives a defined correlation over >= " +
                                    std::to_string(opts.min_overlap_bins) + " overlapping bins");
  }
  return *result;
}

AlignmentResult select_alignment(const PowerDelayProfile& sim, const PowerDelayProfile& meas,
                                 const AlignmentOptions& options) {
  if (auto multi = try_align_multi_peak(sim, meas, options)) {
    if (*multi->correlation > options.min_correlation) return *multi;
  }
  return align_max_peak(sim, meas);
}

PowerDelayProfile apply_shift(const PowerDelayProfile& p, double shift_ns) {
  PowerDelayProfile out = p;
  out.t0_ns += std::round(shift_ns / p.bin_width_ns) * p.bin_width_ns;
  return out;
}

}  // namespace rtcal
