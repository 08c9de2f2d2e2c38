#include "rtcal/pdp.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "rtcal/error.hpp"

namespace rtcal {
namespace {

// Linear accumulator that remembers the exact dB value of a lone contributor,
// so re-binning a profile that is already on the target grid is lossless.
struct BinSum {
  double linear_mw = 0.0;
  double single_dbm = 0.0;
  int count = 0;

  void add(double dbm) {
    linear_mw += dbm_to_mw(dbm);
    single_dbm = dbm;
    ++count;
  }

  double value(double floor_dbm) const {
    if (count == 0) return floor_dbm;
    if (count == 1) return single_dbm;
    return std::max(mw_to_dbm(linear_mw), floor_dbm);
  }
};

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace

bool PowerDelayProfile::empty() const {
  return std::none_of(power_dbm.begin(), power_dbm.end(), [&](double v) { return v > floor_dbm; });
}

std::size_t PowerDelayProfile::max_bin() const {
  if (empty()) throw EmptyProfileError("profile holds no energy");
  return static_cast<std::size_t>(std::max_element(power_dbm.begin(), power_dbm.end()) - power_dbm.begin());
}

double PowerDelayProfile::max_power_dbm() const { return power_dbm[max_bin()]; }

double PeakCriteria::prominence_threshold_db() const {
  return std::max(prominence_fraction * window_db, min_prominence_db);
}

PowerDelayProfile synthesize_pdp(const PathList& paths, double bin_width_ns, double cutoff_dbm) {
  if (!(bin_width_ns > 0.0) || !std::isfinite(bin_width_ns)) {
    throw InvalidArgument("bin width must be > 0 ns");
  }
  PowerDelayProfile out;
  out.bin_width_ns = bin_width_ns;

  std::vector<std::pair<long long, double>> deposits;
  for (const auto& path : paths.paths) {
    if (!(path.power_dbm >= cutoff_dbm)) continue;
    deposits.emplace_back(std::llround(path.delay_ns / bin_width_ns), path.power_dbm);
  }
  if (deposits.empty()) return out;

  long long kmin = deposits.front().first;
  long long kmax = kmin;
  for (const auto& [k, _] : deposits) {
    kmin = std::min(kmin, k);
    kmax = std::max(kmax, k);
  }
  const long long first = kmin - 1;
  std::vector<BinSum> bins(static_cast<std::size_t>(kmax - kmin + 3));
  for (const auto& [k, dbm] : deposits) bins[static_cast<std::size_t>(k - first)].add(dbm);

  out.t0_ns = static_cast<double>(first) * bin_width_ns;
  out.power_dbm.reserve(bins.size());
  for (const auto& b : bins) out.power_dbm.push_back(b.value(out.floor_dbm));
  return out;
}

PowerDelayProfile threshold_pdp(const PowerDelayProfile& p, double noise_floor_dbm) {
  if (p.empty()) throw EmptyProfileError("cannot threshold an empty profile");
  const double threshold = std::max(noise_floor_dbm + 5.0, p.max_power_dbm() - kSignificanceWindowDb);
  PowerDelayProfile out = p;
  for (double& v : out.power_dbm) {
    if (v < threshold) v = out.floor_dbm;
  }
  return out;
}

PowerDelayProfile clamp_extent(const PowerDelayProfile& p, double max_span_ns) {
  PowerDelayProfile out = p;
  const auto keep = static_cast<std::size_t>(std::floor(max_span_ns / p.bin_width_ns)) + 1;
  if (out.power_dbm.size() > keep) out.power_dbm.resize(keep);
  return out;
}

PowerDelayProfile simulate_pdp(const ForwardModel& model, const LocalPosition& tx,
                               const LocalPosition& rx, const PdpSettings& settings) {
  return clamp_extent(synthesize_pdp(model.trace(tx, rx), settings.bin_width_ns, settings.cutoff_dbm),
                      settings.max_extent_ns);
}

double peak_prominence_db(const PowerDelayProfile& p, std::size_t i) {
  const auto& v = p.power_dbm;
  const double height = v[i];

  double left_base = height;
  bool left_edge = true;
  for (std::size_t j = i; j-- > 0;) {
    if (v[j] > height) {
      left_edge = false;
      break;
    }
    left_base = std::min(left_base, v[j]);
  }
  if (left_edge) left_base = std::min(left_base, p.floor_dbm);

  double right_base = height;
  bool right_edge = true;
  for (std::size_t j = i + 1; j < v.size(); ++j) {
    if (v[j] > height) {
      right_edge = false;
      break;
    }
    right_base = std::min(right_base, v[j]);
  }
  if (right_edge) right_base = std::min(right_base, p.floor_dbm);

  return height - std::max(left_base, right_base);
}

PeakList detect_peaks(const PowerDelayProfile& p, const PeakCriteria& criteria) {
  PeakList out;
  if (p.empty()) return out;
  const auto& v = p.power_dbm;
  const double min_power = p.max_power_dbm() - criteria.window_db;
  const double min_prominence = criteria.prominence_threshold_db();

  std::vector<Peak> candidates;
  for (std::size_t i = 0; i < v.size();) {
    std::size_t r = i;
    while (r + 1 < v.size() && v[r + 1] == v[i]) ++r;
    const double left = i == 0 ? p.floor_dbm : v[i - 1];
    const double right = r + 1 == v.size() ? p.floor_dbm : v[r + 1];
    if (v[i] > p.floor_dbm && left < v[i] && right < v[i] && v[i] >= min_power) {
      const std::size_t mid = i + (r - i) / 2;
      const double prominence = peak_prominence_db(p, mid);
      if (prominence >= min_prominence) candidates.push_back({p.delay_at(mid), v[mid], prominence, mid});
    }
    i = r + 1;
  }

  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Peak& a, const Peak& b) { return a.power_dbm > b.power_dbm; });

  std::vector<Peak> spaced;
  for (const auto& c : candidates) {
    const bool clear = std::all_of(spaced.begin(), spaced.end(), [&](const Peak& k) {
      const std::size_t gap = c.bin_index > k.bin_index ? c.bin_index - k.bin_index : k.bin_index - c.bin_index;
      return gap >= criteria.min_bin_separation;
    });
    if (clear) spaced.push_back(c);
  }
  for (const auto& c : spaced) {
    const bool clear = std::all_of(out.peaks.begin(), out.peaks.end(), [&](const Peak& k) {
      return std::abs(c.delay_ns - k.delay_ns) >= criteria.min_separation_ns - 1e-9;
    });
    if (clear) out.peaks.push_back(c);
  }

  std::sort(out.peaks.begin(), out.peaks.end(),
            [](const Peak& a, const Peak& b) { return a.bin_index < b.bin_index; });
  return out;
}

std::vector<double> normalize_peak_powers(const PeakList& peaks, double window_db) {
  std::vector<double> out;
  if (peaks.peaks.empty()) return out;
  double top = -std::numeric_limits<double>::infinity();
  for (const auto& pk : peaks.peaks) top = std::max(top, pk.power_dbm);
  out.reserve(peaks.peaks.size());
  for (const auto& pk : peaks.peaks) {
    out.push_back(std::clamp((pk.power_dbm - top + window_db) / window_db, 0.0, 1.0));
  }
  return out;
}

double total_linear_power_mw(const PowerDelayProfile& p) {
  double sum = 0.0;
  for (double v : p.power_dbm) {
    if (v > p.floor_dbm) sum += dbm_to_mw(v);
  }
  return sum;
}

PowerDelayProfile resample_to_lattice(const PowerDelayProfile& p, double grid_t0_ns, double bin_width_ns) {
  PowerDelayProfile out;
  out.bin_width_ns = bin_width_ns;
  out.floor_dbm = p.floor_dbm;
  out.t0_ns = grid_t0_ns;
  if (p.power_dbm.empty()) return out;

  auto lattice_index = [&](std::size_t i) {
    return std::llround((p.delay_at(i) - grid_t0_ns) / bin_width_ns);
  };
  const long long kmin = lattice_index(0);
  const long long kmax = lattice_index(p.size() - 1);
  std::vector<BinSum> bins(static_cast<std::size_t>(kmax - kmin + 1));
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.power_dbm[i] > p.floor_dbm) bins[static_cast<std::size_t>(lattice_index(i) - kmin)].add(p.power_dbm[i]);
  }
  out.t0_ns = grid_t0_ns + static_cast<double>(kmin) * bin_width_ns;
  out.power_dbm.reserve(bins.size());
  for (const auto& b : bins) out.power_dbm.push_back(b.value(out.floor_dbm));
  return out;
}

PowerDelayProfile parse_pdp_csv(std::istream& in, std::string_view source) {
  auto fail = [&](std::size_t line, const std::string& msg) {
    std::ostringstream os;
    os << source << ":" << line << ": " << msg;
    return ParseError(os.str());
  };

  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (line != "delay_ns,power_dbm") throw fail(line_no, "expected header 'delay_ns,power_dbm'");
    have_header = true;
    break;
  }
  if (!have_header) throw fail(line_no, "missing header 'delay_ns,power_dbm'");

  std::vector<double> delays;
  std::vector<std::size_t> rows;
  PowerDelayProfile out;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw fail(line_no, "expected two comma-separated values");
    double values[2];
    const std::string fields[2] = {trim(line.substr(0, comma)), trim(line.substr(comma + 1))};
    for (int k = 0; k < 2; ++k) {
      const char* begin = fields[k].data();
      const char* end = begin + fields[k].size();
      auto [ptr, ec] = std::from_chars(begin, end, values[k]);
      if (ec != std::errc() || ptr != end || !std::isfinite(values[k])) {
        throw fail(line_no, "'" + fields[k] + "' is not a finite number");
      }
    }
    if (!delays.empty() && !(values[0] > delays.back())) {
      throw fail(line_no, "delays must be strictly increasing");
    }
    delays.push_back(values[0]);
    rows.push_back(line_no);
    out.power_dbm.push_back(std::max(values[1], out.floor_dbm));
  }

  if (delays.empty()) return out;
  out.t0_ns = delays.front();
  if (delays.size() == 1) return out;

  const double step = delays[1] - delays[0];
  for (std::size_t i = 2; i < delays.size(); ++i) {
    if (std::abs((delays[i] - delays[i - 1]) - step) > 1e-6 * std::max(1.0, step)) {
      throw fail(rows[i], "delays are not uniformly spaced");
    }
  }
  out.bin_width_ns = (delays.back() - delays.front()) / static_cast<double>(delays.size() - 1);
  return out;
}

PowerDelayProfile load_pdp_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open PDP file '" + path.string() + "'");
  return parse_pdp_csv(in, path.string());
}

void write_pdp_csv(std::ostream& out, const PowerDelayProfile& p) {
  out << "delay_ns,power_dbm\n";
  for (std::size_t i = 0; i < p.size(); ++i) {
    out << format_double(p.delay_at(i)) << ',' << format_double(p.power_dbm[i]) << '\n';
  }
}

void save_pdp_csv(const std::filesystem::path& path, const PowerDelayProfile& p) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  write_pdp_csv(out, p);
}

}  // namespace rtcal
