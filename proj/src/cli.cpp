#include "rtcal/cli.hpp"

#include <charconv>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "rtcal/error.hpp"
#include "rtcal/fixtures.hpp"
#include "rtcal/pdp.hpp"
#include "rtcal/raytrace.hpp"
#include "rtcal/scene.hpp"

namespace rtcal::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string read_text(const fs::path& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument(std::string("cannot open ") + what + " '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw InvalidArgument("write failed for '" + path.string() + "'");
}

std::vector<double> split_numbers(std::string_view text, std::string_view what) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    std::string_view field = text.substr(pos, comma - pos);
    while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
    while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
    double v = 0.0;
    const auto r = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || r.ec != std::errc() || r.ptr != field.data() + field.size() || !std::isfinite(v)) {
      throw InvalidArgument("invalid number '" + std::string(field) + "' in " + std::string(what));
    }
    out.push_back(v);
    pos = comma + 1;
  }
  return out;
}

Scene load_scene_for(const RunConfig& cfg) {
  const std::string text = read_text(cfg.scene, "scene file");
  Scene scene = parse_scene(text, cfg.scene);
  if (cfg.frequency_hz) {
    json doc = json::parse(text);
    doc["frequency_hz"] = *cfg.frequency_hz;
    scene = parse_scene(doc.dump(), cfg.scene);
  }
  return scene;
}

std::optional<Scene> maybe_scene(const RunConfig& cfg) {
  if (cfg.scene.empty()) {
    if (cfg.model == "builtin") throw InvalidArgument("--scene is required for the builtin model");
    return std::nullopt;
  }
  return load_scene_for(cfg);
}

std::unique_ptr<ForwardModel> make_model(const RunConfig& cfg, const std::optional<Scene>& scene) {
  if (cfg.model == "builtin") {
    if (!cfg.external_cmd.empty()) throw InvalidArgument("--external-cmd requires --model external");
    TraceOptions opts;
    opts.max_reflections = cfg.max_reflections;
    if (cfg.polarization == "te") {
      opts.polarization = Polarization::te;
    } else if (cfg.polarization == "tm") {
      opts.polarization = Polarization::tm;
    } else {
      throw InvalidArgument("polarization must be 'te' or 'tm'");
    }
    return std::make_unique<ImageMethodModel>(*scene, opts);
  }
  if (cfg.model == "external") {
    if (cfg.external_cmd.empty()) throw InvalidArgument("--model external requires --external-cmd");
    double f = cfg.frequency_hz ? *cfg.frequency_hz : scene ? scene->frequency_hz : 0.0;
    if (!(f > 0.0)) throw InvalidArgument("--freq is required for an external model without a scene");
    return std::make_unique<ExternalModel>(cfg.external_cmd, f);
  }
  throw InvalidArgument("unknown model '" + cfg.model + "' (expected builtin or external)");
}

std::optional<ProjectionCenter> center_of(const std::optional<Scene>& scene) {
  if (!scene) return std::nullopt;
  return scene->projection_center;
}

json position_json(const LocalPosition& p, const std::optional<ProjectionCenter>& center) {
  json j;
  j["local"] = json::array({p.x_m, p.y_m, p.z_m});
  if (center) {
    const GeoPosition g = unproject_to_geo(p, *center);
    j["geo"] = {{"lat", g.latitude_deg}, {"lon", g.longitude_deg}, {"h", g.antenna_height_m}};
  } else {
    j["geo"] = nullptr;
  }
  return j;
}

PowerDelayProfile simulate_or_empty(const ForwardModel& model, const LocalPosition& tx, const LocalPosition& rx,
                                    const EvaluationSettings& s) {
  PowerDelayProfile sim;
  try {
    sim = simulate_pdp(model, tx, rx, s.pdp);
  } catch (const GeometryError&) {
    return {};
  }
  if (s.noise_floor_dbm && !sim.empty()) sim = threshold_pdp(sim, *s.noise_floor_dbm);
  return sim;
}

json peak_power_diff(const PowerDelayProfile& sim, const PowerDelayProfile& meas) {
  if (sim.empty()) return nullptr;
  return sim.max_power_dbm() - meas.max_power_dbm();
}

void append_comparison(std::string& csv, const char* phase, const PowerDelayProfile& sim,
                       const PowerDelayProfile& meas, const LossBreakdown& loss) {
  CommonGrid grid;
  if (sim.empty()) {
    grid.meas = apply_shift(meas, 0.0);
    grid.sim = grid.meas;
    for (double& v : grid.sim.power_dbm) v = kFloorDbm;
  } else {
    const PowerDelayProfile s = resample_to_lattice(sim, meas.t0_ns, meas.bin_width_ns);
    grid = to_common_grid(s, apply_shift(meas, loss.alignment.shift_ns));
  }
  for (std::size_t i = 0; i < grid.sim.size(); ++i) {
    csv += phase;
    csv += ',' + num(grid.sim.delay_at(i)) + ',' + num(grid.sim.power_dbm[i]) + ',' +
           num(grid.meas.power_dbm[i]) + '\n';
  }
}

std::string trace_csv(const CalibrationResult& res) {
  std::string csv = "iteration,endpoint,stage,cand_x,cand_y,l_peak,l_unmatched,l_shape,l_distance,total,chosen\n";
  for (const auto& st : res.stages) {
    bool marked = false;
    for (const auto& c : st.candidates) {
      const bool chosen = !marked && c.position == st.chosen;
      marked = marked || chosen;
      csv += std::to_string(st.iteration) + ',' + to_string(st.endpoint) + ',' + to_string(st.stage) + ',' +
             num(c.position.x_m) + ',' + num(c.position.y_m) + ',' + num(c.loss.l_peak) + ',' +
             num(c.loss.l_unmatched) + ',' + num(c.loss.l_shape) + ',' + num(c.loss.l_distance) + ',' +
             num(c.loss.total) + ',' + (chosen ? "1" : "0") + '\n';
    }
  }
  return csv;
}

PowerDelayProfile load_measured(const RunConfig& cfg) {
  if (cfg.meas.empty()) throw InvalidArgument("--meas is required");
  PowerDelayProfile meas = load_pdp_csv(cfg.meas);
  if (meas.empty()) throw EmptyProfileError("measured profile '" + cfg.meas + "' holds no energy");
  meas = threshold_pdp(meas, cfg.noise_floor_dbm);
  if (meas.empty()) {
    throw EmptyProfileError("measured profile '" + cfg.meas + "' lies entirely below the noise threshold");
  }
  return meas;
}

int cmd_calibrate(const RunConfig& cfg, std::ostream& out) {
  if (cfg.out.empty()) throw InvalidArgument("--out is required");
  if (cfg.tx.empty() || cfg.rx.empty()) throw InvalidArgument("--tx and --rx are required");
  const auto scene = maybe_scene(cfg);
  const auto center = center_of(scene);
  const LocalPosition tx0 = parse_position(cfg.tx, center);
  const LocalPosition rx0 = parse_position(cfg.rx, center);
  const PowerDelayProfile meas = load_measured(cfg);
  const auto model = make_model(cfg, scene);

  OptimizerConfig opt = cfg.optimizer;
  opt.workers = cfg.workers;
  EvaluationSettings settings;
  settings.pdp.bin_width_ns = meas.bin_width_ns;
  settings.noise_floor_dbm = cfg.noise_floor_dbm;

  const CalibrationResult res = calibrate(tx0, rx0, *model, meas, opt, cfg.weights, settings);

  const PowerDelayProfile sim_before = simulate_or_empty(*model, tx0, rx0, settings);
  const PowerDelayProfile sim_after = simulate_or_empty(*model, res.tx_star, res.rx_star, settings);

  json r;
  r["config"] = to_json(cfg);
  r["initial_positions"] = {{"tx", position_json(tx0, center)}, {"rx", position_json(rx0, center)}};
  r["calibrated_positions"] = {{"tx", position_json(res.tx_star, center)},
                               {"rx", position_json(res.rx_star, center)}};
  r["adjustments"] = {
      {"tx", json::array({res.tx_star.x_m - tx0.x_m, res.tx_star.y_m - tx0.y_m, res.tx_star.z_m - tx0.z_m})},
      {"rx", json::array({res.rx_star.x_m - rx0.x_m, res.rx_star.y_m - rx0.y_m, res.rx_star.z_m - rx0.z_m})},
      {"tx_norm_m", horizontal_distance(res.tx_star, tx0)},
      {"rx_norm_m", horizontal_distance(res.rx_star, rx0)}};
  r["loss_initial"] = res.initial_loss.total;
  r["loss_final"] = res.final_loss.total;
  r["components"] = {{"initial", to_json(res.initial_loss)}, {"final", to_json(res.final_loss)}};
  r["loss_reduction_pct"] = res.loss_reduction_pct;
  r["peak_power_diff_db_before"] = peak_power_diff(sim_before, meas);
  r["peak_power_diff_db_after"] = peak_power_diff(sim_after, meas);
  r["iterations"] = res.iterations_used;
  json history = json::array();
  for (const auto& it : res.iterations) {
    history.push_back({{"iteration", it.iteration},
                       {"tx", json::array({it.tx.x_m, it.tx.y_m, it.tx.z_m})},
                       {"rx", json::array({it.rx.x_m, it.rx.y_m, it.rx.z_m})},
                       {"total", it.total},
                       {"tx_move_m", it.tx_move_m},
                       {"rx_move_m", it.rx_move_m},
                       {"rel_loss_change", std::isfinite(it.rel_loss_change) ? json(it.rel_loss_change)
                                                                             : json(nullptr)}});
  }
  r["iteration_history"] = history;
  json stages = json::array();
  for (const auto& st : res.stages) {
    stages.push_back({{"iteration", st.iteration},
                      {"endpoint", to_string(st.endpoint)},
                      {"stage", to_string(st.stage)},
                      {"eval_count", st.eval_count},
                      {"chosen", json::array({st.chosen.x_m, st.chosen.y_m})},
                      {"chosen_total", st.chosen_loss.total},
                      {"all_outage", st.all_outage}});
  }
  r["stages"] = stages;
  r["eval_count"] = res.total_evaluations;
  r["converged"] = res.converged;
  r["budget_exhausted"] = res.budget_exhausted;

  const fs::path dir(cfg.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InvalidArgument("cannot create output directory '" + cfg.out + "': " + ec.message());
  write_text(dir / "result.json", r.dump(2) + "\n");
  write_text(dir / "trace.csv", trace_csv(res));
  std::string cmp = "phase,delay_ns,sim_dbm,meas_dbm\n";
  const LossBreakdown after = res.final_loss;
  append_comparison(cmp, "before", sim_before, meas, res.initial_loss);
  append_comparison(cmp, "after", sim_after, meas, after);
  write_text(dir / "pdp_comparison.csv", cmp);

  out << "loss " << num(res.initial_loss.total) << " -> " << num(res.final_loss.total) << " ("
      << num(res.loss_reduction_pct) << "% reduction), " << res.iterations_used << " iteration(s), "
      << res.total_evaluations << " evaluations, " << (res.converged ? "converged" : "not converged") << "\n";
  out << "results written to " << dir.string() << "\n";
  return kExitOk;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
  if (cfg.tx.empty() || cfg.rx.empty()) throw InvalidArgument("--tx and --rx are required");
  const auto scene = maybe_scene(cfg);
  const auto center = center_of(scene);
  const LocalPosition tx = parse_position(cfg.tx, center);
  const LocalPosition rx = parse_position(cfg.rx, center);
  const auto model = make_model(cfg, scene);
  const PowerDelayProfile pdp = simulate_pdp(*model, tx, rx);
  if (cfg.out.empty()) {
    write_pdp_csv(out, pdp);
  } else {
    save_pdp_csv(cfg.out, pdp);
  }
  return kExitOk;
}

int cmd_loss(const RunConfig& cfg, const std::string& sim_path, double d_tx, double d_rx, std::ostream& out) {
  if (cfg.meas.empty() || sim_path.empty()) throw InvalidArgument("--sim and --meas are required");
  const PowerDelayProfile sim = load_pdp_csv(sim_path);
  const PowerDelayProfile meas = load_pdp_csv(cfg.meas);
  LossBreakdown l;
  if (meas.empty() || sim.empty()) {
    // Either side without energy: nothing to compare, same as an outage.
    cfg.weights.validate();
    l.l_distance = distance_regularizer(d_tx, d_rx, cfg.weights);
    l.outage = true;
    l.total = kOutagePenalty + cfg.weights.beta * l.l_distance;
  } else {
    l = composite_loss(sim, meas, d_tx, d_rx, cfg.weights);
  }
  out << to_json(l).dump(2) << "\n";
  return kExitOk;
}

int cmd_project(const std::string& center_text, const std::string& geo_text, const std::string& local_text,
                const RunConfig& cfg, std::ostream& out) {
  std::optional<ProjectionCenter> center;
  if (!center_text.empty()) {
    const auto v = split_numbers(center_text, "--center");
    if (v.size() != 2) throw InvalidArgument("--center expects lat,lon");
    center = ProjectionCenter{v[0], v[1]};
  } else if (!cfg.scene.empty()) {
    center = load_scene_for(cfg).projection_center;
  } else {
    throw InvalidArgument("--center or --scene is required");
  }
  validate(*center);
  if (geo_text.empty() == local_text.empty()) throw InvalidArgument("give exactly one of --geo and --local");
  if (!geo_text.empty()) {
    const LocalPosition p = parse_position("geo:" + geo_text, center);
    out << json{{"x_m", p.x_m}, {"y_m", p.y_m}, {"z_m", p.z_m}}.dump() << "\n";
  } else {
    const LocalPosition p = parse_position("local:" + local_text, center);
    const GeoPosition g = unproject_to_geo(p, *center);
    out << json{{"lat", g.latitude_deg}, {"lon", g.longitude_deg}, {"h", g.antenna_height_m}}.dump() << "\n";
  }
  return kExitOk;
}

template <typename T>
void take(const json& obj, const char* key, T& dst) {
  if (auto it = obj.find(key); it != obj.end()) dst = it->get<T>();
}

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + ": expected an object");
  for (const auto& [k, v] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || a == k;
    if (!ok) throw ParseError(where + ": unknown key '" + k + "'");
  }
}

}  // namespace

LocalPosition parse_position(std::string_view text, const std::optional<ProjectionCenter>& center) {
  std::string_view body = text;
  bool geo = false;
  if (body.substr(0, 4) == "geo:") {
    geo = true;
    body.remove_prefix(4);
  } else if (body.substr(0, 6) == "local:") {
    body.remove_prefix(6);
  }
  const auto v = split_numbers(body, "position '" + std::string(text) + "'");
  if (v.size() != 3) throw InvalidArgument("position '" + std::string(text) + "' needs three values");
  if (!geo) return {v[0], v[1], v[2]};
  if (!center) throw InvalidArgument("geographic position '" + std::string(text) + "' needs a scene projection center");
  return project_to_local({v[0], v[1], v[2]}, *center);
}

void apply_config_json(RunConfig& cfg, const json& j, const fs::path& base_dir) {
  check_keys(j,
             {"scene", "meas", "tx", "rx", "frequency_hz", "model", "external_cmd", "workers", "out",
              "noise_floor_dbm", "max_reflections", "polarization", "optimizer", "weights"},
             "config");
  auto path_field = [&](const char* key, std::string& dst) {
    if (auto it = j.find(key); it != j.end()) {
      fs::path p = it->get<std::string>();
      dst = (p.is_relative() ? base_dir / p : p).lexically_normal().string();
    }
  };
  path_field("scene", cfg.scene);
  path_field("meas", cfg.meas);
  path_field("out", cfg.out);
  take(j, "tx", cfg.tx);
  take(j, "rx", cfg.rx);
  if (j.contains("frequency_hz")) cfg.frequency_hz = j["frequency_hz"].get<double>();
  take(j, "model", cfg.model);
  take(j, "external_cmd", cfg.external_cmd);
  take(j, "workers", cfg.workers);
  take(j, "noise_floor_dbm", cfg.noise_floor_dbm);
  take(j, "max_reflections", cfg.max_reflections);
  take(j, "polarization", cfg.polarization);
  if (auto it = j.find("optimizer"); it != j.end()) {
    const json& o = *it;
    check_keys(o,
               {"d_max_m", "coarse_offsets_m", "fine_halfwidth_m", "fine_step_m", "powell_tol_m", "epsilon_m",
                "rel_loss_tol", "n_max_iters", "line_search_bracket_m", "max_line_evals", "max_powell_sweeps",
                "line_search_tol_m", "eval_budget"},
               "config.optimizer");
    auto& c = cfg.optimizer;
    take(o, "d_max_m", c.d_max_m);
    take(o, "coarse_offsets_m", c.coarse_offsets_m);
    take(o, "fine_halfwidth_m", c.fine_halfwidth_m);
    take(o, "fine_step_m", c.fine_step_m);
    take(o, "powell_tol_m", c.powell_tol_m);
    take(o, "epsilon_m", c.epsilon_m);
    take(o, "rel_loss_tol", c.rel_loss_tol);
    take(o, "n_max_iters", c.n_max_iters);
    take(o, "line_search_bracket_m", c.line_search_bracket_m);
    take(o, "max_line_evals", c.max_line_evals);
    take(o, "max_powell_sweeps", c.max_powell_sweeps);
    take(o, "line_search_tol_m", c.line_search_tol_m);
    take(o, "eval_budget", c.eval_budget);
  }
  if (auto it = j.find("weights"); it != j.end()) {
    const json& w = *it;
    check_keys(w, {"alpha", "beta", "w_unmatched", "tau_ref_ns", "t_norm_ns", "d_max_m"}, "config.weights");
    take(w, "alpha", cfg.weights.alpha);
    take(w, "beta", cfg.weights.beta);
    take(w, "w_unmatched", cfg.weights.w_unmatched);
    take(w, "tau_ref_ns", cfg.weights.tau_ref_ns);
    take(w, "t_norm_ns", cfg.weights.t_norm_ns);
    take(w, "d_max_m", cfg.weights.d_max_m);
  }
}

RunConfig load_run_config(const fs::path& path) {
  const std::string text = read_text(path, "config file");
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": invalid JSON (" + e.what() + ")");
  }
  RunConfig cfg;
  try {
    apply_config_json(cfg, j, path.parent_path());
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return cfg;
}

json to_json(const RunConfig& cfg) {
  const auto& o = cfg.optimizer;
  const auto& w = cfg.weights;
  return {
      {"scene", cfg.scene},
      {"meas", cfg.meas},
      {"tx", cfg.tx},
      {"rx", cfg.rx},
      {"frequency_hz", cfg.frequency_hz ? json(*cfg.frequency_hz) : json(nullptr)},
      {"model", cfg.model},
      {"external_cmd", cfg.external_cmd},
      {"workers", cfg.workers},
      {"out", cfg.out},
      {"noise_floor_dbm", cfg.noise_floor_dbm},
      {"max_reflections", cfg.max_reflections},
      {"polarization", cfg.polarization},
      {"optimizer",
       {{"d_max_m", o.d_max_m},
        {"coarse_offsets_m", o.coarse_offsets_m},
        {"fine_halfwidth_m", o.fine_halfwidth_m},
        {"fine_step_m", o.fine_step_m},
        {"powell_tol_m", o.powell_tol_m},
        {"epsilon_m", o.epsilon_m},
        {"rel_loss_tol", o.rel_loss_tol},
        {"n_max_iters", o.n_max_iters},
        {"line_search_bracket_m", o.line_search_bracket_m},
        {"max_line_evals", o.max_line_evals},
        {"max_powell_sweeps", o.max_powell_sweeps},
        {"line_search_tol_m", o.line_search_tol_m},
        {"eval_budget", o.eval_budget}}},
      {"weights",
       {{"alpha", w.alpha},
        {"beta", w.beta},
        {"w_unmatched", w.w_unmatched},
        {"tau_ref_ns", w.tau_ref_ns},
        {"t_norm_ns", w.t_norm_ns},
        {"d_max_m", w.d_max_m}}},
  };
}

json to_json(const LossBreakdown& l) {
  json align = {{"method", to_string(l.alignment.method)}, {"shift_ns", l.alignment.shift_ns}};
  align["correlation"] = l.alignment.correlation ? json(*l.alignment.correlation) : json(nullptr);
  return {{"l_peak", l.l_peak},
          {"l_unmatched", l.l_unmatched},
          {"l_shape", l.l_shape},
          {"l_distance", l.l_distance},
          {"total", l.total},
          {"outage", l.outage},
          {"n_sim_peaks", l.n_sim_peaks},
          {"n_meas_peaks", l.n_meas_peaks},
          {"alignment", l.outage ? json(nullptr) : align}};
}

void seed_fixtures(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InvalidArgument("cannot create '" + dir.string() + "': " + ec.message());
  const std::string scene_text(fixtures::canyon_scene_json());
  write_text(dir / "canyon_scene.json", scene_text);

  const ImageMethodModel model(parse_scene(scene_text, "canyon_scene.json"));
  const PowerDelayProfile truth =
      threshold_pdp(simulate_pdp(model, fixtures::kCanyonTxTruth, fixtures::kCanyonRxTruth), kDefaultNoiseFloorDbm);
  save_pdp_csv(dir / "canyon_meas.csv", truth);

  auto pos = [](const LocalPosition& p) { return "local:" + num(p.x_m) + "," + num(p.y_m) + "," + num(p.z_m); };
  const json config = {
      {"scene", "canyon_scene.json"},
      {"meas", "canyon_meas.csv"},
      {"tx", pos(fixtures::offset(fixtures::kCanyonTxTruth, fixtures::kCanyonTxOffset))},
      {"rx", pos(fixtures::offset(fixtures::kCanyonRxTruth, fixtures::kCanyonRxOffset))},
      {"out", "canyon_out"},
  };
  write_text(dir / "canyon_config.json", config.dump(2) + "\n");
  const json fixed = {
      {"scene", "canyon_scene.json"},
      {"meas", "canyon_meas.csv"},
      {"tx", pos(fixtures::kCanyonTxTruth)},
      {"rx", pos(fixtures::kCanyonRxTruth)},
      {"out", "canyon_fixed_point_out"},
  };
  write_text(dir / "canyon_fixed_point_config.json", fixed.dump(2) + "\n");
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"TX/RX position calibration for site-specific ray tracing", "rtcal"};
  app.set_help_all_flag("--help-all", "Show help for all subcommands");

  std::string seed_dir;
  app.add_option("--seed-fixtures", seed_dir, "Write the canyon scene, measured PDP and configs into DIR");

  // Flags shared by the subcommands; unset values leave the config file's.
  struct Flags {
    std::string config;
    std::optional<std::string> scene, meas, tx, rx, model, external_cmd, out;
    std::optional<double> freq, noise_floor;
    std::optional<std::size_t> workers;
    std::optional<int> max_reflections;
  } f;
  auto add_common = [&](CLI::App* sub, bool with_positions) {
    sub->add_option("--config", f.config, "JSON config file");
    sub->add_option("--scene", f.scene, "Scene JSON file");
    sub->add_option("--freq", f.freq, "Carrier frequency in Hz (overrides the scene)");
    sub->add_option("--model", f.model, "Forward model: builtin or external");
    sub->add_option("--external-cmd", f.external_cmd, "Command line of the external simulator");
    sub->add_option("--max-reflections", f.max_reflections, "Builtin model reflection order (0-3)");
    if (with_positions) {
      sub->add_option("--tx", f.tx, "TX position: x,y,z | local:x,y,z | geo:lat,lon,h");
      sub->add_option("--rx", f.rx, "RX position: x,y,z | local:x,y,z | geo:lat,lon,h");
    }
  };

  auto* calibrate_cmd = app.add_subcommand("calibrate", "Calibrate TX/RX positions against a measured PDP");
  add_common(calibrate_cmd, true);
  calibrate_cmd->add_option("--meas", f.meas, "Measured PDP CSV");
  calibrate_cmd->add_option("--out", f.out, "Output directory");
  calibrate_cmd->add_option("--workers", f.workers, "Concurrent grid evaluations");
  calibrate_cmd->add_option("--noise-floor", f.noise_floor, "Measurement noise floor in dBm");

  auto* simulate_cmd = app.add_subcommand("simulate", "Write the simulated PDP for a TX/RX pair as CSV");
  add_common(simulate_cmd, true);
  simulate_cmd->add_option("--out", f.out, "Output CSV file (default: stdout)");

  std::string sim_path;
  double d_tx = 0.0, d_rx = 0.0;
  auto* loss_cmd = app.add_subcommand("loss", "Composite loss between two PDP CSV files");
  loss_cmd->add_option("--config", f.config, "JSON config file (weights)");
  loss_cmd->add_option("--sim", sim_path, "Simulated PDP CSV")->required();
  loss_cmd->add_option("--meas", f.meas, "Measured PDP CSV");
  loss_cmd->add_option("--d-tx", d_tx, "TX adjustment in meters");
  loss_cmd->add_option("--d-rx", d_rx, "RX adjustment in meters");

  std::string center_text, geo_text, local_text;
  auto* project_cmd = app.add_subcommand("project", "Convert between geographic and local coordinates");
  project_cmd->add_option("--center", center_text, "Projection center lat,lon");
  project_cmd->add_option("--scene", f.scene, "Take the projection center from a scene file");
  project_cmd->add_option("--geo", geo_text, "lat,lon[,h] to project");
  project_cmd->add_option("--local", local_text, "x,y,z to unproject");

  app.require_subcommand(0, 1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitInputError;
  }

  try {
    if (!seed_dir.empty()) {
      seed_fixtures(seed_dir);
      out << "fixtures written to " << seed_dir << "\n";
      return kExitOk;
    }
    if (app.get_subcommands().empty()) {
      err << app.help();
      return kExitInputError;
    }

    RunConfig cfg = f.config.empty() ? RunConfig{} : load_run_config(f.config);
    if (f.scene) cfg.scene = *f.scene;
    if (f.meas) cfg.meas = *f.meas;
    if (f.tx) cfg.tx = *f.tx;
    if (f.rx) cfg.rx = *f.rx;
    if (f.model) cfg.model = *f.model;
    if (f.external_cmd) cfg.external_cmd = *f.external_cmd;
    if (f.out) cfg.out = *f.out;
    if (f.freq) cfg.frequency_hz = *f.freq;
    if (f.noise_floor) cfg.noise_floor_dbm = *f.noise_floor;
    if (f.workers) cfg.workers = *f.workers;
    if (f.max_reflections) cfg.max_reflections = *f.max_reflections;
    if (cfg.workers < 1) throw InvalidArgument("--workers must be >= 1");

    if (calibrate_cmd->parsed()) return cmd_calibrate(cfg, out);
    if (simulate_cmd->parsed()) return cmd_simulate(cfg, out);
    if (loss_cmd->parsed()) return cmd_loss(cfg, sim_path, d_tx, d_rx, out);
    if (project_cmd->parsed()) return cmd_project(center_text, geo_text, local_text, cfg, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace rtcal::cli
