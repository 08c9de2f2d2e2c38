#include "rtcal/optimizer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

#include "rtcal/error.hpp"

namespace rtcal {
namespace {

constexpr double kBallSlack = 1e-9;
const double kGolden = (std::sqrt(5.0) - 1.0) / 2.0;

double offset_norm(const LocalPosition& p, const LocalPosition& p0) {
  return std::hypot(p.x_m - p0.x_m, p.y_m - p0.y_m);
}

bool inside_ball(const LocalPosition& p, const LocalPosition& p0, double d_max) {
  return offset_norm(p, p0) <= d_max + kBallSlack;
}

StageOutcome pick_grid_best(CandidateEvaluator& eval, std::vector<LocalPosition> points,
                            const LocalPosition& p0, Stage stage) {
  const std::size_t before = eval.evaluations();
  const auto losses = eval.evaluate(points);
  StageOutcome out;
  out.trace.stage = stage;
  out.trace.all_outage = !points.empty();
  for (std::size_t i = 0; i < points.size(); ++i) {
    out.trace.candidates.push_back({points[i], losses[i]});
    out.trace.all_outage = out.trace.all_outage && losses[i].outage;
  }
  const auto& cands = out.trace.candidates;
  std::size_t best = 0;
  for (std::size_t i = 1; i < cands.size(); ++i) {
    if (better_candidate(cands[i], cands[best], p0)) best = i;
  }
  out.best = cands[best].position;
  out.loss = cands[best].loss;
  out.trace.chosen = out.best;
  out.trace.chosen_loss = out.loss;
  out.trace.eval_count = eval.evaluations() - before;
  return out;
}

struct Vec2 {
  double x, y;
};

LocalPosition step(const LocalPosition& p, const Vec2& u, double alpha) {
  return {p.x_m + alpha * u.x, p.y_m + alpha * u.y, p.z_m};
}

}  // namespace

void OptimizerConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument(std::string(name) + " must be > 0");
  };
  positive(d_max_m, "d_max_m");
  positive(fine_halfwidth_m, "fine_halfwidth_m");
  positive(fine_step_m, "fine_step_m");
  positive(powell_tol_m, "powell_tol_m");
  positive(epsilon_m, "epsilon_m");
  positive(rel_loss_tol, "rel_loss_tol");
  positive(line_search_bracket_m, "line_search_bracket_m");
  positive(line_search_tol_m, "line_search_tol_m");
  if (coarse_offsets_m.empty()) throw InvalidArgument("coarse_offsets_m must not be empty");
  for (double v : coarse_offsets_m) {
    if (!std::isfinite(v)) throw InvalidArgument("coarse_offsets_m must be finite");
  }
  if (n_max_iters < 1) throw InvalidArgument("n_max_iters must be >= 1");
  if (max_line_evals < 3) throw InvalidArgument("max_line_evals must be >= 3");
  if (max_powell_sweeps < 1) throw InvalidArgument("max_powell_sweeps must be >= 1");
  if (eval_budget < 1) throw InvalidArgument("eval_budget must be >= 1");
  if (workers < 1) throw InvalidArgument("workers must be >= 1");
}

const char* to_string(Endpoint e) { return e == Endpoint::tx ? "tx" : "rx"; }

const char* to_string(Stage s) {
  switch (s) {
    case Stage::coarse:
      return "coarse";
    case Stage::fine:
      return "fine";
    case Stage::powell:
      return "powell";
  }
  return "?";
}

CandidateEvaluator::CandidateEvaluator(Objective objective, std::size_t workers, std::size_t& budget_used,
                                       std::size_t budget, Observer observer)
    : objective_(std::move(objective)),
      workers_(std::max<std::size_t>(workers, 1)),
      budget_used_(budget_used),
      budget_(budget),
      observer_(std::move(observer)) {}

LossBreakdown CandidateEvaluator::evaluate(const LocalPosition& p) {
  return evaluate(std::span<const LocalPosition>(&p, 1)).front();
}

std::vector<LossBreakdown> CandidateEvaluator::evaluate(std::span<const LocalPosition> points) {
  // Distinct uncached positions, first occurrence order.
  std::vector<std::size_t> todo;
  std::vector<std::pair<double, double>> keys(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    keys[i] = {points[i].x_m, points[i].y_m};
    if (cache_.count(keys[i])) continue;
    bool dup = false;
    for (std::size_t j : todo) dup = dup || keys[j] == keys[i];
    if (!dup) todo.push_back(i);
  }

  const std::size_t remaining = budget_ > budget_used_ ? budget_ - budget_used_ : 0;
  const bool short_budget = todo.size() > remaining;
  if (short_budget) todo.resize(remaining);

  std::vector<LossBreakdown> fresh(todo.size());
  std::vector<std::exception_ptr> errors(todo.size());
  auto run = [&](std::size_t k) {
    try {
      fresh[k] = objective_(points[todo[k]]);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  };
  const std::size_t n_threads = std::min(workers_, todo.size());
  if (n_threads <= 1) {
    for (std::size_t k = 0; k < todo.size(); ++k) run(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t k; (k = next.fetch_add(1)) < todo.size();) run(k);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  budget_used_ += todo.size();
  evaluations_ += todo.size();
  for (std::size_t k = 0; k < todo.size(); ++k) {
    cache_[keys[todo[k]]] = fresh[k];
    if (observer_) observer_(points[todo[k]], fresh[k]);
  }
  if (short_budget) throw BudgetExhausted();

  std::vector<LossBreakdown> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) out[i] = cache_.at(keys[i]);
  return out;
}

bool better_candidate(const Candidate& a, const Candidate& b, const LocalPosition& p0) {
  if (a.loss.total != b.loss.total) return a.loss.total < b.loss.total;
  const double na = offset_norm(a.position, p0);
  const double nb = offset_norm(b.position, p0);
  if (na != nb) return na < nb;
  const double ax = a.position.x_m - p0.x_m, bx = b.position.x_m - p0.x_m;
  if (ax != bx) return ax < bx;
  return a.position.y_m - p0.y_m < b.position.y_m - p0.y_m;
}

std::vector<LocalPosition> coarse_candidates(const LocalPosition& p0, const OptimizerConfig& cfg) {
  std::vector<LocalPosition> out;
  for (double dx : cfg.coarse_offsets_m) {
    for (double dy : cfg.coarse_offsets_m) {
      const LocalPosition c{p0.x_m + dx, p0.y_m + dy, p0.z_m};
      if (inside_ball(c, p0, cfg.d_max_m)) out.push_back(c);
    }
  }
  return out;
}

std::vector<LocalPosition> fine_candidates(const LocalPosition& center, const LocalPosition& p0,
                                           const OptimizerConfig& cfg) {
  const auto half = static_cast<long>(std::floor(cfg.fine_halfwidth_m / cfg.fine_step_m + 1e-9));
  std::vector<LocalPosition> out;
  for (long i = -half; i <= half; ++i) {
    for (long j = -half; j <= half; ++j) {
      const LocalPosition c{center.x_m + static_cast<double>(i) * cfg.fine_step_m,
                            center.y_m + static_cast<double>(j) * cfg.fine_step_m, center.z_m};
      if (inside_ball(c, p0, cfg.d_max_m)) out.push_back(c);
    }
  }
  return out;
}

StageOutcome coarse_grid_stage(CandidateEvaluator& eval, const LocalPosition& p0, const OptimizerConfig& cfg) {
  return pick_grid_best(eval, coarse_candidates(p0, cfg), p0, Stage::coarse);
}

StageOutcome fine_grid_stage(CandidateEvaluator& eval, const LocalPosition& center, const LocalPosition& p0,
                             const OptimizerConfig& cfg) {
  auto points = fine_candidates(center, p0, cfg);
  // The center is in the grid unless it violates the constraint itself.
  if (points.empty()) points.push_back(center);
  return pick_grid_best(eval, std::move(points), p0, Stage::fine);
}

StageOutcome powell_stage(CandidateEvaluator& eval, const LocalPosition& start, const LocalPosition& p0,
                          const OptimizerConfig& cfg) {
  StageOutcome out;
  out.trace.stage = Stage::powell;
  const std::size_t before = eval.evaluations();
  const std::size_t sweep_cap = cfg.powell_sweep_cap();
  std::size_t sweep_before = before;
  auto used = [&] { return eval.evaluations() - before; };
  auto sweep_used = [&] { return eval.evaluations() - sweep_before; };

  auto f = [&](const LocalPosition& p) {
    LossBreakdown l = eval.evaluate(p);
    out.trace.candidates.push_back({p, l});
    return l;
  };

  LocalPosition p = start;
  LossBreakdown fp = f(p);

  // Golden-section search on alpha along unit u from p, restricted to the
  // bracket and to the d_max disc. Returns the best (alpha, loss) probed,
  // alpha = 0 included.
  auto line_min = [&](const Vec2& u) -> std::pair<double, LossBreakdown> {
    const double qx = p.x_m - p0.x_m, qy = p.y_m - p0.y_m;
    const double b = u.x * qx + u.y * qy;
    const double c = qx * qx + qy * qy - cfg.d_max_m * cfg.d_max_m;
    const double disc = b * b - c;
    double best_a = 0.0;
    LossBreakdown best_l = fp;
    if (disc < 0.0) return {best_a, best_l};
    const double root = std::sqrt(disc);
    double lo = std::max(-cfg.line_search_bracket_m, -b - root);
    double hi = std::min(cfg.line_search_bracket_m, -b + root);
    if (!(hi > lo)) return {best_a, best_l};

    int n = 0;
    auto probe = [&](double a) {
      ++n;
      LossBreakdown l = f(step(p, u, a));
      if (l.total < best_l.total) {
        best_a = a;
        best_l = l;
      }
      return l.total;
    };
    auto exhausted = [&] { return n >= cfg.max_line_evals || sweep_used() >= sweep_cap; };

    double x1 = hi - kGolden * (hi - lo);
    double x2 = lo + kGolden * (hi - lo);
    double f1 = probe(x1);
    if (exhausted()) return {best_a, best_l};
    double f2 = probe(x2);
    while (hi - lo > cfg.line_search_tol_m && !exhausted()) {
      if (f1 <= f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - kGolden * (hi - lo);
        f1 = probe(x1);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + kGolden * (hi - lo);
        f2 = probe(x2);
      }
    }
    return {best_a, best_l};
  };

  Vec2 dirs[2] = {{1.0, 0.0}, {0.0, 1.0}};
  for (int sweep = 0; sweep < cfg.max_powell_sweeps; ++sweep) {
    sweep_before = eval.evaluations();
    const LocalPosition p_start = p;
    double best_gain = -1.0;
    int best_k = 0;
    for (int k = 0; k < 2 && sweep_used() < sweep_cap; ++k) {
      const auto [alpha, l] = line_min(dirs[k]);
      const double gain = fp.total - l.total;
      if (gain > best_gain) {
        best_gain = gain;
        best_k = k;
      }
      if (l.total < fp.total) {
        p = step(p, dirs[k], alpha);
        fp = l;
      }
    }
    const double dx = p.x_m - p_start.x_m, dy = p.y_m - p_start.y_m;
    const double len = std::hypot(dx, dy);
    if (len > 0.0) {
      const Vec2 u{dx / len, dy / len};
      // Minimize along the new direction. It then replaces the direction
      // with the largest single-line improvement and goes last in the set,
      // so the next sweep ends on it again (conjugacy).
      if (sweep_used() < sweep_cap) {
        const auto [alpha, l] = line_min(u);
        if (l.total < fp.total) {
          p = step(p, u, alpha);
          fp = l;
        }
      }
      const Vec2 kept = dirs[1 - best_k];
      if (std::abs(u.x * kept.y - u.y * kept.x) > 1e-6) {
        dirs[0] = kept;
        dirs[1] = u;
      }
    }
    if (std::hypot(p.x_m - p_start.x_m, p.y_m - p_start.y_m) < cfg.powell_tol_m) break;
  }

  out.best = p;
  out.loss = fp;
  out.trace.chosen = p;
  out.trace.chosen_loss = fp;
  out.trace.eval_count = used();
  out.trace.all_outage = std::all_of(out.trace.candidates.begin(), out.trace.candidates.end(),
                                     [](const Candidate& c) { return c.loss.outage; });
  return out;
}

Objective make_endpoint_objective(Endpoint which, const LocalPosition& fixed_other, const LocalPosition& tx0,
                                  const LocalPosition& rx0, const ForwardModel& model,
                                  const PowerDelayProfile& meas, const LossWeights& weights,
                                  const EvaluationSettings& settings) {
  return [=, &model, &meas](const LocalPosition& p) {
    const LocalPosition& tx = which == Endpoint::tx ? p : fixed_other;
    const LocalPosition& rx = which == Endpoint::rx ? p : fixed_other;
    const double d_tx = horizontal_distance(tx, tx0);
    const double d_rx = horizontal_distance(rx, rx0);
    PowerDelayProfile sim;
    try {
      sim = simulate_pdp(model, tx, rx, settings.pdp);
      if (settings.noise_floor_dbm && !sim.empty()) sim = threshold_pdp(sim, *settings.noise_floor_dbm);
    } catch (const GeometryError&) {
      sim = PowerDelayProfile{};  // unplaceable endpoint: no received energy
    }
    return composite_loss(sim, meas, d_tx, d_rx, weights, settings.alignment);
  };
}

CalibrationResult calibrate(const LocalPosition& tx0, const LocalPosition& rx0, const ForwardModel& model,
                            const PowerDelayProfile& meas, const OptimizerConfig& cfg,
                            const LossWeights& weights, const EvaluationSettings& settings) {
  cfg.validate();
  weights.validate();
  if (meas.empty()) throw EmptyProfileError("measured profile is empty");

  CalibrationResult res;
  res.tx_initial = tx0;
  res.rx_initial = rx0;

  std::size_t used = 0;
  LocalPosition best_tx = tx0, best_rx = rx0;
  LossBreakdown best_loss;
  bool have_best = false;
  auto track = [&](const LocalPosition& tx, const LocalPosition& rx, const LossBreakdown& l) {
    if (!have_best || l.total < best_loss.total) {
      best_tx = tx;
      best_rx = rx;
      best_loss = l;
      have_best = true;
    }
  };

  LocalPosition tx = tx0, rx = rx0;
  LossBreakdown current;
  try {
    CandidateEvaluator init(make_endpoint_objective(Endpoint::rx, tx0, tx0, rx0, model, meas, weights, settings),
                            1, used, cfg.eval_budget);
    current = init.evaluate(rx0);
    res.initial_loss = current;
    track(tx, rx, current);

    for (int iter = 1; iter <= cfg.n_max_iters; ++iter) {
      const LocalPosition tx_prev = tx, rx_prev = rx;
      const double loss_prev = current.total;
      res.iterations_used = iter;

      for (Endpoint which : {Endpoint::rx, Endpoint::tx}) {
        const bool is_rx = which == Endpoint::rx;
        const LocalPosition& p0 = is_rx ? rx0 : tx0;
        const LocalPosition fixed = is_rx ? tx : rx;
        CandidateEvaluator ev(
            make_endpoint_objective(which, fixed, tx0, rx0, model, meas, weights, settings), cfg.workers, used,
            cfg.eval_budget, [&](const LocalPosition& p, const LossBreakdown& l) {
              is_rx ? track(fixed, p, l) : track(p, fixed, l);
            });
        auto record = [&](StageTrace t) {
          t.iteration = iter;
          t.endpoint = which;
          res.stages.push_back(std::move(t));
        };
        StageOutcome coarse = coarse_grid_stage(ev, p0, cfg);
        record(coarse.trace);
        StageOutcome fine = fine_grid_stage(ev, coarse.best, p0, cfg);
        record(fine.trace);
        StageOutcome powell = powell_stage(ev, fine.best, p0, cfg);
        record(powell.trace);

        // Keep the incumbent unless the subproblem found something strictly better.
        if (powell.loss.total < current.total) {
          (is_rx ? rx : tx) = powell.best;
          current = powell.loss;
        }
      }

      IterationSummary s;
      s.iteration = iter;
      s.tx = tx;
      s.rx = rx;
      s.total = current.total;
      s.tx_move_m = distance(tx, tx_prev);
      s.rx_move_m = distance(rx, rx_prev);
      if (loss_prev == 0.0) {
        s.rel_loss_change = current.total == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
      } else {
        s.rel_loss_change = std::abs(current.total - loss_prev) / loss_prev;
      }
      res.iterations.push_back(s);
      if (s.tx_move_m < cfg.epsilon_m && s.rx_move_m < cfg.epsilon_m && s.rel_loss_change < cfg.rel_loss_tol) {
        res.converged = true;
        break;
      }
    }
    res.tx_star = tx;
    res.rx_star = rx;
    res.final_loss = current;
  } catch (const BudgetExhausted&) {
    res.budget_exhausted = true;
    res.converged = false;
    if (!have_best) throw Error("evaluation budget too small for the initial loss evaluation");
    res.tx_star = best_tx;
    res.rx_star = best_rx;
    res.final_loss = best_loss;
  }

  res.total_evaluations = used;
  const double l0 = res.initial_loss.total;
  res.loss_reduction_pct = l0 > 0.0 ? 100.0 * (l0 - res.final_loss.total) / l0 : 0.0;
  return res;
}

}  // namespace rtcal
