#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rtcal/align.hpp"
#include "rtcal/geo.hpp"
#include "rtcal/loss.hpp"
#include "rtcal/pdp.hpp"
#include "rtcal/raytrace.hpp"

namespace rtcal {

struct OptimizerConfig {
  double d_max_m = 10.0;
  std::vector<double> coarse_offsets_m = {-5.0, -2.5, 0.0, 2.5, 5.0};
  double fine_halfwidth_m = 1.5;
  double fine_step_m = 0.5;
  double powell_tol_m = 0.1;
  double epsilon_m = 0.1;
  double rel_loss_tol = 1e-3;
  int n_max_iters = 10;
  double line_search_bracket_m = 2.5;
  int max_line_evals = 20;
  int max_powell_sweeps = 5;
  double line_search_tol_m = 0.01;
  std::size_t eval_budget = 1500;
  std::size_t workers = 1;

  void validate() const;
  // Forward evaluations allowed in one Powell sweep, and over the whole stage.
  std::size_t powell_sweep_cap() const { return 4 * static_cast<std::size_t>(max_line_evals); }
  std::size_t powell_eval_cap() const { return powell_sweep_cap() * static_cast<std::size_t>(max_powell_sweeps); }
};

enum class Endpoint { tx, rx };
enum class Stage { coarse, fine, powell };

const char* to_string(Endpoint e);
const char* to_string(Stage s);

struct Candidate {
  LocalPosition position;
  LossBreakdown loss;
};

struct StageTrace {
  int iteration = 0;
  Endpoint endpoint = Endpoint::rx;
  Stage stage = Stage::coarse;
  std::vector<Candidate> candidates;  // evaluation order
  LocalPosition chosen;
  LossBreakdown chosen_loss;
  std::size_t eval_count = 0;  // forward-model runs (cache hits excluded)
  bool all_outage = false;
};

struct IterationSummary {
  int iteration = 0;
  LocalPosition tx;
  LocalPosition rx;
  double total = 0.0;
  double tx_move_m = 0.0;
  double rx_move_m = 0.0;
  double rel_loss_change = 0.0;
};

struct CalibrationResult {
  LocalPosition tx_initial;
  LocalPosition rx_initial;
  LocalPosition tx_star;
  LocalPosition rx_star;
  LossBreakdown initial_loss;
  LossBreakdown final_loss;
  double loss_reduction_pct = 0.0;
  std::vector<StageTrace> stages;
  std::vector<IterationSummary> iterations;
  std::size_t total_evaluations = 0;
  bool converged = false;
  bool budget_exhausted = false;
  int iterations_used = 0;
};

class BudgetExhausted : public std::runtime_error {
 public:
  BudgetExhausted() : std::runtime_error("forward evaluation budget exhausted") {}
};

// Loss of one candidate position for the endpoint being optimized. Must be
// safe to call concurrently when more than one worker is configured.
using Objective = std::function<LossBreakdown(const LocalPosition&)>;

// Counts and memoizes objective calls for one 2D subproblem and enforces the
// shared evaluation budget. Batches run on up to `workers` threads; results
// are always reported in candidate order.
class CandidateEvaluator {
 public:
  using Observer = std::function<void(const LocalPosition&, const LossBreakdown&)>;

  CandidateEvaluator(Objective objective, std::size_t workers, std::size_t& budget_used,
                     std::size_t budget, Observer observer = {});

  LossBreakdown evaluate(const LocalPosition& p);
  std::vector<LossBreakdown> evaluate(std::span<const LocalPosition> points);

  std::size_t evaluations() const { return evaluations_; }

 private:
  Objective objective_;
  std::size_t workers_;
  std::size_t& budget_used_;
  std::size_t budget_;
  Observer observer_;
  std::size_t evaluations_ = 0;
  std::map<std::pair<double, double>, LossBreakdown> cache_;
};

struct StageOutcome {
  LocalPosition best;
  LossBreakdown loss;
  StageTrace trace;
};

/// Grid ordering: lower total, then smaller |p - p0|, then smaller (dx, dy).
bool better_candidate(const Candidate& a, const Candidate& b, const LocalPosition& p0);

/// Candidates p0 + (dx, dy) for every pair of coarse offsets inside the d_max disc.
std::vector<LocalPosition> coarse_candidates(const LocalPosition& p0, const OptimizerConfig& cfg);

/// Square grid of half-width fine_halfwidth_m around `center`, restricted to
/// the d_max disc about p0.
std::vector<LocalPosition> fine_candidates(const LocalPosition& center, const LocalPosition& p0,
                                           const OptimizerConfig& cfg);

StageOutcome coarse_grid_stage(CandidateEvaluator& eval, const LocalPosition& p0, const OptimizerConfig& cfg);

StageOutcome fine_grid_stage(CandidateEvaluator& eval, const LocalPosition& center, const LocalPosition& p0,
                             const OptimizerConfig& cfg);

/// Powell's conjugate-direction method in the horizontal plane with
/// golden-section line searches confined to the d_max disc about p0.
StageOutcome powell_stage(CandidateEvaluator& eval, const LocalPosition& start, const LocalPosition& p0,
                          const OptimizerConfig& cfg);

// How simulated profiles are built and compared during calibration.
struct EvaluationSettings {
  PdpSettings pdp;
  AlignmentOptions alignment;
  std::optional<double> noise_floor_dbm;  // threshold_pdp on each simulated profile when set
};

/// Objective for one endpoint with the other endpoint held at `fixed_other`.
/// Endpoints placed inside a building count as outages.
Objective make_endpoint_objective(Endpoint which, const LocalPosition& fixed_other,
                                  const LocalPosition& tx0, const LocalPosition& rx0,
                                  const ForwardModel& model, const PowerDelayProfile& meas,
                                  const LossWeights& weights, const EvaluationSettings& settings = {});

/// Alternating RX-then-TX calibration, each 2D subproblem solved by coarse
/// grid, fine grid and Powell refinement.
CalibrationResult calibrate(const LocalPosition& tx0, const LocalPosition& rx0, const ForwardModel& model,
                            const PowerDelayProfile& meas, const OptimizerConfig& cfg = {},
                            const LossWeights& weights = {}, const EvaluationSettings& settings = {});

}  // namespace rtcal
