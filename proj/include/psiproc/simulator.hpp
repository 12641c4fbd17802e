#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "psiproc/interval_set.hpp"
#include "psiproc/limit_solver.hpp"
#include "psiproc/psi_model.hpp"
#include "psiproc/rng.hpp"

namespace psiproc {

enum class Dynamics { kPsi, kDirect, kKakutani };

struct DirectRule {
  enum class Mode { kMax, kMin };
  int k = 2;
  Mode mode = Mode::kMax;
};

struct SimConfig {
  Dynamics dynamics = Dynamics::kPsi;
  std::optional<PsiSpec> spec;  // required for kPsi
  DirectRule direct;            // used for kDirect
  std::uint64_t n_steps = 0;
  std::uint64_t seed = 0;
  std::vector<double> alphas;
  std::vector<std::uint64_t> checkpoints;  // empty: 2^10, 2^11, ... below n_steps, then n_steps
  std::vector<double> initial_points;      // empty: the alphas themselves
  int replicas = 1;
  bool poisson_time = false;
  int workers = 1;
  std::vector<double> ecdf_grid;           // empty: 512 log-spaced points on [1e-3, 50]
  bool record_restricted = true;           // restricted A_n^alpha per alpha
  std::uint64_t audit_every = std::uint64_t{1} << 20;

  // Throws ConfigError describing the first violated requirement.
  void validate() const;
  // Copy with defaults filled in.
  SimConfig resolved() const;
  // Limit-equivalent choice rule: the spec, or max-k/min-k/uniform for direct rules.
  std::optional<PsiSpec> equivalent_spec() const;
  std::string rule_name() const;

  nlohmann::json to_json() const;
};

std::vector<std::uint64_t> default_checkpoints(std::uint64_t n_steps);
std::vector<double> default_ecdf_grid();

struct StepEvent {
  double w = 0.0;  // Psi-level uniform (psi dynamics only)
  double u = 0.0;  // size-biased quantile level (psi dynamics only)
  IntervalSet::Id chosen = 0;
  double chosen_left = 0.0;
  double chosen_length = 0.0;
  double v = 0.0;  // relative position inside the chosen interval
  double point = 0.0;
};

// Chooses without inserting. tie_u resolves equal-length groups.
StepEvent choose_psi(const IntervalSet& set, const PsiSpec& spec, double w, double v, double tie_u = 0.0);
StepEvent choose_direct(const IntervalSet& set, DirectRule::Mode mode, std::span<const double> points,
                        Rng& rng);
StepEvent choose_kakutani(const IntervalSet& set, double v, double tie_u = 0.0);

// Choose and insert. The *_with forms take the randomness explicitly.
StepEvent step_psi_with(IntervalSet& set, const PsiSpec& spec, double w, double v, double tie_u = 0.0);
StepEvent step_psi(IntervalSet& set, const PsiSpec& spec, Rng& rng);
StepEvent step_direct_with(IntervalSet& set, DirectRule::Mode mode, std::span<const double> points, Rng& rng);
StepEvent step_direct(IntervalSet& set, int k, DirectRule::Mode mode, Rng& rng);
StepEvent step_kakutani_with(IntervalSet& set, double v, double tie_u = 0.0);
StepEvent step_kakutani(IntervalSet& set, Rng& rng);

// t_i = log(1 + S_i) for the arrival times S_i of a unit-rate Poisson process:
// the arrivals of a Poisson process with intensity e^t.
std::vector<double> arrival_times(std::size_t n, Rng& rng);

struct Checkpoint {
  std::uint64_t n = 0;
  std::optional<double> t;
  std::vector<std::uint64_t> N_alpha;  // per alpha: intervals inside [0, alpha]
  double largest_gap = 0.0;
  double smallest_gap = 0.0;
  double n_largest_gap = 0.0;
  std::vector<double> A;                     // A_n on the ECDF grid
  std::vector<std::vector<double>> A_alpha;  // per alpha, when recorded
  std::optional<double> delta1_left;         // delta_norm(1, LEFT) for the first alpha
};

struct TrajectoryStats {
  std::uint64_t replica = 0;
  std::vector<Checkpoint> checkpoints;
};

struct AggregateRow {
  std::uint64_t n = 0;
  std::vector<double> mean_N_alpha_over_n;
  std::vector<double> sd_N_alpha_over_n;
  double mean_n_largest_gap = 0.0;
  std::vector<double> mean_A;
};

struct RunResult {
  SimConfig config;  // resolved
  std::vector<double> grid;
  std::vector<TrajectoryStats> replicas;
  std::vector<AggregateRow> aggregate;
};

TrajectoryStats run_replica(const SimConfig& resolved_config, std::uint64_t replica);
RunResult run(const SimConfig& config);

// Limit distribution sampled on an ECDF grid.
std::vector<double> limit_on_grid(const LimitCurve& curve, std::span<const double> grid);

// Truncated trapezoid quadrature of x^{-1-delta} |A(x) - scale * Fhat(x)| on the grid.
double distance_on_grid(std::span<const double> grid, std::span<const double> A,
                        std::span<const double> Fhat, double delta, double scale = 1.0);

// ||A_n^alpha - alpha Fhat||_delta at a checkpoint; alpha = nullopt or 1 uses
// the unrestricted A_n.
double distance_to_limit(const Checkpoint& cp, const RunResult& run, std::span<const double> Fhat,
                         double delta, std::optional<double> alpha = {});

}  // namespace psiproc
