#include "psiproc/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <future>
#include <set>

#include "psiproc/error.hpp"
#include "psiproc/kernels.hpp"

namespace psiproc {

std::vector<std::uint64_t> default_checkpoints(std::uint64_t n_steps) {
  std::vector<std::uint64_t> out;
  for (std::uint64_t c = 1024; c < n_steps; c *= 2) out.push_back(c);
  out.push_back(n_steps);
  return out;
}

std::vector<double> default_ecdf_grid() {
  constexpr int kPoints = 512;
  std::vector<double> g(kPoints);
  const double lo = std::log(1e-3), hi = std::log(50.0);
  for (int i = 0; i < kPoints; ++i) g[i] = std::exp(lo + (hi - lo) * i / (kPoints - 1));
  g.front() = 1e-3;
  g.back() = 50.0;
  return g;
}

void SimConfig::validate() const {
  if (n_steps < 1) throw ConfigError("n_steps must be at least 1");
  if (replicas < 1) throw ConfigError("replicas must be at least 1");
  if (workers < 1) throw ConfigError("workers must be at least 1");
  if (dynamics == Dynamics::kPsi && !spec) throw ConfigError("psi dynamics need a spec");
  if (dynamics == Dynamics::kDirect && direct.k < 1) throw ConfigError("direct rule needs k >= 1");
  for (double a : alphas)
    if (!(a > 0.0 && a < 1.0)) throw ConfigError(fmt::format("alpha {} must lie in (0,1)", a));
  const auto& pts = initial_points.empty() ? alphas : initial_points;
  std::set<double> seen;
  for (double x : pts) {
    if (!(x > 0.0 && x < 1.0)) throw ConfigError(fmt::format("initial point {} must lie in (0,1)", x));
    if (!seen.insert(x).second && !initial_points.empty())
      throw ConfigError(fmt::format("initial point {} is repeated", x));
  }
  for (double a : alphas)
    if (!seen.contains(a))
      throw ConfigError(fmt::format(
          "initial points must contain every alpha so that alpha is an interval endpoint; {} is missing", a));
  if (!std::is_sorted(checkpoints.begin(), checkpoints.end()))
    throw ConfigError("checkpoints must be sorted");
  for (auto c : checkpoints)
    if (c < 1 || c > n_steps) throw ConfigError(fmt::format("checkpoint {} outside [1, n_steps]", c));
  if (!ecdf_grid.empty()) {
    for (std::size_t i = 0; i < ecdf_grid.size(); ++i)
      if (!(ecdf_grid[i] > 0.0) || (i > 0 && !(ecdf_grid[i] > ecdf_grid[i - 1])))
        throw ConfigError("ECDF grid must be positive and strictly increasing");
  }
}

SimConfig SimConfig::resolved() const {
  validate();
  SimConfig c = *this;
  if (c.checkpoints.empty()) c.checkpoints = default_checkpoints(n_steps);
  c.checkpoints.erase(std::unique(c.checkpoints.begin(), c.checkpoints.end()), c.checkpoints.end());
  if (c.initial_points.empty()) {
    c.initial_points = alphas;
    std::sort(c.initial_points.begin(), c.initial_points.end());
    c.initial_points.erase(std::unique(c.initial_points.begin(), c.initial_points.end()), c.initial_points.end());
  }
  if (c.ecdf_grid.empty()) c.ecdf_grid = default_ecdf_grid();
  return c;
}

std::optional<PsiSpec> SimConfig::equivalent_spec() const {
  switch (dynamics) {
    case Dynamics::kPsi:
      return spec;
    case Dynamics::kDirect:
      if (direct.k == 1) return PsiSpec::uniform();
      return direct.mode == DirectRule::Mode::kMax ? PsiSpec::max_k(direct.k) : PsiSpec::min_k(direct.k);
    case Dynamics::kKakutani:
      break;
  }
  return std::nullopt;
}

std::string SimConfig::rule_name() const {
  switch (dynamics) {
    case Dynamics::kPsi:
      return "psi:" + spec->id();
    case Dynamics::kDirect:
      return fmt::format("direct:{}{}", direct.mode == DirectRule::Mode::kMax ? "max" : "min", direct.k);
    case Dynamics::kKakutani:
      break;
  }
  return "kakutani";
}

nlohmann::json SimConfig::to_json() const {
  nlohmann::json j;
  j["dynamics"] = dynamics == Dynamics::kPsi ? "psi" : dynamics == Dynamics::kDirect ? "direct" : "kakutani";
  if (spec) j["spec"] = spec->to_json();
  if (dynamics == Dynamics::kDirect)
    j["direct"] = {{"k", direct.k}, {"mode", direct.mode == DirectRule::Mode::kMax ? "max" : "min"}};
  j["n_steps"] = n_steps;
  j["seed"] = seed;
  j["alphas"] = alphas;
  j["checkpoints"] = checkpoints;
  j["initial_points"] = initial_points;
  j["replicas"] = replicas;
  j["poisson_time"] = poisson_time;
  j["workers"] = workers;
  j["record_restricted"] = record_restricted;
  j["audit_every"] = audit_every;
  if (!ecdf_grid.empty()) {
    j["ecdf_grid"] = {{"points", ecdf_grid.size()}, {"min", ecdf_grid.front()}, {"max", ecdf_grid.back()}};
  }
  return j;
}

namespace {

StepEvent place(const IntervalSet& set, IntervalSet::Id id, double v) {
  StepEvent e;
  e.chosen = id;
  e.chosen_left = set.interval(id).left;
  e.chosen_length = set.interval(id).length;
  e.v = v;
  e.point = e.chosen_left + v * e.chosen_length;
  return e;
}

}  // namespace

StepEvent choose_psi(const IntervalSet& set, const PsiSpec& spec, double w, double v, double tie_u) {
  if (!(w >= 0.0 && w <= 1.0) || !(v > 0.0 && v < 1.0)) throw DomainError("w must lie in [0,1] and v in (0,1)");
  double u = spec.inverse(w);
  // u = 0 would select nothing; the smallest positive level picks the shortest interval.
  const double level = std::max(u, std::numeric_limits<double>::min());
  StepEvent e = place(set, set.size_biased_quantile(std::min(level, 1.0), tie_u), v);
  e.w = w;
  e.u = u;
  return e;
}

StepEvent choose_direct(const IntervalSet& set, DirectRule::Mode mode, std::span<const double> points, Rng& rng) {
  if (points.empty()) throw ArgumentError("direct rule needs at least one candidate point");
  struct Candidate {
    double x;
    IntervalSet::Id id;
    double length;
  };
  std::vector<Candidate> cands;
  cands.reserve(points.size());
  for (double x : points) {
    if (!(x > 0.0 && x < 1.0)) throw DomainError("candidate points must lie in (0,1)");
    const auto id = set.locate(x);
    cands.push_back({x, id, set.interval(id).length});
  }
  const bool max = mode == DirectRule::Mode::kMax;
  double best = cands.front().length;
  for (const auto& c : cands) best = max ? std::max(best, c.length) : std::min(best, c.length);
  // Distinct intervals attaining the best length, in first-seen order.
  std::vector<IntervalSet::Id> tied;
  for (const auto& c : cands)
    if (c.length == best && std::find(tied.begin(), tied.end(), c.id) == tied.end()) tied.push_back(c.id);
  const auto id = tied.size() == 1 ? tied.front() : tied[rng.below(tied.size())];
  std::vector<double> inside;
  for (const auto& c : cands)
    if (c.id == id) inside.push_back(c.x);
  const double x = inside.size() == 1 ? inside.front() : inside[rng.below(inside.size())];
  StepEvent e = place(set, id, 0.0);
  e.point = x;
  e.v = (x - e.chosen_left) / e.chosen_length;
  return e;
}

StepEvent choose_kakutani(const IntervalSet& set, double v, double tie_u) {
  if (!(v > 0.0 && v < 1.0)) throw DomainError("v must lie in (0,1)");
  return place(set, set.largest_interval(tie_u), v);
}

StepEvent step_psi_with(IntervalSet& set, const PsiSpec& spec, double w, double v, double tie_u) {
  StepEvent e = choose_psi(set, spec, w, v, tie_u);
  set.split_interval(e.chosen, e.point);
  return e;
}

StepEvent step_psi(IntervalSet& set, const PsiSpec& spec, Rng& rng) {
  const double w = rng.uniform();
  const double v = rng.uniform();
  const double tie = rng.uniform();
  StepEvent e = choose_psi(set, spec, w, v, tie);
  try {
    set.split_interval(e.chosen, e.point);
  } catch (const DuplicatePointError&) {
    const double u = e.u;
    e = place(set, e.chosen, rng.uniform());
    e.w = w;
    e.u = u;
    set.split_interval(e.chosen, e.point);
  }
  return e;
}

StepEvent step_direct_with(IntervalSet& set, DirectRule::Mode mode, std::span<const double> points, Rng& rng) {
  StepEvent e = choose_direct(set, mode, points, rng);
  set.split_interval(e.chosen, e.point);
  return e;
}

StepEvent step_direct(IntervalSet& set, int k, DirectRule::Mode mode, Rng& rng) {
  if (k < 1) throw ArgumentError("direct rule needs k >= 1");
  std::vector<double> pts(static_cast<std::size_t>(k));
  for (int attempt = 0;; ++attempt) {
    for (double& x : pts) x = rng.uniform();
    try {
      return step_direct_with(set, mode, pts, rng);
    } catch (const DuplicatePointError&) {
      if (attempt == 1) throw;
    }
  }
}

StepEvent step_kakutani_with(IntervalSet& set, double v, double tie_u) {
  StepEvent e = choose_kakutani(set, v, tie_u);
  set.split_interval(e.chosen, e.point);
  return e;
}

StepEvent step_kakutani(IntervalSet& set, Rng& rng) {
  const double tie = rng.uniform();
  StepEvent e = choose_kakutani(set, rng.uniform(), tie);
  try {
    set.split_interval(e.chosen, e.point);
  } catch (const DuplicatePointError&) {
    e = place(set, e.chosen, rng.uniform());
    set.split_interval(e.chosen, e.point);
  }
  return e;
}

std::vector<double> arrival_times(std::size_t n, Rng& rng) {
  if (n < 1) throw ArgumentError("arrival_times needs n >= 1");
  std::vector<double> t(n);
  double s = 0.0;
  for (auto& ti : t) {
    s += rng.exponential();
    ti = std::log1p(s);
  }
  return t;
}

namespace {

// Restricted rescaled distribution: lengths of intervals inside [0, alpha],
// evaluated at x / n on the grid.
std::vector<double> restricted_ecdf(const IntervalSet& set, double alpha, double n, std::span<const double> grid) {
  std::vector<double> lengths;
  set.for_each_in_order([&](IntervalSet::Id, const Interval& iv) {
    if (iv.left < alpha) lengths.push_back(iv.length);
  });
  std::sort(lengths.begin(), lengths.end());
  std::vector<double> out(grid.size());
  double acc = 0.0;
  std::size_t j = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid[i] / n;
    while (j < lengths.size() && lengths[j] <= x) acc += lengths[j++];
    out[i] = acc;
  }
  return out;
}

}  // namespace

TrajectoryStats run_replica(const SimConfig& cfg, std::uint64_t replica) {
  std::optional<double> alpha;
  if (!cfg.alphas.empty()) alpha = cfg.alphas.front();
  IntervalSet set(cfg.initial_points, alpha);
  Rng rng = Rng::for_replica(cfg.seed, replica, 0);
  Rng clock = Rng::for_replica(cfg.seed, replica, 1);

  std::vector<std::uint64_t> N(cfg.alphas.size());
  for (std::size_t a = 0; a < cfg.alphas.size(); ++a)
    N[a] = 1 + static_cast<std::uint64_t>(std::count_if(cfg.initial_points.begin(), cfg.initial_points.end(),
                                                        [&](double x) { return x < cfg.alphas[a]; }));

  TrajectoryStats stats;
  stats.replica = replica;
  std::vector<double> candidates(cfg.dynamics == Dynamics::kDirect ? cfg.direct.k : 0);
  double s = 0.0;
  std::size_t next_cp = 0;
  for (std::uint64_t step = 1; step <= cfg.n_steps; ++step) {
    StepEvent e;
    switch (cfg.dynamics) {
      case Dynamics::kPsi:
        e = step_psi(set, *cfg.spec, rng);
        break;
      case Dynamics::kDirect:
        e = step_direct(set, cfg.direct.k, cfg.direct.mode, rng);
        break;
      case Dynamics::kKakutani:
        e = step_kakutani(set, rng);
        break;
    }
    for (std::size_t a = 0; a < N.size(); ++a)
      if (e.point < cfg.alphas[a]) ++N[a];
    if (cfg.poisson_time) s += clock.exponential();
    if (cfg.audit_every > 0 && step % cfg.audit_every == 0) {
      const auto rep = set.audit();
      if (!rep.ok(1e-9))
        throw NumericalBlowupError(fmt::format("interval audit failed at step {} (discrepancy {})", step,
                                               rep.max_discrepancy()));
    }
    if (next_cp < cfg.checkpoints.size() && cfg.checkpoints[next_cp] == step) {
      ++next_cp;
      Checkpoint cp;
      cp.n = step;
      if (cfg.poisson_time) cp.t = std::log1p(s);
      cp.N_alpha = N;
      cp.largest_gap = set.largest_gap();
      cp.smallest_gap = set.smallest_gap();
      const double n = static_cast<double>(step);
      cp.n_largest_gap = n * cp.largest_gap;
      cp.A.resize(cfg.ecdf_grid.size());
      for (std::size_t i = 0; i < cfg.ecdf_grid.size(); ++i) cp.A[i] = set.sbd_eval(cfg.ecdf_grid[i] / n);
      if (cfg.record_restricted)
        for (double a : cfg.alphas) cp.A_alpha.push_back(restricted_ecdf(set, a, n, cfg.ecdf_grid));
      if (alpha) cp.delta1_left = set.delta_norm(1.0, SideQuery::kLeft);
      stats.checkpoints.push_back(std::move(cp));
    }
  }
  return stats;
}

RunResult run(const SimConfig& config) {
  RunResult result;
  result.config = config.resolved();
  const SimConfig& cfg = result.config;
  result.grid = cfg.ecdf_grid;
  const auto nr = static_cast<std::size_t>(cfg.replicas);
  result.replicas.resize(nr);
  const std::size_t nw = std::min<std::size_t>(static_cast<std::size_t>(cfg.workers), nr);
  if (nw <= 1) {
    for (std::size_t r = 0; r < nr; ++r) result.replicas[r] = run_replica(cfg, r);
  } else {
    std::vector<std::future<void>> jobs;
    for (std::size_t w = 0; w < nw; ++w)
      jobs.push_back(std::async(std::launch::async, [&, w] {
        for (std::size_t r = w; r < nr; r += nw) result.replicas[r] = run_replica(cfg, r);
      }));
    for (auto& j : jobs) j.get();
  }

  const std::size_t na = cfg.alphas.size();
  for (std::size_t c = 0; c < cfg.checkpoints.size(); ++c) {
    AggregateRow row;
    row.n = cfg.checkpoints[c];
    row.mean_N_alpha_over_n.assign(na, 0.0);
    row.sd_N_alpha_over_n.assign(na, 0.0);
    row.mean_A.assign(result.grid.size(), 0.0);
    const double n = static_cast<double>(row.n);
    for (const auto& rep : result.replicas) {
      const Checkpoint& cp = rep.checkpoints[c];
      for (std::size_t a = 0; a < na; ++a) row.mean_N_alpha_over_n[a] += static_cast<double>(cp.N_alpha[a]) / n;
      row.mean_n_largest_gap += cp.n_largest_gap;
      for (std::size_t i = 0; i < cp.A.size(); ++i) row.mean_A[i] += cp.A[i];
    }
    const double R = static_cast<double>(nr);
    for (auto& m : row.mean_N_alpha_over_n) m /= R;
    row.mean_n_largest_gap /= R;
    for (auto& m : row.mean_A) m /= R;
    if (nr > 1) {
      for (const auto& rep : result.replicas)
        for (std::size_t a = 0; a < na; ++a) {
          const double d = static_cast<double>(rep.checkpoints[c].N_alpha[a]) / n - row.mean_N_alpha_over_n[a];
          row.sd_N_alpha_over_n[a] += d * d;
        }
      for (auto& s : row.sd_N_alpha_over_n) s = std::sqrt(s / (R - 1.0));
    }
    result.aggregate.push_back(std::move(row));
  }
  return result;
}

std::vector<double> limit_on_grid(const LimitCurve& curve, std::span<const double> grid) {
  std::vector<double> out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) out[i] = curve.eval(grid[i]);
  return out;
}

double distance_on_grid(std::span<const double> grid, std::span<const double> A, std::span<const double> Fhat,
                        double delta, double scale) {
  if (!(delta > 0.0 && delta <= 1.0)) throw DomainError("delta must lie in (0,1]");
  if (A.size() != grid.size() || Fhat.size() != grid.size())
    throw GridMismatchError(fmt::format("grid has {} points but the distributions have {} and {}", grid.size(),
                                        A.size(), Fhat.size()));
  if (grid.size() < 2) throw GridMismatchError("grid needs at least two points");
  std::vector<double> w(grid.size(), 0.0);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double h = grid[i + 1] - grid[i];
    if (!(h > 0.0)) throw GridMismatchError("grid must be strictly increasing");
    w[i] += 0.5 * h;
    w[i + 1] += 0.5 * h;
  }
  for (std::size_t i = 0; i < grid.size(); ++i) w[i] *= std::pow(grid[i], -1.0 - delta);
  return kernels::weighted_abs_diff(w, A, Fhat, scale);
}

double distance_to_limit(const Checkpoint& cp, const RunResult& run, std::span<const double> Fhat, double delta,
                         std::optional<double> alpha) {
  if (!alpha || *alpha == 1.0) return distance_on_grid(run.grid, cp.A, Fhat, delta, 1.0);
  const auto& as = run.config.alphas;
  const auto it = std::find(as.begin(), as.end(), *alpha);
  if (it == as.end()) throw ArgumentError(fmt::format("alpha {} was not tracked in this run", *alpha));
  const auto idx = static_cast<std::size_t>(it - as.begin());
  if (idx >= cp.A_alpha.size()) throw StateError("restricted distributions were not recorded");
  return distance_on_grid(run.grid, cp.A_alpha[idx], Fhat, delta, *alpha);
}

}  // namespace psiproc
