#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "psiproc/condition.hpp"
#include "psiproc/error.hpp"
#include "psiproc/kernels.hpp"
#include "psiproc/limit_solver.hpp"
#include "psiproc/psi_model.hpp"
#include "psiproc/simulator.hpp"

#ifndef PSIPROC_VERSION
#define PSIPROC_VERSION "unknown"
#endif

namespace psiproc::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string g17(double x) { return fmt::format("{:.17g}", x); }

// RFC 4180 quoting for text fields.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

void write_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw StateError("cannot open " + tmp.string() + " for writing");
    os << content;
    if (!os.flush()) throw StateError("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

json load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config file " + path + " must hold a JSON object");
  // A run manifest carries its resolved config under "config".
  if (j.contains("config") && j["config"].is_object()) return j["config"];
  return j;
}

template <typename T>
T get_or(const json& cfg, const char* key, T fallback) {
  if (!cfg.contains(key) || cfg[key].is_null()) return fallback;
  try {
    return cfg[key].get<T>();
  } catch (const json::exception&) {
    throw ConfigError(fmt::format("config key '{}' has the wrong type", key));
  }
}

// Flags given on the command line, applied over the config file.
class Overlay {
 public:
  template <typename T>
  CLI::Option* add(CLI::App* app, const std::string& flag, const std::string& key, T& target,
                   const std::string& help) {
    CLI::Option* opt = app->add_option(flag, target, help);
    entries_.push_back({opt, [key, &target](json& cfg) { cfg[key] = target; }});
    return opt;
  }
  CLI::Option* add_flag(CLI::App* app, const std::string& flag, const std::string& key, bool& target,
                        const std::string& help) {
    CLI::Option* opt = app->add_flag(flag, target, help);
    entries_.push_back({opt, [key, &target](json& cfg) { cfg[key] = target; }});
    return opt;
  }
  void apply(json& cfg) const {
    for (const auto& [opt, fn] : entries_)
      if (opt->count() > 0) fn(cfg);
  }

 private:
  std::vector<std::pair<CLI::Option*, std::function<void(json&)>>> entries_;
};

// Choice-rule flags shared by solve, check, simulate and compare.
struct SpecFlags {
  std::string psi;
  std::string weights;
  std::string spec_file;

  void add(CLI::App* app) {
    app->add_option("--psi", psi, "named choice rule (uniform, max<k>, min<k>, mix-60-40, cp-half, geometric-min)");
    app->add_option("--weights", weights, R"(interpolation weights as JSON, e.g. '{"2":0.4,"-2":0.6}')");
    app->add_option("--spec-file", spec_file, R"(JSON file {"weights": {...}})");
  }
  // Flags replace any rule given by the config file.
  void apply(json& cfg) const {
    if (psi.empty() && weights.empty() && spec_file.empty()) return;
    cfg.erase("psi");
    cfg.erase("spec");
    cfg.erase("rule");
    if (!psi.empty()) cfg["spec"] = PsiSpec::preset(psi).to_json();
    if (!weights.empty()) {
      json w;
      try {
        w = json::parse(weights);
      } catch (const json::exception& e) {
        throw ConfigError(std::string("--weights is not valid JSON: ") + e.what());
      }
      cfg["spec"] = PsiSpec::from_json(w.contains("weights") ? w : json{{"weights", w}}).to_json();
    }
    if (!spec_file.empty()) {
      std::ifstream is(spec_file);
      if (!is) throw ConfigError("cannot read spec file " + spec_file);
      cfg["spec"] = PsiSpec::from_json(json::parse(is)).to_json();
    }
  }
};

// Resolves "psi" / "spec" config keys into a PsiSpec and normalizes cfg.
std::optional<PsiSpec> spec_from(json& cfg) {
  if (cfg.contains("psi") && cfg["psi"].is_string()) {
    cfg["spec"] = PsiSpec::preset(cfg["psi"].get<std::string>()).to_json();
    cfg.erase("psi");
  }
  if (!cfg.contains("spec") || cfg["spec"].is_null()) return std::nullopt;
  PsiSpec spec = PsiSpec::from_json(cfg["spec"]);
  cfg["spec"] = spec.to_json();
  return spec;
}

SolveOptions solve_options_from(json& cfg) {
  SolveOptions o;
  o.tol = get_or(cfg, "tol", o.tol);
  o.steps = get_or(cfg, "solve_steps", o.steps);
  if (cfg.contains("z_max") && !cfg["z_max"].is_null()) o.z_max = cfg["z_max"].get<double>();
  cfg["tol"] = o.tol;
  cfg["solve_steps"] = o.steps;
  if (o.tol <= 0.0) throw ConfigError("tol must be positive");
  if (o.steps < 1000) throw ConfigError("solve_steps must be at least 1000");
  return o;
}

SimConfig sim_config_from(json& cfg) {
  SimConfig c;
  const std::string rule = get_or<std::string>(cfg, "rule", "");
  if (rule == "kakutani") {
    c.dynamics = Dynamics::kKakutani;
  } else if (rule.starts_with("direct-max") || rule.starts_with("direct-min")) {
    c.dynamics = Dynamics::kDirect;
    c.direct.mode = rule.starts_with("direct-max") ? DirectRule::Mode::kMax : DirectRule::Mode::kMin;
    try {
      c.direct.k = std::stoi(rule.substr(10));
    } catch (const std::exception&) {
      throw ConfigError("direct rule needs an order, e.g. direct-max2");
    }
  } else if (!rule.empty() && rule != "psi") {
    c.dynamics = Dynamics::kPsi;
    c.spec = PsiSpec::preset(rule);
    cfg["spec"] = c.spec->to_json();
  }
  if (c.dynamics == Dynamics::kPsi) {
    if (!c.spec) c.spec = spec_from(cfg);
    if (!c.spec) throw ConfigError("simulate needs --rule, --psi, --weights or --spec-file");
  }
  if (c.dynamics != Dynamics::kPsi) cfg.erase("spec");

  c.n_steps = get_or<std::uint64_t>(cfg, "steps", 100000);
  c.seed = get_or<std::uint64_t>(cfg, "seed", 1);
  c.alphas = get_or<std::vector<double>>(cfg, "alphas", {0.5});
  c.initial_points = get_or<std::vector<double>>(cfg, "initial_points", {});
  c.checkpoints = get_or<std::vector<std::uint64_t>>(cfg, "checkpoints", {});
  c.replicas = get_or(cfg, "replicas", 1);
  c.poisson_time = get_or(cfg, "poisson_time", false);
  c.workers = get_or(cfg, "workers", 1);
  c.record_restricted = true;
  c = c.resolved();

  cfg["rule"] = rule.empty() ? "psi" : rule;
  cfg["steps"] = c.n_steps;
  cfg["seed"] = c.seed;
  cfg["alphas"] = c.alphas;
  cfg["initial_points"] = c.initial_points;
  cfg["checkpoints"] = c.checkpoints;
  cfg["replicas"] = c.replicas;
  cfg["poisson_time"] = c.poisson_time;
  cfg["workers"] = c.workers;
  return c;
}

std::vector<double> scan_params_from(json& cfg) {
  if (cfg.contains("values") && !cfg["values"].is_null()) {
    auto v = cfg["values"].get<std::vector<double>>();
    if (v.empty()) throw ConfigError("scan needs at least one parameter value");
    return v;
  }
  const double from = get_or(cfg, "from", 0.0);
  const double to = get_or(cfg, "to", 1.0);
  const double step = get_or(cfg, "step", 0.05);
  cfg["from"] = from;
  cfg["to"] = to;
  cfg["step"] = step;
  if (!(step > 0.0) || !(to >= from)) throw ConfigError("scan needs step > 0 and to >= from");
  const auto n = static_cast<std::size_t>(std::floor((to - from) / step + 1e-9)) + 1;
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = std::min(to, from + static_cast<double>(i) * step);
  return v;
}

struct Outputs {
  fs::path dir;
  std::string prefix;
  std::vector<std::string> files;

  fs::path path(const std::string& suffix) {
    fs::path p = dir / (prefix + suffix);
    files.push_back(p.string());
    return p;
  }
};

class Command {
 public:
  Command(std::string name, std::ostream& out) : name_(std::move(name)), out_(out) {}

  json cfg;
  Outputs outputs;

  void prepare(const std::string& config_path, const std::string& out_dir, const std::string& prefix) {
    if (!config_path.empty()) cfg = load_config_file(config_path);
    if (!cfg.is_object()) cfg = json::object();
    std::string dir = out_dir;
    if (dir.empty()) {
      const char* env = std::getenv("PSIPROC_OUT_DIR");
      dir = env && *env ? env : ".";
    }
    outputs.dir = dir;
    outputs.prefix = prefix.empty() ? name_ : prefix;
  }

  void finish(const std::vector<std::uint64_t>& seeds, double seconds) {
    json m;
    m["command"] = name_;
    m["version"] = PSIPROC_VERSION;
    m["simd"] = kernels::isa_name(kernels::active_isa());
    m["config"] = cfg;
    m["seeds"] = seeds;
    fs::path manifest = outputs.dir / (outputs.prefix + "_manifest.json");
    m["outputs"] = outputs.files;
    m["manifest"] = manifest.string();
    m["wall_seconds"] = seconds;
    write_atomic(manifest, m.dump(2) + "\n");
    out_ << "manifest: " << manifest.string() << "\n";
  }

 private:
  std::string name_;
  std::ostream& out_;
};

std::vector<std::uint64_t> replica_seeds(const SimConfig& c) {
  std::vector<std::uint64_t> s;
  for (int r = 0; r < c.replicas; ++r) s.push_back(c.seed ^ static_cast<std::uint64_t>(r));
  return s;
}

std::string stats_csv(const RunResult& run, const std::vector<double>* Fhat) {
  const bool with_t = run.config.poisson_time;
  std::string s = "replica,n,";
  if (with_t) s += "t_n,";
  s += "alpha,N_alpha,N_alpha_over_n,largest_gap,n_largest_gap,smallest_gap,distance_delta1\n";
  for (const auto& rep : run.replicas) {
    for (const auto& cp : rep.checkpoints) {
      for (std::size_t a = 0; a < run.config.alphas.size(); ++a) {
        const double alpha = run.config.alphas[a];
        s += fmt::format("{},{},", rep.replica, cp.n);
        if (with_t) s += g17(*cp.t) + ",";
        s += fmt::format("{},{},{},{},{},{},", g17(alpha), cp.N_alpha[a],
                         g17(static_cast<double>(cp.N_alpha[a]) / static_cast<double>(cp.n)), g17(cp.largest_gap),
                         g17(cp.n_largest_gap), g17(cp.smallest_gap));
        if (Fhat) s += g17(distance_to_limit(cp, run, *Fhat, 1.0, alpha));
        s += "\n";
      }
    }
  }
  return s;
}

std::string ecdf_csv(const RunResult& run) {
  std::string s = "replica,n,x,A_n\n";
  for (const auto& rep : run.replicas)
    for (const auto& cp : rep.checkpoints)
      for (std::size_t i = 0; i < run.grid.size(); ++i)
        s += fmt::format("{},{},{},{}\n", rep.replica, cp.n, g17(run.grid[i]), g17(cp.A[i]));
  return s;
}

int cmd_simulate(Command& cmd, std::ostream& out, bool ecdf, bool distance) {
  SimConfig config;
  std::optional<PsiSpec> limit_spec;
  SolveOptions sopts;
  try {
    config = sim_config_from(cmd.cfg);
    ecdf = ecdf || get_or(cmd.cfg, "ecdf", false);
    distance = distance && get_or(cmd.cfg, "distance", true);
    cmd.cfg["ecdf"] = ecdf;
    cmd.cfg["distance"] = distance;
    limit_spec = config.equivalent_spec();
    if (distance && limit_spec) sopts = solve_options_from(cmd.cfg);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  const auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(cmd.outputs.dir);
  const RunResult result = run(config);
  std::vector<double> Fhat;
  if (distance && limit_spec) Fhat = limit_on_grid(solve_f(*limit_spec, sopts), result.grid);
  write_atomic(cmd.outputs.path("_stats.csv"), stats_csv(result, Fhat.empty() ? nullptr : &Fhat));
  if (ecdf) write_atomic(cmd.outputs.path("_ecdf.csv"), ecdf_csv(result));
  const AggregateRow& last = result.aggregate.back();
  out << fmt::format("rule {}  n {}  replicas {}\n", config.rule_name(), last.n, config.replicas);
  for (std::size_t a = 0; a < config.alphas.size(); ++a)
    out << fmt::format("  alpha {:.6g}: mean N_alpha/n = {:.6f} (sd {:.2g})\n", config.alphas[a],
                       last.mean_N_alpha_over_n[a], last.sd_N_alpha_over_n[a]);
  out << fmt::format("  mean n*largest_gap = {:.6f}  (/ln n = {:.6f})\n", last.mean_n_largest_gap,
                     last.mean_n_largest_gap / std::log(static_cast<double>(last.n)));
  cmd.finish(replica_seeds(config), std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return kExitOk;
}

int cmd_solve(Command& cmd, std::ostream& out) {
  std::optional<PsiSpec> spec;
  SolveOptions opts;
  try {
    spec = spec_from(cmd.cfg);
    if (!spec) throw ConfigError("solve needs --psi, --weights or --spec-file");
    opts = solve_options_from(cmd.cfg);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  const auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(cmd.outputs.dir);
  const LimitCurve curve = solve_f(*spec, opts);
  std::ostringstream csv;
  write_curve_csv(csv, curve, *spec);
  write_atomic(cmd.outputs.path("_curve.csv"), csv.str());
  json res = {{"spec", spec->to_json()},
              {"spec_id", curve.spec_id},
              {"lambda", curve.lambda},
              {"z_max", curve.z_max},
              {"F_inf", curve.F_inf},
              {"tail", {{"kind", tail_name(curve.tail.kind)},
                        {"rate", curve.tail.rate},
                        {"exponent", curve.tail.exponent},
                        {"mass", curve.tail.mass}}},
              {"residuals", curve.validation->to_json()}};
  write_atomic(cmd.outputs.path("_residuals.json"), res.dump(2) + "\n");
  const auto& v = *curve.validation;
  out << fmt::format("{}: lambda = {:.12f}  z_max = {:g}  tail = {}\n", curve.spec_id, curve.lambda, curve.z_max,
                     tail_name(curve.tail.kind));
  out << fmt::format("  residuals: integro {:.3g}  norm {:.3g}  lambda {:.3g}  sup F' {:.6f}  sup zF' {:.6f}\n",
                     v.integro_residual, v.norm_residual, v.lambda_residual, v.sup_Fp, v.sup_zFp);
  cmd.finish({}, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return kExitOk;
}

ConditionOptions condition_options_from(json& cfg) {
  ConditionOptions o;
  o.solve = solve_options_from(cfg);
  o.delta_floor = get_or(cfg, "delta_floor", o.delta_floor);
  o.margin = get_or(cfg, "margin", o.margin);
  cfg["delta_floor"] = o.delta_floor;
  cfg["margin"] = o.margin;
  return o;
}

int cmd_check(Command& cmd, std::ostream& out) {
  std::optional<PsiSpec> spec;
  ConditionOptions opts;
  try {
    spec = spec_from(cmd.cfg);
    if (!spec) throw ConfigError("check needs --psi, --weights or --spec-file");
    opts = condition_options_from(cmd.cfg);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  const auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(cmd.outputs.dir);
  const ConditionReport rep = check_condition(*spec, opts);
  write_atomic(cmd.outputs.path("_report.json"), rep.to_json().dump(2) + "\n");
  out << fmt::format("{}: verdict {}  R_star = {:.9f}  delta_max = {:.9f}  argmax_z = {:g}\n", rep.spec_id,
                     verdict_name(rep.verdict), rep.R_star, rep.delta_max, rep.argmax_z);
  for (const auto& c : rep.lemma_checks)
    out << fmt::format("  {:<34} observed {:.9g}  bound {:.9g}  {}\n", c.name, c.observed, c.bound,
                       c.holds ? "holds" : "VIOLATED");
  cmd.finish({}, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return kExitOk;
}

int cmd_scan(Command& cmd, std::ostream& out) {
  std::string family;
  std::vector<double> params;
  ConditionOptions opts;
  SpecFamily gen;
  int workers = 1;
  try {
    family = get_or<std::string>(cmd.cfg, "family", "two-term");
    const int k = get_or(cmd.cfg, "k", 2);
    const std::string param = get_or<std::string>(cmd.cfg, "param", family == "two-term" ? "p_neg2" : "p_k");
    const std::string expected = family == "two-term" ? "p_neg2" : "p_k";
    if (param != expected)
      throw ConfigError(fmt::format("family {} is parametrized by {}, not {}", family, expected, param));
    cmd.cfg["family"] = family;
    cmd.cfg["param"] = param;
    if (family != "two-term") cmd.cfg["k"] = k;
    gen = named_family(family, k);
    params = scan_params_from(cmd.cfg);
    for (double p : params)
      if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(fmt::format("scan parameter {} outside [0,1]", p));
    opts = condition_options_from(cmd.cfg);
    workers = get_or(cmd.cfg, "workers", 1);
    cmd.cfg["workers"] = workers;
    if (workers < 1) throw ConfigError("workers must be at least 1");
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  const auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(cmd.outputs.dir);
  const ScanResult res = scan_family(family, gen, params, opts, workers);
  std::string csv = "param,spec_id,R_star,delta_max,verdict,error\n";
  for (const auto& r : res.rows) {
    csv += fmt::format("{},{},{},{},{},{}\n", g17(r.param), csv_field(r.spec_id), g17(r.R_star),
                       g17(r.delta_max), verdict_name(r.verdict), csv_field(r.error));
    out << fmt::format("  {:<8.4g} {:<12} R_star {:.6f}  delta_max {:+.6f}{}\n", r.param, verdict_name(r.verdict),
                       r.R_star, r.delta_max, r.error.empty() ? "" : "  error: " + r.error);
  }
  write_atomic(cmd.outputs.path("_scan.csv"), csv);
  if (res.boundary_last_pass)
    out << fmt::format("boundary: last PASS at {:.6g}, first non-PASS at {:.6g}\n", *res.boundary_last_pass,
                       *res.boundary_first_other);
  else
    out << "boundary: none inside the scanned range\n";
  cmd.finish({}, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return kExitOk;
}

int cmd_compare(Command& cmd, std::ostream& out) {
  SimConfig config;
  std::optional<PsiSpec> spec;
  SolveOptions sopts;
  double delta = 1.0;
  try {
    config = sim_config_from(cmd.cfg);
    spec = config.equivalent_spec();
    if (!spec) throw ConfigError("compare needs a rule with a limit curve (not kakutani)");
    sopts = solve_options_from(cmd.cfg);
    delta = get_or(cmd.cfg, "delta", 1.0);
    cmd.cfg["delta"] = delta;
    if (!(delta > 0.0 && delta <= 1.0)) throw ConfigError("delta must lie in (0,1]");
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  const auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(cmd.outputs.dir);
  const RunResult result = run(config);
  const auto Fhat = limit_on_grid(solve_f(*spec, sopts), result.grid);
  std::string csv = "replica,n,alpha,delta,distance\n";
  for (const auto& rep : result.replicas)
    for (const auto& cp : rep.checkpoints) {
      for (double a : config.alphas)
        csv += fmt::format("{},{},{},{},{}\n", rep.replica, cp.n, g17(a), g17(delta),
                           g17(distance_to_limit(cp, result, Fhat, delta, a)));
      csv += fmt::format("{},{},1,{},{}\n", rep.replica, cp.n, g17(delta),
                         g17(distance_to_limit(cp, result, Fhat, delta)));
    }
  write_atomic(cmd.outputs.path("_compare.csv"), csv);
  const auto& first = result.replicas.front();
  for (const auto& cp : first.checkpoints)
    out << fmt::format("  n {:>9}  distance (all) {:.6f}\n", cp.n, distance_to_limit(cp, result, Fhat, delta));
  cmd.finish(replica_seeds(config), std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return kExitOk;
}

struct SimFlags {
  std::string rule;
  std::uint64_t steps = 0;
  std::uint64_t seed = 0;
  std::vector<double> alphas, initial;
  std::vector<std::uint64_t> checkpoints;
  int replicas = 1;
  int workers = 1;
  bool poisson = false;

  void add(CLI::App* app, Overlay& ov) {
    ov.add(app, "--rule", "rule", rule, "process: a psi preset, kakutani, direct-max<k> or direct-min<k>");
    ov.add(app, "--steps", "steps", steps, "number of inserted points (default 100000)");
    ov.add(app, "--seed", "seed", seed, "64-bit seed; replica r uses seed ^ r (default 1)");
    ov.add(app, "--alpha", "alphas", alphas, "comma-separated alphas in (0,1) (default 0.5)")->delimiter(',');
    ov.add(app, "--initial", "initial_points", initial, "comma-separated initial points (default: the alphas)")
        ->delimiter(',');
    ov.add(app, "--checkpoints", "checkpoints", checkpoints, "comma-separated step counts (default 2^10, 2^11, ...)")
        ->delimiter(',');
    ov.add(app, "--replicas", "replicas", replicas, "independent replicas (default 1)");
    ov.add(app, "--workers", "workers", workers, "worker threads (default 1)");
    ov.add_flag(app, "--poisson", "poisson_time", poisson, "record Poisson arrival times t_n");
  }
};

struct SolveFlags {
  double tol = 0.0, z_max = 0.0;
  std::size_t steps = 0;
  void add(CLI::App* app, Overlay& ov) {
    ov.add(app, "--tol", "tol", tol, "tolerance on F(inf) = 1 (default 1e-6)");
    ov.add(app, "--z-max", "z_max", z_max, "integration range (default depends on psi(1))");
    ov.add(app, "--solve-steps", "solve_steps", steps, "grid intervals (default 11000)");
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Simulation and numerical checks for size-biased interval splitting processes"};
  app.require_subcommand(1);
  app.set_version_flag("--version", PSIPROC_VERSION);

  std::string config_path, out_dir, prefix;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file or run manifest; flags override it");
    sub->add_option("--out", out_dir, "output directory (default $PSIPROC_OUT_DIR or .)");
    sub->add_option("--prefix", prefix, "output file prefix (default: command name)");
  };

  Overlay ov;
  SpecFlags spec_flags;
  SimFlags sim_flags;
  SolveFlags solve_flags;
  bool ecdf = false, no_distance = false;
  std::string family, param;
  double from = 0, to = 0, step = 0, delta = 0, delta_floor = 0, margin = 0;
  std::vector<double> values;
  int k = 0, scan_workers = 1;

  CLI::App* simulate = app.add_subcommand("simulate", "run a splitting process and record checkpoint statistics");
  add_common(simulate);
  spec_flags.add(simulate);
  sim_flags.add(simulate, ov);
  solve_flags.add(simulate, ov);
  simulate->add_flag("--ecdf", ecdf, "also write the rescaled empirical distribution at each checkpoint");
  simulate->add_flag("--no-distance", no_distance, "skip the distance to the limit curve");

  CLI::App* solve = app.add_subcommand("solve", "solve for the limit distribution of rescaled lengths");
  add_common(solve);
  spec_flags.add(solve);
  solve_flags.add(solve, ov);

  CLI::App* check = app.add_subcommand("check", "evaluate the equidistribution condition and lemma bounds");
  add_common(check);
  spec_flags.add(check);
  solve_flags.add(check, ov);
  ov.add(check, "--delta-floor", "delta_floor", delta_floor, "smallest delta_max counted as PASS (default 1e-3)");
  ov.add(check, "--margin", "margin", margin, "delta_max <= -margin counts as FAIL (default 1e-3)");

  CLI::App* scan = app.add_subcommand("scan", "check the condition across a one-parameter family");
  add_common(scan);
  solve_flags.add(scan, ov);
  ov.add(scan, "--family", "family", family, "two-term, uniform-min-k or uniform-max-k");
  ov.add(scan, "--param", "param", param, "parameter name: p_neg2 (two-term) or p_k");
  ov.add(scan, "--k", "k", k, "order of the k term for the uniform families (default 2)");
  ov.add(scan, "--from", "from", from, "first parameter value (default 0)");
  ov.add(scan, "--to", "to", to, "last parameter value (default 1)");
  ov.add(scan, "--step", "step", step, "parameter step (default 0.05)");
  ov.add(scan, "--values", "values", values, "explicit comma-separated parameter values")->delimiter(',');
  ov.add(scan, "--workers", "workers", scan_workers, "worker threads (default 1)");

  CLI::App* compare = app.add_subcommand("compare", "distance between simulated and limit distributions");
  add_common(compare);
  spec_flags.add(compare);
  sim_flags.add(compare, ov);
  solve_flags.add(compare, ov);
  ov.add(compare, "--delta", "delta", delta, "norm exponent in (0,1] (default 1)");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  CLI::App* sub = app.get_subcommands().front();
  Command cmd(sub->get_name(), out);
  try {
    cmd.prepare(config_path, out_dir, prefix);
    const bool rule_flag = sub->get_option_no_throw("--rule") && sub->count("--rule") > 0;
    const bool spec_flag = !spec_flags.psi.empty() || !spec_flags.weights.empty() || !spec_flags.spec_file.empty();
    if (rule_flag && spec_flag) throw ConfigError("give either --rule or one of --psi/--weights/--spec-file");
    ov.apply(cmd.cfg);
    // A rule flag replaces a spec from the config file and vice versa.
    if (rule_flag) cmd.cfg.erase("spec");
    if (sub != scan) spec_flags.apply(cmd.cfg);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (sub == simulate) return cmd_simulate(cmd, out, ecdf, !no_distance);
    if (sub == solve) return cmd_solve(cmd, out);
    if (sub == check) return cmd_check(cmd, out);
    if (sub == scan) return cmd_scan(cmd, out);
    return cmd_compare(cmd, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace psiproc::cli
