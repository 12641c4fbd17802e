#include "psiproc/psi_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "psiproc/error.hpp"
#include "psiproc/kernels.hpp"

namespace psiproc {

namespace {

std::map<int, double> drop_zeros(std::map<int, double> w) {
  std::erase_if(w, [](const auto& kv) { return kv.second == 0.0; });
  return w;
}

void check_unit(double u, const char* what) {
  if (!(u >= 0.0 && u <= 1.0)) {
    std::ostringstream os;
    os << what << " must lie in [0,1], got " << u;
    throw DomainError(os.str());
  }
}

}  // namespace

PsiSpec::PsiSpec(std::map<int, double> weights) {
  double total = 0.0;
  for (const auto& [k, p] : weights) {
    if (k == 0 || k == -1) throw ArgumentError("weight key " + std::to_string(k) + " is not allowed");
    if (std::abs(k) > kMaxOrder)
      throw ArgumentError("weight key " + std::to_string(k) + " exceeds |k| <= 64");
    if (!std::isfinite(p) || p < 0.0 || p > 1.0)
      throw ArgumentError("weight for key " + std::to_string(k) + " must lie in [0,1]");
    total += p;
  }
  if (std::fabs(total - 1.0) > kSumTolerance) {
    std::ostringstream os;
    os.precision(17);
    os << "weights must sum to 1, got " << total;
    throw ArgumentError(os.str());
  }
  weights_ = drop_zeros(std::move(weights));

  max_order_ = 1;
  for (const auto& [k, p] : weights_) max_order_ = std::max(max_order_, std::abs(k));
  coef_pos_.assign(max_order_ + 1, 0.0);
  coef_neg_.assign(max_order_ + 1, 0.0);
  for (const auto& [k, p] : weights_) {
    if (k > 0)
      coef_pos_[k] = p;
    else
      coef_neg_[-k] = p;
  }

  if (weights_.size() == 1) {
    const int k = weights_.begin()->first;
    shape_order_ = std::abs(k);
    shape_ = k == 1 ? Shape::kUniform : (k > 0 ? Shape::kPureMax : Shape::kPureMin);
  }
}

PsiSpec PsiSpec::uniform() { return PsiSpec({{1, 1.0}}); }

PsiSpec PsiSpec::max_k(int k) {
  if (k < 1) throw ArgumentError("max-k needs k >= 1");
  return PsiSpec({{k, 1.0}});
}

PsiSpec PsiSpec::min_k(int k) {
  if (k < 1) throw ArgumentError("min-k needs k >= 1");
  if (k == 1) return uniform();
  return PsiSpec({{-k, 1.0}});
}

PsiSpec PsiSpec::two_term(double p_neg2) {
  if (!(p_neg2 >= 0.0 && p_neg2 <= 1.0)) throw DomainError("p_{-2} must lie in [0,1]");
  return PsiSpec({{-2, p_neg2}, {2, 1.0 - p_neg2}});
}

PsiSpec PsiSpec::uniform_plus_geometric_min(double scale, double ratio, int kmax) {
  if (!(ratio > 1.0) || !(scale > 0.0) || kmax < 2 || kmax > kMaxOrder)
    throw ArgumentError("geometric min-k family needs ratio > 1, scale > 0, 2 <= kmax <= 64");
  std::map<int, double> w;
  double mass = 0.0;
  for (int k = 2; k < kmax; ++k) {
    w[-k] = scale * std::pow(ratio, -k);
    mass += w[-k];
  }
  w[-kmax] = scale * std::pow(ratio, -kmax) / (1.0 - 1.0 / ratio);
  mass += w[-kmax];
  if (mass > 1.0) throw ArgumentError("geometric min-k weights exceed total mass 1");
  w[1] = 1.0 - mass;
  return PsiSpec(std::move(w));
}

PsiSpec PsiSpec::preset(const std::string& name) {
  auto order_of = [&](std::string_view digits) {
    int k = 0;
    auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
    if (ec != std::errc() || p != digits.data() + digits.size() || k < 1)
      throw ArgumentError("unknown psi preset '" + name + "'");
    return k;
  };
  if (name == "uniform") return uniform();
  if (name == "mix-60-40") return two_term(0.6);
  if (name == "cp-half") return PsiSpec({{1, 0.75}, {-2, 0.25}});
  if (name == "geometric-min") return uniform_plus_geometric_min(0.01, 5.0, kMaxOrder);
  if (name.starts_with("max") && name.size() > 3) return max_k(order_of(std::string_view(name).substr(3)));
  if (name.starts_with("min") && name.size() > 3) return min_k(order_of(std::string_view(name).substr(3)));
  throw ArgumentError("unknown psi preset '" + name + "'");
}

PsiSpec PsiSpec::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("weights") || !j.at("weights").is_object())
    throw ArgumentError(R"(spec JSON must look like {"weights": {"<k>": p, ...}})");
  std::map<int, double> w;
  for (const auto& [key, value] : j.at("weights").items()) {
    int k = 0;
    auto [p, ec] = std::from_chars(key.data(), key.data() + key.size(), k);
    if (ec != std::errc() || p != key.data() + key.size())
      throw ArgumentError("weight key '" + key + "' is not an integer");
    if (!value.is_number()) throw ArgumentError("weight for key '" + key + "' is not a number");
    if (w.contains(k)) throw ArgumentError("duplicate weight key '" + key + "'");
    w[k] = value.get<double>();
  }
  return PsiSpec(std::move(w));
}

nlohmann::json PsiSpec::to_json() const {
  nlohmann::json w = nlohmann::json::object();
  for (const auto& [k, p] : weights_) w[std::to_string(k)] = p;
  return {{"weights", w}};
}

double PsiSpec::weight(int k) const {
  auto it = weights_.find(k);
  return it == weights_.end() ? 0.0 : it->second;
}

std::string PsiSpec::id() const {
  switch (shape_) {
    case Shape::kUniform:
      return "uniform";
    case Shape::kPureMax:
      return "max" + std::to_string(shape_order_);
    case Shape::kPureMin:
      return "min" + std::to_string(shape_order_);
    case Shape::kGeneral:
      break;
  }
  std::ostringstream os;
  os.precision(17);
  bool first = true;
  for (const auto& [k, p] : weights_) {
    os << (first ? "" : ",") << "p[" << k << "]=" << p;
    first = false;
  }
  return os.str();
}

PsiValue PsiSpec::eval(double u) const {
  check_unit(u, "u");
  PsiValue v{};
  kernels::scalar::psi_eval({coef_pos_, coef_neg_}, std::span<const double>(&u, 1), &v.Psi, &v.psi,
                            &v.dpsi);
  return v;
}

double PsiSpec::complement(double u) const {
  check_unit(u, "u");
  const double y = 1.0 - u;
  double acc = 0.0;
  double geo = 0.0;  // 1 + u + ... + u^{j-1}
  double pu = 1.0;
  double py = 1.0;
  for (int j = 1; j <= max_order_; ++j) {
    geo += pu;
    pu *= u;
    py *= y;
    acc += coef_pos_[j] * y * geo + coef_neg_[j] * py;
  }
  return acc;
}

double PsiSpec::inverse(double w) const {
  check_unit(w, "w");
  if (w == 0.0 || w == 1.0) return w;
  switch (shape_) {
    case Shape::kUniform:
      return w;
    case Shape::kPureMax:
      return shape_order_ == 2 ? std::sqrt(w) : std::pow(w, 1.0 / shape_order_);
    case Shape::kPureMin:
      return -std::expm1(std::log1p(-w) / shape_order_);
    case Shape::kGeneral:
      break;
  }
  double lo = 0.0, hi = 1.0, u = w;
  double prev_abs = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 200; ++it) {
    const PsiValue v = eval(u);
    const double f = v.Psi - w;
    if (f == 0.0) return u;
    (f > 0.0 ? hi : lo) = u;
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(hi, 1e-300)) break;
    double next = 0.5 * (lo + hi);
    if (v.psi > 0.0 && std::fabs(f) < 0.5 * prev_abs) {
      const double newton = u - f / v.psi;
      if (newton > lo && newton < hi) next = newton;
    }
    prev_abs = std::fabs(f);
    if (next == u) break;
    u = next;
  }
  if (std::fabs(eval(u).Psi - w) > 1e-12) throw SolverError("psi inversion failed to converge");
  return u;
}

double PsiSpec::c_p() const {
  double c = 0.0;
  for (const auto& [k, p] : weights_) {
    const int a = std::abs(k);
    if (a >= 2) c += static_cast<double>(a) * (a - 1) * p;
  }
  return c;
}

CpReport PsiSpec::c_p_report(int grid_points) const {
  if (grid_points < 2) throw ArgumentError("c_p grid needs at least two points");
  std::vector<double> u(grid_points), d(grid_points);
  for (int i = 0; i < grid_points; ++i) u[i] = static_cast<double>(i) / (grid_points - 1);
  eval_batch(*this, u, {}, {}, d);
  double sup = 0.0;
  for (double x : d) sup = std::max(sup, std::fabs(x));
  const double cp = c_p();
  return {cp, sup, sup <= cp + 1e-12 * std::max(1.0, cp)};
}

ConditionDReport PsiSpec::check_condition_d(std::span<const double> grid) const {
  if (grid.empty()) throw ArgumentError("condition (D) grid is empty");
  int kappa = 1;
  for (const auto& [k, p] : weights_)
    if (k <= -2) kappa = std::max(kappa, -k);
  double c = std::numeric_limits<double>::infinity();
  for (double u : grid) {
    if (!(u > 0.0 && u < 1.0)) throw DomainError("condition (D) grid must lie in (0,1)");
    c = std::min(c, complement(u) / std::pow(1.0 - u, kappa));
  }
  return {c, static_cast<double>(kappa), c > 0.0};
}

int PsiSpec::leading_max_order() const {
  if (weights_.empty() || weights_.begin()->first < 2) return 0;
  return weights_.begin()->first;
}

bool PsiSpec::is_pure_min() const {
  return std::all_of(weights_.begin(), weights_.end(), [](const auto& kv) { return kv.first <= -2; });
}

void eval_batch(const PsiSpec& spec, std::span<const double> u, std::span<double> Psi,
                std::span<double> psi, std::span<double> dpsi) {
  auto out = [&](std::span<double> s) -> double* {
    if (s.empty()) return nullptr;
    if (s.size() != u.size()) throw ArgumentError("eval_batch output size mismatch");
    return s.data();
  };
  for (double x : u) check_unit(x, "u");
  kernels::psi_eval({spec.coef_pos(), spec.coef_neg()}, u, out(Psi), out(psi), out(dpsi));
}

}  // namespace psiproc
