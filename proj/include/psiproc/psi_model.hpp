#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace psiproc {

struct PsiValue {
  double Psi;   // distribution function
  double psi;   // first derivative
  double dpsi;  // second derivative
};

struct ConditionDReport {
  double c;
  double kappa;
  bool holds;
};

struct CpReport {
  double c_p;
  double sup_abs_dpsi;  // sampled on a grid
  bool bound_holds;     // sup_abs_dpsi <= c_p (+ rounding slack)
};

// A choice rule: a probability vector over k in Z \ {-1, 0}.
//   k = 1     uniform term  u
//   k >= 2    max-k term    u^k
//   k <= -2   min-k term    1 - (1-u)^{|k|}
// Immutable after construction.
class PsiSpec {
 public:
  static constexpr int kMaxOrder = 64;
  static constexpr double kSumTolerance = 1e-12;

  explicit PsiSpec(std::map<int, double> weights);

  static PsiSpec uniform();
  static PsiSpec max_k(int k);
  static PsiSpec min_k(int k);
  // p_{-2} * min-2 + (1 - p_{-2}) * max-2.
  static PsiSpec two_term(double p_neg2);
  // Uniform plus geometric min-k weights p_{-k} = scale * ratio^{-k},
  // k = 2..kmax; the tail k > kmax is folded into the kmax term.
  static PsiSpec uniform_plus_geometric_min(double scale, double ratio, int kmax);
  // Named presets: uniform, max<k>, min<k>, mix-60-40, cp-half.
  static PsiSpec preset(const std::string& name);

  static PsiSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  const std::map<int, double>& weights() const { return weights_; }
  double weight(int k) const;
  std::string id() const;

  PsiValue eval(double u) const;
  // 1 - Psi(u), evaluated without cancellation near u = 1.
  double complement(double u) const;
  double inverse(double w) const;

  double c_p() const;
  CpReport c_p_report(int grid_points = 1001) const;
  ConditionDReport check_condition_d(std::span<const double> grid) const;

  // Smallest max-k order with positive weight when psi(0) == 0, else 0.
  int leading_max_order() const;
  int max_abs_order() const { return max_order_; }
  bool is_pure_min() const;

  // Coefficients for batch evaluation: coef_pos[j] = p_j, coef_neg[j] = p_{-j}
  // for j in [0, max_abs_order]; unused slots are zero.
  const std::vector<double>& coef_pos() const { return coef_pos_; }
  const std::vector<double>& coef_neg() const { return coef_neg_; }

  bool operator==(const PsiSpec& other) const { return weights_ == other.weights_; }

 private:
  enum class Shape { kGeneral, kUniform, kPureMax, kPureMin };

  std::map<int, double> weights_;
  std::vector<double> coef_pos_;
  std::vector<double> coef_neg_;
  int max_order_ = 1;
  Shape shape_ = Shape::kGeneral;
  int shape_order_ = 1;
};

// Vectorised Psi/psi/psi' over many points; dispatches to the best kernel.
void eval_batch(const PsiSpec& spec, std::span<const double> u, std::span<double> Psi,
                std::span<double> psi, std::span<double> dpsi);

}  // namespace psiproc
