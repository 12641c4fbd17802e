#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "psiproc/length_index.hpp"

namespace psiproc {

struct Interval {
  double left = 0.0;
  double length = 0.0;
  Side side = Side::kNone;
};

// The current partition of [0,1] into intervals, with a length-ordered index
// answering size-biased queries in O(log n).
class IntervalSet {
 public:
  using Id = LengthIndex::Id;

  struct Split {
    Id old_id;
    double old_left;
    double old_length;
    Id left_id;
    Id right_id;
    double left_length;
    double right_length;
  };

  struct AuditReport {
    double tiling_error = 0.0;  // max |left_j + length_j - left_{j+1}|
    double sum_error = 0.0;     // |sum length_j - 1|
    double index_error = 0.0;   // stored vs recomputed subtree sums
    bool counts_ok = true;
    double max_discrepancy() const;
    bool ok(double tol = 1e-9) const { return counts_ok && max_discrepancy() <= tol; }
  };

  // The single interval [0,1].
  IntervalSet() : IntervalSet(std::span<const double>{}) {}
  // Splits [0,1] at the given points. When alpha is set it must be among them.
  explicit IntervalSet(std::span<const double> initial_points, std::optional<double> alpha = {});

  // Replaces the interval containing x by [left, x) and [x, right).
  Split insert_point(double x);
  // Same, for a caller that already knows which interval contains x.
  Split split_interval(Id id, double x);

  // Interval containing x, i.e. left <= x < right (x = 1 maps to the last one).
  Id locate(double x) const;

  // Size-biased quantile: scanning intervals by increasing length, the first
  // whose cumulative mass reaches u. Equal-length intervals are resolved by
  // tie_u in [0,1), which picks uniformly among the tied group.
  Id size_biased_quantile(double u, double tie_u = 0.0) const;

  // Size-biased empirical distribution: total length of intervals of the
  // chosen side with length <= x.
  double sbd_eval(double x, SideQuery side = SideQuery::kAll) const;

  // Integral of x^{-1-delta} * sbd(x) over (0, inf), in closed form
  // (1/delta) * sum length^{1-delta}.
  double delta_norm(double delta, SideQuery side = SideQuery::kAll) const;

  double largest_gap() const;
  double smallest_gap() const;
  // Longest interval; equal longest lengths resolved uniformly by tie_u.
  Id largest_interval(double tie_u = 0.0) const;

  const Interval& interval(Id id) const { return intervals_[id]; }
  double right_end(Id id) const;
  std::size_t size() const { return positions_.size(); }
  // Interior points currently present (initial and inserted).
  std::size_t n_points() const { return n_points_; }
  // Interior points strictly below alpha.
  std::size_t n_points_alpha() const { return n_points_alpha_; }
  std::optional<double> alpha() const { return alpha_; }
  // Number of intervals on the given side.
  std::size_t count(SideQuery side) const;

  // Visits intervals left to right.
  template <typename Fn>
  void for_each_in_order(Fn&& fn) const {
    for (const auto& [left, id] : positions_) fn(id, intervals_[id]);
  }

  AuditReport audit() const;
  void corrupt_index_for_testing(double delta) { index_.corrupt_aggregate_for_testing(delta); }

  // CSV snapshot: header "left,length,side_tag", 17 significant digits.
  void write_csv(std::ostream& os) const;

 private:
  using PositionMap = std::map<double, Id>;
  Split split_at(PositionMap::iterator it, double x);
  Id resolve_tie(Id id, double tie_u) const;
  Side side_of(double left) const;

  std::vector<Interval> intervals_;
  PositionMap positions_;  // left endpoint -> id
  std::vector<PositionMap::iterator> where_;  // id -> its entry in positions_
  LengthIndex index_;
  std::optional<double> alpha_;
  std::size_t n_points_ = 0;
  std::size_t n_points_alpha_ = 0;
  std::size_t n_left_ = 0;
};

const char* side_tag(Side side);

}  // namespace psiproc
