#include "psiproc/interval_set.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "psiproc/error.hpp"

namespace psiproc {

double IntervalSet::AuditReport::max_discrepancy() const {
  return std::max({tiling_error, sum_error, index_error});
}

const char* side_tag(Side side) {
  switch (side) {
    case Side::kLeftOfAlpha:
      return "LEFT_OF_ALPHA";
    case Side::kRightOfAlpha:
      return "RIGHT_OF_ALPHA";
    case Side::kNone:
      break;
  }
  return "NONE";
}

IntervalSet::IntervalSet(std::span<const double> initial_points, std::optional<double> alpha)
    : alpha_(alpha) {
  if (alpha_) {
    if (!(*alpha_ > 0.0 && *alpha_ < 1.0)) throw DomainError("alpha must lie in (0,1)");
    if (std::find(initial_points.begin(), initial_points.end(), *alpha_) == initial_points.end())
      throw ArgumentError("initial points must contain alpha");
  }
  intervals_.push_back({0.0, 1.0, Side::kNone});
  where_.push_back(positions_.emplace(0.0, 0).first);
  index_.insert(0, 1.0, Side::kNone);
  // Splitting at alpha first gives every later interval a definite side.
  if (alpha_) insert_point(*alpha_);
  for (double x : initial_points) {
    if (alpha_ && x == *alpha_) continue;
    insert_point(x);
  }
}

Side IntervalSet::side_of(double left) const {
  if (!alpha_) return Side::kNone;
  return left < *alpha_ ? Side::kLeftOfAlpha : Side::kRightOfAlpha;
}

double IntervalSet::right_end(Id id) const {
  auto it = positions_.upper_bound(intervals_[id].left);
  return it == positions_.end() ? 1.0 : it->first;
}

IntervalSet::Id IntervalSet::locate(double x) const {
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("position must lie in [0,1]");
  auto it = positions_.upper_bound(x);
  --it;
  return it->second;
}

IntervalSet::Split IntervalSet::insert_point(double x) {
  if (!(x > 0.0 && x < 1.0)) throw DomainError(fmt::format("split point {} outside (0,1)", x));
  return split_at(std::prev(positions_.upper_bound(x)), x);
}

IntervalSet::Split IntervalSet::split_interval(Id id, double x) {
  if (!(x > 0.0 && x < 1.0)) throw DomainError(fmt::format("split point {} outside (0,1)", x));
  if (id >= where_.size() || !index_.contains(id)) throw ArgumentError("unknown interval id");
  const double left = intervals_[id].left;
  if (x < left || x > left + intervals_[id].length)
    throw DomainError(fmt::format("split point {} outside interval {}", x, id));
  return split_at(where_[id], x);
}

IntervalSet::Split IntervalSet::split_at(PositionMap::iterator it, double x) {
  const auto next = std::next(it);
  const double right = next == positions_.end() ? 1.0 : next->first;
  const double left = it->first;
  if (x == left || x >= right) throw DuplicatePointError(x);
  const Id old_id = it->second;
  const Interval old = intervals_[old_id];

  // Lengths are differences of exactly stored endpoints, so rounding does not
  // accumulate across splits.
  const double len_left = x - left;
  const double len_right = right - x;
  if (!(len_left > 0.0 && len_right > 0.0)) throw DuplicatePointError(x);

  index_.erase(old_id);
  const Id new_id = static_cast<Id>(intervals_.size());
  intervals_.push_back({x, len_right, side_of(x)});
  intervals_[old_id].length = len_left;
  intervals_[old_id].side = side_of(left);
  if (old.side == Side::kLeftOfAlpha) --n_left_;
  if (intervals_[old_id].side == Side::kLeftOfAlpha) ++n_left_;
  if (intervals_[new_id].side == Side::kLeftOfAlpha) ++n_left_;
  index_.insert(old_id, len_left, intervals_[old_id].side);
  index_.insert(new_id, len_right, intervals_[new_id].side);
  where_.push_back(positions_.emplace_hint(next, x, new_id));

  ++n_points_;
  if (alpha_ && x < *alpha_) ++n_points_alpha_;
  return {old_id, left, old.length, old_id, new_id, len_left, len_right};
}

IntervalSet::Id IntervalSet::resolve_tie(Id id, double tie_u) const {
  const double len = index_.length_of(id);
  const std::size_t lo = index_.count_less(len);
  const std::size_t hi = index_.count_less_equal(len);
  if (hi - lo <= 1) return id;
  const double t = std::clamp(tie_u, 0.0, std::nextafter(1.0, 0.0));
  const auto offset = static_cast<std::size_t>(t * static_cast<double>(hi - lo));
  return index_.select(lo + std::min(offset, hi - lo - 1));
}

IntervalSet::Id IntervalSet::size_biased_quantile(double u, double tie_u) const {
  if (!(u > 0.0 && u <= 1.0)) throw DomainError(fmt::format("quantile level {} outside (0,1]", u));
  return resolve_tie(index_.quantile(u), tie_u);
}

double IntervalSet::sbd_eval(double x, SideQuery side) const {
  if (side != SideQuery::kAll && !alpha_) throw StateError("side query needs alpha to be set");
  if (x < 0.0) return 0.0;
  return index_.prefix_sum(x, side);
}

std::size_t IntervalSet::count(SideQuery side) const {
  if (side != SideQuery::kAll && !alpha_) throw StateError("side query needs alpha to be set");
  switch (side) {
    case SideQuery::kAll:
      return positions_.size();
    case SideQuery::kLeft:
      return n_left_;
    case SideQuery::kRight:
      return positions_.size() - n_left_;
  }
  return 0;
}

double IntervalSet::delta_norm(double delta, SideQuery side) const {
  if (!(delta > 0.0 && delta <= 1.0)) throw DomainError("delta must lie in (0,1]");
  if (side != SideQuery::kAll && !alpha_) throw StateError("side query needs alpha to be set");
  if (delta == 1.0) return static_cast<double>(count(side));
  double acc = 0.0;
  const double e = 1.0 - delta;
  for (const auto& [left, id] : positions_) {
    const Interval& iv = intervals_[id];
    const bool take = side == SideQuery::kAll ||
                      (side == SideQuery::kLeft && iv.side == Side::kLeftOfAlpha) ||
                      (side == SideQuery::kRight && iv.side == Side::kRightOfAlpha);
    if (take) acc += std::pow(iv.length, e);
  }
  return acc / delta;
}

double IntervalSet::largest_gap() const { return index_.length_of(index_.max_id()); }

double IntervalSet::smallest_gap() const { return index_.length_of(index_.min_id()); }

IntervalSet::Id IntervalSet::largest_interval(double tie_u) const {
  return resolve_tie(index_.max_id(), tie_u);
}

IntervalSet::AuditReport IntervalSet::audit() const {
  AuditReport r;
  double sum = 0.0;
  std::size_t left_count = 0, alpha_points = 0;
  const Interval* prev = nullptr;
  for (const auto& [left, id] : positions_) {
    const Interval& iv = intervals_[id];
    if (iv.left != left) r.counts_ok = false;
    if (prev) r.tiling_error = std::max(r.tiling_error, std::fabs(prev->left + prev->length - left));
    if (!index_.contains(id) || index_.length_of(id) != iv.length) r.counts_ok = false;
    if (iv.side != side_of(iv.left) && alpha_) r.counts_ok = false;
    if (iv.side == Side::kLeftOfAlpha) ++left_count;
    if (alpha_ && left > 0.0 && left < *alpha_) ++alpha_points;
    sum += iv.length;
    prev = &iv;
  }
  if (prev) r.tiling_error = std::max(r.tiling_error, std::fabs(prev->left + prev->length - 1.0));
  r.sum_error = std::fabs(sum - 1.0);
  const auto idx = index_.audit();
  r.index_error = std::max(idx.max_sum_error, std::fabs(index_.total() - sum));
  if (!idx.counts_ok || index_.size() != positions_.size()) r.counts_ok = false;
  if (positions_.size() != n_points_ + 1 || left_count != n_left_) r.counts_ok = false;
  if (alpha_ && alpha_points != n_points_alpha_) r.counts_ok = false;
  if (n_points_alpha_ > n_points_) r.counts_ok = false;
  return r;
}

void IntervalSet::write_csv(std::ostream& os) const {
  os << "left,length,side_tag\n";
  for (const auto& [left, id] : positions_) {
    const Interval& iv = intervals_[id];
    os << fmt::format("{:.17g},{:.17g},{}\n", iv.left, iv.length, side_tag(iv.side));
  }
}

}  // namespace psiproc
