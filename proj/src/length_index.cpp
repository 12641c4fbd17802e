#include "psiproc/length_index.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "psiproc/error.hpp"

namespace psiproc {

std::size_t LengthIndex::block_for(double length, Id id) const {
  const std::size_t n = blocks_before(length, id);
  // blocks_before counts first keys strictly below; a block whose first key
  // equals the query also qualifies.
  if (n < blocks_.size() && first_length_[n] == length && first_id_[n] == id) return n;
  return n == 0 ? 0 : n - 1;
}

std::size_t LengthIndex::blocks_before(double length, Id id) const {
  std::size_t lo = 0, hi = first_length_.size();
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (key_less(first_length_[mid], first_id_[mid], length, id))
      lo = mid + 1;
    else
      hi = mid;
  }
  return lo;
}

void LengthIndex::refresh_block(std::size_t b, bool update_fenwick) {
  Block& blk = blocks_[b];
  double s = 0.0, sl = 0.0, sr = 0.0;
  for (const Entry& e : blk.entries) {
    s += e.length;
    if (e.side == Side::kLeftOfAlpha) sl += e.length;
    if (e.side == Side::kRightOfAlpha) sr += e.length;
  }
  if (update_fenwick) {
    const double ds = s - blk.sum, dl = sl - blk.sum_left, dr = sr - blk.sum_right;
    for (std::size_t i = b + 1; i < fw_.all.size(); i += i & (~i + 1)) {
      fw_.all[i] += ds;
      fw_.left[i] += dl;
      fw_.right[i] += dr;
    }
  }
  blk.sum = s;
  blk.sum_left = sl;
  blk.sum_right = sr;
  blk.touched = 0;
  first_length_[b] = blk.entries.front().length;
  first_id_[b] = blk.entries.front().id;
}

void LengthIndex::adjust_block(std::size_t b, double length, Side side, int sign) {
  Block& blk = blocks_[b];
  if (++blk.touched >= kRecomputeEvery) {
    refresh_block(b, true);
  } else {
    const double d = sign * length;
    const double dl = side == Side::kLeftOfAlpha ? d : 0.0;
    const double dr = side == Side::kRightOfAlpha ? d : 0.0;
    blk.sum += d;
    blk.sum_left += dl;
    blk.sum_right += dr;
    for (std::size_t i = b + 1; i < fw_.all.size(); i += i & (~i + 1)) {
      fw_.all[i] += d;
      fw_.left[i] += dl;
      fw_.right[i] += dr;
    }
    first_length_[b] = blk.entries.front().length;
    first_id_[b] = blk.entries.front().id;
  }
  for (std::size_t i = b + 1; i < fw_.count.size(); i += i & (~i + 1)) fw_.count[i] += static_cast<std::size_t>(sign);
}

void LengthIndex::rebuild() {
  const std::size_t nb = blocks_.size();
  first_length_.resize(nb);
  first_id_.resize(nb);
  fw_.all.assign(nb + 1, 0.0);
  fw_.left.assign(nb + 1, 0.0);
  fw_.right.assign(nb + 1, 0.0);
  fw_.count.assign(nb + 1, 0);
  for (std::size_t b = 0; b < nb; ++b) {
    first_length_[b] = blocks_[b].entries.front().length;
    first_id_[b] = blocks_[b].entries.front().id;
    fw_.all[b + 1] += blocks_[b].sum;
    fw_.left[b + 1] += blocks_[b].sum_left;
    fw_.right[b + 1] += blocks_[b].sum_right;
    fw_.count[b + 1] += blocks_[b].entries.size();
  }
  for (std::size_t i = 1; i <= nb; ++i) {
    const std::size_t j = i + (i & (~i + 1));
    if (j <= nb) {
      fw_.all[j] += fw_.all[i];
      fw_.left[j] += fw_.left[i];
      fw_.right[j] += fw_.right[i];
      fw_.count[j] += fw_.count[i];
    }
  }
  updates_since_rebuild_ = 0;
}

double LengthIndex::fenwick_prefix(const std::vector<double>& tree, std::size_t nblocks) const {
  double acc = 0.0;
  for (std::size_t i = nblocks; i > 0; i &= i - 1) acc += tree[i];
  return acc;
}

std::size_t LengthIndex::count_prefix(std::size_t nblocks) const {
  std::size_t acc = 0;
  for (std::size_t i = nblocks; i > 0; i &= i - 1) acc += fw_.count[i];
  return acc;
}

void LengthIndex::insert(Id id, double length, Side side) {
  if (id == kNil) throw ArgumentError("length index id out of range");
  if (id >= live_.size()) {
    const std::size_t n = static_cast<std::size_t>(id) + 1;
    length_.resize(std::max(n, 2 * length_.size()));
    side_.resize(length_.size());
    live_.resize(length_.size(), 0);
  }
  if (live_[id]) throw StateError("length index already holds this id");
  length_[id] = length;
  side_[id] = side;
  live_[id] = 1;
  ++size_;
  const Entry entry{length, id, side};

  if (blocks_.empty()) {
    blocks_.push_back({{entry}, length, side == Side::kLeftOfAlpha ? length : 0.0,
                       side == Side::kRightOfAlpha ? length : 0.0});
    rebuild();
    return;
  }
  const std::size_t b = block_for(length, id);
  auto& entries = blocks_[b].entries;
  const auto pos = std::upper_bound(entries.begin(), entries.end(), entry, [](const Entry& a, const Entry& c) {
    return key_less(a.length, a.id, c.length, c.id);
  });
  entries.insert(pos, entry);
  if (entries.size() > kMaxBlock) {
    Block upper;
    upper.entries.assign(entries.begin() + kMaxBlock / 2, entries.end());
    entries.resize(kMaxBlock / 2);
    blocks_.insert(blocks_.begin() + static_cast<std::ptrdiff_t>(b) + 1, std::move(upper));
    first_length_.insert(first_length_.begin() + static_cast<std::ptrdiff_t>(b) + 1, 0.0);
    first_id_.insert(first_id_.begin() + static_cast<std::ptrdiff_t>(b) + 1, 0);
    refresh_block(b, false);
    refresh_block(b + 1, false);
    rebuild();
    return;
  }
  adjust_block(b, length, side, +1);
  if (++updates_since_rebuild_ >= kRebuildEvery) rebuild();
}

void LengthIndex::erase(Id id) {
  if (!contains(id)) throw StateError("length index does not hold this id");
  const double length = length_[id];
  const std::size_t b = block_for(length, id);
  auto& entries = blocks_[b].entries;
  const auto pos = std::lower_bound(entries.begin(), entries.end(), Entry{length, id, Side::kNone},
                                    [](const Entry& a, const Entry& c) {
                                      return key_less(a.length, a.id, c.length, c.id);
                                    });
  if (pos == entries.end() || pos->id != id) throw StateError("length index ordering is corrupt");
  entries.erase(pos);
  live_[id] = 0;
  --size_;
  if (entries.empty()) {
    blocks_.erase(blocks_.begin() + static_cast<std::ptrdiff_t>(b));
    first_length_.erase(first_length_.begin() + static_cast<std::ptrdiff_t>(b));
    first_id_.erase(first_id_.begin() + static_cast<std::ptrdiff_t>(b));
    rebuild();
    return;
  }
  adjust_block(b, length, side_[id], -1);
  if (++updates_since_rebuild_ >= kRebuildEvery) rebuild();
}

double LengthIndex::total(SideQuery side) const {
  const std::size_t nb = blocks_.size();
  switch (side) {
    case SideQuery::kAll:
      return fenwick_prefix(fw_.all, nb);
    case SideQuery::kLeft:
      return fenwick_prefix(fw_.left, nb);
    case SideQuery::kRight:
      return fenwick_prefix(fw_.right, nb);
  }
  return 0.0;
}

LengthIndex::Id LengthIndex::quantile(double target) const {
  if (blocks_.empty()) return kNil;
  const std::size_t nb = blocks_.size();
  std::size_t pos = 0;
  for (std::size_t step = std::bit_floor(nb); step > 0; step >>= 1) {
    if (pos + step <= nb && fw_.all[pos + step] < target) {
      pos += step;
      target -= fw_.all[pos];
    }
  }
  if (pos >= nb) return max_id();
  const auto& entries = blocks_[pos].entries;
  for (const Entry& e : entries) {
    if (target <= e.length) return e.id;
    target -= e.length;
  }
  return entries.back().id;
}

double LengthIndex::prefix_sum(double x, SideQuery side) const {
  const std::size_t nb = blocks_before(x, kNil);
  if (nb == 0) return 0.0;
  const std::size_t b = nb - 1;
  double acc = 0.0;
  switch (side) {
    case SideQuery::kAll:
      acc = fenwick_prefix(fw_.all, b);
      break;
    case SideQuery::kLeft:
      acc = fenwick_prefix(fw_.left, b);
      break;
    case SideQuery::kRight:
      acc = fenwick_prefix(fw_.right, b);
      break;
  }
  for (const Entry& e : blocks_[b].entries) {
    if (e.length > x) break;
    if (side == SideQuery::kAll || (side == SideQuery::kLeft && e.side == Side::kLeftOfAlpha) ||
        (side == SideQuery::kRight && e.side == Side::kRightOfAlpha))
      acc += e.length;
  }
  return acc;
}

std::size_t LengthIndex::count_below(double length, Id id) const {
  const std::size_t nb = blocks_before(length, id);
  if (nb == 0) return 0;
  const auto& entries = blocks_[nb - 1].entries;
  const auto pos = std::lower_bound(entries.begin(), entries.end(), Entry{length, id, Side::kNone},
                                    [](const Entry& a, const Entry& c) {
                                      return key_less(a.length, a.id, c.length, c.id);
                                    });
  return count_prefix(nb - 1) + static_cast<std::size_t>(pos - entries.begin());
}

std::size_t LengthIndex::count_less(double x) const { return count_below(x, 0); }

std::size_t LengthIndex::count_less_equal(double x) const { return count_below(x, kNil); }

LengthIndex::Id LengthIndex::select(std::size_t rank) const {
  if (rank >= size_) throw DomainError("length index rank out of range");
  const std::size_t nb = blocks_.size();
  std::size_t pos = 0;
  for (std::size_t step = std::bit_floor(nb); step > 0; step >>= 1) {
    if (pos + step <= nb && fw_.count[pos + step] <= rank) {
      pos += step;
      rank -= fw_.count[pos];
    }
  }
  return blocks_[pos].entries[rank].id;
}

LengthIndex::Id LengthIndex::min_id() const { return blocks_.empty() ? kNil : blocks_.front().entries.front().id; }

LengthIndex::Id LengthIndex::max_id() const { return blocks_.empty() ? kNil : blocks_.back().entries.back().id; }

LengthIndex::Audit LengthIndex::audit() const {
  Audit out;
  std::size_t count = 0;
  double cum = 0.0, cum_l = 0.0, cum_r = 0.0;
  const Entry* prev = nullptr;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const Block& blk = blocks_[b];
    if (blk.entries.empty() || blk.entries.size() > kMaxBlock) out.counts_ok = false;
    double s = 0.0, sl = 0.0, sr = 0.0;
    for (const Entry& e : blk.entries) {
      if (prev && !key_less(prev->length, prev->id, e.length, e.id)) out.counts_ok = false;
      if (!contains(e.id) || length_[e.id] != e.length || side_[e.id] != e.side) out.counts_ok = false;
      s += e.length;
      if (e.side == Side::kLeftOfAlpha) sl += e.length;
      if (e.side == Side::kRightOfAlpha) sr += e.length;
      prev = &e;
    }
    if (!blk.entries.empty() && (first_length_[b] != blk.entries.front().length || first_id_[b] != blk.entries.front().id))
      out.counts_ok = false;
    out.max_sum_error = std::max({out.max_sum_error, std::fabs(s - blk.sum), std::fabs(sl - blk.sum_left),
                                  std::fabs(sr - blk.sum_right)});
    count += blk.entries.size();
    cum += s;
    cum_l += sl;
    cum_r += sr;
    out.max_sum_error = std::max({out.max_sum_error, std::fabs(cum - fenwick_prefix(fw_.all, b + 1)),
                                  std::fabs(cum_l - fenwick_prefix(fw_.left, b + 1)),
                                  std::fabs(cum_r - fenwick_prefix(fw_.right, b + 1))});
    if (count_prefix(b + 1) != count) out.counts_ok = false;
  }
  if (count != size_) out.counts_ok = false;
  return out;
}

void LengthIndex::corrupt_aggregate_for_testing(double delta) {
  if (!blocks_.empty()) blocks_.front().sum += delta;
}

}  // namespace psiproc
