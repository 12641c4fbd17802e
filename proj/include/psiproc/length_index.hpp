#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace psiproc {

enum class Side : std::uint8_t { kNone = 0, kLeftOfAlpha = 1, kRightOfAlpha = 2 };
enum class SideQuery : std::uint8_t { kAll, kLeft, kRight };

// Ordered index over (length, id) with length sums split by side. Members
// live in sorted blocks of bounded size; Fenwick trees over per-block
// aggregates give O(log n) rank, prefix-sum and quantile queries. Block
// aggregates are updated incrementally and recomputed exactly every
// kRecomputeEvery touches; the Fenwick trees are rebuilt every kRebuildEvery
// updates and on structural changes, so floating drift stays bounded. The layout is a
// deterministic function of the operation history.
class LengthIndex {
 public:
  using Id = std::uint32_t;
  static constexpr Id kNil = 0xffffffffu;

  void insert(Id id, double length, Side side);
  void erase(Id id);

  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  bool contains(Id id) const { return id < live_.size() && live_[id]; }

  // Sum of member lengths of the given side.
  double total(SideQuery side = SideQuery::kAll) const;

  // Id of the first member in (length, id) order whose cumulative length
  // reaches `target`; the longest member if the total falls short.
  Id quantile(double target) const;
  // Sum of lengths <= x over the given side.
  double prefix_sum(double x, SideQuery side = SideQuery::kAll) const;
  std::size_t count_less(double x) const;
  std::size_t count_less_equal(double x) const;
  // Member at 0-based rank in (length, id) order.
  Id select(std::size_t rank) const;
  Id min_id() const;
  Id max_id() const;
  double length_of(Id id) const { return length_[id]; }

  // Largest difference between stored aggregates and a full recomputation,
  // plus an ordering and count check.
  struct Audit {
    double max_sum_error = 0.0;
    bool counts_ok = true;
  };
  Audit audit() const;

  // Test hook: perturbs a stored block aggregate.
  void corrupt_aggregate_for_testing(double delta);

 private:
  static constexpr std::size_t kMaxBlock = 256;
  static constexpr std::size_t kRebuildEvery = 4096;
  static constexpr std::uint32_t kRecomputeEvery = 128;

  struct Entry {
    double length;
    Id id;
    Side side;
  };
  struct Block {
    std::vector<Entry> entries;
    double sum = 0.0;
    double sum_left = 0.0;
    double sum_right = 0.0;
    std::uint32_t touched = 0;  // incremental updates since the last exact recompute
  };
  struct Fenwick {
    std::vector<double> all, left, right;
    std::vector<std::size_t> count;
  };

  static bool key_less(double la, Id ia, double lb, Id ib) { return la < lb || (la == lb && ia < ib); }
  // Last block whose first key is <= (length, id); 0 when there is none.
  std::size_t block_for(double length, Id id) const;
  // Number of blocks whose first key is < (length, id).
  std::size_t blocks_before(double length, Id id) const;
  // Recomputes block b's aggregates exactly.
  void refresh_block(std::size_t b, bool update_fenwick);
  // Adds sign * length to block b's aggregates and the Fenwick trees.
  void adjust_block(std::size_t b, double length, Side side, int sign);
  void rebuild();
  double fenwick_prefix(const std::vector<double>& tree, std::size_t nblocks) const;
  std::size_t count_prefix(std::size_t nblocks) const;
  std::size_t count_below(double length, Id id) const;

  std::vector<Block> blocks_;
  std::vector<double> first_length_;
  std::vector<Id> first_id_;
  Fenwick fw_;
  std::vector<double> length_;
  std::vector<Side> side_;
  std::vector<std::uint8_t> live_;
  std::size_t size_ = 0;
  std::size_t updates_since_rebuild_ = 0;
};

}  // namespace psiproc
