#pragma once

#include <cstdint>
#include <vector>

#include "exporec/common.hpp"

namespace exporec {

// One exposure event and its observed outcome. Only exposures are ever
// logged; non-exposures are synthesized later as random negatives.
struct ImpressionRecord {
  std::uint32_t round;
  UserId user_id;
  ItemId item_id;
  Feedback label;

  bool operator==(const ImpressionRecord&) const = default;
};

// Per-item cumulative exposure tallies.
struct ExposureCounts {
  std::vector<std::uint64_t> counts;
  std::uint64_t total = 0;

  static ExposureCounts zeros(std::size_t n_items) {
    ExposureCounts c;
    c.counts.assign(n_items, 0);
    return c;
  }

  void add(ItemId item) {
    counts[item] += 1;
    total += 1;
  }

  bool operator==(const ExposureCounts&) const = default;
};

ExposureCounts accumulate_exposures(const ExposureCounts& base, const ExposureCounts& delta);

}  // namespace exporec
