#pragma once

#include <cstdint>
#include <vector>

#include "exporec/logging_types.hpp"
#include "exporec/rng.hpp"
#include "exporec/scoring.hpp"
#include "exporec/world.hpp"

namespace exporec {

// Serving policy for one logging round. ZipfBootstrap is the cold-start
// policy (rank-skewed sampling without replacement); ModelTopK serves the
// current retrieval index with an epsilon-greedy exploration slot.
struct LoggingPolicy {
  enum class Kind { ZipfBootstrap, ModelTopK };

  Kind kind = Kind::ZipfBootstrap;
  std::size_t slate_size = 20;
  double exploration_epsilon = 0.0;

  // ModelTopK only.
  const RetrievalIndex* index = nullptr;
  const ModelParams* params = nullptr;
  // When set, exploration slots prefer items with zero cumulative exposure.
  const ExposureCounts* cumulative_exposure = nullptr;

  void validate(std::size_t n_items) const;
};

struct LoggingRoundResult {
  std::vector<ImpressionRecord> records;  // |users| * slate_size records
  ExposureCounts delta;
};

// One iteration of the feedback cycle: pick a slate per user, sample
// feedback for every slate item, tally exposures. Per-user randomness is
// derived from (rng, round, user_id), so user order does not matter.
LoggingRoundResult run_logging_round(const World& world, const LoggingPolicy& policy,
                                     const std::vector<UserId>& users, std::uint32_t round,
                                     Rng& rng);

}  // namespace exporec
