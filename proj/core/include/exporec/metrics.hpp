#pragma once

#include <map>
#include <unordered_set>
#include <vector>

#include "exporec/logging_types.hpp"

namespace exporec {

// Held-out per-user positives and negatives, built from log rounds never
// shown to the trainer. If a (user, item) pair carries both labels across
// draws, the positive wins and the pair is dropped from the negatives,
// keeping the two sets disjoint.
struct EvaluationSet {
  std::map<UserId, std::unordered_set<ItemId>> positives;
  std::map<UserId, std::unordered_set<ItemId>> negatives;

  std::vector<UserId> users() const;
};

EvaluationSet build_evaluation_set(const std::vector<ImpressionRecord>& holdout_logs);

// Ranked top-k lists keyed by user; the input to all retrieval metrics.
using Retrievals = std::map<UserId, std::vector<ItemId>>;

struct MetricsReport {
  double positive_recall_at_k = 0.0;
  double negative_recall_at_k = 0.0;
  std::size_t unique_retrieved = 0;
  double popular_dominance = 0.0;
  double exposure_gini = 0.0;
  std::size_t k = 0;
  double gamma = 0.0;
  std::size_t n_eval_users = 0;
};

// Macro-averaged recall over held-out positives; users with no positives
// are excluded from the mean.
double positive_recall_at_k(const Retrievals& retrievals, const EvaluationSet& eval);

// Same shape over held-out negatives; lower is better.
double negative_recall_at_k(const Retrievals& retrievals, const EvaluationSet& eval);

std::size_t unique_retrieved_items(const Retrievals& retrievals);

// Share of retrieval slots occupied by the most-exposed ceil(top_fraction*n)
// items (exposure ties broken toward the lower item id).
double popular_dominance(const Retrievals& retrievals, const ExposureCounts& exposure_counts,
                         double top_fraction);

// Gini coefficient of the per-item exposure distribution; 0 = perfectly even.
double exposure_gini(const ExposureCounts& counts);

// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace exporec
