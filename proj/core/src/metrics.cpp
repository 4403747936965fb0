#include "exporec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace exporec {

std::vector<UserId> EvaluationSet::users() const {
  std::set<UserId> ids;
  for (const auto& [u, s] : positives)
    if (!s.empty()) ids.insert(u);
  for (const auto& [u, s] : negatives)
    if (!s.empty()) ids.insert(u);
  return {ids.begin(), ids.end()};
}

EvaluationSet build_evaluation_set(const std::vector<ImpressionRecord>& holdout_logs) {
  EvaluationSet eval;
  for (const auto& rec : holdout_logs) {
    if (rec.label == Feedback::Positive)
      eval.positives[rec.user_id].insert(rec.item_id);
    else
      eval.negatives[rec.user_id].insert(rec.item_id);
  }
  for (auto& [user, negs] : eval.negatives) {
    const auto it = eval.positives.find(user);
    if (it == eval.positives.end()) continue;
    for (const ItemId item : it->second) negs.erase(item);
  }
  return eval;
}

namespace {

double mean_recall(const Retrievals& retrievals,
                   const std::map<UserId, std::unordered_set<ItemId>>& targets) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [user, held_out] : targets) {
    if (held_out.empty()) continue;
    const auto it = retrievals.find(user);
    if (it == retrievals.end()) continue;
    const std::unordered_set<ItemId> retrieved(it->second.begin(), it->second.end());
    std::size_t hits = 0;
    for (const ItemId item : held_out)
      if (retrieved.contains(item)) ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(held_out.size());
    ++n;
  }
  if (n == 0) throw DataError("no evaluable users with a non-empty held-out set");
  return sum / static_cast<double>(n);
}

}  // namespace

double positive_recall_at_k(const Retrievals& retrievals, const EvaluationSet& eval) {
  return mean_recall(retrievals, eval.positives);
}

double negative_recall_at_k(const Retrievals& retrievals, const EvaluationSet& eval) {
  return mean_recall(retrievals, eval.negatives);
}

std::size_t unique_retrieved_items(const Retrievals& retrievals) {
  std::unordered_set<ItemId> seen;
  for (const auto& [user, items] : retrievals) seen.insert(items.begin(), items.end());
  return seen.size();
}

double popular_dominance(const Retrievals& retrievals, const ExposureCounts& exposure_counts,
                         double top_fraction) {
  if (top_fraction <= 0.0 || top_fraction >= 1.0)
    throw ConfigError("top_fraction must be in (0, 1)");
  const std::size_t n_items = exposure_counts.counts.size();
  const auto head_size =
      static_cast<std::size_t>(std::ceil(top_fraction * static_cast<double>(n_items)));

  std::vector<ItemId> order(n_items);
  std::iota(order.begin(), order.end(), 0);
  std::ranges::sort(order, [&](ItemId a, ItemId b) {
    if (exposure_counts.counts[a] != exposure_counts.counts[b])
      return exposure_counts.counts[a] > exposure_counts.counts[b];
    return a < b;
  });
  std::unordered_set<ItemId> head(order.begin(), order.begin() + head_size);

  std::size_t head_slots = 0, total_slots = 0;
  for (const auto& [user, items] : retrievals) {
    total_slots += items.size();
    for (const ItemId item : items)
      if (head.contains(item)) ++head_slots;
  }
  if (total_slots == 0) return 0.0;
  return static_cast<double>(head_slots) / static_cast<double>(total_slots);
}

double exposure_gini(const ExposureCounts& counts) {
  if (counts.total == 0) throw DataError("exposure gini undefined for zero total exposure");
  // Sorted form of sum_ij |c_i - c_j| / (2 n^2 mean).
  std::vector<double> c(counts.counts.begin(), counts.counts.end());
  std::ranges::sort(c);
  const auto n = static_cast<double>(c.size());
  double weighted = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    weighted += static_cast<double>(i + 1) * c[i];
    sum += c[i];
  }
  return (2.0 * weighted) / (n * sum) - (n + 1.0) / n;
}

namespace {

std::vector<double> ranks_with_ties(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::ranges::sort(order, [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based average rank
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw ConfigError("spearman requires two equal-length vectors of size >= 2");
  const std::vector<double> ra = ranks_with_ties(a);
  const std::vector<double> rb = ranks_with_ties(b);
  const auto n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = ra[i] - ma, db = rb[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va == 0.0 || vb == 0.0) return 0.0;
  return cov / std::sqrt(va * vb);
}

}  // namespace exporec
