#include "exporec/scoring.hpp"

#include <algorithm>
#include <string>

namespace exporec {

double conditional_positive_rate(std::uint64_t positives, std::uint64_t exposures) {
  if (exposures == 0) throw DataError("conditional positive rate undefined for 0 exposures");
  if (positives > exposures)
    throw DataError("inconsistent counts: " + std::to_string(positives) + " positives over " +
                    std::to_string(exposures) + " exposures");
  return static_cast<double>(positives) / static_cast<double>(exposures);
}

RetrievalIndex build_index(const ModelParams& params, double gamma) {
  RetrievalIndex index;
  index.gamma = gamma;
  index.built_from = params.fingerprint();
  const std::size_t width = params.d + params.d_e + 1;
  index.composite_item = Matrix(params.n_items, width);
  for (std::size_t v = 0; v < params.n_items; ++v) {
    auto row = index.composite_item.row(v);
    const auto ie = params.item_eng.row(v);
    const auto ix = params.item_exp.row(v);
    std::copy(ie.begin(), ie.end(), row.begin());
    std::copy(ix.begin(), ix.end(), row.begin() + params.d);
    row[width - 1] = params.item_eng_bias[v] - gamma * params.item_exp_bias[v];
  }
  return index;
}

std::vector<double> composite_user_vector(const RetrievalIndex& index,
                                          const ModelParams& params, UserId user) {
  if (user >= params.n_users)
    throw ConfigError("user id out of range: " + std::to_string(user));
  std::vector<double> q(params.d + params.d_e + 1);
  const auto ue = params.user_eng.row(user);
  const auto ux = params.user_exp.row(user);
  std::copy(ue.begin(), ue.end(), q.begin());
  for (std::size_t i = 0; i < params.d_e; ++i) q[params.d + i] = -index.gamma * ux[i];
  q.back() = 1.0;
  return q;
}

double composite_score(const RetrievalIndex& index, const ModelParams& params,
                       UserId user, ItemId item) {
  const std::vector<double> q = composite_user_vector(index, params, user);
  return dot(q, index.composite_item.row(item));
}

std::vector<ItemId> retrieve_top_k(const RetrievalIndex& index, const ModelParams& params,
                                   UserId user, std::size_t k,
                                   const std::unordered_set<ItemId>& exclude) {
  const std::size_t n_items = params.n_items;
  if (k < 1) throw ConfigError("k must be >= 1");
  if (k > n_items - std::min(exclude.size(), n_items))
    throw ConfigError("k = " + std::to_string(k) + " exceeds " +
                      std::to_string(n_items - exclude.size()) + " retrievable items");

  const std::vector<double> q = composite_user_vector(index, params, user);
  std::vector<std::pair<double, ItemId>> scored;
  scored.reserve(n_items - exclude.size());
  for (std::size_t v = 0; v < n_items; ++v) {
    if (exclude.contains(static_cast<ItemId>(v))) continue;
    scored.emplace_back(dot(q, index.composite_item.row(v)), static_cast<ItemId>(v));
  }

  const auto better = [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;  // ties toward the lower item id
  };
  std::partial_sort(scored.begin(), scored.begin() + k, scored.end(), better);

  std::vector<ItemId> top;
  top.reserve(k);
  for (std::size_t i = 0; i < k; ++i) top.push_back(scored[i].second);
  return top;
}

}  // namespace exporec
