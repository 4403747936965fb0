#include "exporec/logging.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

namespace exporec {

ExposureCounts accumulate_exposures(const ExposureCounts& base, const ExposureCounts& delta) {
  if (base.counts.size() != delta.counts.size())
    throw ConfigError("exposure count length mismatch: " +
                      std::to_string(base.counts.size()) + " vs " +
                      std::to_string(delta.counts.size()));
  ExposureCounts out = base;
  for (std::size_t i = 0; i < out.counts.size(); ++i) out.counts[i] += delta.counts[i];
  out.total = base.total + delta.total;
  return out;
}

void LoggingPolicy::validate(std::size_t n_items) const {
  if (slate_size < 1) throw ConfigError("slate_size must be >= 1");
  if (slate_size > n_items)
    throw ConfigError("slate_size " + std::to_string(slate_size) + " exceeds catalog size " +
                      std::to_string(n_items));
  if (exploration_epsilon < 0.0 || exploration_epsilon > 1.0)
    throw ConfigError("exploration_epsilon must be in [0, 1]");
  if (kind == Kind::ModelTopK && (index == nullptr || params == nullptr))
    throw ConfigError("ModelTopK policy requires an index and params");
}

namespace {

// Slate by weighted sampling without replacement, weight(item i) = (i+1)^-skew.
std::vector<ItemId> zipf_slate(std::size_t n_items, std::size_t slate_size,
                               const std::vector<double>& cum_weights, Rng& rng) {
  std::vector<ItemId> slate;
  slate.reserve(slate_size);
  std::unordered_set<ItemId> chosen;
  const double total = cum_weights.back();
  while (slate.size() < slate_size) {
    const double u = rng.uniform() * total;
    const auto it = std::upper_bound(cum_weights.begin(), cum_weights.end(), u);
    auto idx = static_cast<ItemId>(it - cum_weights.begin());
    if (idx >= n_items) idx = static_cast<ItemId>(n_items - 1);
    if (chosen.insert(idx).second) slate.push_back(idx);
  }
  return slate;
}

std::vector<ItemId> model_slate(const LoggingPolicy& policy, std::size_t n_items,
                                const std::vector<ItemId>& never_exposed, UserId user,
                                Rng& rng) {
  std::vector<ItemId> slate =
      retrieve_top_k(*policy.index, *policy.params, user, policy.slate_size);
  if (policy.exploration_epsilon <= 0.0) return slate;

  std::unordered_set<ItemId> in_slate(slate.begin(), slate.end());
  for (auto& slot : slate) {
    if (!rng.bernoulli(policy.exploration_epsilon)) continue;
    // Prefer items that have never been exposed; fall back to the full
    // catalog when everything has been seen at least once.
    ItemId replacement = slot;
    for (int attempt = 0; attempt < 64; ++attempt) {
      ItemId candidate;
      if (!never_exposed.empty()) {
        candidate = never_exposed[rng.uniform_below(never_exposed.size())];
      } else {
        candidate = static_cast<ItemId>(rng.uniform_below(n_items));
      }
      if (!in_slate.contains(candidate)) {
        replacement = candidate;
        break;
      }
    }
    if (replacement != slot) {
      in_slate.erase(slot);
      in_slate.insert(replacement);
      slot = replacement;
    }
  }
  return slate;
}

}  // namespace

LoggingRoundResult run_logging_round(const World& world, const LoggingPolicy& policy,
                                     const std::vector<UserId>& users, std::uint32_t round,
                                     Rng& rng) {
  const std::size_t n_items = world.config.n_items;
  policy.validate(n_items);
  if (users.empty()) throw ConfigError("logging round requires at least one user");

  // Round-level salt; per-user streams derive from it so that slate
  // generation could run per-user in parallel without changing the output.
  const std::uint64_t round_salt = rng.next_u64();

  std::vector<double> cum_weights;
  if (policy.kind == LoggingPolicy::Kind::ZipfBootstrap) {
    cum_weights.resize(n_items);
    double acc = 0.0;
    for (std::size_t i = 0; i < n_items; ++i) {
      acc += std::pow(static_cast<double>(i + 1), -world.config.popularity_skew);
      cum_weights[i] = acc;
    }
  }

  std::vector<ItemId> never_exposed;
  if (policy.kind == LoggingPolicy::Kind::ModelTopK && policy.cumulative_exposure != nullptr) {
    const auto& counts = policy.cumulative_exposure->counts;
    for (std::size_t i = 0; i < counts.size(); ++i)
      if (counts[i] == 0) never_exposed.push_back(static_cast<ItemId>(i));
  }

  LoggingRoundResult result;
  result.records.reserve(users.size() * policy.slate_size);
  result.delta = ExposureCounts::zeros(n_items);

  for (const UserId user : users) {
    Rng user_rng(derive_seed(round_salt, round, user));
    const std::vector<ItemId> slate =
        policy.kind == LoggingPolicy::Kind::ZipfBootstrap
            ? zipf_slate(n_items, policy.slate_size, cum_weights, user_rng)
            : model_slate(policy, n_items, never_exposed, user, user_rng);
    for (const ItemId item : slate) {
      const Feedback label = sample_feedback(world, user, item, user_rng);
      result.records.push_back({round, user, item, label});
      result.delta.add(item);
    }
  }
  return result;
}

}  // namespace exporec
