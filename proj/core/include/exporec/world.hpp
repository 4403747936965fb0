#pragma once

#include <cstdint>

#include "exporec/common.hpp"
#include "exporec/rng.hpp"

namespace exporec {

struct WorldConfig {
  std::size_t n_users = 2000;
  std::size_t n_items = 10000;
  // Low-rank, sharply peaked preferences: a rank-2 taste space with a small
  // logistic temperature gives each user a distinct, learnable head of items
  // instead of a near-uniform affinity soup.
  std::size_t latent_dim = 2;
  double affinity_scale = 0.1;   // temperature dividing dot products
  double popularity_skew = 0.8;  // Zipf exponent of the bootstrap exposure distribution
  double quality_noise = 0.3;    // std-dev of per-item intrinsic bias
  std::uint64_t seed = 1;

  void validate() const;
};

// Synthetic ground truth: latent factors plus a per-item intrinsic bias,
// squashed through a logistic link. Immutable after generation.
struct World {
  Matrix user_factors;            // n_users x latent_dim
  Matrix item_factors;            // n_items x latent_dim
  std::vector<double> item_bias;  // n_items
  WorldConfig config;
};

World generate_world(const WorldConfig& config);

// P(positive engagement | user u shown item v), in (0, 1).
double true_affinity(const World& world, UserId user, ItemId item);

// One Bernoulli draw at the pair's true affinity; consumes exactly one draw.
Feedback sample_feedback(const World& world, UserId user, ItemId item, Rng& rng);

}  // namespace exporec
