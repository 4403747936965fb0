#include "exporec/world.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace exporec {

void WorldConfig::validate() const {
  if (n_users < 1) throw ConfigError("world.n_users must be >= 1");
  if (n_items < 2) throw ConfigError("world.n_items must be >= 2");
  if (latent_dim < 1) throw ConfigError("world.latent_dim must be >= 1");
  if (!(affinity_scale > 0.0)) throw ConfigError("world.affinity_scale must be > 0");
  if (popularity_skew < 0.0) throw ConfigError("world.popularity_skew must be >= 0");
  if (quality_noise < 0.0) throw ConfigError("world.quality_noise must be >= 0");
}

World generate_world(const WorldConfig& config) {
  config.validate();
  World world;
  world.config = config;
  world.user_factors = Matrix(config.n_users, config.latent_dim);
  world.item_factors = Matrix(config.n_items, config.latent_dim);
  world.item_bias.assign(config.n_items, 0.0);

  Rng rng(config.seed);
  // 1/sqrt(d) scaling keeps dot products O(1) for any latent_dim.
  const double scale = 1.0 / std::sqrt(static_cast<double>(config.latent_dim));
  for (double& x : world.user_factors.data()) x = rng.normal() * scale;
  for (double& x : world.item_factors.data()) x = rng.normal() * scale;
  for (double& b : world.item_bias) b = rng.normal() * config.quality_noise;
  return world;
}

double true_affinity(const World& world, UserId user, ItemId item) {
  if (user >= world.config.n_users)
    throw ConfigError("user id out of range: " + std::to_string(user));
  if (item >= world.config.n_items)
    throw ConfigError("item id out of range: " + std::to_string(item));
  const double raw = dot(world.user_factors.row(user), world.item_factors.row(item)) +
                     world.item_bias[item];
  // Clamp away from the exact endpoints: sharp temperatures can saturate the
  // logistic in double precision, but the affinity contract is strictly (0, 1).
  const double p = sigmoid(raw / world.config.affinity_scale);
  constexpr double kTiny = 1e-300;
  return std::min(1.0 - 1e-16, std::max(kTiny, p));
}

Feedback sample_feedback(const World& world, UserId user, ItemId item, Rng& rng) {
  const double p = true_affinity(world, user, item);
  return rng.bernoulli(p) ? Feedback::Positive : Feedback::NegativeImpression;
}

}  // namespace exporec
