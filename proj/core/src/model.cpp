#include "exporec/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <string>

namespace exporec {

namespace {

std::uint64_t hash_doubles(std::uint64_t h, const std::vector<double>& v) {
  for (const double x : v) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof(bits));
    h = mix64(h ^ bits);
  }
  return h;
}

}  // namespace

std::uint64_t ModelParams::fingerprint() const {
  std::uint64_t h = mix64(n_users);
  h = mix64(h ^ n_items);
  h = mix64(h ^ d);
  h = mix64(h ^ d_e);
  h = hash_doubles(h, user_eng.data());
  h = hash_doubles(h, item_eng.data());
  h = hash_doubles(h, item_eng_bias);
  h = hash_doubles(h, user_exp.data());
  h = hash_doubles(h, item_exp.data());
  h = hash_doubles(h, item_exp_bias);
  return h;
}

void TrainConfig::validate() const {
  if (exposure_task_weight < 0.0) throw ConfigError("train.exposure_task_weight must be >= 0");
  if (!(learning_rate > 0.0) && learning_rate != 0.0)
    throw ConfigError("train.learning_rate must be >= 0");
  if (learning_rate < 0.0) throw ConfigError("train.learning_rate must be >= 0");
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (embed_dim < 1) throw ConfigError("train.embed_dim must be >= 1");
  if (exposure_embed_dim < 1) throw ConfigError("train.exposure_embed_dim must be >= 1");
  if (l2_reg < 0.0) throw ConfigError("train.l2_reg must be >= 0");
}

std::vector<TrainingExample> build_training_set(const std::vector<ImpressionRecord>& logs,
                                                std::size_t n_items,
                                                std::size_t random_negatives_per_record,
                                                Rng& rng) {
  if (logs.empty()) throw DataError("cannot build a training set from empty logs");
  std::vector<TrainingExample> examples;
  examples.reserve(logs.size() * (1 + random_negatives_per_record));
  for (const auto& rec : logs) {
    examples.push_back({rec.user_id, rec.item_id, 1,
                        static_cast<std::uint8_t>(rec.label == Feedback::Positive ? 1 : 0)});
    for (std::size_t j = 0; j < random_negatives_per_record; ++j) {
      const auto item = static_cast<ItemId>(rng.uniform_below(n_items));
      examples.push_back({rec.user_id, item, 0, 0});
    }
  }
  return examples;
}

Logits forward(const ModelParams& params, UserId user, ItemId item) {
  if (user >= params.n_users)
    throw ConfigError("user id out of range: " + std::to_string(user));
  if (item >= params.n_items)
    throw ConfigError("item id out of range: " + std::to_string(item));
  return {dot(params.user_eng.row(user), params.item_eng.row(item)) +
              params.item_eng_bias[item],
          dot(params.user_exp.row(user), params.item_exp.row(item)) +
              params.item_exp_bias[item]};
}

double bce_loss(double logit, int label) {
  // max(l,0) - l*y + log(1 + exp(-|l|)); stable for large |l|.
  return std::max(logit, 0.0) - logit * label + std::log1p(std::exp(-std::fabs(logit)));
}

namespace {

// Reusable gradient accumulator. Buffers are model-sized but only touched
// rows are ever written or zeroed, so per-batch cost scales with the batch.
struct GradAccumulator {
  Matrix user_eng, item_eng, user_exp, item_exp;
  std::vector<double> item_eng_bias, item_exp_bias;
  std::vector<std::uint8_t> user_touched, item_touched;
  std::vector<UserId> touched_users;
  std::vector<ItemId> touched_items;

  explicit GradAccumulator(const ModelParams& p)
      : user_eng(p.n_users, p.d),
        item_eng(p.n_items, p.d),
        user_exp(p.n_users, p.d_e),
        item_exp(p.n_items, p.d_e),
        item_eng_bias(p.n_items, 0.0),
        item_exp_bias(p.n_items, 0.0),
        user_touched(p.n_users, 0),
        item_touched(p.n_items, 0) {}

  void touch(UserId u, ItemId v) {
    if (!user_touched[u]) {
      user_touched[u] = 1;
      touched_users.push_back(u);
    }
    if (!item_touched[v]) {
      item_touched[v] = 1;
      touched_items.push_back(v);
    }
  }

  void reset() {
    for (const UserId u : touched_users) {
      user_touched[u] = 0;
      std::ranges::fill(user_eng.row(u), 0.0);
      std::ranges::fill(user_exp.row(u), 0.0);
    }
    for (const ItemId v : touched_items) {
      item_touched[v] = 0;
      std::ranges::fill(item_eng.row(v), 0.0);
      std::ranges::fill(item_exp.row(v), 0.0);
      item_eng_bias[v] = 0.0;
      item_exp_bias[v] = 0.0;
    }
    touched_users.clear();
    touched_items.clear();
  }
};

// BCE gradient for one example, optionally IPS-weighted, added into `acc`.
inline void accumulate_example(const ModelParams& p, const TrainingExample& ex, double w,
                               double example_weight, GradAccumulator& acc) {
  const UserId u = ex.user_id;
  const ItemId v = ex.item_id;
  acc.touch(u, v);

  const auto ue = p.user_eng.row(u);
  const auto ie = p.item_eng.row(v);
  const double l1 = dot(ue, ie) + p.item_eng_bias[v];
  const double g1 = example_weight * (sigmoid(l1) - ex.engagement_label);
  auto gue = acc.user_eng.row(u);
  auto gie = acc.item_eng.row(v);
  for (std::size_t i = 0; i < p.d; ++i) {
    gue[i] += g1 * ie[i];
    gie[i] += g1 * ue[i];
  }
  acc.item_eng_bias[v] += g1;

  if (w == 0.0) return;
  const auto ux = p.user_exp.row(u);
  const auto ix = p.item_exp.row(v);
  const double l2 = dot(ux, ix) + p.item_exp_bias[v];
  const double g2 = example_weight * w * (sigmoid(l2) - ex.exposed_label);
  auto gux = acc.user_exp.row(u);
  auto gix = acc.item_exp.row(v);
  for (std::size_t i = 0; i < p.d_e; ++i) {
    gux[i] += g2 * ix[i];
    gix[i] += g2 * ux[i];
  }
  acc.item_exp_bias[v] += g2;
}

// L2 term over the distinct rows and biases touched by the batch, applied
// in ascending index order for reproducibility. With w = 0 the exposure
// head is inert and its tables are left untouched entirely.
void accumulate_l2(const ModelParams& p, double w, double l2_reg, GradAccumulator& acc) {
  if (l2_reg == 0.0) return;
  std::ranges::sort(acc.touched_users);
  std::ranges::sort(acc.touched_items);
  for (const UserId u : acc.touched_users) {
    auto gue = acc.user_eng.row(u);
    const auto ue = p.user_eng.row(u);
    for (std::size_t i = 0; i < p.d; ++i) gue[i] += 2.0 * l2_reg * ue[i];
    if (w != 0.0) {
      auto gux = acc.user_exp.row(u);
      const auto ux = p.user_exp.row(u);
      for (std::size_t i = 0; i < p.d_e; ++i) gux[i] += 2.0 * l2_reg * ux[i];
    }
  }
  for (const ItemId v : acc.touched_items) {
    auto gie = acc.item_eng.row(v);
    const auto ie = p.item_eng.row(v);
    for (std::size_t i = 0; i < p.d; ++i) gie[i] += 2.0 * l2_reg * ie[i];
    acc.item_eng_bias[v] += 2.0 * l2_reg * p.item_eng_bias[v];
    if (w != 0.0) {
      auto gix = acc.item_exp.row(v);
      const auto ix = p.item_exp.row(v);
      for (std::size_t i = 0; i < p.d_e; ++i) gix[i] += 2.0 * l2_reg * ix[i];
      acc.item_exp_bias[v] += 2.0 * l2_reg * p.item_exp_bias[v];
    }
  }
}

double l2_penalty(const ModelParams& p, double w, double l2_reg,
                  const std::vector<UserId>& touched_users,
                  const std::vector<ItemId>& touched_items) {
  if (l2_reg == 0.0) return 0.0;
  double sq = 0.0;
  for (const UserId u : touched_users) {
    for (const double x : p.user_eng.row(u)) sq += x * x;
    if (w != 0.0)
      for (const double x : p.user_exp.row(u)) sq += x * x;
  }
  for (const ItemId v : touched_items) {
    for (const double x : p.item_eng.row(v)) sq += x * x;
    sq += p.item_eng_bias[v] * p.item_eng_bias[v];
    if (w != 0.0) {
      for (const double x : p.item_exp.row(v)) sq += x * x;
      sq += p.item_exp_bias[v] * p.item_exp_bias[v];
    }
  }
  return l2_reg * sq;
}

void touched_rows(std::span<const TrainingExample> batch, std::size_t n_users,
                  std::size_t n_items, std::vector<UserId>& users,
                  std::vector<ItemId>& items) {
  std::vector<std::uint8_t> useen(n_users, 0), iseen(n_items, 0);
  for (const auto& ex : batch) {
    if (!useen[ex.user_id]) {
      useen[ex.user_id] = 1;
      users.push_back(ex.user_id);
    }
    if (!iseen[ex.item_id]) {
      iseen[ex.item_id] = 1;
      items.push_back(ex.item_id);
    }
  }
  std::ranges::sort(users);
  std::ranges::sort(items);
}

}  // namespace

double batch_loss(const ModelParams& params, std::span<const TrainingExample> batch,
                  double w, double l2_reg) {
  if (batch.empty()) throw DataError("batch_loss on an empty batch");
  double loss = 0.0;
  for (const auto& ex : batch) {
    const Logits l = forward(params, ex.user_id, ex.item_id);
    loss += bce_loss(l.eng_exp, ex.engagement_label) + w * bce_loss(l.exp, ex.exposed_label);
  }
  std::vector<UserId> users;
  std::vector<ItemId> items;
  touched_rows(batch, params.n_users, params.n_items, users, items);
  return loss + l2_penalty(params, w, l2_reg, users, items);
}

Gradients gradients(const ModelParams& params, std::span<const TrainingExample> batch,
                    double w, double l2_reg) {
  if (batch.empty()) throw DataError("gradients on an empty batch");
  GradAccumulator acc(params);
  for (const auto& ex : batch) accumulate_example(params, ex, w, 1.0, acc);
  accumulate_l2(params, w, l2_reg, acc);
  Gradients g;
  g.user_eng = std::move(acc.user_eng);
  g.item_eng = std::move(acc.item_eng);
  g.item_eng_bias = std::move(acc.item_eng_bias);
  g.user_exp = std::move(acc.user_exp);
  g.item_exp = std::move(acc.item_exp);
  g.item_exp_bias = std::move(acc.item_exp_bias);
  return g;
}

namespace {

ModelParams init_params(std::size_t n_users, std::size_t n_items, const TrainConfig& cfg,
                        Rng& rng) {
  ModelParams p;
  p.n_users = n_users;
  p.n_items = n_items;
  p.d = cfg.embed_dim;
  p.d_e = cfg.exposure_embed_dim;
  p.user_eng = Matrix(n_users, p.d);
  p.item_eng = Matrix(n_items, p.d);
  p.item_eng_bias.assign(n_items, 0.0);
  p.user_exp = Matrix(n_users, p.d_e);
  p.item_exp = Matrix(n_items, p.d_e);
  p.item_exp_bias.assign(n_items, 0.0);

  const double s_eng = 0.1 / std::sqrt(static_cast<double>(p.d));
  const double s_exp = 0.1 / std::sqrt(static_cast<double>(p.d_e));
  for (double& x : p.user_eng.data()) x = rng.normal() * s_eng;
  for (double& x : p.item_eng.data()) x = rng.normal() * s_eng;
  for (double& x : p.user_exp.data()) x = rng.normal() * s_exp;
  for (double& x : p.item_exp.data()) x = rng.normal() * s_exp;
  return p;
}

void apply_update(ModelParams& p, const GradAccumulator& acc, double lr) {
  for (const UserId u : acc.touched_users) {
    auto pu = p.user_eng.row(u);
    auto px = p.user_exp.row(u);
    const auto gu = acc.user_eng.row(u);
    const auto gx = acc.user_exp.row(u);
    for (std::size_t i = 0; i < pu.size(); ++i) pu[i] -= lr * gu[i];
    for (std::size_t i = 0; i < px.size(); ++i) px[i] -= lr * gx[i];
  }
  for (const ItemId v : acc.touched_items) {
    auto pi = p.item_eng.row(v);
    auto px = p.item_exp.row(v);
    const auto gi = acc.item_eng.row(v);
    const auto gx = acc.item_exp.row(v);
    for (std::size_t i = 0; i < pi.size(); ++i) pi[i] -= lr * gi[i];
    for (std::size_t i = 0; i < px.size(); ++i) px[i] -= lr * gx[i];
    p.item_eng_bias[v] -= lr * acc.item_eng_bias[v];
    p.item_exp_bias[v] -= lr * acc.item_exp_bias[v];
  }
}

// Shared training loop. `weight_for` supplies the per-example IPS weight
// (always 1.0 for the joint model).
template <typename WeightFn>
TrainOutput train_impl(const std::vector<ImpressionRecord>& logs, const TrainConfig& cfg,
                       std::size_t n_users, std::size_t n_items, double task_weight,
                       WeightFn weight_for) {
  cfg.validate();
  if (logs.empty()) throw DataError("cannot train on empty logs");
  for (const auto& rec : logs) {
    if (rec.user_id >= n_users || rec.item_id >= n_items)
      throw DataError("log record out of range: user " + std::to_string(rec.user_id) +
                      " item " + std::to_string(rec.item_id));
  }

  Rng init_rng(derive_seed(cfg.seed, 0x1));
  ModelParams params = init_params(n_users, n_items, cfg, init_rng);
  GradAccumulator acc(params);
  TrainOutput out;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng epoch_rng(derive_seed(cfg.seed, 0x2, epoch));
    std::vector<TrainingExample> examples =
        build_training_set(logs, n_items, cfg.random_negatives_per_record, epoch_rng);
    // Deterministic Fisher-Yates shuffle.
    for (std::size_t i = examples.size() - 1; i > 0; --i)
      std::swap(examples[i], examples[epoch_rng.uniform_below(i + 1)]);

    double eng_sum = 0.0, exp_sum = 0.0, total_sum = 0.0;
    for (std::size_t start = 0; start < examples.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(start + cfg.batch_size, examples.size());
      acc.reset();
      for (std::size_t i = start; i < end; ++i) {
        const auto& ex = examples[i];
        const double ew = weight_for(ex);
        const Logits l = forward(params, ex.user_id, ex.item_id);
        const double e1 = ew * bce_loss(l.eng_exp, ex.engagement_label);
        const double e2 = ew * bce_loss(l.exp, ex.exposed_label);
        eng_sum += e1;
        exp_sum += e2;
        total_sum += e1 + task_weight * e2;
        accumulate_example(params, ex, task_weight, ew, acc);
      }
      accumulate_l2(params, task_weight, cfg.l2_reg, acc);
      total_sum += l2_penalty(params, task_weight, cfg.l2_reg, acc.touched_users, acc.touched_items);
      // Step with the mean gradient so the step size is independent of batch size.
      apply_update(params, acc, cfg.learning_rate / static_cast<double>(end - start));
    }

    const double n = static_cast<double>(examples.size());
    const EpochStats stats{epoch, eng_sum / n, exp_sum / n, total_sum / n};
    if (!std::isfinite(stats.total))
      throw DataError("training diverged at epoch " + std::to_string(epoch));
    out.trace.push_back(stats);
  }

  out.params = std::move(params);
  return out;
}

}  // namespace

TrainOutput train(const std::vector<ImpressionRecord>& logs, const TrainConfig& config,
                  std::size_t n_users, std::size_t n_items) {
  return train_impl(logs, config, n_users, n_items, config.exposure_task_weight,
                    [](const TrainingExample&) { return 1.0; });
}

TrainOutput train_opc_baseline(const std::vector<ImpressionRecord>& logs,
                               const TrainConfig& config, std::size_t n_users,
                               std::size_t n_items, const ExposureCounts& exposure_counts,
                               double propensity_clip) {
  if (propensity_clip <= 0.0 || propensity_clip > 1.0)
    throw ConfigError("propensity_clip must be in (0, 1]");
  if (exposure_counts.total == 0) throw DataError("OPC baseline needs nonzero exposure counts");
  std::vector<double> weight(n_items, 1.0);
  const double total = static_cast<double>(exposure_counts.total);
  for (std::size_t v = 0; v < n_items; ++v) {
    const double propensity = static_cast<double>(exposure_counts.counts[v]) / total;
    weight[v] = 1.0 / std::max(propensity, propensity_clip);
  }
  // Single task: exposure head weight 0, so its tables stay at init. Random
  // negatives (exposed_label = 0) keep weight 1; only observed exposures are
  // IPS-reweighted.
  return train_impl(logs, config, n_users, n_items, 0.0,
                    [&weight](const TrainingExample& ex) {
                      return ex.exposed_label ? weight[ex.item_id] : 1.0;
                    });
}

}  // namespace exporec
