#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "exporec/common.hpp"
#include "exporec/logging_types.hpp"
#include "exporec/rng.hpp"

namespace exporec {

struct TrainingExample {
  UserId user_id;
  ItemId item_id;
  std::uint8_t exposed_label;     // 1 if the item was actually shown
  std::uint8_t engagement_label;  // 1 only if exposed and positive
};

// Two-tower, two-head embedding model. forward() is exactly two biased dot
// products; there is no hidden nonlinearity, which is what makes the
// composite retrieval index in scoring.hpp an exact identity.
struct ModelParams {
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  std::size_t d = 0;    // engagement-head embedding dim
  std::size_t d_e = 0;  // exposure-head embedding dim

  Matrix user_eng;
  Matrix item_eng;
  std::vector<double> item_eng_bias;
  Matrix user_exp;
  Matrix item_exp;
  std::vector<double> item_exp_bias;

  // Content hash over dims and all table bytes; used to assert that a sweep
  // reuses one trained model across gamma values.
  std::uint64_t fingerprint() const;
};

struct TrainConfig {
  double exposure_task_weight = 1.0;  // w in the combined loss
  // Updates step with the mean gradient of each batch, so learning_rate is a
  // per-example rate; 1.0 over batches of 256 is an effective step of ~4e-3.
  double learning_rate = 1.0;
  std::size_t epochs = 120;
  std::size_t batch_size = 256;
  std::size_t random_negatives_per_record = 3;
  std::size_t embed_dim = 16;
  std::size_t exposure_embed_dim = 16;
  double l2_reg = 1e-6;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochStats {
  std::size_t epoch;
  double mean_engagement_bce;
  double mean_exposure_bce;
  double total;  // mean per-example combined loss including l2
};

struct TrainOutput {
  ModelParams params;
  std::vector<EpochStats> trace;
};

// Gradient of batch_loss with the same shape as ModelParams.
struct Gradients {
  Matrix user_eng;
  Matrix item_eng;
  std::vector<double> item_eng_bias;
  Matrix user_exp;
  Matrix item_exp;
  std::vector<double> item_exp_bias;
};

// One example per log record (exposed=1, engaged iff Positive), plus
// `random_negatives_per_record` uniformly drawn items per record with both
// labels 0. Uniform sampling may hit genuinely exposed items; that collision
// noise is accepted rather than corrected for.
std::vector<TrainingExample> build_training_set(
    const std::vector<ImpressionRecord>& logs, std::size_t n_items,
    std::size_t random_negatives_per_record, Rng& rng);

struct Logits {
  double eng_exp;  // logit of P(positive & exposed | user, item)
  double exp;      // logit of P(exposed | user, item)
};

Logits forward(const ModelParams& params, UserId user, ItemId item);

// Numerically stable binary cross entropy on a logit.
double bce_loss(double logit, int label);

double batch_loss(const ModelParams& params, std::span<const TrainingExample> batch,
                  double w, double l2_reg);

Gradients gradients(const ModelParams& params, std::span<const TrainingExample> batch,
                    double w, double l2_reg);

TrainOutput train(const std::vector<ImpressionRecord>& logs, const TrainConfig& config,
                  std::size_t n_users, std::size_t n_items);

// Single-task IPS-weighted baseline: exposed examples are reweighted by the
// inverse of the item's empirical exposure rate (clipped), the exposure head
// is left at initialization, and no inference-time correction ever applies
// to the resulting model.
TrainOutput train_opc_baseline(const std::vector<ImpressionRecord>& logs,
                               const TrainConfig& config, std::size_t n_users,
                               std::size_t n_items, const ExposureCounts& exposure_counts,
                               double propensity_clip);

}  // namespace exporec
