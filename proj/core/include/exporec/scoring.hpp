#pragma once

#include <unordered_set>
#include <vector>

#include "exporec/common.hpp"
#include "exporec/model.hpp"

namespace exporec {

struct ScoringConfig {
  double gamma = 0.6;  // exposure-correction strength; 0 = uncorrected
  std::size_t k = 100; // retrieval depth

  void validate() const {
    if (gamma < 0.0) throw ConfigError("scoring.gamma must be >= 0");
    if (k < 1) throw ConfigError("scoring.k must be >= 1");
  }
};

// Item-side composite embeddings [item_eng | item_exp | eng_bias - gamma*exp_bias].
// Paired with composite_user_vector, a single inner product reproduces the
// exposure-corrected score exactly, which is the layout an ANN index would
// consume.
struct RetrievalIndex {
  Matrix composite_item;  // n_items x (d + d_e + 1)
  double gamma = 0.0;
  std::uint64_t built_from = 0;  // params fingerprint
};

// Count-level form of the exposure decomposition: P(positive | exposed).
double conditional_positive_rate(std::uint64_t positives, std::uint64_t exposures);

// score = eng_exp_logit - gamma * exp_logit. Ranking semantics only; never
// squashed back to a probability for retrieval.
inline double exposure_corrected_score(double eng_exp_logit, double exp_logit,
                                       double gamma) {
  return eng_exp_logit - gamma * exp_logit;
}

RetrievalIndex build_index(const ModelParams& params, double gamma);

// [user_eng | -gamma*user_exp | 1], the query side of the composite identity.
std::vector<double> composite_user_vector(const RetrievalIndex& index,
                                          const ModelParams& params, UserId user);

double composite_score(const RetrievalIndex& index, const ModelParams& params,
                       UserId user, ItemId item);

// Exact top-k by full scan. Ties break toward the lower item id.
std::vector<ItemId> retrieve_top_k(const RetrievalIndex& index, const ModelParams& params,
                                   UserId user, std::size_t k,
                                   const std::unordered_set<ItemId>& exclude = {});

}  // namespace exporec
