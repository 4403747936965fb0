#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "exporec/rng.hpp"
#include "exporec/scoring.hpp"

using namespace exporec;

namespace {

ModelParams random_params(std::size_t n_users, std::size_t n_items, std::size_t d,
                          std::size_t d_e, std::uint64_t seed) {
  ModelParams p;
  p.n_users = n_users;
  p.n_items = n_items;
  p.d = d;
  p.d_e = d_e;
  p.user_eng = Matrix(n_users, d);
  p.item_eng = Matrix(n_items, d);
  p.item_eng_bias.assign(n_items, 0.0);
  p.user_exp = Matrix(n_users, d_e);
  p.item_exp = Matrix(n_items, d_e);
  p.item_exp_bias.assign(n_items, 0.0);
  Rng rng(seed);
  for (double& x : p.user_eng.data()) x = rng.normal();
  for (double& x : p.item_eng.data()) x = rng.normal();
  for (double& x : p.user_exp.data()) x = rng.normal();
  for (double& x : p.item_exp.data()) x = rng.normal();
  for (double& x : p.item_eng_bias) x = rng.normal();
  for (double& x : p.item_exp_bias) x = rng.normal();
  return p;
}

// Full-sort oracle with the same tie rule.
std::vector<ItemId> naive_top_k(const ModelParams& p, UserId u, double gamma, std::size_t k) {
  std::vector<std::pair<double, ItemId>> scored;
  for (ItemId v = 0; v < p.n_items; ++v) {
    const Logits l = forward(p, u, v);
    scored.emplace_back(exposure_corrected_score(l.eng_exp, l.exp, gamma), v);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<ItemId> top;
  for (std::size_t i = 0; i < k; ++i) top.push_back(scored[i].second);
  return top;
}

}  // namespace

TEST_CASE("conditional_positive_rate worked examples") {
  CHECK(conditional_positive_rate(20, 40) == 0.5);
  CHECK(conditional_positive_rate(7, 10) == 0.7);
  CHECK(conditional_positive_rate(0, 5) == 0.0);
  CHECK_THROWS_AS(conditional_positive_rate(1, 0), DataError);
  CHECK_THROWS_AS(conditional_positive_rate(6, 5), DataError);
}

TEST_CASE("exposure_corrected_score basics") {
  CHECK(exposure_corrected_score(1.7, -0.3, 0.0) == 1.7);
  CHECK(exposure_corrected_score(0.4, 0.4, 1.0) == 0.0);
}

TEST_CASE("correction flips the order of the worked-example items") {
  // counts over a 100-opportunity universe: A exposed 40 with 20 positives,
  // B exposed 10 with 7 positives
  const double a_eng = logit(0.20), a_exp = logit(0.40);
  const double b_eng = logit(0.07), b_exp = logit(0.10);
  // uncorrected ranking favors A
  CHECK(exposure_corrected_score(a_eng, a_exp, 0.0) >
        exposure_corrected_score(b_eng, b_exp, 0.0));
  // full correction favors B
  const double a1 = exposure_corrected_score(a_eng, a_exp, 1.0);
  const double b1 = exposure_corrected_score(b_eng, b_exp, 1.0);
  CHECK(b1 > a1);
  CHECK(a1 == doctest::Approx(-0.9808).epsilon(1e-3));
  CHECK(b1 == doctest::Approx(-0.3895).epsilon(1e-3));
}

TEST_CASE("build_index with gamma 0 reproduces raw engagement logits") {
  const ModelParams p = random_params(4, 15, 3, 2, 41);
  const RetrievalIndex index = build_index(p, 0.0);
  for (UserId u = 0; u < 4; ++u)
    for (ItemId v = 0; v < 15; ++v)
      CHECK(composite_score(index, p, u, v) ==
            doctest::Approx(forward(p, u, v).eng_exp).epsilon(1e-12));
}

TEST_CASE("composite index matches two-head scoring on an exhaustive grid") {
  const ModelParams p = random_params(50, 200, 8, 6, 43);
  for (const double gamma : {0.0, 0.65, 1.0}) {
    const RetrievalIndex index = build_index(p, gamma);
    double max_dev = 0.0;
    for (UserId u = 0; u < 50; ++u) {
      for (ItemId v = 0; v < 200; ++v) {
        const Logits l = forward(p, u, v);
        const double direct = exposure_corrected_score(l.eng_exp, l.exp, gamma);
        max_dev = std::max(max_dev, std::fabs(composite_score(index, p, u, v) - direct));
      }
    }
    CHECK(max_dev <= 1e-10);
  }
}

TEST_CASE("rebuilding the index is deterministic") {
  const ModelParams p = random_params(3, 10, 2, 2, 47);
  const RetrievalIndex a = build_index(p, 0.65);
  const RetrievalIndex b = build_index(p, 0.65);
  CHECK(a.composite_item == b.composite_item);
  CHECK(a.built_from == b.built_from);
}

TEST_CASE("retrieve_top_k exhaustive case returns the whole catalog sorted") {
  const ModelParams p = random_params(2, 12, 3, 3, 53);
  const RetrievalIndex index = build_index(p, 0.4);
  const auto all = retrieve_top_k(index, p, 0, 12);
  CHECK(all == naive_top_k(p, 0, 0.4, 12));
  CHECK(all.size() == 12);
}

TEST_CASE("bit-equal scores break ties toward the lower item id") {
  ModelParams p = random_params(1, 4, 2, 2, 59);
  // make items 1 and 3 byte-identical
  for (std::size_t i = 0; i < 2; ++i) {
    p.item_eng.at(3, i) = p.item_eng.at(1, i);
    p.item_exp.at(3, i) = p.item_exp.at(1, i);
  }
  p.item_eng_bias[3] = p.item_eng_bias[1];
  p.item_exp_bias[3] = p.item_exp_bias[1];
  const RetrievalIndex index = build_index(p, 0.5);
  const auto top = retrieve_top_k(index, p, 0, 4);
  const auto pos1 = std::find(top.begin(), top.end(), 1);
  const auto pos3 = std::find(top.begin(), top.end(), 3);
  CHECK(pos1 < pos3);
}

TEST_CASE("retrieve_top_k matches the full-sort oracle for random users") {
  const ModelParams p = random_params(100, 80, 5, 4, 61);
  const RetrievalIndex index = build_index(p, 0.65);
  for (UserId u = 0; u < 100; ++u)
    CHECK(retrieve_top_k(index, p, u, 10) == naive_top_k(p, u, 0.65, 10));
}

TEST_CASE("exclude set removes items and shrinks the feasible k") {
  const ModelParams p = random_params(1, 6, 2, 2, 67);
  const RetrievalIndex index = build_index(p, 0.0);
  const auto full = retrieve_top_k(index, p, 0, 6);
  const std::unordered_set<ItemId> exclude = {full[0], full[1]};
  const auto rest = retrieve_top_k(index, p, 0, 4, exclude);
  for (const ItemId v : rest) CHECK(!exclude.contains(v));
  CHECK(rest == std::vector<ItemId>(full.begin() + 2, full.end()));
  CHECK_THROWS_AS(retrieve_top_k(index, p, 0, 5, exclude), ConfigError);
}

TEST_CASE("gamma 0 retrieval equals the uncorrected engagement ranking") {
  const ModelParams p = random_params(10, 40, 4, 4, 71);
  const RetrievalIndex corrected = build_index(p, 0.0);
  for (UserId u = 0; u < 10; ++u)
    CHECK(retrieve_top_k(corrected, p, u, 15) == naive_top_k(p, u, 0.0, 15));
}

TEST_CASE("monotone demotion of the most-exposed item") {
  const ModelParams p = random_params(5, 30, 4, 4, 73);
  for (UserId u = 0; u < 5; ++u) {
    // identify the items with the highest and lowest exposure logits
    ItemId hi = 0, lo = 0;
    for (ItemId v = 1; v < 30; ++v) {
      if (forward(p, u, v).exp > forward(p, u, hi).exp) hi = v;
      if (forward(p, u, v).exp < forward(p, u, lo).exp) lo = v;
    }
    double prev_gap = 1e300;
    for (const double gamma : {0.0, 0.25, 0.5, 0.75, 1.0, 1.5}) {
      const Logits lh = forward(p, u, hi), ll = forward(p, u, lo);
      const double gap = exposure_corrected_score(lh.eng_exp, lh.exp, gamma) -
                         exposure_corrected_score(ll.eng_exp, ll.exp, gamma);
      CHECK(gap <= prev_gap);
      prev_gap = gap;
    }
  }
}

TEST_CASE("ranking is invariant under strictly increasing transforms") {
  const ModelParams p = random_params(6, 25, 3, 3, 79);
  const RetrievalIndex index = build_index(p, 0.65);
  for (UserId u = 0; u < 6; ++u) {
    // rank by f(score) for strictly increasing f; order must be unchanged
    std::vector<std::pair<double, ItemId>> transformed;
    for (ItemId v = 0; v < 25; ++v) {
      const double s = composite_score(index, p, u, v);
      transformed.emplace_back(std::tanh(s * 0.1) * 3.0 + 7.0, v);
    }
    std::sort(transformed.begin(), transformed.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    const auto top = retrieve_top_k(index, p, u, 25);
    for (std::size_t i = 0; i < 25; ++i) CHECK(top[i] == transformed[i].second);
  }
}
