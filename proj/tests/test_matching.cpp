#include <gtest/gtest.h>

#include "oracles.hpp"
#include "ssrcnn/error.hpp"
#include "ssrcnn/matching.hpp"
#include "support.hpp"

namespace ssrcnn {
namespace {

using testing::brute_force_assignment;
using testing::random_box;
using testing::random_vector;
using testing::Rng;
using testing::uniform_int;

Matrix integer_matrix(Rng& rng, std::size_t r, std::size_t c, int hi) {
  Matrix m(r, c);
  for (double& x : m.values()) x = uniform_int(rng, 0, hi);
  return m;
}

void expect_valid_matching(const Matrix& cost, const Matching& m) {
  ASSERT_EQ(m.pairs.size(), std::min(cost.rows(), cost.cols()));
  std::set<std::size_t> rows, cols;
  double sum = 0.0;
  for (const auto& [r, c] : m.pairs) {
    EXPECT_TRUE(rows.insert(r).second);
    EXPECT_TRUE(cols.insert(c).second);
    sum += cost(r, c);
  }
  EXPECT_TRUE(std::is_sorted(m.pairs.begin(), m.pairs.end()));
  EXPECT_DOUBLE_EQ(sum, m.total_cost);
}

TEST(Hungarian, IntegerCostsEqualBruteForceExactly) {
  Rng rng(1);
  for (int i = 0; i < 300; ++i) {
    const std::size_t r = std::size_t(uniform_int(rng, 1, 7));
    const std::size_t c = i % 3 == 0 ? r : std::size_t(uniform_int(rng, 1, 7));
    const Matrix cost = integer_matrix(rng, r, c, i % 2 ? 3 : 100);
    const Matching m = hungarian(cost);
    expect_valid_matching(cost, m);
    EXPECT_EQ(m.total_cost, brute_force_assignment(cost));
  }
}

TEST(Hungarian, RealCostsEqualBruteForce) {
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const std::size_t r = std::size_t(uniform_int(rng, 1, 6));
    const std::size_t c = std::size_t(uniform_int(rng, 1, 6));
    const Matrix cost = testing::random_matrix(rng, r, c, 10.0);
    const Matching m = hungarian(cost);
    expect_valid_matching(cost, m);
    EXPECT_NEAR(m.total_cost, brute_force_assignment(cost), 1e-12);
  }
}

TEST(Hungarian, RowPermutationPermutesMatches) {
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const Matrix cost = testing::random_matrix(rng, 6, 8);
    std::vector<std::size_t> perm(6);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix permuted(6, 8);
    for (std::size_t r = 0; r < 6; ++r)
      for (std::size_t c = 0; c < 8; ++c) permuted(r, c) = cost(perm[r], c);
    const Matching a = hungarian(cost), b = hungarian(permuted);
    EXPECT_NEAR(a.total_cost, b.total_cost, 1e-12);
    // continuous costs have a unique optimum
    std::set<std::pair<std::size_t, std::size_t>> mapped;
    for (const auto& [r, c] : b.pairs) mapped.insert({perm[r], c});
    const std::set<std::pair<std::size_t, std::size_t>> direct(a.pairs.begin(), a.pairs.end());
    EXPECT_EQ(mapped, direct);
  }
}

TEST(Hungarian, DeterministicOnTies) {
  const Matrix cost(4, 4, 1.0);
  const Matching a = hungarian(cost), b = hungarian(cost);
  EXPECT_EQ(a.pairs, b.pairs);
  EXPECT_EQ(a.total_cost, 4.0);
}

TEST(Hungarian, RejectsEmptyAndNonFinite) {
  EXPECT_THROW(hungarian(Matrix(0, 3)), InvalidArgument);
  Matrix m(2, 2, 0.0);
  m(1, 0) = std::nan("");
  EXPECT_THROW(hungarian(m), NonFinite);
}

TripletPrediction random_prediction(Rng& rng, int objects, int predicates) {
  return {{random_box(rng), random_vector(rng, std::size_t(objects), 3.0)},
          {random_box(rng), random_vector(rng, std::size_t(objects), 3.0)},
          random_vector(rng, std::size_t(predicates), 3.0)};
}

GroundTruthTriplet random_gt(Rng& rng, int objects, int predicates) {
  const LabeledBox sub{random_box(rng), uniform_int(rng, 0, objects - 1)};
  const LabeledBox obj{random_box(rng), uniform_int(rng, 0, objects - 1)};
  return {sub, obj, uniform_int(rng, 0, predicates - 1), 0, 0};
}

TEST(Stage1Cost, EqualsWeightedComponentSum) {
  Rng rng(4);
  CostOptions opt;
  for (int i = 0; i < 100; ++i) {
    const TripletPrediction p = random_prediction(rng, 5, 4);
    const GroundTruthTriplet g = random_gt(rng, 5, 4);
    const auto& c = opt.coeffs;
    const auto bs = box_losses(p.sub.box, g.sub.box), bo = box_losses(p.obj.box, g.obj.box);
    const double expected =
        c.lambda_cls_rel * focal_value(p.rel_logits, g.predicate, opt.relation_focal) +
        c.lambda_cls_obj * (focal_value(p.sub.logits, g.sub.label, opt.object_focal) +
                            focal_value(p.obj.logits, g.obj.label, opt.object_focal)) +
        c.lambda_l1 * (bs.l1 + bo.l1) + c.lambda_giou * (bs.giou_loss + bo.giou_loss);
    EXPECT_NEAR(stage1_cost(p, g, opt), expected, 1e-12);
  }
}

TEST(Stage2Cost, ClassTermGatedByHit) {
  Rng rng(5);
  CostOptions opt;
  const TripletPrediction p = random_prediction(rng, 5, 4);
  PseudoPair miss{{random_box(rng), std::nullopt, false}, {random_box(rng), std::nullopt, false}, 0, 1};
  PseudoPair hit = miss;
  hit.sub = {miss.sub.box, 2, true};
  const double c_miss = stage2_cost(p, miss, opt), c_hit = stage2_cost(p, hit, opt);
  EXPECT_GE(c_miss, 0.0);
  EXPECT_NE(c_miss, c_hit);
  EXPECT_TRUE(std::isfinite(c_hit));
}

TEST(CostMatrix, ParallelEqualsSerial) {
  Rng rng(6);
  std::vector<TripletPrediction> preds;
  std::vector<GroundTruthTriplet> gts;
  for (int i = 0; i < 40; ++i) preds.push_back(random_prediction(rng, 6, 5));
  for (int i = 0; i < 7; ++i) gts.push_back(random_gt(rng, 6, 5));
  CostOptions opt;
  const Matrix a = stage1_cost_matrix(preds, gts, opt);
  EXPECT_EQ(a, serial::stage1_cost_matrix(preds, gts, opt));
  for (std::size_t r = 0; r < 40; ++r)
    for (std::size_t c = 0; c < 7; ++c) EXPECT_EQ(a(r, c), stage1_cost(preds[r], gts[c], opt));
}

TEST(CostMatrix, Stage2MatchesPointwiseCost) {
  Rng rng(7);
  std::vector<TripletPrediction> preds;
  for (int i = 0; i < 10; ++i) preds.push_back(random_prediction(rng, 4, 3));
  std::vector<PseudoPair> pool;
  for (int i = 0; i < 12; ++i) {
    const bool hs = i % 2, ho = i % 3 == 0;
    pool.push_back({{random_box(rng), hs ? std::optional<int>(i % 4) : std::nullopt, hs},
                    {random_box(rng), ho ? std::optional<int>(1) : std::nullopt, ho},
                    std::size_t(i),
                    std::size_t(i + 1)});
  }
  CostOptions opt;
  const std::vector<std::size_t> rows{1, 4, 7};
  const Matrix m = stage2_cost_matrix(preds, rows, pool, opt);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < pool.size(); ++c)
      EXPECT_NEAR(m(r, c), stage2_cost(preds[rows[r]], pool[c], opt), 1e-12);
}

}  // namespace
}  // namespace ssrcnn
