#include <gtest/gtest.h>

#include "oracles.hpp"
#include "ssrcnn/assignment.hpp"
#include "ssrcnn/error.hpp"
#include "ssrcnn/fit.hpp"
#include "ssrcnn/synth.hpp"
#include "support.hpp"

namespace ssrcnn {
namespace {

using testing::Rng;
using testing::uniform_int;

TEST(TopKUnion, MatchesPerRowRanks) {
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    Matrix cost(3, 9);
    for (double& x : cost.values()) x = uniform_int(rng, 0, 4);
    for (std::size_t k = 1; k <= 9; ++k) {
      std::set<std::size_t> expected;
      for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t j = 0; j < 9; ++j) {
          std::size_t before = 0;
          for (std::size_t l = 0; l < 9; ++l)
            before += cost(r, l) < cost(r, j) || (cost(r, l) == cost(r, j) && l < j);
          if (before < k) expected.insert(j);
        }
      const auto got = top_k_union(cost, k);
      EXPECT_EQ(std::set<std::size_t>(got.begin(), got.end()), expected);
      EXPECT_TRUE(std::is_sorted(got.begin(), got.end()));
    }
  }
}

TEST(ReduceCandidates, EqualsLinearScan) {
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const std::size_t m = std::size_t(uniform_int(rng, 1, 20));
    const std::size_t pool = std::size_t(uniform_int(rng, 1, 60));
    Matrix cost(m, pool);
    for (double& x : cost.values()) x = i % 2 ? testing::uniform(rng, 0, 1) : uniform_int(rng, 0, 3);
    std::set<std::size_t> expected;
    const std::size_t k = testing::linear_scan_k_min(cost, &expected);
    const CandidateSet cs = reduce_candidates(cost);
    EXPECT_EQ(cs.k_min, k);
    EXPECT_EQ(std::set<std::size_t>(cs.candidates.begin(), cs.candidates.end()), expected);
    EXPECT_TRUE(cs.candidates.size() > m || cs.candidates.size() == pool);
    EXPECT_EQ(cs.full_pool, cs.candidates.size() == pool);
  }
}

TEST(ReduceCandidates, SmallPoolFallsBackToAll) {
  const CandidateSet cs = reduce_candidates(Matrix(5, 3, 1.0));
  EXPECT_EQ(cs.k_min, 3u);
  EXPECT_EQ(cs.candidates, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_TRUE(cs.full_pool);
}

struct Fixture {
  SyntheticScene scene;
  std::vector<AuxDetection> aux;
  std::vector<TripletPrediction> preds;
};

Fixture make_fixture(std::uint64_t seed, std::size_t n) {
  SceneConfig sc;
  sc.seed = seed;
  sc.relation_density = 0.3;
  Fixture f{generate_scene(sc), {}, {}};
  f.aux = perturb_detections(f.scene.graph, PerturbModel{}, sc.num_object_classes, seed);
  f.preds = random_slots(n, sc.num_object_classes, sc.num_predicates, seed);
  return f;
}

TEST(PseudoSet, OrderedPairsWithoutAnnotatedPairs) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Fixture f = make_fixture(seed, 30);
    const auto labeled = label_aux_detections(f.aux, f.scene.graph, 150, CostOptions{});
    const auto pseudo = build_pseudo_set(labeled, f.scene.graph);
    std::size_t excluded = 0;
    for (std::size_t i = 0; i < labeled.size(); ++i)
      for (std::size_t j = 0; j < labeled.size(); ++j)
        if (i != j && labeled[i].matched_gt && labeled[j].matched_gt &&
            f.scene.graph.has_relation(*labeled[i].matched_gt, *labeled[j].matched_gt))
          ++excluded;
    const std::size_t n = labeled.size();
    EXPECT_EQ(pseudo.size(), n * (n - 1) - excluded);
    for (const PseudoPair& p : pseudo) {
      EXPECT_NE(p.sub_detection, p.obj_detection);
      const auto& s = labeled[p.sub_detection];
      const auto& o = labeled[p.obj_detection];
      EXPECT_FALSE(s.matched_gt && o.matched_gt && f.scene.graph.has_relation(*s.matched_gt, *o.matched_gt));
      EXPECT_EQ(p.sub.hit, s.matched_gt.has_value());
      if (p.sub.hit) {
        EXPECT_EQ(p.sub.box, f.scene.graph.objects[*s.matched_gt].box);
        EXPECT_EQ(p.sub.label, f.scene.graph.objects[*s.matched_gt].label);
      } else {
        EXPECT_EQ(p.sub.box, s.box);
        EXPECT_FALSE(p.sub.label.has_value());
      }
    }
  }
  EXPECT_THROW(build_pseudo_set({}, SceneGraph{}), InvalidArgument);
}

TEST(LabelAux, MatchesEveryGtObjectWhenEnoughDetections) {
  const Fixture f = make_fixture(3, 10);
  std::vector<AuxDetection> aux;
  for (const auto& o : f.scene.graph.objects) aux.push_back({o.box, o.label, 1.0, std::nullopt});
  const auto labeled = label_aux_detections(aux, f.scene.graph, 150, CostOptions{});
  for (std::size_t i = 0; i < labeled.size(); ++i) EXPECT_EQ(labeled[i].matched_gt, i);
}

void expect_partition(const AssignmentResult& a, std::size_t n, std::size_t num_gt) {
  std::vector<int> seen(n, 0);
  std::vector<int> gt_seen(num_gt, 0);
  for (const auto& [p, g] : a.stage1) {
    ++seen[p];
    ++gt_seen[g];
  }
  for (const auto& [p, u] : a.stage2) {
    ++seen[p];
    EXPECT_LT(u, a.pseudo.size());
  }
  for (std::size_t p : a.background) ++seen[p];
  for (int c : seen) EXPECT_EQ(c, 1);
  for (int c : gt_seen) EXPECT_EQ(c, 1);
}

TEST(TwoStage, PartitionsPredictionsInEveryMode) {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    const Fixture f = make_fixture(seed, 25);
    const auto gts = f.scene.graph.triplets();
    for (AssignMode mode : {AssignMode::pseudo, AssignMode::full_bg, AssignMode::no_bg}) {
      AssignOptions opt;
      opt.mode = mode;
      const AssignmentResult a = two_stage_assign(f.preds, f.scene.graph, f.aux, opt);
      expect_partition(a, f.preds.size(), gts.size());
      if (mode != AssignMode::pseudo) EXPECT_TRUE(a.stage2.empty());
      if (mode == AssignMode::pseudo && !a.pseudo.empty()) {
        EXPECT_EQ(a.stage2.size(), std::min(f.preds.size() - gts.size(), a.candidate_count));
        EXPECT_GE(a.k_min, 1u);
      }
    }
  }
}

TEST(TwoStage, Stage1IsOptimal) {
  const Fixture f = make_fixture(11, 6);
  const auto gts = f.scene.graph.triplets();
  AssignOptions opt;
  const AssignmentResult a = two_stage_assign(f.preds, f.scene.graph, f.aux, opt);
  double sum = 0;
  for (double c : a.stage1_costs) sum += c;
  EXPECT_NEAR(sum, testing::brute_force_assignment(stage1_cost_matrix(f.preds, gts, opt.cost)),
              1e-9);
}

TEST(TwoStage, StageOneInvariantToGtOrder) {
  const Fixture f = make_fixture(5, 20);
  SceneGraph reversed = f.scene.graph;
  std::reverse(reversed.relations.begin(), reversed.relations.end());
  AssignOptions opt;
  const auto a = two_stage_assign(f.preds, f.scene.graph, f.aux, opt);
  const auto b = two_stage_assign(f.preds, reversed, f.aux, opt);
  const std::size_t g = f.scene.graph.relations.size();
  std::set<std::pair<std::size_t, std::size_t>> x, y;
  for (const auto& [p, t] : a.stage1) x.insert({p, t});
  for (const auto& [p, t] : b.stage1) y.insert({p, g - 1 - t});
  EXPECT_EQ(x, y);
}

TEST(TwoStage, TooFewPredictionsThrows) {
  Fixture f = make_fixture(1, 40);
  const std::size_t g = f.scene.graph.relations.size();
  ASSERT_GT(g, 0u);
  f.preds.erase(f.preds.begin() + std::ptrdiff_t(g - 1), f.preds.end());
  EXPECT_THROW(two_stage_assign(f.preds, f.scene.graph, f.aux, AssignOptions{}), ConfigError);
}

TEST(AssignMode, StringRoundTrip) {
  for (AssignMode m : {AssignMode::pseudo, AssignMode::full_bg, AssignMode::no_bg})
    EXPECT_EQ(assign_mode_from_string(to_string(m)), m);
  EXPECT_THROW(assign_mode_from_string("both"), ConfigError);
}

}  // namespace
}  // namespace ssrcnn
