// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 only
// when every criterion passes.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "head_oracle.hpp"
#include "oracles.hpp"
#include "ssrcnn/assignment.hpp"
#include "ssrcnn/calibration.hpp"
#include "ssrcnn/fit.hpp"
#include "ssrcnn/heads.hpp"
#include "ssrcnn/losses.hpp"
#include "ssrcnn/matching.hpp"
#include "ssrcnn/metrics.hpp"
#include "ssrcnn/synth.hpp"
#include "support.hpp"

namespace {

using namespace ssrcnn;
using testing::Rng;
using testing::uniform;
using testing::uniform_int;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ---- 1 ----
Outcome weighted_score_arithmetic() {
  const double a = weighted_score(74.92, 43.47, 48.17);
  const double b = weighted_score(76.66, 41.47, 43.64);
  const bool ok = std::abs(a - 51.64) <= 0.005 && std::abs(b - 49.38) <= 0.005;
  return {ok, fmt("%.4f", a) + ", " + fmt("%.4f", b)};
}

// ---- 2 ----
double factorial_ratio(std::size_t n, std::size_t k) {
  double r = 1;
  for (std::size_t i = 0; i < k; ++i) r *= double(n - i);
  return r;
}

Outcome hungarian_oracle() {
  Rng rng(2024);
  int bad = 0, total = 0;
  for (int t = 0; t < 500; ++t) {
    const std::size_t small = std::size_t(uniform_int(rng, 1, 7));
    std::size_t large = t % 4 == 0 ? small : std::size_t(uniform_int(rng, int(small), int(small) + 5));
    while (factorial_ratio(large, small) > 2e5) --large;
    const bool tall = t % 2 == 1;
    Matrix cost(tall ? large : small, tall ? small : large);
    // integer and dyadic costs keep every sum exact in double
    for (double& x : cost.values())
      x = t % 3 == 0 ? uniform_int(rng, 0, 4) : double(uniform_int(rng, 0, 1 << 20)) / 1024.0;
    const Matching m = hungarian(cost);
    std::set<std::size_t> rows, cols;
    double sum = 0;
    for (const auto& [r, c] : m.pairs) {
      rows.insert(r);
      cols.insert(c);
      sum += cost(r, c);
    }
    const bool valid = m.pairs.size() == small && rows.size() == small && cols.size() == small;
    bad += !(valid && sum == m.total_cost && m.total_cost == testing::brute_force_assignment(cost));
    ++total;
  }
  return {bad == 0, std::to_string(total - bad) + "/" + std::to_string(total) + " exact"};
}

// ---- 3 ----
double central(const std::function<double(double)>& f, double x, double h) { return (f(x + h) - f(x - h)) / (2 * h); }

Outcome gradient_checks() {
  Rng rng(77);
  const double h = 1e-5;
  double worst_focal = 0, worst_l1 = 0, worst_giou = 0;
  FocalParams fp;
  for (int i = 0; i < 100; ++i) {
    const Vector z = testing::random_vector(rng, 6, 4.0);
    const std::optional<int> t = i % 4 == 0 ? std::nullopt : std::optional<int>(i % 6);
    const Vector g = focal_loss(z, t, fp).grad;
    Vector fd(z.size());
    for (std::size_t k = 0; k < z.size(); ++k)
      fd[k] = central([&](double v) { Vector y = z; y[k] = v; return focal_value(y, t, fp); }, z[k], h);
    worst_focal = std::max(worst_focal, testing::rel_error(g, fd));
  }
  int points = 0;
  while (points < 100) {
    const Box a = testing::random_box(rng), b = testing::random_box(rng);
    const auto p = a.as_array(), q = b.as_array();
    bool smooth = true;
    for (int k = 0; k < 4; ++k) smooth = smooth && std::abs(p[k] - q[k]) > 1e-3;
    const CornerBox c = a.corners(), d = b.corners();
    for (double e : {c.x1 - d.x1, c.x2 - d.x2, c.y1 - d.y1, c.y2 - d.y2, c.x1 - d.x2, c.x2 - d.x1, c.y1 - d.y2,
                     c.y2 - d.y1})
      smooth = smooth && std::abs(e) > 1e-3;
    if (!smooth) continue;
    ++points;
    const BoxLossResult r = box_losses(a, b);
    std::array<double, 4> fd_l1{}, fd_giou{};
    for (int k = 0; k < 4; ++k) {
      auto at = [&](double v) {
        auto x = p;
        x[k] = v;
        return box_losses(Box(x[0], x[1], x[2], x[3]), b);
      };
      fd_l1[k] = central([&](double v) { return at(v).l1; }, p[k], h);
      fd_giou[k] = central([&](double v) { return at(v).giou_loss; }, p[k], h);
    }
    worst_l1 = std::max(worst_l1, testing::rel_error(r.l1_grad, fd_l1));
    worst_giou = std::max(worst_giou, testing::rel_error(r.giou_grad, fd_giou));
  }
  const bool ok = worst_focal < 1e-4 && worst_l1 < 1e-4 && worst_giou < 1e-4;
  return {ok, "max rel err focal " + fmt("%.1e", worst_focal) + ", L1 " + fmt("%.1e", worst_l1) + ", GIoU " +
                  fmt("%.1e", worst_giou)};
}

// ---- 4 ----
Outcome adaptive_gamma_values() {
  using Real = boost::multiprecision::cpp_bin_float_50;
  const Real f("0.01");
  const Real raw = 3 - pow(1 - f, 4) * pow(-log(f), Real(1) / 4);
  const double oracle = static_cast<double>(raw < 2 ? raw : Real(2));
  const double g = adaptive_gamma(0.01, 4);
  bool mono = true;
  double prev = -1e300;
  for (int i = 1; i <= 1000; ++i) {
    const double v = adaptive_gamma(i / 1000.0, 4);
    mono = mono && v >= prev;
    prev = v;
  }
  const bool ok = adaptive_gamma(1.0, 4) == 2.0 && adaptive_gamma(0.5, 4) == 2.0 &&
                  std::abs(g - 1.5928) <= 1e-3 && std::abs(g - oracle) <= 1e-12 && mono;
  return {ok, "gamma(0.01) " + fmt("%.6f", g) + ", oracle " + fmt("%.6f", oracle) + (mono ? ", monotone" : ", NOT monotone")};
}

// ---- 5 ----
Outcome binary_search_k() {
  Rng rng(5);
  int bad = 0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t m = std::size_t(uniform_int(rng, 1, 50));
    const std::size_t pool = std::size_t(uniform_int(rng, 1, 200));
    Matrix cost(m, pool);
    for (double& x : cost.values()) x = t % 2 ? uniform(rng, 0, 10) : uniform_int(rng, 0, 5);
    std::set<std::size_t> expected;
    const std::size_t k = testing::linear_scan_k_min(cost, &expected);
    const CandidateSet cs = reduce_candidates(cost);
    const std::set<std::size_t> got(cs.candidates.begin(), cs.candidates.end());
    const bool accept = cs.candidates.size() > m || cs.candidates.size() == pool;
    bad += !(cs.k_min == k && got == expected && accept);
  }
  return {bad == 0, std::to_string(200 - bad) + "/200 tables agree"};
}

// ---- 6 ----
Outcome assignment_partition() {
  int bad = 0;
  std::size_t stage2 = 0, pseudo = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    Rng rng(s);
    SceneConfig sc;
    sc.seed = 1000 + s;
    sc.relation_density = uniform(rng, 0.05, 0.5);
    const auto scene = generate_scene(sc);
    const auto aux = perturb_detections(scene.graph, PerturbModel{}, sc.num_object_classes, s);
    const auto gts = scene.graph.triplets();
    const std::size_t n = gts.size() + std::size_t(uniform_int(rng, 0, 40));
    const auto preds = random_slots(n, sc.num_object_classes, sc.num_predicates, s);
    AssignOptions opt;
    const AssignmentResult a = two_stage_assign(preds, scene.graph, aux, opt);

    std::vector<int> pred_seen(n, 0), gt_seen(gts.size(), 0);
    for (const auto& [p, g] : a.stage1) ++pred_seen[p], ++gt_seen[g];
    for (const auto& [p, u] : a.stage2) ++pred_seen[p];
    for (std::size_t p : a.background) ++pred_seen[p];
    bool ok = std::all_of(pred_seen.begin(), pred_seen.end(), [](int c) { return c == 1; }) &&
              std::all_of(gt_seen.begin(), gt_seen.end(), [](int c) { return c == 1; });

    const auto labeled = label_aux_detections(aux, scene.graph, sc.num_object_classes, opt.cost);
    for (const PseudoPair& pp : a.pseudo) {
      const auto& x = labeled[pp.sub_detection];
      const auto& y = labeled[pp.obj_detection];
      ok = ok && !(x.matched_gt && y.matched_gt && scene.graph.has_relation(*x.matched_gt, *y.matched_gt));
    }
    stage2 += a.stage2.size();
    pseudo += a.pseudo.size();
    bad += !ok;
  }
  return {bad == 0, std::to_string(100 - bad) + "/100 scenes, " + std::to_string(stage2) + " stage-2 matches over " +
                        std::to_string(pseudo) + " pseudo pairs"};
}

// ---- 7 ----
Outcome end_to_end_fit() {
  int ok = 0;
  std::size_t max_gt = 0;
  for (int seed = 0; seed < 20; ++seed) {
    SceneConfig sc;
    sc.relations_per_image = 1 + seed % 3;
    sc.min_objects = 3;
    sc.max_objects = 5;
    sc.seed = 100 + std::uint64_t(seed);
    const auto scene = generate_scene(sc);
    max_gt = std::max(max_gt, scene.graph.relations.size());
    const auto aux = perturb_detections(scene.graph, PerturbModel{}, sc.num_object_classes, sc.seed);
    FitOptions opt;
    opt.slots = 12;
    opt.steps = 2000;
    opt.recall_k = 20;
    opt.seed = std::uint64_t(seed);
    const FitResult r = fit_direct(random_slots(12, sc.num_object_classes, sc.num_predicates, std::uint64_t(seed)),
                                   scene.graph, aux, opt);
    const ImageEval im{scene.graph.triplets(), to_ranked(r.final_predictions)};
    ok += !r.diverged && recall_at_k({im}, 20, true) == 1.0;
  }
  return {ok >= 18 && max_gt <= 3, std::to_string(ok) + "/20 seeds reach R@20 = 1"};
}

// ---- 8 ----
Outcome metric_oracle() {
  Rng rng(8);
  int bad = 0;
  for (int t = 0; t < 200; ++t) {
    std::vector<ImageEval> images{testing::random_eval_image(rng, 5, 10)};
    if (t % 2) images.push_back(testing::random_eval_image(rng, 5, 10));
    const SeenSet seen = testing::random_seen_set(rng, images);
    for (bool gc : {false, true})
      for (std::size_t k : {1u, 2u, 5u, 20u}) {
        const auto o = testing::oracle_recall(images, k, gc, seen);
        bad += recall_at_k(images, k, gc, RecallAveraging::macro) != o.macro;
        bad += recall_at_k(images, k, gc, RecallAveraging::micro) != o.micro;
        bad += mean_recall_at_k(images, k, gc) != o.mean;
        bad += zero_shot_recall_at_k(images, k, seen, gc) != o.zero_shot;
      }
  }
  ImageEval hand;
  const Box a(0.3, 0.3, 0.2, 0.2), b(0.7, 0.7, 0.2, 0.2), c(0.3, 0.7, 0.2, 0.2);
  hand.gts = {{{a, 0}, {b, 0}, 0, 0, 1}};
  RankedTriplet miss, hit;
  miss.sub = {c, 0, 1.0};
  miss.obj = {b, 0, 1.0};
  miss.score = 0.9;
  hit.sub = {a, 0, 1.0};
  hit.obj = {b, 0, 1.0};
  hit.score = 0.6;
  hand.preds = {miss, hit};
  const double w = wmap({hand}, MatchMode::rel).value;
  return {bad == 0 && w == 0.5, std::to_string(bad) + " disagreements over 200 scenes, hand wmAP " + fmt("%.3f", w)};
}

// ---- 9 ----
HeadConfig tiny_head() {
  HeadConfig c;
  c.obj_dim = 16;
  c.rel_dim = 8;
  c.channels = 4;
  c.filters = 3;
  c.pool = 3;
  c.attention_heads = 2;
  c.obj_ffn_dim = 24;
  c.rel_ffn_dim = 12;
  c.num_object_classes = 5;
  c.num_predicates = 4;
  return c;
}

double diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return 1e300;
  return testing::max_abs_diff(a, b);
}

double prediction_diff(const TripletPrediction& p, const TripletPrediction& q) {
  return std::max({diff(p.sub.box.as_array(), q.sub.box.as_array()), diff(p.obj.box.as_array(), q.obj.box.as_array()),
                   diff(p.sub.logits, q.sub.logits), diff(p.obj.logits, q.obj.logits),
                   diff(p.rel_logits, q.rel_logits)});
}

Outcome head_properties() {
  const HeadConfig cfg = tiny_head();
  double equivariance = 0, oracle = 0;
  bool identities = true;
  for (std::uint64_t s = 0; s < 10; ++s) {
    Rng rng(s);
    const HeadWeights w = HeadWeights::random(cfg, 50 + s);
    const FeatureMap f = synthetic_feature_map(cfg.channels, 10, 12, rng);
    const auto qs = init_queries(cfg, 2 + s % 5, s);
    const HeadOutput out = head_forward(qs, f, w, cfg);

    std::vector<std::size_t> perm(qs.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<TripletQuery> permuted;
    for (std::size_t i : perm) permuted.push_back(qs[i]);
    const HeadOutput pout = head_forward(permuted, f, w, cfg);
    for (std::size_t i = 0; i < perm.size(); ++i)
      equivariance = std::max(equivariance, prediction_diff(pout.predictions[i], out.predictions[perm[i]]));

    const auto ref = testing::oracle::head(qs, f, w, cfg);
    for (std::size_t i = 0; i < qs.size(); ++i) {
      const auto& p = out.predictions[i];
      oracle = std::max({oracle, diff(p.sub.box.as_array(), ref[i].sub_box.as_array()),
                         diff(p.obj.box.as_array(), ref[i].obj_box.as_array()), diff(p.sub.logits, ref[i].sub_logits),
                         diff(p.obj.logits, ref[i].obj_logits), diff(p.rel_logits, ref[i].rel_logits)});
    }

    const HeadWeights z = HeadWeights::zeros(cfg);
    const Vector xs = testing::random_vector(rng, 16), xo = testing::random_vector(rng, 16);
    const Vector ps = testing::random_vector(rng, 16), po = testing::random_vector(rng, 16);
    const Vector xr = testing::random_vector(rng, 8), base = testing::random_vector(rng, 4);
    const PairFusionResult pf = pair_fusion(xs, xo, ps, po, z);
    for (std::size_t i = 0; i < 16; ++i) identities = identities && pf.sub[i] == xs[i] + ps[i] && pf.obj[i] == xo[i] + po[i];
    identities = identities && e2r_fusion(xs, xo, xr, ps, po, z) == layer_norm(xr);
    identities = identities && dynamic_conv(xs, f.roi_pool(qs[0].sub_box, cfg.pool), z.obj_dyn) == layer_norm(xs);
    HeadWeights zc = z;
    zc.rf_cls = w.rf_cls;
    identities = identities && relation_logits(xs, xo, base, zc) == base;
  }
  const bool ok = equivariance <= 1e-10 && oracle <= 1e-10 && identities;
  return {ok, "equivariance " + fmt("%.1e", equivariance) + ", oracle " + fmt("%.1e", oracle) +
                  (identities ? ", zero-weight identities exact" : ", zero-weight identities FAILED")};
}

// ---- 10 ----
Outcome logit_adjustment() {
  Rng rng(10);
  bool identity = true, invariant = true;
  const FrequencyTable skewed({0.5, 0.3, 0.15, 0.05});
  const FrequencyTable uniform_freq(std::vector<double>(6, 1.0 / 6.0));
  for (int i = 0; i < 1000; ++i) {
    const Vector z4 = testing::random_vector(rng, 4, 5.0);
    identity = identity && logit_adjust(z4, skewed, 0.0) == z4;
    const Vector z = testing::random_vector(rng, 6, 5.0);
    const Vector a = logit_adjust(z, uniform_freq, 0.3);
    invariant = invariant && std::max_element(a.begin(), a.end()) - a.begin() ==
                                 std::max_element(z.begin(), z.end()) - z.begin();
  }
  const Vector eq = logit_adjust(Vector{1.0, 1.0}, FrequencyTable({0.9, 0.1}), 0.3);
  const bool rare = eq[1] > eq[0];
  return {identity && invariant && rare,
          std::string(identity ? "tau 0 identity" : "tau 0 NOT identity") + (invariant ? ", argmax kept" : ", argmax changed") +
              ", adjusted " + fmt("%.4f", eq[0]) + " vs " + fmt("%.4f", eq[1])};
}

struct Criterion {
  const char* name;
  double limit_s;
  Outcome (*run)();
};

}  // namespace

int main() {
  const Criterion criteria[] = {
      {"weighted-score arithmetic", 1.0, weighted_score_arithmetic},
      {"Hungarian vs brute force", 10.0, hungarian_oracle},
      {"analytic vs finite-difference gradients", 10.0, gradient_checks},
      {"adaptive focal gamma", 10.0, adaptive_gamma_values},
      {"binary-search K_min", 30.0, binary_search_k},
      {"assignment partition", 60.0, assignment_partition},
      {"end-to-end fit", 300.0, end_to_end_fit},
      {"metric oracle", 60.0, metric_oracle},
      {"head forward properties", 30.0, head_properties},
      {"logit adjustment", 5.0, logit_adjustment},
  };
  int failed = 0, index = 0;
  for (const Criterion& c : criteria) {
    ++index;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool pass = o.pass && secs < c.limit_s;
    failed += !pass;
    std::printf("%s [%2d] %-40s %s (%.2f s, limit %.0f s)\n", pass ? "PASS" : "FAIL", index, c.name, o.detail.c_str(),
                secs, c.limit_s);
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", index - failed, index);
  return failed == 0 ? 0 : 1;
}
