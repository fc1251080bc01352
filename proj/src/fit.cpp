#include "ssrcnn/fit.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ssrcnn/error.hpp"
#include "ssrcnn/objective.hpp"

namespace ssrcnn {

namespace {

constexpr double kPriorLogit = -4.59511985013459;  // logit(0.01)
constexpr double kSaturatedLogit = 12.0;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Vector prior_logits(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> d(kPriorLogit, 0.5);
  Vector z(static_cast<std::size_t>(n));
  for (double& v : z) v = d(rng);
  return z;
}

Box random_slot_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> c(0.2, 0.8), s(0.1, 0.4);
  return Box(c(rng), c(rng), s(rng), s(rng));
}

ScoredObject best_label(const ObjectPrediction& p) {
  const auto it = std::max_element(p.logits.begin(), p.logits.end());
  return {p.box, static_cast<int>(it - p.logits.begin()), sigmoid(*it)};
}

// A coordinate that would step across its target lands on it, and one
// already on it stays. The L1 and GIoU kinks sit there; stepping off them
// would stall the line search for the whole box.
double toward(double from, double to, const std::optional<double>& target) {
  if (target && (from - *target) * (to - *target) <= 0.0) return *target;
  return to;
}

Box step_box(const Box& b, const std::array<double, 4>& g, double lr, const std::optional<Box>& target) {
  // Multiplicative size update log w -= lr * dL/dw: gradient descent in
  // (cx, cy, log w, log h) preconditioned by 1/w, so small boxes grow at
  // the same relative rate as large ones.
  auto t = [&](int k) { return target ? std::optional<double>(target->as_array()[k]) : std::nullopt; };
  return Box(toward(b.cx(), b.cx() - lr * g[0], t(0)), toward(b.cy(), b.cy() - lr * g[1], t(1)),
             toward(b.w(), b.w() * std::exp(-lr * g[2]), t(2)),
             toward(b.h(), b.h() * std::exp(-lr * g[3]), t(3)));
}

struct BoxTargets {
  std::optional<Box> sub, obj;
};

// Box each slot is regressed toward under the assignment, if any.
std::vector<BoxTargets> box_targets(std::size_t n, const AssignmentResult& a,
                                    const std::vector<GroundTruthTriplet>& gts) {
  std::vector<BoxTargets> t(n);
  for (const auto& [pi, gi] : a.stage1) t[pi] = {gts[gi].sub.box, gts[gi].obj.box};
  for (const auto& [pi, ui] : a.stage2) {
    const PseudoPair& u = a.pseudo[ui];
    if (u.sub.hit) t[pi].sub = u.sub.box;
    if (u.obj.hit) t[pi].obj = u.obj.box;
  }
  return t;
}

void step_logits(Vector& z, const Vector& g, double lr) {
  for (std::size_t i = 0; i < z.size(); ++i) z[i] -= lr * g[i];
}

// Parameter blocks of one triplet slot. The fixed-assignment loss is a
// sum of independent per-block parts, so each block is line-searched on
// its own part.
enum Block { kSubLogits, kObjLogits, kRelLogits, kSubBox, kObjBox, kBlocks };

double part_of(const TripletLossParts& p, int b) {
  switch (b) {
    case kSubLogits: return p.sub_logits;
    case kObjLogits: return p.obj_logits;
    case kRelLogits: return p.rel_logits;
    case kSubBox: return p.sub_box;
    default: return p.obj_box;
  }
}

// Moves block b of `dst` from `src` along the negative gradient.
void step_block(TripletPrediction& dst, const TripletPrediction& src, const TripletGrad& g, int b,
                double lr, const BoxTargets& targets) {
  switch (b) {
    case kSubLogits:
      dst.sub.logits = src.sub.logits;
      step_logits(dst.sub.logits, g.sub_logits, lr);
      break;
    case kObjLogits:
      dst.obj.logits = src.obj.logits;
      step_logits(dst.obj.logits, g.obj_logits, lr);
      break;
    case kRelLogits:
      dst.rel_logits = src.rel_logits;
      step_logits(dst.rel_logits, g.rel_logits, lr);
      break;
    case kSubBox: dst.sub.box = step_box(src.sub.box, g.sub_box, lr, targets.sub); break;
    default: dst.obj.box = step_box(src.obj.box, g.obj_box, lr, targets.obj); break;
  }
}

void restore_block(TripletPrediction& dst, const TripletPrediction& src, int b) {
  switch (b) {
    case kSubLogits: dst.sub.logits = src.sub.logits; break;
    case kObjLogits: dst.obj.logits = src.obj.logits; break;
    case kRelLogits: dst.rel_logits = src.rel_logits; break;
    case kSubBox: dst.sub.box = src.sub.box; break;
    default: dst.obj.box = src.obj.box; break;
  }
}

double recall_of(const std::vector<TripletPrediction>& preds, const SceneGraph& scene,
                 std::size_t k) {
  const std::vector<ImageEval> images{{scene.triplets(), to_ranked(preds)}};
  return recall_at_k(images, k, true);
}

}  // namespace

std::vector<TripletPrediction> random_slots(std::size_t n, int num_object_classes,
                                            int num_predicates, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<TripletPrediction> slots;
  slots.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    ObjectPrediction s{random_slot_box(rng), prior_logits(rng, num_object_classes)};
    ObjectPrediction o{random_slot_box(rng), prior_logits(rng, num_object_classes)};
    slots.push_back({std::move(s), std::move(o), prior_logits(rng, num_predicates)});
  }
  return slots;
}

std::vector<TripletPrediction> slots_at_ground_truth(const SceneGraph& scene, std::size_t n,
                                                     int num_object_classes,
                                                     int num_predicates, std::uint64_t seed) {
  std::vector<TripletPrediction> slots = random_slots(n, num_object_classes, num_predicates, seed);
  const auto gts = scene.triplets();
  if (gts.size() > n) throw ConfigError("fewer slots than GT triplets");
  auto saturate = [](std::size_t size, int target) {
    Vector z(size, -kSaturatedLogit);
    z[static_cast<std::size_t>(target)] = kSaturatedLogit;
    return z;
  };
  for (std::size_t i = 0; i < gts.size(); ++i) {
    slots[i].sub = {gts[i].sub.box, saturate(static_cast<std::size_t>(num_object_classes), gts[i].sub.label)};
    slots[i].obj = {gts[i].obj.box, saturate(static_cast<std::size_t>(num_object_classes), gts[i].obj.label)};
    slots[i].rel_logits = saturate(static_cast<std::size_t>(num_predicates), gts[i].predicate);
  }
  return slots;
}

std::vector<RankedTriplet> to_ranked(const std::vector<TripletPrediction>& preds) {
  std::vector<RankedTriplet> out;
  out.reserve(preds.size());
  for (const auto& p : preds) {
    RankedTriplet t;
    t.sub = best_label(p.sub);
    t.obj = best_label(p.obj);
    const auto it = std::max_element(p.rel_logits.begin(), p.rel_logits.end());
    t.predicate = static_cast<int>(it - p.rel_logits.begin());
    t.predicate_score = sigmoid(*it);
    t.score = triplet_score(t.sub.score, t.obj.score, t.predicate_score);
    t.predicate_logits = p.rel_logits;
    out.push_back(std::move(t));
  }
  return out;
}

FitResult fit_direct(std::vector<TripletPrediction> init, const SceneGraph& scene,
                     const std::vector<AuxDetection>& aux, const FitOptions& opt) {
  if (init.size() < scene.relations.size()) throw ConfigError("fewer slots than GT triplets");
  if (!(opt.step_size > 0.0) || !(opt.box_step_scale > 0.0)) throw ConfigError("step sizes must be positive");
  FitResult res;
  std::vector<TripletPrediction> preds = std::move(init);
  const std::vector<GroundTruthTriplet> gts = scene.triplets();
  for (std::size_t step = 0;; ++step) {
    const AssignmentResult a = two_stage_assign(preds, scene, aux, opt.assign);
    const LossValue lv = total_loss(preds, scene, a, opt.assign.cost, true);
    const std::vector<BoxTargets> targets = box_targets(preds.size(), a, gts);
    FitStep rec{step, lv.value, recall_of(preds, scene, opt.recall_k), 0.0};
    if (!std::isfinite(lv.value)) {
      res.trajectory.push_back(rec);
      res.diverged = true;
      break;
    }
    if (step == opt.steps) {
      res.trajectory.push_back(rec);
      break;
    }
    const std::size_t n = preds.size();
    std::vector<char> pending(n * kBlocks, 1);
    std::vector<TripletPrediction> cand = preds;
    double lr = opt.step_size;
    for (std::size_t h = 0; h <= opt.max_halvings; ++h, lr *= 0.5) {
      for (std::size_t i = 0; i < n; ++i) {
        for (int b = 0; b < kBlocks; ++b) {
          if (!pending[i * kBlocks + b]) continue;
          try {
            step_block(cand[i], preds[i], lv.grads[i], b, b >= kSubBox ? lr * opt.box_step_scale : lr,
                       targets[i]);
          } catch (const InvalidGeometry&) {
            restore_block(cand[i], preds[i], b);  // overflowed box size; retry smaller
          }
        }
      }
      if (!opt.backtracking) {
        rec.accepted_step = lr;
        break;
      }
      const LossValue next = total_loss(cand, scene, a, opt.assign.cost, false);
      bool any_pending = false;
      for (std::size_t i = 0; i < n; ++i) {
        for (int b = 0; b < kBlocks; ++b) {
          char& p = pending[i * kBlocks + b];
          if (!p) continue;
          if (part_of(next.parts[i], b) <= part_of(lv.parts[i], b)) {
            p = 0;
            rec.accepted_step = std::max(rec.accepted_step, lr);
          } else {
            restore_block(cand[i], preds[i], b);
            any_pending = true;
          }
        }
      }
      if (!any_pending) break;
    }
    preds = std::move(cand);
    res.trajectory.push_back(rec);
  }
  res.final_predictions = std::move(preds);
  return res;
}

}  // namespace ssrcnn
