#pragma once

#include <array>
#include <vector>

#include "ssrcnn/assignment.hpp"
#include "ssrcnn/scene.hpp"

namespace ssrcnn {

// Gradient of a loss with respect to one triplet prediction. Box
// gradients are with respect to (cx, cy, w, h).
struct TripletGrad {
  Vector sub_logits;
  Vector obj_logits;
  Vector rel_logits;
  std::array<double, 4> sub_box{};
  std::array<double, 4> obj_box{};

  static TripletGrad zeros_like(const TripletPrediction& p);
};

// Per-triplet split of a loss by parameter block. Under a fixed
// assignment each block's part depends only on that block.
struct TripletLossParts {
  double sub_logits = 0.0;
  double obj_logits = 0.0;
  double rel_logits = 0.0;
  double sub_box = 0.0;
  double obj_box = 0.0;
};

struct LossValue {
  double value = 0.0;
  std::vector<TripletGrad> grads;  // empty unless requested
  std::vector<TripletLossParts> parts;
};

// Foreground loss: stage-one cost summed over the stage-one matches.
LossValue loss_LF(const std::vector<TripletPrediction>& preds,
                  const std::vector<GroundTruthTriplet>& gts, const AssignmentResult& a,
                  const CostOptions& opt, bool with_grad = false);

// Background loss: stage-two matches train object classification toward
// the pseudo labels, boxes only for hit objects, and the relation toward
// background; unmatched triplets get the relation-background term (plus
// background object terms in full_bg mode).
LossValue loss_LB(const std::vector<TripletPrediction>& preds, const AssignmentResult& a,
                  const CostOptions& opt, bool with_grad = false);

// loss_LF + loss_LB.
LossValue total_loss(const std::vector<TripletPrediction>& preds, const SceneGraph& scene,
                     const AssignmentResult& a, const CostOptions& opt, bool with_grad = false);

}  // namespace ssrcnn
