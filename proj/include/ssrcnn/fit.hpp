#pragma once

#include <cstdint>
#include <vector>

#include "ssrcnn/assignment.hpp"
#include "ssrcnn/metrics.hpp"
#include "ssrcnn/scene.hpp"

namespace ssrcnn {

struct FitOptions {
  AssignOptions assign;
  int num_predicates = 50;
  std::size_t slots = 12;
  std::size_t steps = 2000;
  double step_size = 0.05;
  // Box parameters (cx, cy, log w, log h) move at step_size * box_step_scale.
  double box_step_scale = 0.02;
  bool backtracking = true;
  std::size_t max_halvings = 20;
  std::size_t recall_k = 20;
  std::uint64_t seed = 0;
};

struct FitStep {
  std::size_t step = 0;
  double loss = 0.0;
  double recall = 0.0;
  double accepted_step = 0.0;  // largest step any parameter block accepted
};

struct FitResult {
  std::vector<FitStep> trajectory;
  std::vector<TripletPrediction> final_predictions;
  bool diverged = false;
};

// Free parameters of one slot: subject/object/relation logits plus
// (cx, cy, log w, log h) per box.
std::vector<TripletPrediction> random_slots(std::size_t n, int num_object_classes,
                                            int num_predicates, std::uint64_t seed);
// Slots whose first |GT| entries sit on the GT triplets with saturated
// logits; remaining slots are random.
std::vector<TripletPrediction> slots_at_ground_truth(const SceneGraph& scene, std::size_t n,
                                                     int num_object_classes,
                                                     int num_predicates, std::uint64_t seed);

// One ranked triplet per slot: argmax labels, sigmoid scores.
std::vector<RankedTriplet> to_ranked(const std::vector<TripletPrediction>& preds);

// Gradient descent on loss_LF + loss_LB with re-assignment every step.
// A non-finite loss stops the run with `diverged` set.
FitResult fit_direct(std::vector<TripletPrediction> init, const SceneGraph& scene,
                     const std::vector<AuxDetection>& aux, const FitOptions& opt);

}  // namespace ssrcnn
