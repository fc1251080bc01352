#pragma once

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "ssrcnn/losses.hpp"
#include "ssrcnn/numerics.hpp"
#include "ssrcnn/scene.hpp"

namespace ssrcnn {

// Rows are predictions, columns are targets.
using CostMatrix = Matrix;

struct Matching {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (row, col), sorted by row
  double total_cost = 0.0;
};

// Exact minimum-cost assignment of min(rows, cols) pairs. Deterministic
// for a given matrix. Throws InvalidArgument on an empty matrix and
// NonFinite on NaN/Inf entries.
Matching hungarian(const CostMatrix& cost);

// How the classification term enters a matching cost. `full` uses the
// complete focal-loss value over all classes (the same number as the
// training loss); `target_only` uses only the target-class entry.
enum class ClassCostMode { full, target_only };

struct CostOptions {
  LossCoefficients coeffs;
  FocalParams object_focal;
  FocalParams relation_focal;
  ClassCostMode class_mode = ClassCostMode::full;
};

// One object of a pseudo-label pair. `hit` marks an object whose detector
// output matched a ground-truth object; it then carries the GT box and
// label. Otherwise the box is the raw detection and the label is background.
struct PseudoObject {
  Box box;
  std::optional<int> label;
  bool hit = false;
};

struct PseudoPair {
  PseudoObject sub;
  PseudoObject obj;
  std::size_t sub_detection = 0;
  std::size_t obj_detection = 0;
};

// Stage-one matching cost between a predicted triplet and a GT triplet.
double stage1_cost(const TripletPrediction& pred, const GroundTruthTriplet& gt,
                   const CostOptions& opt);
// Stage-two matching cost between the object pair of a predicted triplet
// and a pseudo-label pair; classification is gated by each object's hit flag.
double stage2_cost(const TripletPrediction& pred, const PseudoPair& pseudo,
                   const CostOptions& opt);

// Cost matrices, OpenMP-parallel over prediction rows.
CostMatrix stage1_cost_matrix(const std::vector<TripletPrediction>& preds,
                              const std::vector<GroundTruthTriplet>& gts,
                              const CostOptions& opt);
CostMatrix stage2_cost_matrix(const std::vector<TripletPrediction>& preds,
                              const std::vector<std::size_t>& pred_rows,
                              const std::vector<PseudoPair>& pool, const CostOptions& opt);

namespace serial {
CostMatrix stage1_cost_matrix(const std::vector<TripletPrediction>& preds,
                              const std::vector<GroundTruthTriplet>& gts,
                              const CostOptions& opt);
}  // namespace serial

}  // namespace ssrcnn
