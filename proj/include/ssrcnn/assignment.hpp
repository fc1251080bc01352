#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ssrcnn/matching.hpp"
#include "ssrcnn/scene.hpp"

namespace ssrcnn {

// One output of the auxiliary (Siamese) object detector.
struct AuxDetection {
  Box box;
  int label = 0;       // hard label
  double score = 1.0;  // detector confidence
  std::optional<std::size_t> matched_gt;  // GT object index after label assignment
};

// Object label assignment of the auxiliary detector: Hungarian matching
// between detections and GT objects under
// lambda_cls * focal + lambda_l1 * L1 + lambda_giou * GIoU-loss, with the
// hard label as a one-hot logit vector. Returns a copy with `matched_gt` set.
std::vector<AuxDetection> label_aux_detections(std::vector<AuxDetection> aux,
                                               const SceneGraph& scene, int num_object_classes,
                                               const CostOptions& opt);

// Pseudo-label set: every ordered pair of distinct detections, minus pairs
// whose members match the subject and object of an annotated relation, with
// matched members replaced by their GT box and label. Throws
// InvalidArgument when `aux` is empty.
std::vector<PseudoPair> build_pseudo_set(const std::vector<AuxDetection>& aux,
                                         const SceneGraph& scene);

struct CandidateSet {
  std::size_t k_min = 0;
  std::vector<std::size_t> candidates;  // sorted pool indices
  bool full_pool = false;
};

// Union of the k cheapest pool entries of every row of `cost`.
std::vector<std::size_t> top_k_union(const Matrix& cost, std::size_t k);

// Smallest K whose top-K union exceeds the number of rows, found by binary
// search. Falls back to the whole pool (K = pool size) when pool <= rows.
CandidateSet reduce_candidates(const Matrix& cost);

enum class AssignMode {
  pseudo,    // two-stage assignment with pseudo-labels
  full_bg,   // every unmatched triplet gets background object and relation labels
  no_bg,     // unmatched triplets get only a background relation label
};

struct AssignOptions {
  CostOptions cost;
  AssignMode mode = AssignMode::pseudo;
  int num_object_classes = 150;
};

struct AssignmentResult {
  AssignMode mode = AssignMode::pseudo;
  std::vector<std::pair<std::size_t, std::size_t>> stage1;  // (prediction, GT triplet)
  std::vector<std::pair<std::size_t, std::size_t>> stage2;  // (prediction, pseudo pair)
  std::vector<std::size_t> background;                      // prediction indices
  std::vector<double> stage1_costs;
  std::vector<double> stage2_costs;
  std::vector<PseudoPair> pseudo;  // the pseudo-label set U
  std::size_t k_min = 0;
  std::size_t candidate_count = 0;
};

// Two-stage triplet label assignment. Throws ConfigError when there are
// fewer predictions than GT triplets.
AssignmentResult two_stage_assign(const std::vector<TripletPrediction>& preds,
                                  const SceneGraph& scene, const std::vector<AuxDetection>& aux,
                                  const AssignOptions& opt);

const char* to_string(AssignMode m);
AssignMode assign_mode_from_string(const std::string& s);

}  // namespace ssrcnn
