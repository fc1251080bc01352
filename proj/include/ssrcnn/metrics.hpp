#pragma once

#include <map>
#include <optional>
#include <set>
#include <tuple>
#include <vector>

#include "ssrcnn/geometry.hpp"
#include "ssrcnn/scene.hpp"

namespace ssrcnn {

inline constexpr double kMatchIou = 0.5;

struct ScoredObject {
  Box box{0.5, 0.5, 1.0, 1.0};
  int label = 0;
  double score = 1.0;
};

struct RankedTriplet {
  ScoredObject sub;
  ScoredObject obj;
  int predicate = 0;
  double predicate_score = 1.0;
  double score = 1.0;      // combined ranking score
  Vector predicate_logits;  // optional; used by logit adjustment
};

// Equal-weight combination of the three classification scores.
double triplet_score(double s_sub, double s_obj, double s_rel);

enum class MatchMode { rel, phr };

// rel: all labels equal and both boxes reach IoU 0.5.
// phr: all labels equal and the subject-object union boxes reach IoU 0.5.
bool triplet_match(const RankedTriplet& pred, const GroundTruthTriplet& gt, MatchMode mode);

struct ImageEval {
  std::vector<GroundTruthTriplet> gts;
  std::vector<RankedTriplet> preds;
};

// (subject label, predicate, object label)
using LabelTriple = std::tuple<int, int, int>;
using SeenSet = std::set<LabelTriple>;

enum class RecallAveraging {
  macro,  // mean of per-image recalls (VG protocol)
  micro,  // matched GT over total GT (Open Images protocol)
};

// Prediction indices in ranking order: score descending, ties by index.
// With `graph_constraint`, only the best predicate per (subject box,
// object box) pair is kept.
std::vector<std::size_t> rank_predictions(const std::vector<RankedTriplet>& preds,
                                          bool graph_constraint);

// Per-GT hit flags for the top-K ranked predictions: a maximum one-to-one
// matching under rel-mode triplet_match, built by augmenting paths in
// ranking order.
std::vector<bool> recall_hits(const ImageEval& image, std::size_t k, bool graph_constraint);

double recall_at_k(const std::vector<ImageEval>& images, std::size_t k, bool graph_constraint,
                   RecallAveraging averaging = RecallAveraging::macro);

struct CategoryRecall {
  int predicate = 0;
  std::size_t gt_count = 0;
  std::size_t hit_count = 0;
  double recall() const { return gt_count ? double(hit_count) / double(gt_count) : 0.0; }
};

std::vector<CategoryRecall> per_category_recall(const std::vector<ImageEval>& images,
                                                std::size_t k, bool graph_constraint);
// Unweighted mean of per-category recall over categories present in GT.
double mean_recall_at_k(const std::vector<ImageEval>& images, std::size_t k,
                        bool graph_constraint);
// Pooled recall over GT triplets whose label triple is absent from `seen`;
// nullopt when there are none.
std::optional<double> zero_shot_recall_at_k(const std::vector<ImageEval>& images, std::size_t k,
                                            const SeenSet& seen, bool graph_constraint);

struct WmapResult {
  double value = 0.0;
  std::map<int, double> ap;      // per predicate
  std::map<int, double> weight;  // GT share per predicate; sums to 1
};

// Area under the interpolated precision envelope of a ranked TP/FP list.
double average_precision(const std::vector<bool>& tp_in_rank_order, std::size_t num_gt);

WmapResult wmap(const std::vector<ImageEval>& images, MatchMode mode);

// 0.2 * R@50 + 0.4 * wmAP_rel + 0.4 * wmAP_phr, on whatever scale the inputs use.
double weighted_score(double recall50, double wmap_rel, double wmap_phr);

struct EvalOptions {
  std::vector<std::size_t> ks{20, 50, 100};
  bool graph_constraint = true;
  RecallAveraging averaging = RecallAveraging::macro;
};

// Values on the [0, 1] scale.
struct MetricsReport {
  std::map<std::size_t, double> recall;
  std::map<std::size_t, double> mean_recall;
  std::map<std::size_t, std::optional<double>> zero_shot_recall;
  std::map<std::size_t, std::vector<CategoryRecall>> per_category;
  double recall50_micro = 0.0;
  WmapResult wmap_rel;
  WmapResult wmap_phr;
  double score_wtd = 0.0;  // from micro R@50, on the [0, 1] scale
};

// Full metric suite; per-image work runs OpenMP-parallel.
MetricsReport evaluate(const std::vector<ImageEval>& images, const EvalOptions& opt,
                       const SeenSet* seen = nullptr);

namespace serial {
MetricsReport evaluate(const std::vector<ImageEval>& images, const EvalOptions& opt,
                       const SeenSet* seen = nullptr);
}  // namespace serial

}  // namespace ssrcnn
