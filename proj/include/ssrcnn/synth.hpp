#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "ssrcnn/assignment.hpp"
#include "ssrcnn/calibration.hpp"
#include "ssrcnn/features.hpp"
#include "ssrcnn/metrics.hpp"
#include "ssrcnn/scene.hpp"

namespace ssrcnn {

using Rng = std::mt19937_64;

struct SceneConfig {
  int min_objects = 3;
  int max_objects = 8;
  int num_object_classes = 150;
  int num_predicates = 50;
  // Fraction of ordered object pairs that carry a relation (at least one
  // relation whenever two objects exist).
  double relation_density = 0.15;
  // Explicit relation count; overrides the density when >= 0.
  int relations_per_image = -1;
  double min_box_side = 0.08;
  double max_box_side = 0.45;
  // Power-law exponents: P(label k) proportional to (k + 1)^-skew.
  double predicate_skew = 1.0;
  double object_skew = 0.6;
  double image_width = 800.0;
  double image_height = 600.0;
  std::size_t feature_channels = 16;
  std::size_t feature_size = 32;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticScene {
  SceneGraph graph;
  FeatureMap features;
  double width = 0.0;
  double height = 0.0;
  std::uint64_t seed = 0;
};

// Draws a label in [0, n) with P(k) proportional to (k + 1)^-skew.
int sample_skewed_label(Rng& rng, int n, double skew);

// Smooth random field: each channel is a sum of a few low-frequency cosines.
FeatureMap synthetic_feature_map(std::size_t channels, std::size_t height, std::size_t width,
                                 Rng& rng);

// Deterministic under cfg.seed.
SyntheticScene generate_scene(const SceneConfig& cfg);
// Image i uses seed cfg.seed + i.
std::vector<SyntheticScene> generate_dataset(const SceneConfig& cfg, std::size_t images);

struct PerturbModel {
  double box_jitter = 0.05;    // relative std-dev of centre and log-size noise
  double label_flip = 0.05;
  double drop = 0.1;
  double spurious_rate = 0.3;  // expected spurious detections per GT object
  double score_noise = 0.05;

  void validate() const;
};

// Simulated auxiliary-detector output for one scene; matched_gt is left
// unset.
std::vector<AuxDetection> perturb_detections(const SceneGraph& scene, const PerturbModel& m,
                                             int num_object_classes, std::uint64_t seed);

struct PredictionModel {
  PerturbModel boxes{0.04, 0.0, 0.0, 0.0, 0.05};
  // Relation logits: the GT predicate gets `signal`, others N(0, noise),
  // and every predicate c gets bias * ln f_c to mimic a head-biased model.
  double signal = 2.0;
  double noise = 1.0;
  double frequency_bias = 1.0;
  int distractors_per_image = 20;
};

// Scored triplet predictions for one scene, carrying predicate logits.
std::vector<RankedTriplet> simulate_predictions(const SceneGraph& scene,
                                                const PredictionModel& m,
                                                const FrequencyTable& predicate_freq,
                                                int num_object_classes, std::uint64_t seed);

// Rebuilds predicate label, predicate score, and combined score from
// `logits` (sigmoid of the best entry).
void rescore_from_logits(RankedTriplet& t, std::span<const double> logits);

}  // namespace ssrcnn
