#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "ssrcnn/geometry.hpp"
#include "ssrcnn/numerics.hpp"

namespace ssrcnn {

// Weights of the triplet set-prediction losses. Defaults are the
// published training configuration.
struct LossCoefficients {
  double lambda_cls_rel = 4.0 / 3.0;
  double lambda_cls_obj = 4.0 / 3.0;
  double lambda_l1 = 5.0;
  double lambda_giou = 2.0;
  double eta_cls = 1.0 / 3.0;
  double eta_l1 = 5.0 / 4.0;
  double eta_giou = 1.0 / 2.0;

  void validate() const;
};

// Sigmoid focal loss parameters. `class_gamma`, when non-empty, overrides
// `gamma` per class (see calibration::adaptive_gamma).
struct FocalParams {
  double alpha = 0.25;
  double gamma = 2.0;
  std::vector<double> class_gamma;

  double gamma_for(std::size_t c) const {
    return class_gamma.empty() ? gamma : class_gamma[c];
  }
  void validate(std::size_t num_classes) const;
};

struct FocalResult {
  double loss = 0.0;
  Vector grad;  // d loss / d logits
};

// Sum over classes of the per-class sigmoid focal loss. `target` is the
// positive class, or nullopt for background (every class negative).
FocalResult focal_loss(std::span<const double> logits, std::optional<int> target,
                       const FocalParams& p);
// Value only.
double focal_value(std::span<const double> logits, std::optional<int> target,
                   const FocalParams& p);

struct BoxLossResult {
  double l1 = 0.0;
  double giou_loss = 0.0;
  // Gradients with respect to the predicted (cx, cy, w, h).
  std::array<double, 4> l1_grad{};
  std::array<double, 4> giou_grad{};
};

// L1 over normalized (cx, cy, w, h) and 1 - GIoU.
BoxLossResult box_losses(const Box& pred, const Box& gt);

}  // namespace ssrcnn
