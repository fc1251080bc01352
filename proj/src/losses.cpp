#include "ssrcnn/losses.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ssrcnn/error.hpp"

namespace ssrcnn {

namespace {

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

// x^g with the common integer exponents done by multiplication.
double power(double x, double g) {
  if (g == 2.0) return x * x;
  if (g == 1.0) return x;
  if (g == 0.0) return 1.0;
  return std::pow(x, g);
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_target(std::optional<int> target, std::size_t n) {
  if (target && (*target < 0 || static_cast<std::size_t>(*target) >= n)) {
    std::ostringstream os;
    os << "class index " << *target << " outside [0, " << n << ")";
    throw InvalidArgument(os.str());
  }
}

}  // namespace

void LossCoefficients::validate() const {
  for (double v : {lambda_cls_rel, lambda_cls_obj, lambda_l1, lambda_giou, eta_cls, eta_l1, eta_giou}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("loss coefficients must be finite and nonnegative");
  }
}

void FocalParams::validate(std::size_t num_classes) const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("focal alpha must lie in [0, 1]");
  if (!(gamma >= 0.0)) throw ConfigError("focal gamma must be nonnegative");
  if (!class_gamma.empty()) {
    if (class_gamma.size() != num_classes) throw ConfigError("per-class gamma size mismatch");
    for (double g : class_gamma)
      if (!(g >= 0.0)) throw ConfigError("per-class gamma must be nonnegative");
  }
}

// Positive class:  L = -a (1-p)^g log p,      dL/dz = a (1-p)^g (g p log p - (1-p))
// Negative class:  L = -(1-a) p^g log(1-p),   dL/dz = (1-a) p^g (p - g (1-p) log(1-p))
FocalResult focal_loss(std::span<const double> logits, std::optional<int> target,
                       const FocalParams& p) {
  check_target(target, logits.size());
  require_finite(logits, "focal_loss logits");
  FocalResult r;
  r.grad.resize(logits.size());
  for (std::size_t c = 0; c < logits.size(); ++c) {
    const double z = logits[c];
    const double g = p.gamma_for(c);
    const double prob = sigmoid(z);
    const double log_p = -softplus(-z);
    const double log_q = -softplus(z);
    const double q = 1.0 - prob;
    if (target && static_cast<std::size_t>(*target) == c) {
      const double mod = power(q, g);
      r.loss += -p.alpha * mod * log_p;
      r.grad[c] = p.alpha * mod * (g * prob * log_p - q);
    } else {
      const double mod = power(prob, g);
      r.loss += -(1.0 - p.alpha) * mod * log_q;
      r.grad[c] = (1.0 - p.alpha) * mod * (prob - g * q * log_q);
    }
  }
  return r;
}

double focal_value(std::span<const double> logits, std::optional<int> target,
                   const FocalParams& p) {
  check_target(target, logits.size());
  double loss = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    const double z = logits[c];
    const double g = p.gamma_for(c);
    if (target && static_cast<std::size_t>(*target) == c) {
      loss += -p.alpha * power(1.0 - sigmoid(z), g) * -softplus(-z);
    } else {
      loss += -(1.0 - p.alpha) * power(sigmoid(z), g) * -softplus(z);
    }
  }
  if (!std::isfinite(loss)) throw NonFinite("focal loss is not finite");
  return loss;
}

BoxLossResult box_losses(const Box& pred, const Box& gt) {
  BoxLossResult r;
  const auto a = pred.as_array();
  const auto b = gt.as_array();
  for (std::size_t i = 0; i < 4; ++i) {
    const double d = a[i] - b[i];
    r.l1 += std::abs(d);
    r.l1_grad[i] = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
  }

  const CornerBox p = pred.corners();
  const CornerBox q = gt.corners();
  const double iw = std::min(p.x2, q.x2) - std::max(p.x1, q.x1);
  const double ih = std::min(p.y2, q.y2) - std::max(p.y1, q.y1);
  const bool overlap = iw > 0.0 && ih > 0.0;
  const double inter = overlap ? iw * ih : 0.0;
  const double area = pred.area();
  const double uni = area + gt.area() - inter;
  const double ew = std::max(p.x2, q.x2) - std::min(p.x1, q.x1);
  const double eh = std::max(p.y2, q.y2) - std::min(p.y1, q.y1);
  const double encl = ew * eh;
  r.giou_loss = 2.0 - inter / uni - uni / encl;  // 1 - (I/U - (E - U)/E)

  // Partial derivatives with respect to the corners (x1, y1, x2, y2).
  // Ties between predicted and GT edges take the GT side (zero derivative).
  std::array<double, 4> d_inter{}, d_area{}, d_encl{};
  if (overlap) {
    d_inter[0] = p.x1 > q.x1 ? -ih : 0.0;
    d_inter[2] = p.x2 < q.x2 ? ih : 0.0;
    d_inter[1] = p.y1 > q.y1 ? -iw : 0.0;
    d_inter[3] = p.y2 < q.y2 ? iw : 0.0;
  }
  const double pw = p.x2 - p.x1, ph = p.y2 - p.y1;
  d_area = {-ph, -pw, ph, pw};
  d_encl[0] = p.x1 < q.x1 ? -eh : 0.0;
  d_encl[2] = p.x2 > q.x2 ? eh : 0.0;
  d_encl[1] = p.y1 < q.y1 ? -ew : 0.0;
  d_encl[3] = p.y2 > q.y2 ? ew : 0.0;

  std::array<double, 4> d_corner{};
  for (std::size_t i = 0; i < 4; ++i) {
    const double d_uni = d_area[i] - d_inter[i];
    const double d_iou = (d_inter[i] * uni - inter * d_uni) / (uni * uni);
    const double d_ratio = (d_uni * encl - uni * d_encl[i]) / (encl * encl);
    d_corner[i] = -d_iou - d_ratio;
  }
  // x1 = cx - w/2, x2 = cx + w/2 (same for y).
  r.giou_grad[0] = d_corner[0] + d_corner[2];
  r.giou_grad[1] = d_corner[1] + d_corner[3];
  r.giou_grad[2] = 0.5 * (d_corner[2] - d_corner[0]);
  r.giou_grad[3] = 0.5 * (d_corner[3] - d_corner[1]);
  return r;
}

}  // namespace ssrcnn
