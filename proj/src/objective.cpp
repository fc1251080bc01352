#include "ssrcnn/objective.hpp"

namespace ssrcnn {

namespace {

void accumulate(Vector& dst, const Vector& src, double w) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += w * src[i];
}

void accumulate(std::array<double, 4>& dst, const std::array<double, 4>& src, double w) {
  for (std::size_t i = 0; i < 4; ++i) dst[i] += w * src[i];
}

double class_term(const Vector& logits, std::optional<int> target, const FocalParams& p,
                  double weight, Vector* grad) {
  if (weight == 0.0) return 0.0;
  if (!grad) return weight * focal_value(logits, target, p);
  const FocalResult r = focal_loss(logits, target, p);
  accumulate(*grad, r.grad, weight);
  return weight * r.loss;
}

double box_term(const Box& pred, const Box& target, double w_l1, double w_giou,
                std::array<double, 4>* grad) {
  const BoxLossResult b = box_losses(pred, target);
  if (grad) {
    accumulate(*grad, b.l1_grad, w_l1);
    accumulate(*grad, b.giou_grad, w_giou);
  }
  return w_l1 * b.l1 + w_giou * b.giou_loss;
}

void init_grads(LossValue& v, const std::vector<TripletPrediction>& preds, bool with_grad) {
  v.parts.assign(preds.size(), TripletLossParts{});
  if (!with_grad) return;
  v.grads.clear();
  v.grads.reserve(preds.size());
  for (const auto& p : preds) v.grads.push_back(TripletGrad::zeros_like(p));
}

void sum_parts(LossValue& v) {
  v.value = 0.0;
  for (const auto& p : v.parts) v.value += p.sub_logits + p.obj_logits + p.rel_logits + p.sub_box + p.obj_box;
}

}  // namespace

TripletGrad TripletGrad::zeros_like(const TripletPrediction& p) {
  TripletGrad g;
  g.sub_logits.assign(p.sub.logits.size(), 0.0);
  g.obj_logits.assign(p.obj.logits.size(), 0.0);
  g.rel_logits.assign(p.rel_logits.size(), 0.0);
  return g;
}

LossValue loss_LF(const std::vector<TripletPrediction>& preds,
                  const std::vector<GroundTruthTriplet>& gts, const AssignmentResult& a,
                  const CostOptions& opt, bool with_grad) {
  LossValue v;
  init_grads(v, preds, with_grad);
  const LossCoefficients& k = opt.coeffs;
  for (const auto& [pi, gi] : a.stage1) {
    const TripletPrediction& p = preds.at(pi);
    const GroundTruthTriplet& g = gts.at(gi);
    TripletGrad* grad = with_grad ? &v.grads[pi] : nullptr;
    v.parts[pi].rel_logits += class_term(p.rel_logits, g.predicate, opt.relation_focal, k.lambda_cls_rel,
                          grad ? &grad->rel_logits : nullptr);
    v.parts[pi].sub_logits += class_term(p.sub.logits, g.sub.label, opt.object_focal, k.lambda_cls_obj,
                          grad ? &grad->sub_logits : nullptr);
    v.parts[pi].obj_logits += class_term(p.obj.logits, g.obj.label, opt.object_focal, k.lambda_cls_obj,
                          grad ? &grad->obj_logits : nullptr);
    v.parts[pi].sub_box += box_term(p.sub.box, g.sub.box, k.lambda_l1, k.lambda_giou, grad ? &grad->sub_box : nullptr);
    v.parts[pi].obj_box += box_term(p.obj.box, g.obj.box, k.lambda_l1, k.lambda_giou, grad ? &grad->obj_box : nullptr);
  }
  sum_parts(v);
  return v;
}

LossValue loss_LB(const std::vector<TripletPrediction>& preds, const AssignmentResult& a,
                  const CostOptions& opt, bool with_grad) {
  LossValue v;
  init_grads(v, preds, with_grad);
  const LossCoefficients& k = opt.coeffs;
  for (const auto& [pi, ui] : a.stage2) {
    const TripletPrediction& p = preds.at(pi);
    const PseudoPair& u = a.pseudo.at(ui);
    TripletGrad* grad = with_grad ? &v.grads[pi] : nullptr;
    v.parts[pi].rel_logits += class_term(p.rel_logits, std::nullopt, opt.relation_focal, k.lambda_cls_rel,
                          grad ? &grad->rel_logits : nullptr);
    v.parts[pi].sub_logits += class_term(p.sub.logits, u.sub.label, opt.object_focal, k.eta_cls,
                          grad ? &grad->sub_logits : nullptr);
    v.parts[pi].obj_logits += class_term(p.obj.logits, u.obj.label, opt.object_focal, k.eta_cls,
                          grad ? &grad->obj_logits : nullptr);
    if (u.sub.hit)
      v.parts[pi].sub_box += box_term(p.sub.box, u.sub.box, k.eta_l1, k.eta_giou, grad ? &grad->sub_box : nullptr);
    if (u.obj.hit)
      v.parts[pi].obj_box += box_term(p.obj.box, u.obj.box, k.eta_l1, k.eta_giou, grad ? &grad->obj_box : nullptr);
  }
  for (std::size_t pi : a.background) {
    const TripletPrediction& p = preds.at(pi);
    TripletGrad* grad = with_grad ? &v.grads[pi] : nullptr;
    v.parts[pi].rel_logits += class_term(p.rel_logits, std::nullopt, opt.relation_focal, k.lambda_cls_rel,
                          grad ? &grad->rel_logits : nullptr);
    if (a.mode == AssignMode::full_bg) {
      v.parts[pi].sub_logits += class_term(p.sub.logits, std::nullopt, opt.object_focal, k.eta_cls,
                            grad ? &grad->sub_logits : nullptr);
      v.parts[pi].obj_logits += class_term(p.obj.logits, std::nullopt, opt.object_focal, k.eta_cls,
                            grad ? &grad->obj_logits : nullptr);
    }
  }
  sum_parts(v);
  return v;
}

LossValue total_loss(const std::vector<TripletPrediction>& preds, const SceneGraph& scene,
                     const AssignmentResult& a, const CostOptions& opt, bool with_grad) {
  LossValue f = loss_LF(preds, scene.triplets(), a, opt, with_grad);
  const LossValue b = loss_LB(preds, a, opt, with_grad);
  for (std::size_t i = 0; i < f.parts.size(); ++i) {
    f.parts[i].sub_logits += b.parts[i].sub_logits;
    f.parts[i].obj_logits += b.parts[i].obj_logits;
    f.parts[i].rel_logits += b.parts[i].rel_logits;
    f.parts[i].sub_box += b.parts[i].sub_box;
    f.parts[i].obj_box += b.parts[i].obj_box;
  }
  sum_parts(f);
  if (with_grad) {
    for (std::size_t i = 0; i < f.grads.size(); ++i) {
      accumulate(f.grads[i].sub_logits, b.grads[i].sub_logits, 1.0);
      accumulate(f.grads[i].obj_logits, b.grads[i].obj_logits, 1.0);
      accumulate(f.grads[i].rel_logits, b.grads[i].rel_logits, 1.0);
      accumulate(f.grads[i].sub_box, b.grads[i].sub_box, 1.0);
      accumulate(f.grads[i].obj_box, b.grads[i].obj_box, 1.0);
    }
  }
  return f;
}

}  // namespace ssrcnn
