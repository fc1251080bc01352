#include "ssrcnn/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ssrcnn/error.hpp"

namespace ssrcnn {

namespace {

constexpr double kMaxAuxLogit = 8.0;

// Hard label with the detector confidence as the target-class logit.
Vector aux_logits(const AuxDetection& d, int num_classes) {
  Vector z(static_cast<std::size_t>(num_classes), -kMaxAuxLogit);
  const double s = std::clamp(d.score, 1e-6, 1.0 - 1e-6);
  z[static_cast<std::size_t>(d.label)] = std::clamp(std::log(s / (1.0 - s)), -kMaxAuxLogit, kMaxAuxLogit);
  return z;
}

std::vector<std::vector<std::size_t>> row_orders(const Matrix& cost) {
  std::vector<std::vector<std::size_t>> orders(cost.rows());
  for (std::size_t r = 0; r < cost.rows(); ++r) {
    auto& o = orders[r];
    o.resize(cost.cols());
    std::iota(o.begin(), o.end(), 0);
    std::stable_sort(o.begin(), o.end(),
                     [&](std::size_t a, std::size_t b) { return cost(r, a) < cost(r, b); });
  }
  return orders;
}

std::vector<std::size_t> union_of_prefixes(const std::vector<std::vector<std::size_t>>& orders,
                                           std::size_t pool, std::size_t k) {
  std::vector<char> in(pool, 0);
  for (const auto& o : orders)
    for (std::size_t i = 0; i < std::min(k, o.size()); ++i) in[o[i]] = 1;
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < pool; ++j)
    if (in[j]) out.push_back(j);
  return out;
}

}  // namespace

std::vector<AuxDetection> label_aux_detections(std::vector<AuxDetection> aux,
                                               const SceneGraph& scene, int num_object_classes,
                                               const CostOptions& opt) {
  for (auto& d : aux) {
    if (d.label < 0 || d.label >= num_object_classes)
      throw InvalidArgument("auxiliary detection label out of range");
    d.matched_gt.reset();
  }
  if (aux.empty() || scene.objects.empty()) return aux;
  const LossCoefficients& k = opt.coeffs;
  Matrix cost(aux.size(), scene.objects.size());
  for (std::size_t i = 0; i < aux.size(); ++i) {
    const Vector z = aux_logits(aux[i], num_object_classes);
    for (std::size_t j = 0; j < scene.objects.size(); ++j) {
      const LabeledBox& g = scene.objects[j];
      const BoxLossResult b = box_losses(aux[i].box, g.box);
      cost(i, j) = k.lambda_cls_obj * focal_value(z, g.label, opt.object_focal) +
                   k.lambda_l1 * b.l1 + k.lambda_giou * b.giou_loss;
    }
  }
  for (const auto& [i, j] : hungarian(cost).pairs) aux[i].matched_gt = j;
  return aux;
}

std::vector<PseudoPair> build_pseudo_set(const std::vector<AuxDetection>& aux,
                                         const SceneGraph& scene) {
  if (aux.empty()) throw InvalidArgument("build_pseudo_set: no auxiliary detections");
  std::vector<PseudoObject> objects;
  objects.reserve(aux.size());
  for (const AuxDetection& d : aux) {
    if (d.matched_gt) {
      if (*d.matched_gt >= scene.objects.size())
        throw InvalidArgument("auxiliary detection matched to a missing GT object");
      const LabeledBox& g = scene.objects[*d.matched_gt];
      objects.push_back({g.box, g.label, true});
    } else {
      objects.push_back({d.box, std::nullopt, false});
    }
  }
  std::vector<PseudoPair> pairs;
  for (std::size_t i = 0; i < aux.size(); ++i) {
    for (std::size_t j = 0; j < aux.size(); ++j) {
      if (i == j) continue;
      if (aux[i].matched_gt && aux[j].matched_gt &&
          scene.has_relation(*aux[i].matched_gt, *aux[j].matched_gt))
        continue;
      pairs.push_back({objects[i], objects[j], i, j});
    }
  }
  return pairs;
}

std::vector<std::size_t> top_k_union(const Matrix& cost, std::size_t k) {
  return union_of_prefixes(row_orders(cost), cost.cols(), k);
}

CandidateSet reduce_candidates(const Matrix& cost) {
  const std::size_t m = cost.rows();
  const std::size_t pool = cost.cols();
  CandidateSet out;
  if (pool == 0) return out;
  if (pool <= m) {
    out.k_min = pool;
    out.candidates.resize(pool);
    std::iota(out.candidates.begin(), out.candidates.end(), 0);
    out.full_pool = true;
    return out;
  }
  const auto orders = row_orders(cost);
  // Union size is nondecreasing in K and reaches pool > m at K = pool.
  std::size_t lo = 1, hi = pool;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (union_of_prefixes(orders, pool, mid).size() > m) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  out.k_min = lo;
  out.candidates = union_of_prefixes(orders, pool, lo);
  out.full_pool = out.candidates.size() == pool;
  return out;
}

AssignmentResult two_stage_assign(const std::vector<TripletPrediction>& preds,
                                  const SceneGraph& scene, const std::vector<AuxDetection>& aux,
                                  const AssignOptions& opt) {
  const std::vector<GroundTruthTriplet> gts = scene.triplets();
  if (preds.size() < gts.size()) {
    std::ostringstream os;
    os << preds.size() << " triplet predictions cannot cover " << gts.size() << " GT triplets";
    throw ConfigError(os.str());
  }
  AssignmentResult res;
  res.mode = opt.mode;

  std::vector<char> taken(preds.size(), 0);
  if (!gts.empty()) {
    const CostMatrix c1 = stage1_cost_matrix(preds, gts, opt.cost);
    for (const auto& [p, g] : hungarian(c1).pairs) {
      res.stage1.emplace_back(p, g);
      res.stage1_costs.push_back(c1(p, g));
      taken[p] = 1;
    }
  }
  std::vector<std::size_t> remaining;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (!taken[i]) remaining.push_back(i);

  if (opt.mode == AssignMode::pseudo && !aux.empty() && !remaining.empty()) {
    const auto labeled = label_aux_detections(aux, scene, opt.num_object_classes, opt.cost);
    res.pseudo = build_pseudo_set(labeled, scene);
    if (!res.pseudo.empty()) {
      const CostMatrix c2 = stage2_cost_matrix(preds, remaining, res.pseudo, opt.cost);
      const CandidateSet cs = reduce_candidates(c2);
      res.k_min = cs.k_min;
      res.candidate_count = cs.candidates.size();
      Matrix sub(c2.rows(), cs.candidates.size());
      for (std::size_t r = 0; r < c2.rows(); ++r)
        for (std::size_t c = 0; c < cs.candidates.size(); ++c) sub(r, c) = c2(r, cs.candidates[c]);
      for (const auto& [r, c] : hungarian(sub).pairs) {
        res.stage2.emplace_back(remaining[r], cs.candidates[c]);
        res.stage2_costs.push_back(sub(r, c));
        taken[remaining[r]] = 1;
      }
    }
  }
  for (std::size_t i : remaining)
    if (!taken[i]) res.background.push_back(i);
  return res;
}

const char* to_string(AssignMode m) {
  switch (m) {
    case AssignMode::pseudo: return "pseudo";
    case AssignMode::full_bg: return "full_bg";
    case AssignMode::no_bg: return "no_bg";
  }
  return "?";
}

AssignMode assign_mode_from_string(const std::string& s) {
  if (s == "pseudo") return AssignMode::pseudo;
  if (s == "full_bg" || s == "full-bg") return AssignMode::full_bg;
  if (s == "no_bg" || s == "no-bg") return AssignMode::no_bg;
  throw ConfigError("unknown assignment mode '" + s + "'");
}

}  // namespace ssrcnn
