#include "ssrcnn/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "ssrcnn/error.hpp"
#include "parallel.hpp"

namespace ssrcnn {

namespace {

// Shortest augmenting path with row/column potentials, rows <= cols.
// Returns col_of_row.
std::vector<std::size_t> solve_wide(const CostMatrix& c) {
  const std::size_t n = c.rows();
  const std::size_t m = c.cols();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based; column 0 is the virtual start column.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> row_of_col(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    row_of_col[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = row_of_col[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = c(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[row_of_col[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (row_of_col[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      row_of_col[j0] = row_of_col[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> col_of_row(n, 0);
  for (std::size_t j = 1; j <= m; ++j)
    if (row_of_col[j] != 0) col_of_row[row_of_col[j] - 1] = j - 1;
  return col_of_row;
}

double class_cost(std::span<const double> logits, std::optional<int> target,
                  const FocalParams& focal, ClassCostMode mode) {
  if (mode == ClassCostMode::full || !target) return focal_value(logits, target, focal);
  const std::size_t t = static_cast<std::size_t>(*target);
  if (t >= logits.size()) throw InvalidArgument("class index out of range");
  return focal_value(logits.subspan(t, 1), 0,
                     FocalParams{focal.alpha, focal.gamma_for(t), {}});
}

}  // namespace

Matching hungarian(const CostMatrix& cost) {
  if (cost.rows() == 0 || cost.cols() == 0) throw InvalidArgument("hungarian: empty cost matrix");
  require_finite(cost.values(), "hungarian cost matrix");
  Matching out;
  if (cost.rows() <= cost.cols()) {
    const auto col_of_row = solve_wide(cost);
    for (std::size_t r = 0; r < col_of_row.size(); ++r) out.pairs.emplace_back(r, col_of_row[r]);
  } else {
    const auto row_of_col = solve_wide(cost.transposed());
    for (std::size_t c = 0; c < row_of_col.size(); ++c) out.pairs.emplace_back(row_of_col[c], c);
    std::sort(out.pairs.begin(), out.pairs.end());
  }
  for (const auto& [r, c] : out.pairs) out.total_cost += cost(r, c);
  return out;
}

double stage1_cost(const TripletPrediction& pred, const GroundTruthTriplet& gt,
                   const CostOptions& opt) {
  const LossCoefficients& k = opt.coeffs;
  double cost = k.lambda_cls_rel *
                class_cost(pred.rel_logits, gt.predicate, opt.relation_focal, opt.class_mode);
  const std::pair<const ObjectPrediction*, const LabeledBox*> members[] = {{&pred.sub, &gt.sub},
                                                                           {&pred.obj, &gt.obj}};
  for (const auto& [p, g] : members) {
    const BoxLossResult b = box_losses(p->box, g->box);
    cost += k.lambda_cls_obj * class_cost(p->logits, g->label, opt.object_focal, opt.class_mode) +
            k.lambda_l1 * b.l1 + k.lambda_giou * b.giou_loss;
  }
  return cost;
}

namespace {

// `cls(m, logits, label)` returns the class cost of member m (0 sub, 1 obj).
template <typename ClassCost>
double stage2_cost_with(const TripletPrediction& pred, const PseudoPair& pseudo, const CostOptions& opt,
                        ClassCost&& cls) {
  const LossCoefficients& k = opt.coeffs;
  double cost = 0.0;
  const std::pair<const ObjectPrediction*, const PseudoObject*> members[] = {
      {&pred.sub, &pseudo.sub}, {&pred.obj, &pseudo.obj}};
  for (int m = 0; m < 2; ++m) {
    const auto& [p, u] = members[m];
    const BoxLossResult b = box_losses(p->box, u->box);
    cost += k.eta_l1 * b.l1 + k.eta_giou * b.giou_loss;
    if (u->hit) cost += k.eta_cls * cls(m, p->logits, u->label);
  }
  return cost;
}

}  // namespace

double stage2_cost(const TripletPrediction& pred, const PseudoPair& pseudo,
                   const CostOptions& opt) {
  return stage2_cost_with(pred, pseudo, opt, [&](int, const Vector& logits, std::optional<int> label) {
    return class_cost(logits, label, opt.object_focal, opt.class_mode);
  });
}

CostMatrix stage1_cost_matrix(const std::vector<TripletPrediction>& preds,
                              const std::vector<GroundTruthTriplet>& gts,
                              const CostOptions& opt) {
  CostMatrix c(preds.size(), gts.size());
  detail::parallel_for(preds.size(), [&](std::size_t i) {
    for (std::size_t j = 0; j < gts.size(); ++j) c(i, j) = stage1_cost(preds[i], gts[j], opt);
  });
  return c;
}

CostMatrix stage2_cost_matrix(const std::vector<TripletPrediction>& preds,
                              const std::vector<std::size_t>& pred_rows,
                              const std::vector<PseudoPair>& pool, const CostOptions& opt) {
  CostMatrix c(pred_rows.size(), pool.size());
  detail::parallel_for(pred_rows.size(), [&](std::size_t i) {
    // Pseudo labels repeat across the pool; each (member, label) class
    // cost is computed once per row.
    std::map<std::pair<int, std::optional<int>>, double> memo;
    auto cls = [&](int m, const Vector& logits, std::optional<int> label) {
      const auto [it, fresh] = memo.try_emplace({m, label}, 0.0);
      if (fresh) it->second = class_cost(logits, label, opt.object_focal, opt.class_mode);
      return it->second;
    };
    for (std::size_t j = 0; j < pool.size(); ++j)
      c(i, j) = stage2_cost_with(preds.at(pred_rows[i]), pool[j], opt, cls);
  });
  return c;
}

namespace serial {

CostMatrix stage1_cost_matrix(const std::vector<TripletPrediction>& preds,
                              const std::vector<GroundTruthTriplet>& gts,
                              const CostOptions& opt) {
  CostMatrix c(preds.size(), gts.size());
  for (std::size_t i = 0; i < preds.size(); ++i)
    for (std::size_t j = 0; j < gts.size(); ++j) c(i, j) = stage1_cost(preds[i], gts[j], opt);
  return c;
}

}  // namespace serial

}  // namespace ssrcnn
