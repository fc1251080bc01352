#include "ssrcnn/metrics.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <set>

#include "parallel.hpp"

namespace ssrcnn {

namespace {

using Hits = std::vector<bool>;

bool labels_equal(const RankedTriplet& p, const GroundTruthTriplet& g) {
  return p.predicate == g.predicate && p.sub.label == g.sub.label && p.obj.label == g.obj.label;
}

// Matching quality compared against the IoU threshold.
double match_quality(const RankedTriplet& p, const GroundTruthTriplet& g, MatchMode mode) {
  if (mode == MatchMode::rel) return std::min(iou(p.sub.box, g.sub.box), iou(p.obj.box, g.obj.box));
  return iou(union_box(p.sub.box, p.obj.box), union_box(g.sub.box, g.obj.box));
}

bool augment(std::size_t pred, const std::vector<std::vector<std::size_t>>& adj,
             std::vector<std::ptrdiff_t>& pred_of_gt, std::vector<char>& visited) {
  for (std::size_t g : adj[pred]) {
    if (visited[g]) continue;
    visited[g] = 1;
    if (pred_of_gt[g] < 0 ||
        augment(static_cast<std::size_t>(pred_of_gt[g]), adj, pred_of_gt, visited)) {
      pred_of_gt[g] = static_cast<std::ptrdiff_t>(pred);
      return true;
    }
  }
  return false;
}

LabelTriple label_triple(const GroundTruthTriplet& g) {
  return {g.sub.label, g.predicate, g.obj.label};
}

double macro_or_micro(const std::vector<ImageEval>& images, const std::vector<Hits>& hits,
                      RecallAveraging averaging) {
  double sum = 0.0;
  std::size_t matched = 0, total = 0, counted = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::size_t n = images[i].gts.size();
    if (n == 0) continue;
    const auto h = static_cast<std::size_t>(std::count(hits[i].begin(), hits[i].end(), true));
    sum += double(h) / double(n);
    matched += h;
    total += n;
    ++counted;
  }
  if (averaging == RecallAveraging::macro) return counted ? sum / double(counted) : 0.0;
  return total ? double(matched) / double(total) : 0.0;
}

std::vector<CategoryRecall> category_recall(const std::vector<ImageEval>& images,
                                            const std::vector<Hits>& hits) {
  std::map<int, CategoryRecall> acc;
  for (std::size_t i = 0; i < images.size(); ++i) {
    for (std::size_t g = 0; g < images[i].gts.size(); ++g) {
      auto& c = acc[images[i].gts[g].predicate];
      c.predicate = images[i].gts[g].predicate;
      ++c.gt_count;
      if (hits[i][g]) ++c.hit_count;
    }
  }
  std::vector<CategoryRecall> out;
  for (const auto& [_, c] : acc) out.push_back(c);
  return out;
}

double mean_of(const std::vector<CategoryRecall>& cats) {
  if (cats.empty()) return 0.0;
  double s = 0.0;
  for (const auto& c : cats) s += c.recall();
  return s / double(cats.size());
}

std::optional<double> zero_shot(const std::vector<ImageEval>& images,
                                const std::vector<Hits>& hits, const SeenSet& seen) {
  std::size_t matched = 0, total = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    for (std::size_t g = 0; g < images[i].gts.size(); ++g) {
      if (seen.count(label_triple(images[i].gts[g]))) continue;
      ++total;
      if (hits[i][g]) ++matched;
    }
  }
  if (total == 0) return std::nullopt;
  return double(matched) / double(total);
}

std::vector<Hits> all_hits(const std::vector<ImageEval>& images, std::size_t k,
                           bool graph_constraint) {
  std::vector<Hits> hits(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) hits[i] = recall_hits(images[i], k, graph_constraint);
  return hits;
}

MetricsReport evaluate_impl(const std::vector<ImageEval>& images, const EvalOptions& opt,
                            const SeenSet* seen, bool parallel) {
  std::vector<std::size_t> ks = opt.ks;
  if (std::find(ks.begin(), ks.end(), std::size_t{50}) == ks.end()) ks.push_back(50);
  // hits[k index][image]
  std::vector<std::vector<Hits>> hits(ks.size(), std::vector<Hits>(images.size()));
  auto per_image = [&](std::size_t i) {
    for (std::size_t q = 0; q < ks.size(); ++q)
      hits[q][i] = recall_hits(images[i], ks[q], opt.graph_constraint);
  };
  if (parallel) {
    detail::parallel_for(images.size(), per_image);
  } else {
    for (std::size_t i = 0; i < images.size(); ++i) per_image(i);
  }

  MetricsReport r;
  for (std::size_t q = 0; q < ks.size(); ++q) {
    const std::size_t k = ks[q];
    if (k == 50) r.recall50_micro = macro_or_micro(images, hits[q], RecallAveraging::micro);
    if (std::find(opt.ks.begin(), opt.ks.end(), k) == opt.ks.end()) continue;
    r.recall[k] = macro_or_micro(images, hits[q], opt.averaging);
    r.per_category[k] = category_recall(images, hits[q]);
    r.mean_recall[k] = mean_of(r.per_category[k]);
    if (seen) r.zero_shot_recall[k] = zero_shot(images, hits[q], *seen);
  }
  r.wmap_rel = wmap(images, MatchMode::rel);
  r.wmap_phr = wmap(images, MatchMode::phr);
  r.score_wtd = weighted_score(r.recall50_micro, r.wmap_rel.value, r.wmap_phr.value);
  return r;
}

}  // namespace

double triplet_score(double s_sub, double s_obj, double s_rel) { return s_sub * s_obj * s_rel; }

bool triplet_match(const RankedTriplet& pred, const GroundTruthTriplet& gt, MatchMode mode) {
  return labels_equal(pred, gt) && match_quality(pred, gt, mode) >= kMatchIou;
}

std::vector<std::size_t> rank_predictions(const std::vector<RankedTriplet>& preds,
                                          bool graph_constraint) {
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return preds[a].score > preds[b].score; });
  if (!graph_constraint) return order;
  std::set<std::array<double, 8>> seen_pairs;
  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    const auto s = preds[i].sub.box.as_array();
    const auto o = preds[i].obj.box.as_array();
    if (seen_pairs.insert({s[0], s[1], s[2], s[3], o[0], o[1], o[2], o[3]}).second) kept.push_back(i);
  }
  return kept;
}

std::vector<bool> recall_hits(const ImageEval& image, std::size_t k, bool graph_constraint) {
  std::vector<std::size_t> ranked = rank_predictions(image.preds, graph_constraint);
  if (ranked.size() > k) ranked.resize(k);
  std::vector<std::vector<std::size_t>> adj(ranked.size());
  for (std::size_t r = 0; r < ranked.size(); ++r)
    for (std::size_t g = 0; g < image.gts.size(); ++g)
      if (triplet_match(image.preds[ranked[r]], image.gts[g], MatchMode::rel)) adj[r].push_back(g);

  std::vector<std::ptrdiff_t> pred_of_gt(image.gts.size(), -1);
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    if (adj[r].empty()) continue;
    std::vector<char> visited(image.gts.size(), 0);
    augment(r, adj, pred_of_gt, visited);
  }
  std::vector<bool> hits(image.gts.size());
  for (std::size_t g = 0; g < hits.size(); ++g) hits[g] = pred_of_gt[g] >= 0;
  return hits;
}

double recall_at_k(const std::vector<ImageEval>& images, std::size_t k, bool graph_constraint,
                   RecallAveraging averaging) {
  return macro_or_micro(images, all_hits(images, k, graph_constraint), averaging);
}

std::vector<CategoryRecall> per_category_recall(const std::vector<ImageEval>& images,
                                                std::size_t k, bool graph_constraint) {
  return category_recall(images, all_hits(images, k, graph_constraint));
}

double mean_recall_at_k(const std::vector<ImageEval>& images, std::size_t k,
                        bool graph_constraint) {
  return mean_of(per_category_recall(images, k, graph_constraint));
}

std::optional<double> zero_shot_recall_at_k(const std::vector<ImageEval>& images, std::size_t k,
                                            const SeenSet& seen, bool graph_constraint) {
  return zero_shot(images, all_hits(images, k, graph_constraint), seen);
}

double average_precision(const std::vector<bool>& tp, std::size_t num_gt) {
  if (num_gt == 0 || tp.empty()) return 0.0;
  std::vector<double> precision(tp.size());
  std::size_t cum = 0;
  for (std::size_t i = 0; i < tp.size(); ++i) {
    if (tp[i]) ++cum;
    precision[i] = double(cum) / double(i + 1);
  }
  for (std::size_t i = tp.size() - 1; i > 0; --i)
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0.0;
  for (std::size_t i = 0; i < tp.size(); ++i)
    if (tp[i]) ap += precision[i] / double(num_gt);
  return ap;
}

WmapResult wmap(const std::vector<ImageEval>& images, MatchMode mode) {
  std::map<int, std::size_t> gt_count;
  std::size_t total = 0;
  for (const auto& im : images)
    for (const auto& g : im.gts) {
      ++gt_count[g.predicate];
      ++total;
    }
  WmapResult res;
  if (total == 0) return res;

  struct Entry {
    double score;
    std::size_t image, pred;
  };
  std::map<int, std::vector<Entry>> by_cat;
  for (std::size_t i = 0; i < images.size(); ++i)
    for (std::size_t p = 0; p < images[i].preds.size(); ++p) {
      const int c = images[i].preds[p].predicate;
      if (gt_count.count(c)) by_cat[c].push_back({images[i].preds[p].score, i, p});
    }

  for (const auto& [cat, n] : gt_count) {
    auto& entries = by_cat[cat];
    std::stable_sort(entries.begin(), entries.end(),
                     [](const Entry& a, const Entry& b) { return a.score > b.score; });
    std::vector<std::vector<char>> used(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) used[i].assign(images[i].gts.size(), 0);
    std::vector<bool> tp;
    tp.reserve(entries.size());
    for (const Entry& e : entries) {
      const RankedTriplet& p = images[e.image].preds[e.pred];
      double best = -1.0;
      std::ptrdiff_t best_g = -1;
      const auto& gts = images[e.image].gts;
      for (std::size_t g = 0; g < gts.size(); ++g) {
        if (!labels_equal(p, gts[g])) continue;
        const double q = match_quality(p, gts[g], mode);
        if (q > best) {
          best = q;
          best_g = static_cast<std::ptrdiff_t>(g);
        }
      }
      const bool hit = best_g >= 0 && best >= kMatchIou && !used[e.image][best_g];
      if (hit) used[e.image][best_g] = 1;
      tp.push_back(hit);
    }
    const double ap = average_precision(tp, n);
    const double w = double(n) / double(total);
    res.ap[cat] = ap;
    res.weight[cat] = w;
    res.value += w * ap;
  }
  return res;
}

double weighted_score(double recall50, double wmap_rel, double wmap_phr) {
  return 0.2 * recall50 + 0.4 * wmap_rel + 0.4 * wmap_phr;
}

MetricsReport evaluate(const std::vector<ImageEval>& images, const EvalOptions& opt,
                       const SeenSet* seen) {
  return evaluate_impl(images, opt, seen, true);
}

namespace serial {
MetricsReport evaluate(const std::vector<ImageEval>& images, const EvalOptions& opt,
                       const SeenSet* seen) {
  return evaluate_impl(images, opt, seen, false);
}
}  // namespace serial

}  // namespace ssrcnn
