#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "ssrcnn/geometry.hpp"
#include "ssrcnn/metrics.hpp"
#include "ssrcnn/numerics.hpp"
#include "ssrcnn/scene.hpp"

namespace ssrcnn::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline Box random_box(Rng& rng, double min_side = 0.05, double max_side = 0.5) {
  return Box(uniform(rng, 0.1, 0.9), uniform(rng, 0.1, 0.9), uniform(rng, min_side, max_side),
             uniform(rng, min_side, max_side));
}

inline Vector random_vector(Rng& rng, std::size_t n, double scale = 1.0) {
  Vector v(n);
  for (double& x : v) x = uniform(rng, -scale, scale);
  return v;
}

inline Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  Matrix m(r, c);
  for (double& x : m.values()) x = uniform(rng, -scale, scale);
  return m;
}

// ||a - n|| / max(||a||, ||n||), zero when both vanish.
inline double rel_error(std::span<const double> analytic, std::span<const double> numeric) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  const double denom = std::sqrt(std::max(na, nn));
  return denom == 0.0 ? 0.0 : std::sqrt(diff) / denom;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Small evaluation image with few labels, shared boxes, and tied scores so
// that matches, duplicates, and ties are all common.
inline ImageEval random_eval_image(Rng& rng, int max_gt = 5, int max_preds = 10) {
  ImageEval im;
  std::vector<Box> pool;
  const int pool_size = uniform_int(rng, 2, 4);
  for (int i = 0; i < pool_size; ++i) pool.push_back(random_box(rng, 0.1, 0.4));
  auto pick = [&] { return pool[std::size_t(uniform_int(rng, 0, pool_size - 1))]; };
  const int n_gt = uniform_int(rng, 0, max_gt);
  for (int g = 0; g < n_gt; ++g) {
    const LabeledBox sub{pick(), uniform_int(rng, 0, 1)};
    const LabeledBox obj{pick(), uniform_int(rng, 0, 1)};
    im.gts.push_back({sub, obj, uniform_int(rng, 0, 2), 0, 0});
  }
  auto jitter = [&](const Box& b) {
    const double s = uniform(rng, 0.0, 0.25);
    return Box(b.cx() + s * b.w() * uniform(rng, -1, 1), b.cy() + s * b.h() * uniform(rng, -1, 1),
               b.w() * (1 + uniform(rng, -s, s)), b.h() * (1 + uniform(rng, -s, s)));
  };
  const double levels[] = {0.2, 0.5, 0.8};
  const int n_pred = uniform_int(rng, 0, max_preds);
  for (int p = 0; p < n_pred; ++p) {
    RankedTriplet r;
    if (!im.gts.empty() && uniform(rng, 0, 1) < 0.75) {
      const auto& g = im.gts[std::size_t(uniform_int(rng, 0, n_gt - 1))];
      r.sub = {g.sub.box, g.sub.label, 1.0};
      r.obj = {g.obj.box, g.obj.label, 1.0};
      r.predicate = g.predicate;
      if (uniform(rng, 0, 1) < 0.3) r.sub.box = jitter(r.sub.box);
      if (uniform(rng, 0, 1) < 0.3) r.obj.box = jitter(r.obj.box);
      if (uniform(rng, 0, 1) < 0.15) r.predicate = uniform_int(rng, 0, 2);
    } else {
      r.sub = {pick(), uniform_int(rng, 0, 1), 1.0};
      r.obj = {pick(), uniform_int(rng, 0, 1), 1.0};
      r.predicate = uniform_int(rng, 0, 2);
    }
    r.score = uniform(rng, 0, 1) < 0.5 ? levels[uniform_int(rng, 0, 2)] : uniform(rng, 0, 1);
    r.predicate_score = r.score;
    im.preds.push_back(r);
  }
  return im;
}

// Random subset of the label triples in `images`.
inline SeenSet random_seen_set(Rng& rng, const std::vector<ImageEval>& images) {
  SeenSet s;
  for (const auto& im : images)
    for (const auto& t : im.gts)
      if (uniform(rng, 0, 1) < 0.5) s.insert({t.sub.label, t.predicate, t.obj.label});
  return s;
}

}  // namespace ssrcnn::testing
