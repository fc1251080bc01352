#include "ssrcnn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "ssrcnn/error.hpp"

namespace ssrcnn {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Box random_box(Rng& rng, double min_side, double max_side) {
  std::uniform_real_distribution<double> side(min_side, max_side);
  const double w = side(rng), h = side(rng);
  std::uniform_real_distribution<double> ux(w / 2, 1.0 - w / 2), uy(h / 2, 1.0 - h / 2);
  return Box(ux(rng), uy(rng), w, h);
}

Box jitter_box(Rng& rng, const Box& b, double sigma) {
  if (sigma == 0.0) return b;
  std::normal_distribution<double> n(0.0, sigma);
  return Box(b.cx() + n(rng) * b.w(), b.cy() + n(rng) * b.h(), b.w() * std::exp(n(rng)),
             b.h() * std::exp(n(rng)));
}

int other_label(Rng& rng, int label, int n) {
  if (n < 2) return label;
  std::uniform_int_distribution<int> d(0, n - 2);
  const int l = d(rng);
  return l >= label ? l + 1 : l;
}

}  // namespace

void SceneConfig::validate() const {
  if (min_objects < 1 || max_objects < min_objects) throw ConfigError("object count range invalid");
  if (num_object_classes < 1 || num_predicates < 1) throw ConfigError("vocabulary sizes must be >= 1");
  if (!(relation_density > 0.0 && relation_density <= 1.0))
    throw ConfigError("relation density must lie in (0, 1]");
  if (!(min_box_side > 0.0 && max_box_side >= min_box_side && max_box_side < 1.0))
    throw ConfigError("box side range invalid");
  if (predicate_skew < 0.0 || object_skew < 0.0) throw ConfigError("skew exponents must be nonnegative");
  if (!(image_width > 0.0 && image_height > 0.0)) throw ConfigError("image size must be positive");
  if (feature_channels == 0 || feature_size == 0) throw ConfigError("feature map size must be positive");
}

void PerturbModel::validate() const {
  for (double p : {label_flip, drop}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("perturbation probabilities must lie in [0, 1]");
  }
  if (!(spurious_rate >= 0.0 && spurious_rate <= 1.0)) throw ConfigError("spurious rate must lie in [0, 1]");
  if (box_jitter < 0.0 || score_noise < 0.0) throw ConfigError("noise scales must be nonnegative");
}

int sample_skewed_label(Rng& rng, int n, double skew) {
  std::vector<double> weights(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) weights[static_cast<std::size_t>(k)] = std::pow(double(k + 1), -skew);
  std::discrete_distribution<int> d(weights.begin(), weights.end());
  return d(rng);
}

FeatureMap synthetic_feature_map(std::size_t channels, std::size_t height, std::size_t width,
                                 Rng& rng) {
  constexpr int kComponents = 4;
  std::uniform_real_distribution<double> freq(0.5, 3.0), phase(0.0, 2.0 * std::numbers::pi),
      amp(0.5, 1.5);
  std::vector<double> values(channels * height * width, 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    for (int k = 0; k < kComponents; ++k) {
      const double fx = freq(rng), fy = freq(rng), ph = phase(rng), a = amp(rng);
      for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x) {
          const double u = (double(x) + 0.5) / double(width);
          const double v = (double(y) + 0.5) / double(height);
          values[(c * height + y) * width + x] +=
              a * std::cos(2.0 * std::numbers::pi * (fx * u + fy * v) + ph);
        }
    }
  }
  return FeatureMap(channels, height, width, std::move(values));
}

SyntheticScene generate_scene(const SceneConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  std::uniform_int_distribution<int> count(cfg.min_objects, cfg.max_objects);
  const int n = count(rng);
  SyntheticScene s;
  s.width = cfg.image_width;
  s.height = cfg.image_height;
  s.seed = cfg.seed;
  for (int i = 0; i < n; ++i) {
    const Box b = random_box(rng, cfg.min_box_side, cfg.max_box_side);
    s.graph.objects.push_back({b, sample_skewed_label(rng, cfg.num_object_classes, cfg.object_skew)});
  }
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < s.graph.objects.size(); ++i)
    for (std::size_t j = 0; j < s.graph.objects.size(); ++j)
      if (i != j) pairs.emplace_back(i, j);
  std::size_t want;
  if (cfg.relations_per_image >= 0) {
    want = static_cast<std::size_t>(cfg.relations_per_image);
    if (want > pairs.size())
      throw ConfigError("more relations requested than ordered object pairs");
  } else {
    want = static_cast<std::size_t>(std::lround(cfg.relation_density * double(pairs.size())));
    if (!pairs.empty()) want = std::max<std::size_t>(want, 1);
  }
  std::shuffle(pairs.begin(), pairs.end(), rng);
  pairs.resize(want);
  std::sort(pairs.begin(), pairs.end());
  for (const auto& [a, b] : pairs)
    s.graph.relations.push_back({a, b, sample_skewed_label(rng, cfg.num_predicates, cfg.predicate_skew)});
  s.features = synthetic_feature_map(cfg.feature_channels, cfg.feature_size, cfg.feature_size, rng);
  return s;
}

std::vector<SyntheticScene> generate_dataset(const SceneConfig& cfg, std::size_t images) {
  std::vector<SyntheticScene> out;
  out.reserve(images);
  for (std::size_t i = 0; i < images; ++i) {
    SceneConfig c = cfg;
    c.seed = cfg.seed + i;
    out.push_back(generate_scene(c));
  }
  return out;
}

std::vector<AuxDetection> perturb_detections(const SceneGraph& scene, const PerturbModel& m,
                                             int num_object_classes, std::uint64_t seed) {
  m.validate();
  Rng rng(seed);
  std::bernoulli_distribution drop(m.drop), flip(m.label_flip), spurious(m.spurious_rate);
  std::normal_distribution<double> score_noise(0.0, m.score_noise);
  std::vector<AuxDetection> out;
  for (const LabeledBox& g : scene.objects) {
    if (drop(rng)) continue;
    AuxDetection d{jitter_box(rng, g.box, m.box_jitter), g.label, 1.0, std::nullopt};
    if (flip(rng)) d.label = other_label(rng, g.label, num_object_classes);
    if (m.score_noise > 0.0) d.score = std::clamp(0.9 + score_noise(rng), 0.05, 1.0);
    out.push_back(d);
  }
  std::uniform_int_distribution<int> label(0, num_object_classes - 1);
  std::uniform_real_distribution<double> low_score(0.05, 0.5);
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    if (!spurious(rng)) continue;
    out.push_back({random_box(rng, 0.05, 0.4), label(rng), low_score(rng), std::nullopt});
  }
  return out;
}

void rescore_from_logits(RankedTriplet& t, std::span<const double> logits) {
  const auto best = std::max_element(logits.begin(), logits.end());
  t.predicate = static_cast<int>(best - logits.begin());
  t.predicate_score = sigmoid(*best);
  t.score = triplet_score(t.sub.score, t.obj.score, t.predicate_score);
}

std::vector<RankedTriplet> simulate_predictions(const SceneGraph& scene, const PredictionModel& m,
                                                const FrequencyTable& predicate_freq,
                                                int num_object_classes, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, m.noise);
  std::uniform_real_distribution<double> obj_score(0.6, 1.0);
  const std::size_t np = predicate_freq.size();
  auto logits_for = [&](std::optional<int> target) {
    Vector z(np);
    for (std::size_t c = 0; c < np; ++c)
      z[c] = noise(rng) + m.frequency_bias * std::log(predicate_freq[c]);
    if (target) z[static_cast<std::size_t>(*target)] += m.signal;
    return z;
  };
  std::vector<RankedTriplet> out;
  for (const auto& g : scene.triplets()) {
    RankedTriplet t;
    t.sub = {jitter_box(rng, g.sub.box, m.boxes.box_jitter), g.sub.label, obj_score(rng)};
    t.obj = {jitter_box(rng, g.obj.box, m.boxes.box_jitter), g.obj.label, obj_score(rng)};
    t.predicate_logits = logits_for(g.predicate);
    rescore_from_logits(t, t.predicate_logits);
    out.push_back(std::move(t));
  }
  std::uniform_int_distribution<int> obj_label(0, num_object_classes - 1);
  std::uniform_real_distribution<double> weak(0.1, 0.7);
  const std::size_t n = scene.objects.size();
  for (int d = 0; d < m.distractors_per_image && n > 0; ++d) {
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    const std::size_t a = pick(rng), b = pick(rng);
    RankedTriplet t;
    const LabeledBox& sa = scene.objects[a];
    const LabeledBox& sb = scene.objects[b];
    t.sub = {jitter_box(rng, sa.box, 2 * m.boxes.box_jitter), std::bernoulli_distribution(0.7)(rng) ? sa.label : obj_label(rng), weak(rng)};
    t.obj = {jitter_box(rng, sb.box, 2 * m.boxes.box_jitter), std::bernoulli_distribution(0.7)(rng) ? sb.label : obj_label(rng), weak(rng)};
    t.predicate_logits = logits_for(std::nullopt);
    rescore_from_logits(t, t.predicate_logits);
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace ssrcnn
