#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "ssrcnn/numerics.hpp"
#include "ssrcnn/scene.hpp"

namespace ssrcnn {

inline constexpr double kDefaultMu = 4.0;
inline constexpr double kDefaultTau = 0.3;

// Per-class focusing parameter min{2, 3 - (1 - f)^mu * (-ln f)^(1/mu)}.
// With `clamp_nonnegative` the result is additionally floored at 0 (the
// raw formula goes negative for extremely rare classes). Throws
// InvalidArgument unless 0 < f <= 1 and mu > 0.
double adaptive_gamma(double frequency, double mu = kDefaultMu, bool clamp_nonnegative = true);

// Per-category frequencies over one label space. All entries in (0, 1].
class FrequencyTable {
 public:
  FrequencyTable() = default;
  explicit FrequencyTable(std::vector<double> freqs);

  // Laplace-smoothed frequencies (count + smoothing) / (total + smoothing * K).
  static FrequencyTable from_counts(std::span<const double> counts, double smoothing = 1.0);
  // Object categories counted once per appearance as a triplet subject or object.
  static FrequencyTable objects_in_triplets(const std::vector<SceneGraph>& scenes,
                                            int num_object_classes, double smoothing = 1.0);
  static FrequencyTable predicates(const std::vector<SceneGraph>& scenes, int num_predicates,
                                   double smoothing = 1.0);

  std::size_t size() const { return freqs_.size(); }
  double operator[](std::size_t c) const { return freqs_[c]; }
  const std::vector<double>& values() const { return freqs_; }

  std::vector<double> gammas(double mu = kDefaultMu, bool clamp_nonnegative = true) const;

 private:
  std::vector<double> freqs_;
};

// logit_c - tau * ln f_c
Vector logit_adjust(std::span<const double> logits, const FrequencyTable& freqs, double tau);

}  // namespace ssrcnn
