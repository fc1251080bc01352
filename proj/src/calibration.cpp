#include "ssrcnn/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <spdlog/spdlog.h>

#include "ssrcnn/error.hpp"

namespace ssrcnn {

double adaptive_gamma(double frequency, double mu, bool clamp_nonnegative) {
  if (!(frequency > 0.0 && frequency <= 1.0)) {
    std::ostringstream os;
    os << "adaptive_gamma: frequency " << frequency << " outside (0, 1]";
    throw InvalidArgument(os.str());
  }
  if (!(mu > 0.0)) throw InvalidArgument("adaptive_gamma: mu must be positive");
  const double damp = std::pow(1.0 - frequency, mu) * std::pow(-std::log(frequency), 1.0 / mu);
  double gamma = std::min(2.0, 3.0 - damp);
  if (clamp_nonnegative && gamma < 0.0) {
    spdlog::warn("adaptive gamma {} for frequency {} clamped to 0", gamma, frequency);
    gamma = 0.0;
  }
  return gamma;
}

FrequencyTable::FrequencyTable(std::vector<double> freqs) : freqs_(std::move(freqs)) {
  for (std::size_t c = 0; c < freqs_.size(); ++c) {
    if (!(freqs_[c] > 0.0 && freqs_[c] <= 1.0)) {
      std::ostringstream os;
      os << "frequency of category " << c << " is " << freqs_[c] << ", outside (0, 1]";
      throw InvalidArgument(os.str());
    }
  }
}

FrequencyTable FrequencyTable::from_counts(std::span<const double> counts, double smoothing) {
  if (smoothing < 0.0) throw InvalidArgument("smoothing must be nonnegative");
  double total = 0.0;
  for (double c : counts) {
    if (c < 0.0) throw InvalidArgument("negative category count");
    total += c;
  }
  const double denom = total + smoothing * static_cast<double>(counts.size());
  if (!(denom > 0.0)) throw InvalidArgument("frequency table over no observations");
  std::vector<double> f(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) f[i] = (counts[i] + smoothing) / denom;
  return FrequencyTable(std::move(f));
}

FrequencyTable FrequencyTable::objects_in_triplets(const std::vector<SceneGraph>& scenes,
                                                   int num_object_classes, double smoothing) {
  std::vector<double> counts(static_cast<std::size_t>(num_object_classes), 0.0);
  for (const auto& s : scenes)
    for (const auto& r : s.relations) {
      counts.at(static_cast<std::size_t>(s.objects.at(r.sub).label)) += 1.0;
      counts.at(static_cast<std::size_t>(s.objects.at(r.obj).label)) += 1.0;
    }
  return from_counts(counts, smoothing);
}

FrequencyTable FrequencyTable::predicates(const std::vector<SceneGraph>& scenes,
                                          int num_predicates, double smoothing) {
  std::vector<double> counts(static_cast<std::size_t>(num_predicates), 0.0);
  for (const auto& s : scenes)
    for (const auto& r : s.relations) counts.at(static_cast<std::size_t>(r.predicate)) += 1.0;
  return from_counts(counts, smoothing);
}

std::vector<double> FrequencyTable::gammas(double mu, bool clamp_nonnegative) const {
  std::vector<double> g(freqs_.size());
  for (std::size_t c = 0; c < freqs_.size(); ++c) g[c] = adaptive_gamma(freqs_[c], mu, clamp_nonnegative);
  return g;
}

Vector logit_adjust(std::span<const double> logits, const FrequencyTable& freqs, double tau) {
  if (logits.size() != freqs.size()) throw DimensionMismatch("logit_adjust: logits and frequency table differ in size");
  Vector out(logits.size());
  for (std::size_t c = 0; c < logits.size(); ++c) out[c] = logits[c] - tau * std::log(freqs[c]);
  return out;
}

}  // namespace ssrcnn
