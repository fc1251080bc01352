#include <gtest/gtest.h>

#include "ssrcnn/error.hpp"
#include "ssrcnn/losses.hpp"
#include "support.hpp"

namespace ssrcnn {
namespace {

using testing::random_box;
using testing::random_vector;
using testing::rel_error;
using testing::Rng;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

TEST(Focal, GammaZeroHalfAlphaIsHalfBce) {
  Rng rng(1);
  FocalParams p;
  p.alpha = 0.5;
  p.gamma = 0.0;
  for (int i = 0; i < 50; ++i) {
    const Vector z = random_vector(rng, 6, 4.0);
    const std::optional<int> t = i % 3 == 0 ? std::nullopt : std::optional<int>(i % 6);
    double bce = 0.0;
    for (int c = 0; c < 6; ++c) {
      const double s = sigmoid(z[c]);
      bce -= (t && *t == c) ? std::log(s) : std::log(1 - s);
    }
    EXPECT_NEAR(focal_value(z, t, p), 0.5 * bce, 1e-12);
  }
}

TEST(Focal, SingleClassClosedForm) {
  FocalParams p;  // alpha 0.25, gamma 2
  const double z = 0.7, s = sigmoid(z);
  const Vector logits{z};
  EXPECT_NEAR(focal_value(logits, 0, p), -0.25 * (1 - s) * (1 - s) * std::log(s), 1e-14);
  EXPECT_NEAR(focal_value(logits, std::nullopt, p), -0.75 * s * s * std::log(1 - s), 1e-14);
}

TEST(Focal, NonnegativeAndValueMatchesGradientPath) {
  Rng rng(2);
  FocalParams p;
  for (int i = 0; i < 200; ++i) {
    const Vector z = random_vector(rng, 5, 30.0);
    const std::optional<int> t = i % 2 ? std::optional<int>(i % 5) : std::nullopt;
    const FocalResult r = focal_loss(z, t, p);
    EXPECT_GE(r.loss, 0.0);
    EXPECT_TRUE(std::isfinite(r.loss));
    EXPECT_DOUBLE_EQ(r.loss, focal_value(z, t, p));
  }
}

TEST(Focal, GradientMatchesFiniteDifferences) {
  Rng rng(3);
  FocalParams p;
  p.class_gamma = {0.0, 0.5, 1.3, 2.0};
  for (int i = 0; i < 100; ++i) {
    const Vector z = random_vector(rng, 4, 3.0);
    const std::optional<int> t = i % 5 == 0 ? std::nullopt : std::optional<int>(i % 4);
    const FocalResult r = focal_loss(z, t, p);
    const Vector fd = fd_gradient([&](const Vector& x) { return focal_value(x, t, p); }, z);
    EXPECT_LT(rel_error(r.grad, fd), 1e-6) << "point " << i;
  }
}

TEST(Focal, RejectsBadTarget) {
  EXPECT_THROW(focal_value(Vector{0.1, 0.2}, 2, FocalParams{}), InvalidArgument);
}

std::array<double, 4> fd_box(const Box& pred, const Box& gt, bool giou_term) {
  const auto x0 = pred.as_array();
  std::array<double, 4> g{};
  const double h = 1e-5;
  for (int k = 0; k < 4; ++k) {
    auto xp = x0, xm = x0;
    xp[k] += h;
    xm[k] -= h;
    const auto fp = box_losses(Box(xp[0], xp[1], xp[2], xp[3]), gt);
    const auto fm = box_losses(Box(xm[0], xm[1], xm[2], xm[3]), gt);
    g[k] = giou_term ? (fp.giou_loss - fm.giou_loss) / (2 * h) : (fp.l1 - fm.l1) / (2 * h);
  }
  return g;
}

// Keeps FD stencils away from the kinks of |.|, min, and max.
bool smooth_point(const Box& a, const Box& b) {
  const auto p = a.as_array(), q = b.as_array();
  for (int k = 0; k < 4; ++k)
    if (std::abs(p[k] - q[k]) < 1e-3) return false;
  const CornerBox c = a.corners(), d = b.corners();
  for (double e : {c.x1 - d.x1, c.x2 - d.x2, c.y1 - d.y1, c.y2 - d.y2, c.x1 - d.x2, c.x2 - d.x1,
                   c.y1 - d.y2, c.y2 - d.y1})
    if (std::abs(e) < 1e-3) return false;
  return true;
}

TEST(BoxLosses, GradientsMatchFiniteDifferences) {
  Rng rng(4);
  int checked = 0;
  while (checked < 100) {
    const Box a = random_box(rng), b = random_box(rng);
    if (!smooth_point(a, b)) continue;
    const BoxLossResult r = box_losses(a, b);
    EXPECT_LT(rel_error(r.l1_grad, fd_box(a, b, false)), 1e-6);
    EXPECT_LT(rel_error(r.giou_grad, fd_box(a, b, true)), 1e-6);
    ++checked;
  }
}

TEST(BoxLosses, ValuesAndBounds) {
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    const Box a = random_box(rng), b = random_box(rng);
    const BoxLossResult r = box_losses(a, b);
    const auto p = a.as_array(), q = b.as_array();
    double l1 = 0;
    for (int k = 0; k < 4; ++k) l1 += std::abs(p[k] - q[k]);
    EXPECT_NEAR(r.l1, l1, 1e-15);
    EXPECT_NEAR(r.giou_loss, 1.0 - giou(a, b), 1e-15);
    EXPECT_GE(r.giou_loss, 0.0);
    EXPECT_LE(r.giou_loss, 2.0);
  }
  const Box a(0.4, 0.4, 0.2, 0.3);
  const BoxLossResult same = box_losses(a, a);
  EXPECT_EQ(same.l1, 0.0);
  EXPECT_NEAR(same.giou_loss, 0.0, 1e-15);
}

TEST(Coefficients, PublishedDefaults) {
  const LossCoefficients c;
  EXPECT_DOUBLE_EQ(c.lambda_cls_rel, 4.0 / 3.0);
  EXPECT_DOUBLE_EQ(c.lambda_l1, 5.0);
  EXPECT_DOUBLE_EQ(c.lambda_giou, 2.0);
  EXPECT_DOUBLE_EQ(c.eta_cls, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(c.eta_l1, 1.25);
  EXPECT_DOUBLE_EQ(c.eta_giou, 0.5);
  LossCoefficients bad;
  bad.lambda_l1 = -1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

}  // namespace
}  // namespace ssrcnn
