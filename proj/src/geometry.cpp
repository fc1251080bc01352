#include "ssrcnn/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ssrcnn/error.hpp"

namespace ssrcnn {

void CornerBox::validate() const {
  if (!(std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2))) {
    throw InvalidGeometry("box has non-finite corner");
  }
  if (!(x1 < x2 && y1 < y2)) {
    std::ostringstream os;
    os << "degenerate box [" << x1 << ", " << y1 << ", " << x2 << ", " << y2 << "]";
    throw InvalidGeometry(os.str());
  }
}

Box::Box(double cx, double cy, double w, double h) : cx_(cx), cy_(cy), w_(w), h_(h) {
  if (!(std::isfinite(cx) && std::isfinite(cy) && std::isfinite(w) && std::isfinite(h))) {
    throw InvalidGeometry("box has non-finite parameter");
  }
  if (!(w > 0.0 && h > 0.0)) {
    std::ostringstream os;
    os << "box with non-positive size w=" << w << " h=" << h;
    throw InvalidGeometry(os.str());
  }
}

Box Box::from_corners(const CornerBox& c) {
  c.validate();
  return Box(0.5 * (c.x1 + c.x2), 0.5 * (c.y1 + c.y2), c.x2 - c.x1, c.y2 - c.y1);
}

CornerBox Box::corners() const {
  return {cx_ - 0.5 * w_, cy_ - 0.5 * h_, cx_ + 0.5 * w_, cy_ + 0.5 * h_};
}

double intersection_area(const Box& a, const Box& b) {
  const CornerBox p = a.corners();
  const CornerBox q = b.corners();
  const double iw = std::min(p.x2, q.x2) - std::max(p.x1, q.x1);
  const double ih = std::min(p.y2, q.y2) - std::max(p.y1, q.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih;
}

double iou(const Box& a, const Box& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double giou(const Box& a, const Box& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  const CornerBox p = a.corners();
  const CornerBox q = b.corners();
  const double enclosing =
      (std::max(p.x2, q.x2) - std::min(p.x1, q.x1)) * (std::max(p.y2, q.y2) - std::min(p.y1, q.y1));
  return inter / uni - (enclosing - uni) / enclosing;
}

Box union_box(const Box& a, const Box& b) {
  const CornerBox p = a.corners();
  const CornerBox q = b.corners();
  return Box::from_corners(std::min(p.x1, q.x1), std::min(p.y1, q.y1), std::max(p.x2, q.x2),
                           std::max(p.y2, q.y2));
}

}  // namespace ssrcnn
