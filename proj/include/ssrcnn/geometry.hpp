#pragma once

#include <array>

namespace ssrcnn {

// Axis-aligned box in corner format. Units are whatever the caller uses
// (normalized fractions internally, absolute pixels in files).
struct CornerBox {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  // Throws InvalidGeometry unless x1 < x2, y1 < y2 and all finite.
  void validate() const;
};

// Box in normalized center format (cx, cy, w, h). Construction rejects
// non-positive or non-finite sizes, so every Box in the program has
// positive area.
class Box {
 public:
  Box(double cx, double cy, double w, double h);

  static Box from_corners(const CornerBox& c);
  static Box from_corners(double x1, double y1, double x2, double y2) {
    return from_corners(CornerBox{x1, y1, x2, y2});
  }

  double cx() const { return cx_; }
  double cy() const { return cy_; }
  double w() const { return w_; }
  double h() const { return h_; }
  double area() const { return w_ * h_; }
  CornerBox corners() const;
  std::array<double, 4> as_array() const { return {cx_, cy_, w_, h_}; }

  friend bool operator==(const Box&, const Box&) = default;

 private:
  double cx_, cy_, w_, h_;
};

double intersection_area(const Box& a, const Box& b);
double iou(const Box& a, const Box& b);
// IoU minus the fraction of the enclosing box not covered by the union.
double giou(const Box& a, const Box& b);
// Smallest axis-aligned box enclosing both.
Box union_box(const Box& a, const Box& b);

}  // namespace ssrcnn
