#pragma once

// Minimal SVG emitter for scatter plots, matched-pair overlays and
// trajectory traces. Files only; no display dependency.

#include <cstddef>
#include <string>
#include <vector>

namespace fmlab {

class SvgPlot {
 public:
  SvgPlot(size_t width = 640, size_t height = 640);

  // Data bounds; grown automatically by the drawing calls when unset.
  void set_bounds(double xmin, double xmax, double ymin, double ymax);
  void set_title(const std::string& title);
  void set_footnote(const std::string& text);  // e.g. the config digest

  void scatter(const std::vector<double>& points, size_t n,
               const std::string& color, double radius = 2.0,
               double opacity = 0.6);
  // One line segment per matched pair a_i -> b_i.
  void segments(const std::vector<double>& a, const std::vector<double>& b,
                size_t n, const std::string& color, double opacity = 0.35);
  void polyline(const std::vector<double>& points, size_t n,
                const std::string& color, double opacity = 0.8);

  void save(const std::string& path) const;

 private:
  struct Mark {
    int kind;  // 0 scatter point, 1 segment, 2 polyline
    std::vector<double> coords;
    std::string color;
    double radius, opacity;
  };
  void grow_bounds(const std::vector<double>& pts, size_t n);

  size_t width_, height_;
  double xmin_ = 0, xmax_ = 0, ymin_ = 0, ymax_ = 0;
  bool bounds_set_ = false;
  std::string title_, footnote_;
  std::vector<Mark> marks_;
};

}  // namespace fmlab
