#include "fmlab/svg.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fmlab {

SvgPlot::SvgPlot(size_t width, size_t height) : width_(width), height_(height) {}

void SvgPlot::set_bounds(double xmin, double xmax, double ymin, double ymax) {
  xmin_ = xmin;
  xmax_ = xmax;
  ymin_ = ymin;
  ymax_ = ymax;
  bounds_set_ = true;
}

void SvgPlot::set_title(const std::string& title) { title_ = title; }
void SvgPlot::set_footnote(const std::string& text) { footnote_ = text; }

void SvgPlot::grow_bounds(const std::vector<double>& pts, size_t n) {
  if (bounds_set_) return;
  for (size_t i = 0; i < n; ++i) {
    double x = pts[2 * i], y = pts[2 * i + 1];
    if (marks_.empty() && i == 0) {
      xmin_ = xmax_ = x;
      ymin_ = ymax_ = y;
    }
    xmin_ = std::min(xmin_, x);
    xmax_ = std::max(xmax_, x);
    ymin_ = std::min(ymin_, y);
    ymax_ = std::max(ymax_, y);
  }
}

void SvgPlot::scatter(const std::vector<double>& points, size_t n,
                      const std::string& color, double radius, double opacity) {
  grow_bounds(points, n);
  marks_.push_back({0, std::vector<double>(points.begin(), points.begin() + 2 * n),
                    color, radius, opacity});
}

void SvgPlot::segments(const std::vector<double>& a,
                       const std::vector<double>& b, size_t n,
                       const std::string& color, double opacity) {
  grow_bounds(a, n);
  grow_bounds(b, n);
  std::vector<double> coords(4 * n);
  for (size_t i = 0; i < n; ++i) {
    coords[4 * i] = a[2 * i];
    coords[4 * i + 1] = a[2 * i + 1];
    coords[4 * i + 2] = b[2 * i];
    coords[4 * i + 3] = b[2 * i + 1];
  }
  marks_.push_back({1, std::move(coords), color, 0.0, opacity});
}

void SvgPlot::polyline(const std::vector<double>& points, size_t n,
                       const std::string& color, double opacity) {
  grow_bounds(points, n);
  marks_.push_back({2, std::vector<double>(points.begin(), points.begin() + 2 * n),
                    color, 0.0, opacity});
}

void SvgPlot::save(const std::string& path) const {
  double margin = 36.0;
  double w = static_cast<double>(width_), h = static_cast<double>(height_);
  double spanx = std::max(xmax_ - xmin_, 1e-12);
  double spany = std::max(ymax_ - ymin_, 1e-12);
  auto px = [&](double x) {
    return margin + (x - xmin_) / spanx * (w - 2 * margin);
  };
  auto py = [&](double y) {
    return h - margin - (y - ymin_) / spany * (h - 2 * margin);
  };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_
     << "\" height=\"" << height_ << "\" viewBox=\"0 0 " << width_ << " "
     << height_ << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title_.empty()) {
    os << "<text x=\"" << w / 2 << "\" y=\"20\" text-anchor=\"middle\" "
          "font-family=\"sans-serif\" font-size=\"14\">" << title_
       << "</text>\n";
  }
  for (const auto& m : marks_) {
    if (m.kind == 0) {
      for (size_t i = 0; i * 2 < m.coords.size(); ++i) {
        os << "<circle cx=\"" << px(m.coords[2 * i]) << "\" cy=\""
           << py(m.coords[2 * i + 1]) << "\" r=\"" << m.radius << "\" fill=\""
           << m.color << "\" fill-opacity=\"" << m.opacity << "\"/>\n";
      }
    } else if (m.kind == 1) {
      for (size_t i = 0; i * 4 < m.coords.size(); ++i) {
        os << "<line x1=\"" << px(m.coords[4 * i]) << "\" y1=\""
           << py(m.coords[4 * i + 1]) << "\" x2=\"" << px(m.coords[4 * i + 2])
           << "\" y2=\"" << py(m.coords[4 * i + 3]) << "\" stroke=\""
           << m.color << "\" stroke-opacity=\"" << m.opacity
           << "\" stroke-width=\"0.8\"/>\n";
      }
    } else {
      os << "<polyline fill=\"none\" stroke=\"" << m.color
         << "\" stroke-opacity=\"" << m.opacity << "\" stroke-width=\"1\" points=\"";
      for (size_t i = 0; i * 2 < m.coords.size(); ++i) {
        os << px(m.coords[2 * i]) << "," << py(m.coords[2 * i + 1]) << " ";
      }
      os << "\"/>\n";
    }
  }
  if (!footnote_.empty()) {
    os << "<text x=\"" << margin << "\" y=\"" << h - 8
       << "\" font-family=\"monospace\" font-size=\"10\" fill=\"#666\">"
       << footnote_ << "</text>\n";
  }
  os << "</svg>\n";

  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << os.str();
}

}  // namespace fmlab
