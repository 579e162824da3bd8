// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "srgdiff/eval/topomap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "srgdiff/error.hpp"
#include "srgdiff/spectral.hpp"

namespace srgdiff::eval {

namespace {

constexpr double kPanelSize = 220.0;
constexpr double kPanelGap = 20.0;
constexpr double kTitleHeight = 28.0;

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string hex_color(const std::array<unsigned char, 3>& rgb) {
  static const char* digits = "0123456789abcdef";
  std::string out = "#";
  for (unsigned char v : rgb) {
    out += digits[v >> 4];
    out += digits[v & 15];
  }
  return out;
}

}  // namespace

Point2 ScalpField::cell_centre(std::size_t row, std::size_t col, std::size_t grid) {
  const double step = 2.0 / static_cast<double>(grid);
  return {-1.0 + (static_cast<double>(col) + 0.5) * step, 1.0 - (static_cast<double>(row) + 0.5) * step};
}

ScalpField interpolate_scalp(const ChannelLayout& layout, const std::vector<double>& values, std::size_t grid,
                             double power) {
  if (layout.size() < 3) throw ConfigError("insufficient spatial support");
  if (values.size() != layout.size())
    throw ShapeError("topomap: " + std::to_string(values.size()) + " values for " + std::to_string(layout.size()) +
                     " channels");
  if (grid == 0) throw ConfigError("topomap grid must be positive");
  ScalpField field;
  field.grid = grid;
  field.values.assign(grid * grid, std::numeric_limits<double>::quiet_NaN());
  std::vector<Point2> inside;
  std::vector<std::size_t> slots;
  for (std::size_t r = 0; r < grid; ++r)
    for (std::size_t c = 0; c < grid; ++c) {
      const Point2 p = ScalpField::cell_centre(r, c, grid);
      if (p.x * p.x + p.y * p.y <= 1.0) {
        inside.push_back(p);
        slots.push_back(r * grid + c);
      }
    }
  const Eigen::MatrixXd w = idw_weights(layout.positions(), inside, power);
  const Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  const Eigen::VectorXd out = w * v;
  for (std::size_t i = 0; i < slots.size(); ++i) field.values[slots[i]] = out[static_cast<Eigen::Index>(i)];
  return field;
}

std::array<unsigned char, 3> color_ramp(double u) {
  // Viridis sampled at seven evenly spaced stops.
  static constexpr std::array<std::array<double, 3>, 7> kStops{{{68, 1, 84},
                                                               {68, 58, 131},
                                                               {49, 104, 142},
                                                               {33, 145, 140},
                                                               {53, 183, 121},
                                                               {144, 215, 67},
                                                               {253, 231, 37}}};
  if (!std::isfinite(u)) u = 0.0;
  u = std::clamp(u, 0.0, 1.0) * (kStops.size() - 1);
  const std::size_t lo = std::min<std::size_t>(static_cast<std::size_t>(u), kStops.size() - 2);
  const double f = u - static_cast<double>(lo);
  std::array<unsigned char, 3> rgb{};
  for (std::size_t k = 0; k < 3; ++k)
    rgb[k] = static_cast<unsigned char>(std::lround(kStops[lo][k] + f * (kStops[lo + 1][k] - kStops[lo][k])));
  return rgb;
}

std::string render_topomap_svg(const std::vector<TopomapPanel>& panels, const std::string& caption) {
  if (panels.empty()) throw ConfigError("topomap needs at least one panel");
  std::vector<ScalpField> fields;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const TopomapPanel& p : panels) {
    fields.push_back(interpolate_scalp(p.layout, p.values));
    for (double v : fields.back().values)
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
  }
  const double range = hi - lo;
  const double width = panels.size() * kPanelSize + (panels.size() + 1) * kPanelGap;
  const double caption_h = caption.empty() ? 0.0 : kTitleHeight;
  const double height = caption_h + kTitleHeight + kPanelSize + 2 * kPanelGap;

  std::ostringstream os;
  os.precision(6);
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!caption.empty())
    os << "<text x=\"" << width / 2 << "\" y=\"" << kTitleHeight * 0.7
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">" << escape_xml(caption)
       << "</text>\n";
  for (std::size_t k = 0; k < panels.size(); ++k) {
    const double x0 = kPanelGap + k * (kPanelSize + kPanelGap);
    const double y0 = caption_h + kTitleHeight;
    const double radius = kPanelSize / 2, cx = x0 + radius, cy = y0 + radius;
    const ScalpField& f = fields[k];
    const double cell = kPanelSize / static_cast<double>(f.grid);
    os << "<g>\n<text x=\"" << cx << "\" y=\"" << y0 - 8
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << escape_xml(panels[k].title)
       << "</text>\n";
    for (std::size_t r = 0; r < f.grid; ++r)
      for (std::size_t c = 0; c < f.grid; ++c) {
        const double v = f.at(r, c);
        if (!std::isfinite(v)) continue;
        const double u = range > 0 ? (v - lo) / range : 0.5;
        os << "<rect x=\"" << x0 + c * cell << "\" y=\"" << y0 + r * cell << "\" width=\"" << cell
           << "\" height=\"" << cell << "\" fill=\"" << hex_color(color_ramp(u)) << "\"/>\n";
      }
    os << "<circle cx=\"" << cx << "\" cy=\"" << cy << "\" r=\"" << radius
       << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
    for (const Point2& p : panels[k].layout.positions())
      os << "<circle cx=\"" << cx + p.x * radius << "\" cy=\"" << cy - p.y * radius
         << "\" r=\"2.5\" fill=\"black\"/>\n";
    os << "</g>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::vector<double> band_psd(const EegWindow& window, double lo_hz, double hi_hz) {
  const Eigen::MatrixXd psd = spectral::psd_feature(window, {spectral::BandDef{"band", lo_hz, hi_hz}});
  return std::vector<double>(psd.col(0).data(), psd.col(0).data() + psd.rows());
}

}  // namespace srgdiff::eval
