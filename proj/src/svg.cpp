#include "pcf/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "pcf/errors.hpp"

namespace pcf {

namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 60, kRight = 20, kTop = 36, kBottom = 44;

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                         "#ff7f0e", "#8c564b"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

void write_line_svg(const std::filesystem::path& file, const std::string& title,
                    const std::string& x_label, const std::string& y_label,
                    const std::vector<SvgSeries>& series) {
  require(!series.empty(), "svg: no series");
  double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
  double y_min = x_min, y_max = -x_min;
  for (const auto& s : series) {
    require(s.x.size() == s.y.size() && !s.x.empty(), "svg: bad series");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      require(std::isfinite(s.x[i]) && std::isfinite(s.y[i]),
              "svg: non-finite point");
      x_min = std::min(x_min, s.x[i]);
      x_max = std::max(x_max, s.x[i]);
      y_min = std::min(y_min, s.y[i]);
      y_max = std::max(y_max, s.y[i]);
    }
  }
  if (x_max == x_min) x_max = x_min + 1.0;
  if (y_max == y_min) y_max = y_min + 1.0;

  const double px0 = kLeft, px1 = kWidth - kRight;
  const double py0 = kHeight - kBottom, py1 = kTop;
  auto sx = [&](double x) {
    return px0 + (x - x_min) / (x_max - x_min) * (px1 - px0);
  };
  auto sy = [&](double y) {
    return py0 + (y - y_min) / (y_max - y_min) * (py1 - py0);
  };

  if (file.has_parent_path()) {
    std::filesystem::create_directories(file.parent_path());
  }
  std::ofstream out(file);
  require(out.good(), "svg: cannot open " + file.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" font-family=\"sans-serif\" "
      << "font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" "
      << "font-size=\"14\">" << escape(title) << "</text>\n";

  out << "<line x1=\"" << px0 << "\" y1=\"" << py0 << "\" x2=\"" << px1
      << "\" y2=\"" << py0 << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << px0 << "\" y1=\"" << py0 << "\" x2=\"" << px0
      << "\" y2=\"" << py1 << "\" stroke=\"black\"/>\n";

  out << "<text x=\"" << px0 << "\" y=\"" << py0 + 16
      << "\" text-anchor=\"middle\">" << num(x_min) << "</text>\n";
  out << "<text x=\"" << px1 << "\" y=\"" << py0 + 16
      << "\" text-anchor=\"middle\">" << num(x_max) << "</text>\n";
  out << "<text x=\"" << px0 - 6 << "\" y=\"" << py0 + 4
      << "\" text-anchor=\"end\">" << num(y_min) << "</text>\n";
  out << "<text x=\"" << px0 - 6 << "\" y=\"" << py1 + 4
      << "\" text-anchor=\"end\">" << num(y_max) << "</text>\n";
  out << "<text x=\"" << (px0 + px1) / 2 << "\" y=\"" << kHeight - 10
      << "\" text-anchor=\"middle\">" << escape(x_label) << "</text>\n";
  out << "<text x=\"16\" y=\"" << (py0 + py1) / 2
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << (py0 + py1) / 2 << ")\">" << escape(y_label) << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kColors[k % (sizeof kColors / sizeof kColors[0])];
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (i) out << ' ';
      out << num(sx(s.x[i])) << ',' << num(sy(s.y[i]));
    }
    out << "\"/>\n";
    const double ly = kTop + 14.0 * static_cast<double>(k);
    out << "<line x1=\"" << px1 - 110 << "\" y1=\"" << ly << "\" x2=\""
        << px1 - 90 << "\" y2=\"" << ly << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << px1 - 84 << "\" y=\"" << ly + 4 << "\">"
        << escape(s.label) << "</text>\n";
  }
  out << "</svg>\n";
  require(out.good(), "svg: write failed for " + file.string());
}

}  // namespace pcf
