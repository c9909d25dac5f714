#include "spidereval/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "spidereval/error.hpp"
#include "spidereval/stats.hpp"

namespace spidereval::svg {

namespace {

constexpr double kWidth = 640, kHeight = 400, kLeft = 60, kRight = 20, kTop = 40, kBottom = 50;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

void pad(double& lo, double& hi) {
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double m = 0.05 * (hi - lo);
  lo -= m;
  hi += m;
}

void open(std::ostringstream& o, const std::string& title) {
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
    << "</text>\n";
}

void axes(std::ostringstream& o, const Frame& f, bool x_ticks) {
  o << "<line x1=\"" << kLeft << "\" y1=\"" << kHeight - kBottom << "\" x2=\"" << kWidth - kRight
    << "\" y2=\"" << kHeight - kBottom << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
    << kHeight - kBottom << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double y = f.y0 + (f.y1 - f.y0) * i / 4.0;
    o << "<text x=\"" << kLeft - 6 << "\" y=\"" << num(f.py(y) + 4) << "\" text-anchor=\"end\">"
      << label(y) << "</text>\n";
    if (x_ticks) {
      const double x = f.x0 + (f.x1 - f.x0) * i / 4.0;
      o << "<text x=\"" << num(f.px(x)) << "\" y=\"" << kHeight - kBottom + 16
        << "\" text-anchor=\"middle\">" << label(x) << "</text>\n";
    }
  }
}

}  // namespace

std::string learning_curve(const std::string& title, std::span<const curvefit::Point> points,
                           curvefit::CurveForm form, const curvefit::Params& params) {
  if (points.empty()) throw ValidationError("learning-curve plot needs points");
  double x0 = points[0].n, x1 = points[0].n, y0 = points[0].y, y1 = points[0].y;
  for (const auto& p : points) {
    x0 = std::min(x0, p.n);
    x1 = std::max(x1, p.n);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  constexpr int kSteps = 100;
  std::vector<std::pair<double, double>> line;
  for (int i = 0; i <= kSteps; ++i) {
    const double n = x0 + (x1 - x0) * i / kSteps;
    const double y = curvefit::evaluate(form, params, n);
    line.emplace_back(n, y);
    y0 = std::min(y0, y);
    y1 = std::max(y1, y);
  }
  pad(x0, x1);
  pad(y0, y1);
  const Frame f{x0, x1, y0, y1};
  std::ostringstream o;
  open(o, title);
  axes(o, f, true);
  o << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
  for (const auto& [n, y] : line) o << num(f.px(n)) << ',' << num(f.py(y)) << ' ';
  o << "\"/>\n";
  for (const auto& p : points) {
    o << "<circle cx=\"" << num(f.px(p.n)) << "\" cy=\"" << num(f.py(p.y))
      << "\" r=\"4\" fill=\"#d62728\"/>\n";
  }
  o << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">training images</text>\n";
  o << "</svg>\n";
  return o.str();
}

std::string icc_boxplot(const reliability::IccBootstrapReport& report) {
  if (report.sizes.empty()) throw ValidationError("ICC plot needs at least one size");
  double y0 = 1.0, y1 = 0.0;
  for (const auto& s : report.sizes) {
    for (double v : s.values) {
      y0 = std::min(y0, v);
      y1 = std::max(y1, v);
    }
  }
  pad(y0, y1);
  const double slots = static_cast<double>(report.sizes.size());
  const Frame f{0.0, slots, y0, y1};
  std::ostringstream o;
  open(o, "ICC(2,k) by number of raters");
  axes(o, f, false);
  for (std::size_t i = 0; i < report.sizes.size(); ++i) {
    const auto& s = report.sizes[i];
    const auto q = stats::quartiles(s.values);
    const auto [lo, hi] = std::minmax_element(s.values.begin(), s.values.end());
    const double cx = f.px(static_cast<double>(i) + 0.5);
    const double half = 0.3 * (f.px(1.0) - f.px(0.0));
    o << "<line x1=\"" << num(cx) << "\" y1=\"" << num(f.py(*lo)) << "\" x2=\"" << num(cx) << "\" y2=\""
      << num(f.py(*hi)) << "\" stroke=\"black\"/>\n";
    o << "<rect x=\"" << num(cx - half) << "\" y=\"" << num(f.py(q.q3)) << "\" width=\"" << num(2 * half)
      << "\" height=\"" << num(f.py(q.q1) - f.py(q.q3)) << "\" fill=\"#9ecae1\" stroke=\"black\"/>\n";
    o << "<line x1=\"" << num(cx - half) << "\" y1=\"" << num(f.py(q.median)) << "\" x2=\""
      << num(cx + half) << "\" y2=\"" << num(f.py(q.median)) << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << num(cx) << "\" y=\"" << kHeight - kBottom + 16 << "\" text-anchor=\"middle\">"
      << s.size << "</text>\n";
  }
  o << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">raters sampled</text>\n";
  o << "</svg>\n";
  return o.str();
}

std::string share_frequency(const std::string& criterion,
                            std::span<const error_analysis::CategorySummary> rows) {
  std::vector<const error_analysis::CategorySummary*> picked;
  for (const auto& r : rows) {
    if (r.criterion == criterion) picked.push_back(&r);
  }
  if (picked.empty()) throw ValidationError("no categories for criterion '" + criterion + "'");
  double y1 = 0.0;
  for (const auto* r : picked) y1 = std::max({y1, r->share, r->freq});
  const Frame f{0.0, static_cast<double>(picked.size()), 0.0, y1 > 0.0 ? y1 * 1.1 : 1.0};
  std::ostringstream o;
  open(o, criterion + ": error share vs frequency");
  axes(o, f, false);
  for (std::size_t i = 0; i < picked.size(); ++i) {
    const double slot = f.px(1.0) - f.px(0.0);
    const double left = f.px(static_cast<double>(i)) + 0.15 * slot;
    const double bar = 0.35 * slot;
    const double base = f.py(0.0);
    o << "<rect x=\"" << num(left) << "\" y=\"" << num(f.py(picked[i]->share)) << "\" width=\"" << num(bar)
      << "\" height=\"" << num(base - f.py(picked[i]->share)) << "\" fill=\"#d62728\"/>\n";
    o << "<rect x=\"" << num(left + bar) << "\" y=\"" << num(f.py(picked[i]->freq)) << "\" width=\""
      << num(bar) << "\" height=\"" << num(base - f.py(picked[i]->freq)) << "\" fill=\"#7f7f7f\"/>\n";
    o << "<text x=\"" << num(left + bar) << "\" y=\"" << kHeight - kBottom + 16
      << "\" text-anchor=\"middle\">" << escape(picked[i]->category) << "</text>\n";
  }
  o << "<rect x=\"" << kWidth - 150 << "\" y=\"32\" width=\"10\" height=\"10\" fill=\"#d62728\"/>"
    << "<text x=\"" << kWidth - 135 << "\" y=\"41\">error share</text>\n";
  o << "<rect x=\"" << kWidth - 150 << "\" y=\"48\" width=\"10\" height=\"10\" fill=\"#7f7f7f\"/>"
    << "<text x=\"" << kWidth - 135 << "\" y=\"57\">frequency</text>\n";
  o << "</svg>\n";
  return o.str();
}

}  // namespace spidereval::svg
