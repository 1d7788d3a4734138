#include "meterwatch/charts.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <vector>

namespace meterwatch::charts {
namespace {

constexpr double kPanelW = 360;
constexpr double kPanelH = 220;
constexpr double kMarginL = 48;
constexpr double kMarginT = 28;
constexpr double kMarginB = 30;
constexpr double kGap = 16;
constexpr const char* kPalette[] = {"#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b"};

std::string esc(std::string_view s) {
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

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

// Round the axis top up to 1, 2 or 5 times a power of ten.
double nice_max(double v) {
  if (!(v > 0)) return 1.0;
  const double p = std::pow(10.0, std::floor(std::log10(v)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (v <= m * p) return m * p;
  }
  return 10 * p;
}

class Canvas {
 public:
  Canvas(std::size_t panels, std::string title) : panels_(std::max<std::size_t>(panels, 1)), title_(std::move(title)) {}

  void begin_panel(std::size_t i, const std::string& label, double y_max) {
    x0_ = kMarginL + double(i) * (kPanelW + kMarginL + kGap);
    y0_ = kMarginT + 20;
    y_max_ = nice_max(y_max);
    body_ << "<g class=\"panel\">\n";
    body_ << "<text x=\"" << num(x0_) << "\" y=\"" << num(y0_ - 8) << "\" font-size=\"12\">" << esc(label)
          << "</text>\n";
    body_ << "<rect x=\"" << num(x0_) << "\" y=\"" << num(y0_) << "\" width=\"" << num(kPanelW) << "\" height=\""
          << num(kPanelH) << "\" fill=\"none\" stroke=\"#999\"/>\n";
    for (int h = 0; h <= 24; h += 6) {
      const double x = x0_ + kPanelW * h / 24.0;
      body_ << "<text x=\"" << num(x) << "\" y=\"" << num(y0_ + kPanelH + 14)
            << "\" font-size=\"10\" text-anchor=\"middle\">" << h << ":00</text>\n";
    }
    for (int t = 0; t <= 4; ++t) {
      const double y = y0_ + kPanelH * (1 - t / 4.0);
      body_ << "<text x=\"" << num(x0_ - 4) << "\" y=\"" << num(y + 3)
            << "\" font-size=\"10\" text-anchor=\"end\">" << num(y_max_ * t / 4.0) << "</text>\n";
    }
  }

  void end_panel() { body_ << "</g>\n"; }

  void line(std::span<const double> values, const char* cls, const char* color, double width, double opacity,
            const std::string& tag) {
    body_ << "<polyline class=\"" << cls << "\" data-series=\"" << esc(tag) << "\" fill=\"none\" stroke=\"" << color
          << "\" stroke-width=\"" << width << "\" stroke-opacity=\"" << opacity << "\" points=\"";
    const double n = double(values.size());
    for (std::size_t s = 0; s < values.size(); ++s) {
      const double x = x0_ + kPanelW * (double(s) + 0.5) / n;
      const double y = y0_ + kPanelH * (1 - std::clamp(values[s] / y_max_, 0.0, 1.0));
      body_ << (s ? " " : "") << num(x) << "," << num(y);
    }
    body_ << "\"/>\n";
  }

  std::string str() const {
    const double w = double(panels_) * (kPanelW + kMarginL + kGap) + kGap;
    const double h = kMarginT + 20 + kPanelH + kMarginB;
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w) << "\" height=\"" << num(h)
        << "\" viewBox=\"0 0 " << num(w) << " " << num(h) << "\" font-family=\"sans-serif\">\n";
    out << "<text x=\"" << num(kMarginL) << "\" y=\"18\" font-size=\"14\">" << esc(title_) << "</text>\n";
    out << body_.str() << "</svg>\n";
    return out.str();
  }

 private:
  std::size_t panels_;
  std::string title_;
  std::ostringstream body_;
  double x0_ = 0, y0_ = 0, y_max_ = 1;
};

double peak(std::span<const double> v) { return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end()); }

const analytics::DailyProfile* find_profile(const pipeline::Analysis& a, Date d) {
  for (const auto& p : a.profiles.profiles) {
    if (p.day == d) return &p;
  }
  return nullptr;
}

}  // namespace

std::string cluster_chart(const pipeline::Analysis& a) {
  const auto& m = a.model;
  Canvas c(std::size_t(m.k), a.meter_id + ": daily profiles by cluster (k = " + std::to_string(m.k) + ")");
  double y_max = 0;
  for (const auto& p : a.profiles.profiles) y_max = std::max(y_max, peak(p.values));
  for (int j = 0; j < m.k; ++j) {
    std::size_t members = 0;
    for (const auto& [d, lbl] : m.assignments) members += lbl == j;
    c.begin_panel(std::size_t(j), "cluster " + std::to_string(j) + " (" + std::to_string(members) + " days)", y_max);
    for (const auto& [d, lbl] : m.assignments) {
      if (lbl != j) continue;
      if (const auto* p = find_profile(a, d)) c.line(p->values, "day", "#777", 0.8, 0.5, format_date(d));
    }
    c.line(m.centroids[std::size_t(j)], "mean", kPalette[j % 6], 3, 1, "cluster " + std::to_string(j));
    c.end_panel();
  }
  return c.str();
}

std::string centroid_chart(std::span<const pipeline::Analysis> meters) {
  Canvas c(meters.size(), "mean cluster profiles per user");
  for (std::size_t i = 0; i < meters.size(); ++i) {
    const auto& m = meters[i].model;
    double y_max = 0;
    for (const auto& cen : m.centroids) y_max = std::max(y_max, peak(cen));
    c.begin_panel(i, meters[i].meter_id + " (k = " + std::to_string(m.k) + ")", y_max);
    for (int j = 0; j < m.k; ++j) {
      c.line(m.centroids[std::size_t(j)], "mean", kPalette[j % 6], 2, 1, "cluster " + std::to_string(j));
    }
    c.end_panel();
  }
  return c.str();
}

std::string anomaly_chart(const pipeline::Analysis& a, std::size_t top_n) {
  const auto days = analytics::top_days(a.anomalies, top_n);
  Canvas c(days.size(), a.meter_id + ": most anomalous days");
  for (std::size_t i = 0; i < days.size(); ++i) {
    const auto* p = find_profile(a, days[i]);
    const int j = a.anomalies.nearest.at(days[i]);
    const auto& cen = a.model.centroids[std::size_t(j)];
    const bool flagged = std::find(a.anomalies.flagged.begin(), a.anomalies.flagged.end(), days[i]) !=
                         a.anomalies.flagged.end();
    c.begin_panel(i,
                  format_date(days[i]) + " score " + num(a.anomalies.scores.at(days[i])) + " W" +
                      (flagged ? " (flagged)" : ""),
                  std::max(peak(p->values), peak(cen)));
    c.line(cen, "mean", "#000", 2.5, 1, "cluster " + std::to_string(j));
    c.line(p->values, "anomaly", "#d62728", 1.5, 1, format_date(days[i]));
    c.end_panel();
  }
  return c.str();
}

}  // namespace meterwatch::charts
