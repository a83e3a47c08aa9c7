#include "scl/svg.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <limits>

namespace scl {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 400.0;
constexpr double kLeft = 64.0;
constexpr double kRight = 150.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 56.0;

std::string fixed(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (const char c : s) {
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

}  // namespace

std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                       std::span<const ChartSeries> series) {
  double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
  double y_min = x_min, y_max = -x_min;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
      y_min = std::min(y_min, y);
      y_max = std::max(y_max, y);
    }
  }
  if (!(x_min <= x_max)) x_min = 0.0, x_max = 1.0, y_min = 0.0, y_max = 1.0;
  if (x_max == x_min) x_max = x_min + 1.0;
  if (y_max == y_min) y_min -= 0.5, y_max += 0.5;

  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x_min) / (x_max - x_min) * plot_w; };
  auto py = [&](double y) { return kTop + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h; };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fixed(kWidth) + "\" height=\"" + fixed(kHeight) +
         "\" viewBox=\"0 0 " + fixed(kWidth) + " " + fixed(kHeight) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out += "<rect x=\"0\" y=\"0\" width=\"" + fixed(kWidth) + "\" height=\"" + fixed(kHeight) + "\" fill=\"white\"/>\n";
  out += "<text x=\"" + fixed(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" + escape(title) +
         "</text>\n";
  out += "<rect x=\"" + fixed(kLeft) + "\" y=\"" + fixed(kTop) + "\" width=\"" + fixed(plot_w) + "\" height=\"" +
         fixed(plot_h) + "\" fill=\"none\" stroke=\"#444\"/>\n";

  for (int t = 0; t <= 4; ++t) {
    const double xv = x_min + (x_max - x_min) * t / 4.0;
    const double yv = y_min + (y_max - y_min) * t / 4.0;
    out += "<text x=\"" + fixed(px(xv)) + "\" y=\"" + fixed(kTop + plot_h + 16) + "\" text-anchor=\"middle\">" +
           fixed(xv) + "</text>\n";
    out += "<text x=\"" + fixed(kLeft - 6) + "\" y=\"" + fixed(py(yv) + 4) + "\" text-anchor=\"end\">" + fixed(yv) +
           "</text>\n";
  }
  out += "<text x=\"" + fixed(kLeft + plot_w / 2) + "\" y=\"" + fixed(kHeight - 12) + "\" text-anchor=\"middle\">" +
         escape(x_label) + "</text>\n";
  out += "<text x=\"16\" y=\"" + fixed(kTop + plot_h / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         fixed(kTop + plot_h / 2) + ")\">" + escape(y_label) + "</text>\n";

  double legend_y = kTop + 10;
  for (const auto& s : series) {
    if (s.points.empty()) continue;
    out += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"2\" points=\"";
    for (std::size_t p = 0; p < s.points.size(); ++p) {
      if (p) out += ' ';
      out += fixed(px(s.points[p].first)) + "," + fixed(py(s.points[p].second));
    }
    out += "\"/>\n";
    const double lx = kLeft + plot_w + 12;
    out += "<line x1=\"" + fixed(lx) + "\" y1=\"" + fixed(legend_y) + "\" x2=\"" + fixed(lx + 20) + "\" y2=\"" +
           fixed(legend_y) + "\" stroke=\"" + s.color + "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + fixed(lx + 26) + "\" y=\"" + fixed(legend_y + 4) + "\">" + escape(s.label) + "</text>\n";
    legend_y += 18;
  }
  out += "</svg>\n";
  return out;
}

std::string trajectories_svg(std::span<const TrajectoryFit> fits, std::span<const CategoryLabel> labels,
                             std::span<const int> checkpoints) {
  static constexpr std::array<const char*, 4> kColors = {"#1f77b4", "#2ca02c", "#d62728", "#ff7f0e"};
  static constexpr std::array<const char*, 4> kNames = {"H->L", "L->L", "H->H", "L->H"};
  std::array<double, 4> slope{}, intercept{};
  std::array<std::size_t, 4> count{};
  for (std::size_t p = 0; p < fits.size() && p < labels.size(); ++p) {
    const auto c = static_cast<std::size_t>(labels[p].category);
    slope[c] += fits[p].slope;
    intercept[c] += fits[p].intercept;
    ++count[c];
  }
  std::vector<ChartSeries> series;
  for (std::size_t c = 0; c < 4; ++c) {
    ChartSeries s{std::string(kNames[c]) + " (" + std::to_string(count[c]) + ")", kColors[c], {}};
    if (count[c] > 0) {
      const double a = slope[c] / static_cast<double>(count[c]);
      const double b = intercept[c] / static_cast<double>(count[c]);
      for (const int k : checkpoints) s.points.emplace_back(k, a * k + b);
    }
    series.push_back(std::move(s));
  }
  return line_chart("Mean fitted negative similarity by category", "checkpoint (epoch)", "similarity", series);
}

std::string schedule_svg(const Schedule& schedule) {
  ChartSeries s{"alpha (" + std::string(to_string(schedule.kind)) + ")", "#1f77b4", {}};
  if (schedule.kind != ScheduleKind::random) {
    for (int e = 0; e <= schedule.total_epochs; ++e) s.points.emplace_back(e, *schedule_alpha(schedule, e));
  }
  const std::vector<ChartSeries> series{s};
  return line_chart("Curriculum schedule", "epoch", "alpha", series);
}

std::string loss_svg(std::span<const NamedLog> logs) {
  static constexpr std::array<const char*, 4> kColors = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd"};
  std::vector<ChartSeries> series;
  for (std::size_t l = 0; l < logs.size(); ++l) {
    ChartSeries s{logs[l].name, kColors[l % kColors.size()], {}};
    for (const auto& m : logs[l].log) s.points.emplace_back(m.epoch, m.loss);
    series.push_back(std::move(s));
  }
  return line_chart("Training loss", "epoch", "contrastive loss", series);
}

}  // namespace scl
