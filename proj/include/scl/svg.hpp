#pragma once

#include "scl/selection.hpp"
#include "scl/trainer.hpp"
#include "scl/trajectory.hpp"

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace scl {

struct ChartSeries {
  std::string label;
  std::string color;
  std::vector<std::pair<double, double>> points;  // data coordinates, x ascending
};

/// Static line chart as standalone SVG markup. One <polyline> per non-empty
/// series; numbers printed with fixed precision so output is byte-stable.
std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                       std::span<const ChartSeries> series);

/// Mean fitted line of each category evaluated at every checkpoint.
std::string trajectories_svg(std::span<const TrajectoryFit> fits, std::span<const CategoryLabel> labels,
                             std::span<const int> checkpoints);

/// alpha against epoch for e = 0..E (empty chart for the random schedule).
std::string schedule_svg(const Schedule& schedule);

struct NamedLog {
  std::string name;
  std::vector<EpochMetrics> log;
};
/// One loss curve per training log.
std::string loss_svg(std::span<const NamedLog> logs);

}  // namespace scl
