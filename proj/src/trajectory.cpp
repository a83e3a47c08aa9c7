#include "scl/trajectory.hpp"

#include "scl/errors.hpp"
#include "scl/matrix_io.hpp"
#include "scl/parallel.hpp"

#include <cmath>
#include <sstream>
#include <string>

namespace scl {

LineFit fit_trajectory(std::span<const TrajectoryPoint> points) {
  if (points.size() < 2) {
    throw InsufficientDataError("trajectory fit needs at least 2 points, got " + std::to_string(points.size()));
  }
  const auto n = static_cast<double>(points.size());
  // Means accumulate offsets from the first point so a constant series is reproduced exactly.
  const double k_ref = points.front().checkpoint;
  const double s_ref = points.front().similarity;
  double k_offset = 0.0;
  double s_offset = 0.0;
  for (const auto& p : points) {
    if (!std::isfinite(p.similarity) || !std::isfinite(p.checkpoint)) {
      throw DegenerateError("trajectory fit: non-finite point");
    }
    k_offset += p.checkpoint - k_ref;
    s_offset += p.similarity - s_ref;
  }
  const double k_mean = k_ref + k_offset / n;
  const double s_mean = s_ref + s_offset / n;

  // Centered normal equations.
  double sxx = 0.0;
  double sxy = 0.0;
  for (const auto& p : points) {
    const double dk = p.checkpoint - k_mean;
    sxx += dk * dk;
    sxy += dk * (p.similarity - s_mean);
  }
  if (sxx == 0.0) throw DegenerateError("trajectory fit: all points share one checkpoint");
  const double slope = sxy / sxx;
  return {slope, s_mean - slope * k_mean};
}

TrajectoryFit make_fit(std::size_t i, std::size_t j, LineFit line, double final_checkpoint) {
  TrajectoryFit fit;
  fit.i = i;
  fit.j = j;
  fit.slope = line.slope;
  fit.intercept = line.intercept;
  fit.final_checkpoint = final_checkpoint;
  fit.fitted_start = line.intercept;
  fit.fitted_end = line.slope * final_checkpoint + line.intercept;
  return fit;
}

double approx_similarity(const TrajectoryFit& fit, double checkpoint) {
  return fit.slope * checkpoint + fit.intercept;
}

DeltaAnalysis delta_matrix(std::span<const SimilarityMatrix> matrices) {
  if (matrices.size() < 2) {
    throw InsufficientDataError("delta needs at least 2 checkpoints, got " + std::to_string(matrices.size()));
  }
  std::vector<int> checkpoints;
  checkpoints.reserve(matrices.size());
  for (const auto& m : matrices) checkpoints.push_back(m.checkpoint);
  validate_checkpoints(checkpoints);

  const Eigen::Index n = matrices.front().values.rows();
  for (const auto& m : matrices) {
    if (m.values.rows() != n || m.values.cols() != n) {
      throw FormatError("similarity matrix at checkpoint " + std::to_string(m.checkpoint) + " is " +
                        std::to_string(m.values.rows()) + "x" + std::to_string(m.values.cols()) + ", expected " +
                        std::to_string(n) + "x" + std::to_string(n));
    }
  }

  const auto nn = static_cast<std::size_t>(n);
  const double final_k = checkpoints.back();
  DeltaAnalysis out;
  out.checkpoints = checkpoints;
  out.delta.values = Eigen::MatrixXd::Zero(n, n);
  out.fits.resize(nn * (nn - 1));
  out.positive_fits.resize(nn);

  parallel_for(nn, [&](std::size_t i) {
    std::vector<TrajectoryPoint> points(matrices.size());
    std::size_t slot = i * (nn - 1);
    for (std::size_t j = 0; j < nn; ++j) {
      for (std::size_t c = 0; c < matrices.size(); ++c) {
        points[c] = {static_cast<double>(checkpoints[c]),
                     matrices[c].values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))};
      }
      const TrajectoryFit fit = make_fit(i, j, fit_trajectory(points), final_k);
      if (i == j) {
        out.positive_fits[i] = fit;
      } else {
        out.fits[slot++] = fit;
        out.delta.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = fit.delta();
      }
    }
  });

  if (nn > 1) {
    double total = 0.0;
    for (const auto& f : out.fits) total += f.fitted_end;
    out.s_mean = total / static_cast<double>(out.fits.size());
  }
  return out;
}

std::string_view to_string(Category c) {
  switch (c) {
    case Category::high_to_low: return "HL";
    case Category::low_to_low: return "LL";
    case Category::high_to_high: return "HH";
    case Category::low_to_high: return "LH";
  }
  return "?";
}

Category parse_category(std::string_view name) {
  for (const Category c : kCategories) {
    if (to_string(c) == name) return c;
  }
  throw FormatError("unknown category label '" + std::string(name) + "'");
}

CategoryLabel classify_pair(double fitted_end, double delta, double s_mean, double epsilon) {
  const bool high = fitted_end > s_mean;
  if (std::abs(delta) <= epsilon) return {high ? Category::high_to_high : Category::low_to_low, false};
  if (high) {
    if (delta > epsilon) return {Category::low_to_high, false};
    return {Category::high_to_high, true};
  }
  if (delta < -epsilon) return {Category::high_to_low, false};
  return {Category::low_to_low, true};
}

CategoryLabel classify_pair(const TrajectoryFit& fit, double s_mean, double epsilon) {
  return classify_pair(fit.fitted_end, fit.delta(), s_mean, epsilon);
}

CategoryReport report_from_labels(std::span<const CategoryLabel> labels, double s_mean, double epsilon) {
  CategoryReport report;
  report.s_mean = s_mean;
  report.epsilon = epsilon;
  report.total = labels.size();
  for (const auto& label : labels) {
    ++report.counts[static_cast<std::size_t>(label.category)];
    if (label.fall_through) ++report.fall_through_count;
  }
  if (report.total > 0) {
    for (std::size_t c = 0; c < report.counts.size(); ++c) {
      report.fractions[c] = static_cast<double>(report.counts[c]) / static_cast<double>(report.total);
    }
  }
  return report;
}

CategoryReport category_report(std::span<const TrajectoryFit> fits, double s_mean, double epsilon) {
  if (epsilon < 0.0) throw UsageError("epsilon must be non-negative");
  std::vector<CategoryLabel> labels;
  labels.reserve(fits.size());
  for (const auto& f : fits) labels.push_back(classify_pair(f, s_mean, epsilon));
  return report_from_labels(labels, s_mean, epsilon);
}

CategoryReport category_report(const DeltaAnalysis& analysis, double epsilon) {
  return category_report(analysis.fits, analysis.s_mean, epsilon);
}

void write_fits_csv(const std::filesystem::path& path, std::span<const TrajectoryFit> fits, double s_mean,
                    double epsilon) {
  std::string out = "i,j,a,b,s0,sK,label,fall_through\n";
  for (const auto& f : fits) {
    const auto label = classify_pair(f, s_mean, epsilon);
    out += std::to_string(f.i) + ',' + std::to_string(f.j) + ',' + format_decimal(f.slope) + ',' +
           format_decimal(f.intercept) + ',' + format_decimal(f.fitted_start) + ',' + format_decimal(f.fitted_end) +
           ',' + std::string(to_string(label.category)) + ',' + (label.fall_through ? "1" : "0") + '\n';
  }
  write_text_file(path, out);
}

std::vector<LabelledFit> read_fits_csv(const std::filesystem::path& path, double final_checkpoint) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line) || line.rfind("i,j,a,b,s0,sK,label,fall_through", 0) != 0) {
    throw FormatError(path.string() + ": missing fits.csv header");
  }
  std::vector<LabelledFit> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected 8 fields");
    }
    try {
      LabelledFit row;
      const LineFit line_fit{parse_decimal(cells[2]), parse_decimal(cells[3])};
      row.fit = make_fit(std::stoul(cells[0]), std::stoul(cells[1]), line_fit, final_checkpoint);
      row.label = {parse_category(cells[6]), cells[7] == "1"};
      rows.push_back(row);
    } catch (const std::logic_error&) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": bad index field");
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

std::string format_report_csv(const CategoryReport& report) {
  std::string out = "category,count,fraction\n";
  for (const Category c : kCategories) {
    out += std::string(to_string(c)) + ',' + std::to_string(report.count(c)) + ',' +
           format_decimal(report.fraction(c)) + '\n';
  }
  return out;
}

}  // namespace scl
