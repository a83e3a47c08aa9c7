#pragma once

#include "scl/snapshot.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace scl {

/// One similarity sample on a pair's trajectory.
struct TrajectoryPoint {
  double checkpoint = 0.0;
  double similarity = 0.0;
};

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Ordinary least squares for s ~ slope * k + intercept, closed form.
/// Throws InsufficientDataError for fewer than two points and DegenerateError
/// when every point shares one checkpoint.
LineFit fit_trajectory(std::span<const TrajectoryPoint> points);

/// Fitted similarity trajectory of the pair (video i, text j).
struct TrajectoryFit {
  std::size_t i = 0;
  std::size_t j = 0;
  double slope = 0.0;
  double intercept = 0.0;
  double final_checkpoint = 0.0;  // K
  double fitted_start = 0.0;      // line at k = 0, equal to intercept
  double fitted_end = 0.0;        // line at k = K

  /// Change of the fitted line across training, computed as slope * K.
  double delta() const { return slope * final_checkpoint; }
};

TrajectoryFit make_fit(std::size_t i, std::size_t j, LineFit line, double final_checkpoint);

/// slope * k + intercept.
double approx_similarity(const TrajectoryFit& fit, double checkpoint);

/// N x N fitted similarity changes; the diagonal is held at zero.
struct DeltaMatrix {
  Eigen::MatrixXd values;

  std::size_t size() const { return static_cast<std::size_t>(values.rows()); }
  double operator()(std::size_t i, std::size_t j) const {
    return values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
};

struct DeltaAnalysis {
  DeltaMatrix delta;
  std::vector<TrajectoryFit> fits;           // negatives, row-major, j != i
  std::vector<TrajectoryFit> positive_fits;  // diagonal; diagnostics only
  double s_mean = 0.0;                       // mean fitted final similarity over negatives
  std::vector<int> checkpoints;
};

/// Fits every trajectory across the checkpoint set and derives delta and the
/// mean final negative similarity. Needs at least two checkpoints starting at
/// zero and sharing N.
DeltaAnalysis delta_matrix(std::span<const SimilarityMatrix> matrices);

enum class Category { high_to_low, low_to_low, high_to_high, low_to_high };
inline constexpr std::array<Category, 4> kCategories = {Category::high_to_low, Category::low_to_low,
                                                        Category::high_to_high, Category::low_to_high};

std::string_view to_string(Category c);  // "HL", "LL", "HH", "LH"
Category parse_category(std::string_view name);

struct CategoryLabel {
  Category category = Category::low_to_low;
  /// Set when the four base rules match nothing: a low final level with a rise
  /// beyond epsilon (labelled LL) or a high final level with a drop beyond
  /// epsilon (labelled HH).
  bool fall_through = false;
};

inline constexpr double kDefaultEpsilon = 0.2;

CategoryLabel classify_pair(double fitted_end, double delta, double s_mean, double epsilon);
CategoryLabel classify_pair(const TrajectoryFit& fit, double s_mean, double epsilon);

struct CategoryReport {
  std::array<std::size_t, 4> counts{};  // indexed by Category
  std::array<double, 4> fractions{};
  std::size_t total = 0;
  std::size_t fall_through_count = 0;
  double s_mean = 0.0;
  double epsilon = kDefaultEpsilon;

  std::size_t count(Category c) const { return counts[static_cast<std::size_t>(c)]; }
  double fraction(Category c) const { return fractions[static_cast<std::size_t>(c)]; }
};

/// Classifies each fit once against the given threshold.
CategoryReport category_report(std::span<const TrajectoryFit> fits, double s_mean, double epsilon);
CategoryReport category_report(const DeltaAnalysis& analysis, double epsilon);

/// Builds a report from labels that were already assigned (e.g. read back from fits.csv).
CategoryReport report_from_labels(std::span<const CategoryLabel> labels, double s_mean, double epsilon);

/// fits.csv: header `i,j,a,b,s0,sK,label,fall_through`, one row per negative pair.
void write_fits_csv(const std::filesystem::path& path, std::span<const TrajectoryFit> fits, double s_mean,
                    double epsilon);

struct LabelledFit {
  TrajectoryFit fit;
  CategoryLabel label;
};
std::vector<LabelledFit> read_fits_csv(const std::filesystem::path& path, double final_checkpoint);

/// report.csv: header `category,count,fraction`; rows HL, LL, HH, LH.
std::string format_report_csv(const CategoryReport& report);

}  // namespace scl
