#pragma once

#include "scl/snapshot.hpp"
#include "scl/selection.hpp"
#include "scl/trajectory.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace scl::cli {

struct GenDataOptions {
  std::size_t n = 64;
  std::string dims = "4,4,3,3";
  std::string groups;  // defaults to "1:n"
  double noise = 0.1;
  std::uint64_t seed = 0;
  std::filesystem::path out;
};

struct TrainOptions {
  std::filesystem::path data;
  std::optional<int> epochs;
  std::optional<std::size_t> batch_size;
  double learning_rate = 0.05;
  int interval = 5;
  Aggregation mode = Aggregation::cico;
  Eigen::Index embed_dim = 4;
  bool freeze_text = false;
  std::optional<std::filesystem::path> init_from;
  std::optional<std::filesystem::path> plan;  // selective training only
  std::uint64_t seed = 0;
  std::filesystem::path out;
};

struct AnalyzeOptions {
  std::filesystem::path snapshots;
  std::optional<Aggregation> mode;  // defaults to the series' own aggregation
  double epsilon = kDefaultEpsilon;
  std::filesystem::path out;
};

struct BuildBatchesOptions {
  std::filesystem::path delta;
  ScheduleKind schedule = ScheduleKind::linear;
  int epochs = 40;
  std::size_t batch_size = 8;
  double epsilon = kDefaultEpsilon;
  bool exclude_duplicate_texts = false;
  std::optional<std::filesystem::path> data;  // group ids for the duplicate guard
  std::uint64_t seed = 0;
  std::filesystem::path out;
};

struct ReportOptions {
  std::filesystem::path analysis;
  ScheduleKind schedule = ScheduleKind::linear;
  int epochs = 40;
  std::vector<std::filesystem::path> logs;
  std::filesystem::path out;
};

struct PipelineOptions {
  GenDataOptions data;
  int epochs = 40;
  std::optional<int> scl_epochs;
  std::size_t batch_size = 16;
  std::size_t scl_batch_size = 8;
  double learning_rate = 0.05;
  int interval = 5;
  Aggregation mode = Aggregation::cico;
  Eigen::Index embed_dim = 4;
  bool freeze_text = false;
  ScheduleKind schedule = ScheduleKind::linear;
  double epsilon = kDefaultEpsilon;
  bool exclude_duplicate_texts = false;
  bool init_from_reference = false;
  std::uint64_t seed = 0;
  std::filesystem::path out;
};

/// Each command writes its outputs and throws scl::Error on failure.
void gen_data(const GenDataOptions& opt);
void train_ref(const TrainOptions& opt);
void train_scl(const TrainOptions& opt);
void analyze(const AnalyzeOptions& opt);
void build_batches(const BuildBatchesOptions& opt, std::ostream* log = nullptr);
void report(const ReportOptions& opt);
/// Runs every stage in order under out/{data,ref,analysis,plan.jsonl,scl,report}.
/// Failures are rethrown with the stage name prefixed.
void pipeline(const PipelineOptions& opt, std::ostream* log = nullptr);

/// Parses `args` (without the program name), runs the subcommand and returns
/// the process exit code: 0 success, 1 usage, 2 format, 3 numeric degeneracy,
/// 4 divergence.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace scl::cli
