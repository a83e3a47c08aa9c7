#pragma once

#include "scl/trajectory.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace scl {

/// A mini-batch of paired samples. Every id stands for (video id, text id).
struct Batch {
  std::vector<std::size_t> ids;
  double score = 0.0;       // sum of delta over ordered in-batch negatives at completion
  std::size_t seed_id = 0;  // first member, drawn uniformly from the pool
};

/// Sum of delta(i, j) over ordered pairs i != j of the batch, both orientations.
double batch_score(std::span<const std::size_t> ids, const DeltaMatrix& delta);

/// Score gained by appending `candidate`: sum over members i of delta(i, u) + delta(u, i).
/// Throws UsageError when the candidate is already a member.
double incremental_score(std::size_t candidate, std::span<const std::size_t> batch, const DeltaMatrix& delta);

/// Rank r = floor(alpha * (|pool| - 1)) into the pool sorted by (gain, id) ascending.
std::size_t quantile_rank(double alpha, std::size_t pool_size);

/// Candidate of `pool` at the alpha-quantile of ascending incremental score;
/// equal scores order by ascending id.
std::size_t select_by_score(std::span<const std::size_t> pool, std::span<const std::size_t> batch,
                            const DeltaMatrix& delta, double alpha);

struct BatchOptions {
  /// Duplicate-group id per sample. When non-empty, no two members of one
  /// batch may share a group; a batch closes early if no eligible candidate remains.
  std::span<const int> groups;
};

/// Greedy curriculum batch construction over ids 0..N-1. Each batch is seeded
/// with a uniform draw from the remaining pool and filled by select_by_score
/// until it holds `batch_size` members or the pool runs dry.
std::vector<Batch> build_batches(const DeltaMatrix& delta, double alpha, std::size_t batch_size, std::mt19937_64& rng,
                                 const BatchOptions& options = {});

/// Uniform shuffle of ids into consecutive batches; scores still recorded.
std::vector<Batch> random_batches(const DeltaMatrix& delta, std::size_t batch_size, std::mt19937_64& rng,
                                  const BatchOptions& options = {});

enum class ScheduleKind { random, easy_only, hard_only, linear, sqrt, log };

std::string_view to_string(ScheduleKind kind);  // CLI spelling: random, easy, hard, linear, sqrt, log
ScheduleKind parse_schedule(std::string_view name);

struct Schedule {
  ScheduleKind kind = ScheduleKind::linear;
  int total_epochs = 1;
};

/// Curriculum ratio at epoch e in [0, E]; std::nullopt for the random kind,
/// which bypasses selection.
std::optional<double> schedule_alpha(const Schedule& schedule, double epoch);

struct EpochPlan {
  int epoch = 0;
  std::optional<double> alpha;
  std::vector<Batch> batches;
  std::uint64_t rng_seed = 0;
};

/// Per-epoch generator seed; mixes base seed and epoch so epochs differ and runs reproduce.
std::uint64_t epoch_seed(std::uint64_t base_seed, int epoch);

/// One plan for each epoch 0..E-1, each independent of the others.
std::vector<EpochPlan> plan_epochs(const Schedule& schedule, const DeltaMatrix& delta, std::size_t batch_size,
                                   std::uint64_t base_seed, const BatchOptions& options = {});

/// Plan file: one JSON object per batch and line,
///   {"epoch": e, "alpha": a, "batch_index": b, "ids": [...], "score": s, "seed_id": i}
/// with "alpha": null for the random schedule.
std::string format_plans(std::span<const EpochPlan> plans);
void write_plans(const std::filesystem::path& path, std::span<const EpochPlan> plans);
std::vector<EpochPlan> read_plans(const std::filesystem::path& path);

/// Throws FormatError unless the plan's batches partition 0..n-1.
void check_partition(const EpochPlan& plan, std::size_t n);

}  // namespace scl
