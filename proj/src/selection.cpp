#include "scl/selection.hpp"

#include "scl/errors.hpp"
#include "scl/matrix_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace scl {

using json = nlohmann::ordered_json;

namespace {

void check_id(std::size_t id, const DeltaMatrix& delta) {
  if (id >= delta.size()) {
    throw UsageError("sample id " + std::to_string(id) + " out of range for delta of size " +
                     std::to_string(delta.size()));
  }
}

double pair_gain(std::size_t a, std::size_t b, const DeltaMatrix& delta) { return delta(a, b) + delta(b, a); }

}  // namespace

double batch_score(std::span<const std::size_t> ids, const DeltaMatrix& delta) {
  for (const auto id : ids) check_id(id, delta);
  double score = 0.0;
  for (const auto i : ids) {
    for (const auto j : ids) {
      if (i != j) score += delta(i, j);
    }
  }
  return score;
}

double incremental_score(std::size_t candidate, std::span<const std::size_t> batch, const DeltaMatrix& delta) {
  check_id(candidate, delta);
  double gain = 0.0;
  for (const auto i : batch) {
    check_id(i, delta);
    if (i == candidate) {
      throw UsageError("candidate " + std::to_string(candidate) + " is already a batch member");
    }
    gain += pair_gain(i, candidate, delta);
  }
  return gain;
}

std::size_t quantile_rank(double alpha, std::size_t pool_size) {
  if (pool_size == 0) throw UsageError("quantile rank of an empty pool");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw UsageError("alpha must lie in [0, 1]");
  const auto rank = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(pool_size - 1)));
  return std::min(rank, pool_size - 1);
}

namespace {

// Picks the rank-r element of `candidates` under (gain, id) ascending.
std::size_t pick_at_rank(std::vector<std::size_t>& candidates, const std::vector<double>& gain, double alpha) {
  const std::size_t r = quantile_rank(alpha, candidates.size());
  const auto rank_it = candidates.begin() + static_cast<std::ptrdiff_t>(r);
  std::nth_element(candidates.begin(), rank_it, candidates.end(), [&](std::size_t a, std::size_t b) {
    return gain[a] < gain[b] || (gain[a] == gain[b] && a < b);
  });
  return *rank_it;
}

}  // namespace

std::size_t select_by_score(std::span<const std::size_t> pool, std::span<const std::size_t> batch,
                            const DeltaMatrix& delta, double alpha) {
  if (pool.empty()) throw UsageError("select_by_score: empty pool");
  std::vector<double> gain(delta.size(), 0.0);
  std::vector<std::size_t> candidates(pool.begin(), pool.end());
  for (const auto u : candidates) gain[u] = incremental_score(u, batch, delta);
  return pick_at_rank(candidates, gain, alpha);
}

std::vector<Batch> build_batches(const DeltaMatrix& delta, double alpha, std::size_t batch_size, std::mt19937_64& rng,
                                 const BatchOptions& options) {
  if (batch_size < 1) throw UsageError("batch size must be at least 1");
  const std::size_t n = delta.size();
  const bool guard = !options.groups.empty();
  if (guard && options.groups.size() != n) throw UsageError("group list does not match the delta size");
  quantile_rank(alpha, 1);  // validates alpha

  // Pool kept sorted so the uniform seed draw maps to ids independently of removal history.
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  std::vector<double> gain(n, 0.0);
  std::vector<std::size_t> candidates;
  std::vector<Batch> batches;

  auto take = [&](std::size_t id) { pool.erase(std::lower_bound(pool.begin(), pool.end(), id)); };

  while (!pool.empty()) {
    std::uniform_int_distribution<std::size_t> draw(0, pool.size() - 1);
    Batch batch;
    batch.seed_id = pool[draw(rng)];
    batch.ids.push_back(batch.seed_id);
    take(batch.seed_id);
    for (const auto u : pool) gain[u] = pair_gain(batch.seed_id, u, delta);

    while (batch.ids.size() < batch_size && !pool.empty()) {
      candidates.clear();
      for (const auto u : pool) {
        if (guard && std::any_of(batch.ids.begin(), batch.ids.end(),
                                 [&](std::size_t m) { return options.groups[m] == options.groups[u]; })) {
          continue;
        }
        candidates.push_back(u);
      }
      if (candidates.empty()) break;
      const std::size_t chosen = pick_at_rank(candidates, gain, alpha);
      batch.ids.push_back(chosen);
      take(chosen);
      for (const auto u : pool) gain[u] += pair_gain(chosen, u, delta);
    }
    batch.score = batch_score(batch.ids, delta);
    batches.push_back(std::move(batch));
  }
  return batches;
}

std::vector<Batch> random_batches(const DeltaMatrix& delta, std::size_t batch_size, std::mt19937_64& rng,
                                  const BatchOptions& options) {
  if (batch_size < 1) throw UsageError("batch size must be at least 1");
  const std::size_t n = delta.size();
  const bool guard = !options.groups.empty();
  if (guard && options.groups.size() != n) throw UsageError("group list does not match the delta size");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Batch> batches;
  if (!guard) {
    for (std::size_t start = 0; start < n; start += batch_size) {
      Batch b;
      b.ids.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                   order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + batch_size)));
      b.seed_id = b.ids.front();
      b.score = batch_score(b.ids, delta);
      batches.push_back(std::move(b));
    }
    return batches;
  }

  // With the duplicate guard, fill each batch by scanning the shuffled order.
  std::vector<bool> used(n, false);
  std::size_t remaining = n;
  while (remaining > 0) {
    Batch b;
    for (const auto id : order) {
      if (used[id] || b.ids.size() >= batch_size) continue;
      if (std::any_of(b.ids.begin(), b.ids.end(), [&](std::size_t m) { return options.groups[m] == options.groups[id]; })) {
        continue;
      }
      b.ids.push_back(id);
      used[id] = true;
      --remaining;
    }
    b.seed_id = b.ids.front();
    b.score = batch_score(b.ids, delta);
    batches.push_back(std::move(b));
  }
  return batches;
}

std::string_view to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::random: return "random";
    case ScheduleKind::easy_only: return "easy";
    case ScheduleKind::hard_only: return "hard";
    case ScheduleKind::linear: return "linear";
    case ScheduleKind::sqrt: return "sqrt";
    case ScheduleKind::log: return "log";
  }
  return "?";
}

ScheduleKind parse_schedule(std::string_view name) {
  for (const auto kind : {ScheduleKind::random, ScheduleKind::easy_only, ScheduleKind::hard_only, ScheduleKind::linear,
                          ScheduleKind::sqrt, ScheduleKind::log}) {
    if (to_string(kind) == name) return kind;
  }
  throw UsageError("unknown schedule '" + std::string(name) + "' (expected random, easy, hard, linear, sqrt or log)");
}

std::optional<double> schedule_alpha(const Schedule& schedule, double epoch) {
  if (schedule.total_epochs < 1) throw UsageError("schedule needs at least one epoch");
  const double total = schedule.total_epochs;
  if (!(epoch >= 0.0 && epoch <= total)) {
    throw UsageError("epoch " + format_decimal(epoch) + " outside [0, " + std::to_string(schedule.total_epochs) + "]");
  }
  const double progress = epoch / total;
  double alpha = 0.0;
  switch (schedule.kind) {
    case ScheduleKind::random: return std::nullopt;
    case ScheduleKind::easy_only: alpha = 0.0; break;
    case ScheduleKind::hard_only: alpha = 1.0; break;
    case ScheduleKind::linear: alpha = progress; break;
    case ScheduleKind::sqrt: alpha = std::sqrt(progress); break;
    case ScheduleKind::log: alpha = std::log(1.0 + progress * (std::numbers::e - 1.0)); break;
  }
  return std::clamp(alpha, 0.0, 1.0);
}

std::uint64_t epoch_seed(std::uint64_t base_seed, int epoch) {
  // splitmix64 finalizer over the combined words.
  std::uint64_t z = base_seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(epoch) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<EpochPlan> plan_epochs(const Schedule& schedule, const DeltaMatrix& delta, std::size_t batch_size,
                                   std::uint64_t base_seed, const BatchOptions& options) {
  std::vector<EpochPlan> plans;
  plans.reserve(static_cast<std::size_t>(std::max(0, schedule.total_epochs)));
  for (int e = 0; e < schedule.total_epochs; ++e) {
    EpochPlan plan;
    plan.epoch = e;
    plan.alpha = schedule_alpha(schedule, e);
    plan.rng_seed = epoch_seed(base_seed, e);
    std::mt19937_64 rng(plan.rng_seed);
    plan.batches = plan.alpha ? build_batches(delta, *plan.alpha, batch_size, rng, options)
                              : random_batches(delta, batch_size, rng, options);
    plans.push_back(std::move(plan));
  }
  return plans;
}

std::string format_plans(std::span<const EpochPlan> plans) {
  std::string out;
  for (const auto& plan : plans) {
    for (std::size_t b = 0; b < plan.batches.size(); ++b) {
      const auto& batch = plan.batches[b];
      json line;
      line["epoch"] = plan.epoch;
      line["alpha"] = plan.alpha ? json(*plan.alpha) : json(nullptr);
      line["batch_index"] = b;
      line["ids"] = batch.ids;
      line["score"] = batch.score;
      line["seed_id"] = batch.seed_id;
      out += line.dump();
      out += '\n';
    }
  }
  return out;
}

void write_plans(const std::filesystem::path& path, std::span<const EpochPlan> plans) {
  write_text_file(path, format_plans(plans));
}

std::vector<EpochPlan> read_plans(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<EpochPlan> plans;
  std::string text;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    try {
      const json line = json::parse(text);
      const int epoch = line.at("epoch").get<int>();
      const std::size_t index = line.at("batch_index").get<std::size_t>();
      if (plans.empty() || plans.back().epoch != epoch) {
        if (epoch != static_cast<int>(plans.size())) {
          throw FormatError(where + ": expected epoch " + std::to_string(plans.size()) + ", found " +
                            std::to_string(epoch));
        }
        EpochPlan plan;
        plan.epoch = epoch;
        if (!line.at("alpha").is_null()) plan.alpha = line.at("alpha").get<double>();
        plans.push_back(std::move(plan));
      }
      auto& plan = plans.back();
      if (index != plan.batches.size()) {
        throw FormatError(where + ": expected batch_index " + std::to_string(plan.batches.size()));
      }
      Batch batch;
      batch.ids = line.at("ids").get<std::vector<std::size_t>>();
      batch.score = line.at("score").get<double>();
      batch.seed_id = line.at("seed_id").get<std::size_t>();
      if (batch.ids.empty()) throw FormatError(where + ": empty batch");
      plan.batches.push_back(std::move(batch));
    } catch (const json::exception& e) {
      throw FormatError(where + ": malformed plan line: " + e.what());
    }
  }
  return plans;
}

void check_partition(const EpochPlan& plan, std::size_t n) {
  std::vector<bool> seen(n, false);
  std::size_t total = 0;
  for (const auto& batch : plan.batches) {
    for (const auto id : batch.ids) {
      if (id >= n) {
        throw FormatError("epoch " + std::to_string(plan.epoch) + ": id " + std::to_string(id) +
                          " outside the dataset of " + std::to_string(n));
      }
      if (seen[id]) throw FormatError("epoch " + std::to_string(plan.epoch) + ": id " + std::to_string(id) + " repeats");
      seen[id] = true;
      ++total;
    }
  }
  if (total != n) {
    throw FormatError("epoch " + std::to_string(plan.epoch) + ": plan covers " + std::to_string(total) + " of " +
                      std::to_string(n) + " ids");
  }
}

}  // namespace scl
