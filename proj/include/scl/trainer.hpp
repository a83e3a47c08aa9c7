#pragma once

#include "scl/dataset.hpp"
#include "scl/encoder.hpp"
#include "scl/selection.hpp"
#include "scl/snapshot.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace scl {

struct TrainConfig {
  int epochs = 40;
  std::size_t batch_size = 16;
  double learning_rate = 0.05;
  int checkpoint_interval = 5;
  Aggregation mode = Aggregation::cico;
  std::uint64_t seed = 0;
  Eigen::Index embed_dim = 4;
  bool freeze_text = false;
};

void validate(const TrainConfig& cfg);

/// Snapshot epochs: 0, every interval, and the final epoch.
std::vector<int> checkpoint_schedule(int epochs, int interval);

struct EpochMetrics {
  int epoch = 0;  // 1-based count of completed epochs
  double loss = 0.0;  // mean batch loss over the epoch, taken before each update
  std::optional<double> alpha;
  std::optional<double> mean_batch_score;
};

struct TrainResult {
  SnapshotSeries series;
  DualEncoder encoder;
  std::vector<EpochMetrics> log;
};

/// Embeds every sample with the current encoder.
Snapshot take_snapshot(const DualEncoder& enc, const ToyDataset& data, int checkpoint);

/// Plain gradient descent over uniformly shuffled batches. Snapshots are taken
/// before the first update and at every checkpoint epoch. Starts from
/// init_encoder(cfg) unless `init` is given. Throws DivergenceError on a
/// non-finite loss.
TrainResult train_reference(const ToyDataset& data, const TrainConfig& cfg, std::optional<DualEncoder> init = {});

/// Same optimizer, but epoch e trains on the batches of plans[e] in order.
TrainResult train_selective(const ToyDataset& data, const TrainConfig& cfg, std::span<const EpochPlan> plans,
                            std::optional<DualEncoder> init = {});

/// CSV header `epoch,loss,alpha,mean_batch_score`; absent values are empty fields.
std::string format_loss_log(std::span<const EpochMetrics> log);
std::vector<EpochMetrics> read_loss_log(const std::filesystem::path& path);

}  // namespace scl
