#include "scl/trainer.hpp"

#include "scl/errors.hpp"
#include "scl/matrix_io.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace scl {

void validate(const TrainConfig& cfg) {
  if (cfg.epochs < 0) throw UsageError("epochs must be non-negative");
  if (cfg.batch_size < 1) throw UsageError("batch size must be positive");
  if (!(cfg.learning_rate > 0.0)) throw UsageError("learning rate must be positive");
  if (cfg.checkpoint_interval < 1) throw UsageError("checkpoint interval must be positive");
  if (cfg.embed_dim < 1) throw UsageError("embedding dimension must be positive");
}

std::vector<int> checkpoint_schedule(int epochs, int interval) {
  if (interval < 1) throw UsageError("checkpoint interval must be positive");
  std::vector<int> out{0};
  for (int e = interval; e < epochs; e += interval) out.push_back(e);
  if (epochs > 0) out.push_back(epochs);
  return out;
}

Snapshot take_snapshot(const DualEncoder& enc, const ToyDataset& data, int checkpoint) {
  Snapshot snap;
  snap.checkpoint = checkpoint;
  snap.video.reserve(data.size());
  snap.text.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    snap.video.push_back(encode(enc, data.video[i], Modality::video, i));
    snap.text.push_back(encode(enc, data.text[i], Modality::text, i));
  }
  return snap;
}

namespace {

// Shared epoch loop; `batches_for(e)` yields the id lists for 0-based epoch e.
template <typename BatchSource>
TrainResult run_training(const ToyDataset& data, const TrainConfig& cfg, std::optional<DualEncoder> init,
                         BatchSource&& batches_for) {
  validate(data);
  validate(cfg);
  if (data.size() == 0) throw UsageError("cannot train on an empty dataset");

  TrainResult result;
  result.encoder = init ? *init : init_encoder(cfg.embed_dim, data.dims, cfg.seed);
  DualEncoder& enc = result.encoder;
  if (enc.video_proj.cols() != data.dims.video_dim || enc.text_proj.cols() != data.dims.text_dim) {
    throw FormatError("initial encoder does not match the dataset dimensions");
  }

  const std::vector<int> checkpoints = checkpoint_schedule(cfg.epochs, cfg.checkpoint_interval);
  result.series.checkpoints = checkpoints;
  result.series.aggregation = cfg.mode;
  result.series.n = data.size();
  result.series.dim = enc.embed_dim();
  result.series.snapshots.push_back(take_snapshot(enc, data, 0));
  std::size_t next_checkpoint = 1;

  for (int e = 0; e < cfg.epochs; ++e) {
    EpochMetrics metrics;
    metrics.epoch = e + 1;
    const std::vector<std::vector<std::size_t>> batches = batches_for(e, metrics);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const LossGrads g = loss_and_grads(enc, batches[b], data, cfg.mode);
      if (!std::isfinite(g.loss) || !g.video_proj.allFinite() || !g.text_proj.allFinite() ||
          !std::isfinite(g.log_tau)) {
        throw DivergenceError("non-finite loss or gradient at epoch " + std::to_string(e + 1) + ", batch " +
                              std::to_string(b) + " (tau = " + format_decimal(enc.tau()) + ")");
      }
      loss_sum += g.loss;
      enc.video_proj -= cfg.learning_rate * g.video_proj;
      if (!cfg.freeze_text) enc.text_proj -= cfg.learning_rate * g.text_proj;
      enc.log_tau -= cfg.learning_rate * g.log_tau;
      const double tau = enc.tau();
      if (!enc.video_proj.allFinite() || !enc.text_proj.allFinite() || !(tau > 0.0) || !std::isfinite(tau)) {
        throw DivergenceError("parameters left the finite range after epoch " + std::to_string(e + 1) + ", batch " +
                              std::to_string(b) + " (log tau = " + format_decimal(enc.log_tau) + ")");
      }
    }
    metrics.loss = batches.empty() ? 0.0 : loss_sum / static_cast<double>(batches.size());
    result.log.push_back(metrics);

    if (next_checkpoint < checkpoints.size() && checkpoints[next_checkpoint] == e + 1) {
      result.series.snapshots.push_back(take_snapshot(enc, data, e + 1));
      ++next_checkpoint;
    }
  }
  return result;
}

}  // namespace

TrainResult train_reference(const ToyDataset& data, const TrainConfig& cfg, std::optional<DualEncoder> init) {
  return run_training(data, cfg, std::move(init), [&](int e, EpochMetrics&) {
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(epoch_seed(cfg.seed, e));
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                           order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + cfg.batch_size)));
    }
    return batches;
  });
}

TrainResult train_selective(const ToyDataset& data, const TrainConfig& cfg, std::span<const EpochPlan> plans,
                            std::optional<DualEncoder> init) {
  if (plans.size() != static_cast<std::size_t>(std::max(0, cfg.epochs))) {
    throw FormatError("plan covers " + std::to_string(plans.size()) + " epochs, training expects " +
                      std::to_string(cfg.epochs));
  }
  for (const auto& plan : plans) check_partition(plan, data.size());
  return run_training(data, cfg, std::move(init), [&](int e, EpochMetrics& metrics) {
    const EpochPlan& plan = plans[static_cast<std::size_t>(e)];
    metrics.alpha = plan.alpha;
    std::vector<std::vector<std::size_t>> batches;
    double score_sum = 0.0;
    for (const auto& batch : plan.batches) {
      batches.push_back(batch.ids);
      score_sum += batch.score;
    }
    if (!plan.batches.empty()) metrics.mean_batch_score = score_sum / static_cast<double>(plan.batches.size());
    return batches;
  });
}

std::string format_loss_log(std::span<const EpochMetrics> log) {
  std::string out = "epoch,loss,alpha,mean_batch_score\n";
  for (const auto& m : log) {
    out += std::to_string(m.epoch) + ',' + format_decimal(m.loss) + ',' + (m.alpha ? format_decimal(*m.alpha) : "") +
           ',' + (m.mean_batch_score ? format_decimal(*m.mean_batch_score) : "") + '\n';
  }
  return out;
}

std::vector<EpochMetrics> read_loss_log(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line) || line.rfind("epoch,loss,alpha,mean_batch_score", 0) != 0) {
    throw FormatError(path.string() + ": missing loss log header");
  }
  std::vector<EpochMetrics> log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    while (cells.size() < 4) cells.emplace_back();
    if (cells.size() != 4) throw FormatError(path.string() + ": expected 4 fields per row");
    EpochMetrics m;
    try {
      m.epoch = std::stoi(cells[0]);
    } catch (const std::logic_error&) {
      throw FormatError(path.string() + ": bad epoch field '" + cells[0] + "'");
    }
    m.loss = parse_decimal(cells[1]);
    if (!cells[2].empty()) m.alpha = parse_decimal(cells[2]);
    if (!cells[3].empty()) m.mean_batch_score = parse_decimal(cells[3]);
    log.push_back(m);
  }
  return log;
}

}  // namespace scl
