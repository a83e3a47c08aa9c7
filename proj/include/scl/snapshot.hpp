#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <string_view>
#include <vector>

namespace scl {

enum class Modality { video, text };

/// How a token sequence collapses to one pair similarity.
enum class Aggregation {
  cls,   // cosine of row 0 (the global token) of each sequence
  mean,  // cosine of the column-wise mean of each sequence
  cico,  // token-level max-then-mean, averaged over both directions
};

std::string_view to_string(Aggregation mode);
Aggregation parse_aggregation(std::string_view name);

/// Token features of one sample: T rows by d columns.
struct FeatureSequence {
  std::size_t sample_id = 0;
  Modality modality = Modality::video;
  Eigen::MatrixXd features;
};

/// Embeddings of every sample, both modalities, at one reference checkpoint.
struct Snapshot {
  int checkpoint = 0;
  std::vector<FeatureSequence> video;
  std::vector<FeatureSequence> text;

  std::size_t size() const { return video.size(); }
  Eigen::Index dim() const { return video.empty() ? 0 : video.front().features.cols(); }
};

/// Row i, column j holds s^k(video i, text j).
struct SimilarityMatrix {
  int checkpoint = 0;
  Eigen::MatrixXd values;
};

/// Per-checkpoint embeddings (or precomputed similarities) of a paired dataset.
///
/// Exactly one of `snapshots` and `similarities` is populated. The similarity
/// form exists so externally trained models can hand over N x N matrices
/// without exporting embeddings.
struct SnapshotSeries {
  std::vector<int> checkpoints;
  std::vector<Snapshot> snapshots;
  std::vector<SimilarityMatrix> similarities;
  Aggregation aggregation = Aggregation::cico;
  std::size_t n = 0;
  Eigen::Index dim = 0;

  bool similarity_mode() const { return !similarities.empty(); }
  int final_checkpoint() const { return checkpoints.empty() ? 0 : checkpoints.back(); }
};

/// Throws FormatError (or DegenerateError for non-finite rows) on any broken invariant.
void validate(const Snapshot& snapshot);
void validate(const SnapshotSeries& series);

/// Checks checkpoints start at 0 and increase strictly.
void validate_checkpoints(const std::vector<int>& checkpoints);

/// dot(u, v) / (|u| |v|). Throws DegenerateError if either norm is zero.
double cosine_similarity(const Eigen::Ref<const Eigen::RowVectorXd>& u,
                         const Eigen::Ref<const Eigen::RowVectorXd>& v);

/// Directional token-level scores for a video/text sequence pair.
///   video_to_text: mean over video tokens of the max cosine against text tokens
///   text_to_video: mean over text tokens of the max cosine against video tokens
struct DirectionalScores {
  double video_to_text = 0.0;
  double text_to_video = 0.0;
};
DirectionalScores cico_scores(const Eigen::MatrixXd& video, const Eigen::MatrixXd& text);

/// Row-wise cosine between every video token and every text token (T_v x T_t).
Eigen::MatrixXd token_cosines(const Eigen::MatrixXd& video, const Eigen::MatrixXd& text);

double aggregate_similarity(const FeatureSequence& video, const FeatureSequence& text, Aggregation mode);
double aggregate_similarity(const Eigen::MatrixXd& video, const Eigen::MatrixXd& text, Aggregation mode);

/// All N x N video/text similarities at one checkpoint, diagonal included.
/// Entries are computed in parallel; the result is independent of thread count.
SimilarityMatrix similarity_matrix(const Snapshot& snapshot, Aggregation mode);

/// Similarity matrices for every checkpoint of the series. Precomputed matrices
/// are returned as stored; `mode` applies only to embedding series.
std::vector<SimilarityMatrix> similarity_matrices(const SnapshotSeries& series, Aggregation mode);

/// Directory layout:
///   manifest.json              {"n", "dim", "checkpoints", "aggregation", "format"}
///   ckpt_<k>/video.mat         embedding series
///   ckpt_<k>/text.mat
///   ckpt_<k>/sim.mat           similarity series
void write_series(const SnapshotSeries& series, const std::filesystem::path& dir);
SnapshotSeries read_series(const std::filesystem::path& dir);

}  // namespace scl
