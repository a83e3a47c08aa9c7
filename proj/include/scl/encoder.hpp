#pragma once

#include "scl/dataset.hpp"
#include "scl/snapshot.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <span>

namespace scl {

/// Two linear token projections into a shared d-dimensional space plus a
/// temperature kept in log space so it stays positive under any update.
struct DualEncoder {
  Eigen::MatrixXd video_proj;  // d x d_v
  Eigen::MatrixXd text_proj;   // d x d_t
  double log_tau = std::log(0.07);

  double tau() const { return std::exp(log_tau); }
  Eigen::Index embed_dim() const { return video_proj.rows(); }
};

/// Gaussian init with variance 1 / fan_in; log_tau = ln 0.07.
DualEncoder init_encoder(Eigen::Index embed_dim, const ToyDims& dims, std::uint64_t seed);

/// Applies the modality's projection to every token row: T x d_in -> T x d.
FeatureSequence encode(const DualEncoder& enc, const Eigen::MatrixXd& x, Modality modality, std::size_t sample_id = 0);

/// Symmetric temperature-scaled cross entropy with the diagonal as targets:
///   -(1/2B) [ sum_i log softmax(S_v2t / tau)_ii + sum_i log softmax(S_t2v / tau)_ii ]
double contrastive_loss(const Eigen::MatrixXd& s_v2t, const Eigen::MatrixXd& s_t2v, double tau);

/// Loss plus its derivatives with respect to both similarity matrices and log tau.
struct ContrastiveGrads {
  double loss = 0.0;
  Eigen::MatrixXd d_v2t;
  Eigen::MatrixXd d_t2v;
  double d_log_tau = 0.0;
};
ContrastiveGrads contrastive_loss_grads(const Eigen::MatrixXd& s_v2t, const Eigen::MatrixXd& s_t2v, double log_tau);

/// B x B similarity matrices of a batch. Row i of `v2t` scores video i against
/// every text; row i of `t2v` scores text i against every video. For cls and
/// mean `t2v` is the transpose of `v2t`; for cico each direction uses its own
/// max-then-mean score.
struct BatchSimilarities {
  Eigen::MatrixXd v2t;
  Eigen::MatrixXd t2v;
};
BatchSimilarities batch_similarities(const DualEncoder& enc, std::span<const std::size_t> ids, const ToyDataset& data,
                                     Aggregation mode);

struct LossGrads {
  double loss = 0.0;
  Eigen::MatrixXd video_proj;
  Eigen::MatrixXd text_proj;
  double log_tau = 0.0;
};

/// Batch loss and exact gradients through projection, aggregation, cosine and
/// the scaled softmax. cico takes the subgradient of max at the first maximizer.
LossGrads loss_and_grads(const DualEncoder& enc, std::span<const std::size_t> ids, const ToyDataset& data,
                         Aggregation mode);

/// encoder.json: {"video_proj": [[...]], "text_proj": [[...]], "log_tau": x}
void write_encoder(const DualEncoder& enc, const std::filesystem::path& path);
DualEncoder read_encoder(const std::filesystem::path& path);

}  // namespace scl
