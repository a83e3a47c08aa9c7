#pragma once

#include "scl/encoder.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>

namespace scl::gradcheck {

/// Max-norm relative error between analytic gradients and central differences
/// over every encoder parameter, log tau included.
inline double relative_error(const DualEncoder& enc, std::span<const std::size_t> ids, const ToyDataset& data,
                             Aggregation mode, double step = 1e-5) {
  const LossGrads analytic = loss_and_grads(enc, ids, data, mode);
  auto loss_at = [&](const DualEncoder& e) { return loss_and_grads(e, ids, data, mode).loss; };

  double max_diff = 0.0, max_ref = 0.0;
  auto probe = [&](double& param, double grad, DualEncoder& e) {
    const double saved = param;
    param = saved + step;
    const double up = loss_at(e);
    param = saved - step;
    const double down = loss_at(e);
    param = saved;
    const double fd = (up - down) / (2.0 * step);
    max_diff = std::max(max_diff, std::abs(grad - fd));
    max_ref = std::max(max_ref, std::abs(fd));
  };

  DualEncoder e = enc;
  for (Eigen::Index r = 0; r < e.video_proj.rows(); ++r) {
    for (Eigen::Index c = 0; c < e.video_proj.cols(); ++c) probe(e.video_proj(r, c), analytic.video_proj(r, c), e);
  }
  for (Eigen::Index r = 0; r < e.text_proj.rows(); ++r) {
    for (Eigen::Index c = 0; c < e.text_proj.cols(); ++c) probe(e.text_proj(r, c), analytic.text_proj(r, c), e);
  }
  probe(e.log_tau, analytic.log_tau, e);
  return max_diff / std::max(max_ref, 1e-8);
}

}  // namespace scl::gradcheck
