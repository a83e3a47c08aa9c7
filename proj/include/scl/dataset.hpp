#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace scl {

struct ToyDims {
  Eigen::Index video_dim = 4;
  Eigen::Index text_dim = 4;
  Eigen::Index video_tokens = 3;
  Eigen::Index text_tokens = 3;
};

/// Parses "d_v,d_t,T_v,T_t".
ToyDims parse_dims(std::string_view text);

/// Histogram of duplicate-group sizes: (group size, number of groups).
struct GroupSpec {
  std::vector<std::pair<std::size_t, std::size_t>> entries;

  std::size_t total() const;
};

/// Parses "3:10,1:34".
GroupSpec parse_groups(std::string_view text);
std::string to_string(const GroupSpec& spec);

/// Paired raw samples. Samples sharing a group id carry bitwise-identical text.
struct ToyDataset {
  ToyDims dims;
  std::vector<Eigen::MatrixXd> video;  // T_v x d_v each
  std::vector<Eigen::MatrixXd> text;   // T_t x d_t each
  std::vector<int> group;
  double noise = 0.0;
  std::uint64_t seed = 0;

  std::size_t size() const { return video.size(); }
};

/// One latent text per group; each member's video is a fixed linear mix of
/// that text's tokens plus Gaussian noise of scale `noise`. Group membership is
/// shuffled over ids. Deterministic for a given seed.
ToyDataset generate_synthetic(std::size_t n, const ToyDims& dims, const GroupSpec& groups, double noise,
                              std::uint64_t seed);

void validate(const ToyDataset& data);

/// Directory layout: dataset.json (dims, groups, noise, seed), video.mat, text.mat.
void write_dataset(const ToyDataset& data, const std::filesystem::path& dir);
ToyDataset read_dataset(const std::filesystem::path& dir);

}  // namespace scl
