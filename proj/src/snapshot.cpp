#include "scl/snapshot.hpp"

#include "scl/errors.hpp"
#include "scl/matrix_io.hpp"
#include "scl/parallel.hpp"

#include <json.hpp>

#include <cmath>
#include <string>

namespace scl {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string_view to_string(Aggregation mode) {
  switch (mode) {
    case Aggregation::cls: return "cls";
    case Aggregation::mean: return "mean";
    case Aggregation::cico: return "cico";
  }
  return "?";
}

Aggregation parse_aggregation(std::string_view name) {
  if (name == "cls") return Aggregation::cls;
  if (name == "mean") return Aggregation::mean;
  if (name == "cico") return Aggregation::cico;
  throw UsageError("unknown aggregation mode '" + std::string(name) + "' (expected cls, mean or cico)");
}

void validate_checkpoints(const std::vector<int>& checkpoints) {
  if (checkpoints.empty()) throw FormatError("series has no checkpoints");
  if (checkpoints.front() != 0) {
    throw FormatError("first checkpoint must be 0, found " + std::to_string(checkpoints.front()));
  }
  for (std::size_t i = 1; i < checkpoints.size(); ++i) {
    if (checkpoints[i] <= checkpoints[i - 1]) {
      throw FormatError("checkpoints are not strictly increasing: " + std::to_string(checkpoints[i - 1]) +
                        " followed by " + std::to_string(checkpoints[i]));
    }
  }
}

void validate(const Snapshot& snapshot) {
  const std::size_t n = snapshot.video.size();
  if (snapshot.text.size() != n) {
    throw FormatError("checkpoint " + std::to_string(snapshot.checkpoint) + ": " + std::to_string(n) +
                      " video sequences but " + std::to_string(snapshot.text.size()) + " text sequences");
  }
  const Eigen::Index d = snapshot.dim();
  auto check = [&](const std::vector<FeatureSequence>& seqs, Modality modality, const char* name) {
    for (std::size_t i = 0; i < seqs.size(); ++i) {
      const auto& s = seqs[i];
      const std::string where = std::string("checkpoint ") + std::to_string(snapshot.checkpoint) + " " +
                                name + " " + std::to_string(i);
      if (s.sample_id != i) throw FormatError(where + ": sample id " + std::to_string(s.sample_id));
      if (s.modality != modality) throw FormatError(where + ": wrong modality");
      if (s.features.rows() < 1 || s.features.cols() < 1) throw FormatError(where + ": empty features");
      if (s.features.cols() != d) throw FormatError(where + ": dimension mismatch");
      if (!s.features.allFinite()) throw FormatError(where + ": non-finite features");
    }
  };
  check(snapshot.video, Modality::video, "video");
  check(snapshot.text, Modality::text, "text");
}

void validate(const SnapshotSeries& series) {
  validate_checkpoints(series.checkpoints);
  const std::size_t count = series.similarity_mode() ? series.similarities.size() : series.snapshots.size();
  if (!series.snapshots.empty() && !series.similarities.empty()) {
    throw FormatError("series holds both embeddings and similarity matrices");
  }
  if (count != series.checkpoints.size()) {
    throw FormatError("series has " + std::to_string(series.checkpoints.size()) + " checkpoints but " +
                      std::to_string(count) + " entries");
  }
  const auto n = static_cast<Eigen::Index>(series.n);
  for (std::size_t c = 0; c < count; ++c) {
    const int k = series.checkpoints[c];
    if (series.similarity_mode()) {
      const auto& s = series.similarities[c];
      if (s.checkpoint != k) throw FormatError("similarity matrix checkpoint mismatch at " + std::to_string(k));
      if (s.values.rows() != n || s.values.cols() != n) {
        throw FormatError("checkpoint " + std::to_string(k) + ": similarity matrix is not " +
                          std::to_string(n) + "x" + std::to_string(n));
      }
      if (!s.values.allFinite()) throw FormatError("checkpoint " + std::to_string(k) + ": non-finite similarity");
    } else {
      const auto& s = series.snapshots[c];
      if (s.checkpoint != k) throw FormatError("snapshot checkpoint mismatch at " + std::to_string(k));
      validate(s);
      if (s.size() != series.n) {
        throw FormatError("checkpoint " + std::to_string(k) + ": expected " + std::to_string(series.n) +
                          " samples, found " + std::to_string(s.size()));
      }
      if (s.dim() != series.dim) {
        throw FormatError("checkpoint " + std::to_string(k) + ": expected dim " + std::to_string(series.dim) +
                          ", found " + std::to_string(s.dim()));
      }
    }
  }
}

double cosine_similarity(const Eigen::Ref<const Eigen::RowVectorXd>& u,
                         const Eigen::Ref<const Eigen::RowVectorXd>& v) {
  if (u.size() != v.size() || u.size() < 1) {
    throw FormatError("cosine_similarity: length mismatch (" + std::to_string(u.size()) + " vs " +
                      std::to_string(v.size()) + ")");
  }
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) throw DegenerateError("degenerate embedding: zero-norm vector");
  return u.dot(v) / (nu * nv);
}

Eigen::MatrixXd token_cosines(const Eigen::MatrixXd& video, const Eigen::MatrixXd& text) {
  if (video.cols() != text.cols()) throw FormatError("token_cosines: dimension mismatch");
  const Eigen::VectorXd vn = video.rowwise().norm();
  const Eigen::VectorXd tn = text.rowwise().norm();
  if ((vn.array() == 0.0).any() || (tn.array() == 0.0).any()) {
    throw DegenerateError("degenerate embedding: zero-norm token row");
  }
  Eigen::MatrixXd c = video * text.transpose();
  c.array().colwise() /= vn.array();
  c.array().rowwise() /= tn.transpose().array();
  return c;
}

DirectionalScores cico_scores(const Eigen::MatrixXd& video, const Eigen::MatrixXd& text) {
  const Eigen::MatrixXd c = token_cosines(video, text);
  return {c.rowwise().maxCoeff().mean(), c.colwise().maxCoeff().mean()};
}

double aggregate_similarity(const Eigen::MatrixXd& video, const Eigen::MatrixXd& text, Aggregation mode) {
  if (video.rows() < 1 || text.rows() < 1) throw FormatError("aggregate_similarity: empty sequence");
  if (video.cols() != text.cols()) throw FormatError("aggregate_similarity: dimension mismatch");
  switch (mode) {
    case Aggregation::cls:
      return cosine_similarity(video.row(0), text.row(0));
    case Aggregation::mean:
      return cosine_similarity(video.colwise().mean(), text.colwise().mean());
    case Aggregation::cico: {
      const auto s = cico_scores(video, text);
      return 0.5 * (s.video_to_text + s.text_to_video);
    }
  }
  return 0.0;
}

double aggregate_similarity(const FeatureSequence& video, const FeatureSequence& text, Aggregation mode) {
  return aggregate_similarity(video.features, text.features, mode);
}

SimilarityMatrix similarity_matrix(const Snapshot& snapshot, Aggregation mode) {
  validate(snapshot);
  const std::size_t n = snapshot.size();
  SimilarityMatrix out{snapshot.checkpoint, Eigen::MatrixXd(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n))};
  parallel_for(n, [&](std::size_t i) {
    for (std::size_t j = 0; j < n; ++j) {
      try {
        out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            aggregate_similarity(snapshot.video[i], snapshot.text[j], mode);
      } catch (const DegenerateError& e) {
        throw DegenerateError("checkpoint " + std::to_string(snapshot.checkpoint) + ", pair (video " +
                              std::to_string(i) + ", text " + std::to_string(j) + "): " + e.what());
      }
    }
  });
  return out;
}

std::vector<SimilarityMatrix> similarity_matrices(const SnapshotSeries& series, Aggregation mode) {
  validate(series);
  if (series.similarity_mode()) return series.similarities;
  std::vector<SimilarityMatrix> out;
  out.reserve(series.snapshots.size());
  for (const auto& s : series.snapshots) out.push_back(similarity_matrix(s, mode));
  return out;
}

namespace {

fs::path checkpoint_dir(const fs::path& dir, int k) { return dir / ("ckpt_" + std::to_string(k)); }

std::vector<Eigen::MatrixXd> to_blocks(const std::vector<FeatureSequence>& seqs) {
  std::vector<Eigen::MatrixXd> blocks;
  blocks.reserve(seqs.size());
  for (const auto& s : seqs) blocks.push_back(s.features);
  return blocks;
}

std::vector<FeatureSequence> from_blocks(std::vector<Eigen::MatrixXd> blocks, Modality modality) {
  std::vector<FeatureSequence> seqs;
  seqs.reserve(blocks.size());
  for (std::size_t i = 0; i < blocks.size(); ++i) seqs.push_back({i, modality, std::move(blocks[i])});
  return seqs;
}

template <typename T>
T manifest_field(const json& manifest, const char* key, const fs::path& path) {
  if (!manifest.contains(key)) throw FormatError(path.string() + ": manifest lacks field '" + key + "'");
  try {
    return manifest.at(key).get<T>();
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": bad manifest field '" + key + "': " + e.what());
  }
}

}  // namespace

void write_series(const SnapshotSeries& series, const fs::path& dir) {
  validate(series);
  fs::create_directories(dir);
  json manifest;
  manifest["n"] = series.n;
  manifest["dim"] = series.dim;
  manifest["checkpoints"] = series.checkpoints;
  manifest["aggregation"] = std::string(to_string(series.aggregation));
  manifest["format"] = series.similarity_mode() ? "similarity" : "embedding";
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");

  for (std::size_t c = 0; c < series.checkpoints.size(); ++c) {
    const fs::path cdir = checkpoint_dir(dir, series.checkpoints[c]);
    fs::create_directories(cdir);
    if (series.similarity_mode()) {
      write_dense_matrix(cdir / "sim.mat", series.similarities[c].values);
    } else {
      write_matrix_file(cdir / "video.mat", to_blocks(series.snapshots[c].video));
      write_matrix_file(cdir / "text.mat", to_blocks(series.snapshots[c].text));
    }
  }
}

SnapshotSeries read_series(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  json manifest;
  try {
    manifest = json::parse(read_text_file(manifest_path));
  } catch (const json::parse_error& e) {
    throw FormatError(manifest_path.string() + ": malformed manifest: " + e.what());
  }
  if (!manifest.is_object()) throw FormatError(manifest_path.string() + ": manifest is not a JSON object");

  SnapshotSeries series;
  series.n = manifest_field<std::size_t>(manifest, "n", manifest_path);
  series.dim = manifest_field<Eigen::Index>(manifest, "dim", manifest_path);
  series.checkpoints = manifest_field<std::vector<int>>(manifest, "checkpoints", manifest_path);
  series.aggregation = parse_aggregation(manifest_field<std::string>(manifest, "aggregation", manifest_path));
  const std::string format =
      manifest.contains("format") ? manifest_field<std::string>(manifest, "format", manifest_path) : "embedding";
  if (format != "embedding" && format != "similarity") {
    throw FormatError(manifest_path.string() + ": unknown format '" + format + "'");
  }
  validate_checkpoints(series.checkpoints);
  if (series.n < 1) throw FormatError(manifest_path.string() + ": n must be positive");

  const auto n = static_cast<Eigen::Index>(series.n);
  for (const int k : series.checkpoints) {
    const fs::path cdir = checkpoint_dir(dir, k);
    if (format == "similarity") {
      series.similarities.push_back({k, read_dense_matrix(cdir / "sim.mat", n)});
      continue;
    }
    if (series.dim < 1) throw FormatError(manifest_path.string() + ": dim must be positive");
    Snapshot snap;
    snap.checkpoint = k;
    snap.video = from_blocks(read_matrix_file(cdir / "video.mat", series.dim), Modality::video);
    snap.text = from_blocks(read_matrix_file(cdir / "text.mat", series.dim), Modality::text);
    if (snap.video.size() != series.n || snap.text.size() != series.n) {
      throw FormatError(cdir.string() + ": manifest declares n = " + std::to_string(series.n) + " but found " +
                        std::to_string(snap.video.size()) + " video and " + std::to_string(snap.text.size()) +
                        " text sequences");
    }
    series.snapshots.push_back(std::move(snap));
  }
  validate(series);
  return series;
}

}  // namespace scl
