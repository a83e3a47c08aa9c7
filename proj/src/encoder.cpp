#include "scl/encoder.hpp"

#include "scl/errors.hpp"
#include "scl/matrix_io.hpp"

#include <json.hpp>

#include <random>
#include <vector>

namespace scl {

using json = nlohmann::ordered_json;

DualEncoder init_encoder(Eigen::Index embed_dim, const ToyDims& dims, std::uint64_t seed) {
  if (embed_dim < 1) throw UsageError("embedding dimension must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  auto draw = [&](Eigen::Index rows, Eigen::Index cols) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * dist(rng);
    }
    return m;
  };
  DualEncoder enc;
  enc.video_proj = draw(embed_dim, dims.video_dim);
  enc.text_proj = draw(embed_dim, dims.text_dim);
  return enc;
}

FeatureSequence encode(const DualEncoder& enc, const Eigen::MatrixXd& x, Modality modality, std::size_t sample_id) {
  const Eigen::MatrixXd& proj = modality == Modality::video ? enc.video_proj : enc.text_proj;
  if (x.cols() != proj.cols()) {
    throw FormatError(std::string("encode: ") + (modality == Modality::video ? "video" : "text") + " input has " +
                      std::to_string(x.cols()) + " columns, projection expects " + std::to_string(proj.cols()));
  }
  return {sample_id, modality, x * proj.transpose()};
}

namespace {

void check_loss_inputs(const Eigen::MatrixXd& s_v2t, const Eigen::MatrixXd& s_t2v) {
  if (s_v2t.rows() != s_v2t.cols() || s_t2v.rows() != s_t2v.cols() || s_v2t.rows() != s_t2v.rows()) {
    throw UsageError("contrastive loss needs two square matrices of equal size");
  }
  if (s_v2t.rows() < 1) throw UsageError("contrastive loss needs a non-empty batch");
}

// Per-row log-softmax cross entropy against the diagonal; adds its gradient w.r.t. Z into dz.
double row_cross_entropy(const Eigen::MatrixXd& z, double weight, Eigen::MatrixXd& dz) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double top = z.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (z.row(i).array() - top).exp();
    const double sum = e.sum();
    total += top + std::log(sum) - z(i, i);
    dz.row(i) = weight * (e / sum);
    dz(i, i) -= weight;
  }
  return total;
}

}  // namespace

ContrastiveGrads contrastive_loss_grads(const Eigen::MatrixXd& s_v2t, const Eigen::MatrixXd& s_t2v, double log_tau) {
  check_loss_inputs(s_v2t, s_t2v);
  const double tau = std::exp(log_tau);
  if (!(tau > 0.0) || !std::isfinite(tau)) throw UsageError("temperature must be positive and finite");
  const auto b = static_cast<double>(s_v2t.rows());
  const double weight = 1.0 / (2.0 * b);

  const Eigen::MatrixXd z1 = s_v2t / tau;
  const Eigen::MatrixXd z2 = s_t2v / tau;
  Eigen::MatrixXd dz1(z1.rows(), z1.cols());
  Eigen::MatrixXd dz2(z2.rows(), z2.cols());
  ContrastiveGrads g;
  g.loss = weight * (row_cross_entropy(z1, weight, dz1) + row_cross_entropy(z2, weight, dz2));
  g.d_v2t = dz1 / tau;
  g.d_t2v = dz2 / tau;
  // Z = S exp(-log_tau), so dZ/dlog_tau = -Z.
  g.d_log_tau = -(dz1.cwiseProduct(z1).sum() + dz2.cwiseProduct(z2).sum());
  return g;
}

double contrastive_loss(const Eigen::MatrixXd& s_v2t, const Eigen::MatrixXd& s_t2v, double tau) {
  if (!(tau > 0.0)) throw UsageError("temperature must be positive");
  return contrastive_loss_grads(s_v2t, s_t2v, std::log(tau)).loss;
}

namespace {

struct BatchFeatures {
  std::vector<Eigen::MatrixXd> video;  // T_v x d per member
  std::vector<Eigen::MatrixXd> text;   // T_t x d per member
};

BatchFeatures project_batch(const DualEncoder& enc, std::span<const std::size_t> ids, const ToyDataset& data) {
  BatchFeatures f;
  f.video.reserve(ids.size());
  f.text.reserve(ids.size());
  for (const auto id : ids) {
    if (id >= data.size()) {
      throw FormatError("batch id " + std::to_string(id) + " outside the dataset of " + std::to_string(data.size()));
    }
    f.video.push_back(encode(enc, data.video[id], Modality::video, id).features);
    f.text.push_back(encode(enc, data.text[id], Modality::text, id).features);
  }
  return f;
}

Eigen::RowVectorXd pool(const Eigen::MatrixXd& tokens, Aggregation mode) {
  return mode == Aggregation::cls ? Eigen::RowVectorXd(tokens.row(0)) : Eigen::RowVectorXd(tokens.colwise().mean());
}

Eigen::MatrixXd unit_rows(const Eigen::MatrixXd& m, Eigen::VectorXd& norms) {
  norms = m.rowwise().norm();
  if ((norms.array() == 0.0).any()) throw DegenerateError("degenerate embedding: zero-norm row inside the batch");
  return m.array().colwise() / norms.array();
}

// Accumulates d cos(u_r, w_c) weighted by weights(r, c) into du, dw.
void backprop_cosines(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& cos, const Eigen::MatrixXd& u_hat,
                      const Eigen::VectorXd& u_norm, const Eigen::MatrixXd& w_hat, const Eigen::VectorXd& w_norm,
                      Eigen::MatrixXd& du, Eigen::MatrixXd& dw) {
  const Eigen::MatrixXd wc = weights.cwiseProduct(cos);
  const Eigen::VectorXd row_scale = wc.rowwise().sum();
  const Eigen::VectorXd col_scale = wc.colwise().sum().transpose();
  du += ((weights * w_hat - row_scale.asDiagonal() * u_hat).array().colwise() / u_norm.array()).matrix();
  dw += ((weights.transpose() * u_hat - col_scale.asDiagonal() * w_hat).array().colwise() / w_norm.array()).matrix();
}

}  // namespace

BatchSimilarities batch_similarities(const DualEncoder& enc, std::span<const std::size_t> ids, const ToyDataset& data,
                                     Aggregation mode) {
  const BatchFeatures f = project_batch(enc, ids, data);
  const auto b = static_cast<Eigen::Index>(ids.size());
  BatchSimilarities s{Eigen::MatrixXd(b, b), Eigen::MatrixXd(b, b)};
  for (Eigen::Index a = 0; a < b; ++a) {
    for (Eigen::Index k = 0; k < b; ++k) {
      const auto& v = f.video[static_cast<std::size_t>(a)];
      const auto& t = f.text[static_cast<std::size_t>(k)];
      if (mode == Aggregation::cico) {
        const auto d = cico_scores(v, t);
        s.v2t(a, k) = d.video_to_text;
        s.t2v(k, a) = d.text_to_video;
      } else {
        s.v2t(a, k) = cosine_similarity(pool(v, mode), pool(t, mode));
        s.t2v(k, a) = s.v2t(a, k);
      }
    }
  }
  return s;
}

LossGrads loss_and_grads(const DualEncoder& enc, std::span<const std::size_t> ids, const ToyDataset& data,
                         Aggregation mode) {
  if (ids.empty()) throw UsageError("loss_and_grads: empty batch");
  const BatchFeatures f = project_batch(enc, ids, data);
  const auto b = static_cast<Eigen::Index>(ids.size());
  const auto nb = ids.size();
  const Eigen::Index d = enc.embed_dim();

  std::vector<Eigen::MatrixXd> dv(nb), dt(nb);
  for (std::size_t a = 0; a < nb; ++a) {
    dv[a] = Eigen::MatrixXd::Zero(f.video[a].rows(), d);
    dt[a] = Eigen::MatrixXd::Zero(f.text[a].rows(), d);
  }

  Eigen::MatrixXd s_v2t(b, b), s_t2v(b, b);
  LossGrads out;

  if (mode == Aggregation::cico) {
    std::vector<Eigen::MatrixXd> v_hat(nb), t_hat(nb);
    std::vector<Eigen::VectorXd> v_norm(nb), t_norm(nb);
    for (std::size_t a = 0; a < nb; ++a) {
      v_hat[a] = unit_rows(f.video[a], v_norm[a]);
      t_hat[a] = unit_rows(f.text[a], t_norm[a]);
    }
    std::vector<Eigen::MatrixXd> cos(nb * nb);
    for (std::size_t a = 0; a < nb; ++a) {
      for (std::size_t k = 0; k < nb; ++k) {
        const Eigen::MatrixXd& c = cos[a * nb + k] = v_hat[a] * t_hat[k].transpose();
        s_v2t(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(k)) = c.rowwise().maxCoeff().mean();
        s_t2v(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(a)) = c.colwise().maxCoeff().mean();
      }
    }
    const ContrastiveGrads g = contrastive_loss_grads(s_v2t, s_t2v, enc.log_tau);
    out.loss = g.loss;
    out.log_tau = g.d_log_tau;
    for (std::size_t a = 0; a < nb; ++a) {
      for (std::size_t k = 0; k < nb; ++k) {
        const Eigen::MatrixXd& c = cos[a * nb + k];
        const double g_v2t = g.d_v2t(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(k)) / double(c.rows());
        const double g_t2v = g.d_t2v(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(a)) / double(c.cols());
        Eigen::MatrixXd weights = Eigen::MatrixXd::Zero(c.rows(), c.cols());
        for (Eigen::Index r = 0; r < c.rows(); ++r) {
          Eigen::Index best = 0;
          c.row(r).maxCoeff(&best);
          weights(r, best) += g_v2t;
        }
        for (Eigen::Index col = 0; col < c.cols(); ++col) {
          Eigen::Index best = 0;
          c.col(col).maxCoeff(&best);
          weights(best, col) += g_t2v;
        }
        backprop_cosines(weights, c, v_hat[a], v_norm[a], t_hat[k], t_norm[k], dv[a], dt[k]);
      }
    }
  } else {
    Eigen::MatrixXd pv(b, d), pt(b, d);
    for (std::size_t a = 0; a < nb; ++a) {
      pv.row(static_cast<Eigen::Index>(a)) = pool(f.video[a], mode);
      pt.row(static_cast<Eigen::Index>(a)) = pool(f.text[a], mode);
    }
    Eigen::VectorXd v_norm, t_norm;
    const Eigen::MatrixXd v_hat = unit_rows(pv, v_norm);
    const Eigen::MatrixXd t_hat = unit_rows(pt, t_norm);
    s_v2t = v_hat * t_hat.transpose();
    s_t2v = s_v2t.transpose();
    const ContrastiveGrads g = contrastive_loss_grads(s_v2t, s_t2v, enc.log_tau);
    out.loss = g.loss;
    out.log_tau = g.d_log_tau;
    const Eigen::MatrixXd weights = g.d_v2t + g.d_t2v.transpose();
    Eigen::MatrixXd dpv = Eigen::MatrixXd::Zero(b, d), dpt = Eigen::MatrixXd::Zero(b, d);
    backprop_cosines(weights, s_v2t, v_hat, v_norm, t_hat, t_norm, dpv, dpt);
    for (std::size_t a = 0; a < nb; ++a) {
      const auto i = static_cast<Eigen::Index>(a);
      if (mode == Aggregation::cls) {
        dv[a].row(0) += dpv.row(i);
        dt[a].row(0) += dpt.row(i);
      } else {
        dv[a].rowwise() += dpv.row(i) / double(dv[a].rows());
        dt[a].rowwise() += dpt.row(i) / double(dt[a].rows());
      }
    }
  }

  out.video_proj = Eigen::MatrixXd::Zero(enc.video_proj.rows(), enc.video_proj.cols());
  out.text_proj = Eigen::MatrixXd::Zero(enc.text_proj.rows(), enc.text_proj.cols());
  for (std::size_t a = 0; a < nb; ++a) {
    out.video_proj += dv[a].transpose() * data.video[ids[a]];
    out.text_proj += dt[a].transpose() * data.text[ids[a]];
  }
  return out;
}

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows, const std::string& where) {
  const auto data = rows.get<std::vector<std::vector<double>>>();
  if (data.empty() || data.front().empty()) throw FormatError(where + ": empty matrix");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(data.front().size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i].size() != data.front().size()) throw FormatError(where + ": ragged matrix");
    for (std::size_t j = 0; j < data[i].size(); ++j) m(Eigen::Index(i), Eigen::Index(j)) = data[i][j];
  }
  return m;
}

}  // namespace

void write_encoder(const DualEncoder& enc, const std::filesystem::path& path) {
  json j;
  j["video_proj"] = matrix_to_json(enc.video_proj);
  j["text_proj"] = matrix_to_json(enc.text_proj);
  j["log_tau"] = enc.log_tau;
  write_text_file(path, j.dump() + "\n");
}

DualEncoder read_encoder(const std::filesystem::path& path) {
  try {
    const json j = json::parse(read_text_file(path));
    DualEncoder enc;
    enc.video_proj = matrix_from_json(j.at("video_proj"), path.string());
    enc.text_proj = matrix_from_json(j.at("text_proj"), path.string());
    enc.log_tau = j.at("log_tau").get<double>();
    if (enc.video_proj.rows() != enc.text_proj.rows()) {
      throw FormatError(path.string() + ": projections disagree on the embedding dimension");
    }
    return enc;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": malformed encoder file: " + e.what());
  }
}

}  // namespace scl
