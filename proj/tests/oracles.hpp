#pragma once

// Reference computations for tests. Written with plain loops and no calls into
// the library's numeric paths so they stay independent of what they check.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <utility>
#include <vector>

namespace scl::oracle {

inline double cosine(const std::vector<double>& u, const std::vector<double>& v) {
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  return dot / (std::sqrt(nu) * std::sqrt(nv));
}

inline std::vector<double> row(const Eigen::MatrixXd& m, Eigen::Index r) {
  std::vector<double> out(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c) out[static_cast<std::size_t>(c)] = m(r, c);
  return out;
}

/// Materializes every token cosine, then max-then-mean in both directions.
inline std::pair<double, double> cico(const Eigen::MatrixXd& v, const Eigen::MatrixXd& t) {
  std::vector<std::vector<double>> c(static_cast<std::size_t>(v.rows()),
                                     std::vector<double>(static_cast<std::size_t>(t.rows())));
  for (Eigen::Index a = 0; a < v.rows(); ++a) {
    for (Eigen::Index b = 0; b < t.rows(); ++b) c[std::size_t(a)][std::size_t(b)] = cosine(row(v, a), row(t, b));
  }
  double v2t = 0.0;
  for (const auto& r : c) v2t += *std::max_element(r.begin(), r.end());
  v2t /= static_cast<double>(c.size());
  double t2v = 0.0;
  for (std::size_t b = 0; b < c.front().size(); ++b) {
    double best = -2.0;
    for (const auto& r : c) best = std::max(best, r[b]);
    t2v += best;
  }
  t2v /= static_cast<double>(c.front().size());
  return {v2t, t2v};
}

/// Slope and intercept from the raw 2x2 normal equations by Cramer's rule.
inline std::pair<double, double> cramer_fit(const std::vector<std::pair<double, double>>& pts) {
  long double n = 0, sk = 0, skk = 0, ss = 0, sks = 0;
  for (const auto& [k, s] : pts) {
    n += 1;
    sk += k;
    skk += static_cast<long double>(k) * k;
    ss += s;
    sks += static_cast<long double>(k) * s;
  }
  const long double det = skk * n - sk * sk;
  const long double a = (sks * n - sk * ss) / det;
  const long double b = (skk * ss - sk * sks) / det;
  return {static_cast<double>(a), static_cast<double>(b)};
}

/// Literal double sum over ordered pairs.
inline double batch_score(const std::vector<std::size_t>& ids, const Eigen::MatrixXd& delta) {
  double s = 0.0;
  for (std::size_t p = 0; p < ids.size(); ++p) {
    for (std::size_t q = 0; q < ids.size(); ++q) {
      if (p != q) s += delta(Eigen::Index(ids[p]), Eigen::Index(ids[q]));
    }
  }
  return s;
}

/// Schoolbook product x * w^T.
inline Eigen::MatrixXd project(const Eigen::MatrixXd& x, const Eigen::MatrixXd& w) {
  Eigen::MatrixXd out(x.rows(), w.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index o = 0; o < w.rows(); ++o) {
      double acc = 0.0;
      for (Eigen::Index i = 0; i < x.cols(); ++i) acc += x(r, i) * w(o, i);
      out(r, o) = acc;
    }
  }
  return out;
}

/// Symmetric softmax cross entropy in long double.
inline long double contrastive_loss(const Eigen::MatrixXd& s1, const Eigen::MatrixXd& s2, long double tau) {
  const Eigen::Index b = s1.rows();
  long double total = 0.0L;
  for (const Eigen::MatrixXd* s : {&s1, &s2}) {
    for (Eigen::Index i = 0; i < b; ++i) {
      long double denom = 0.0L;
      for (Eigen::Index k = 0; k < b; ++k) denom += std::exp(static_cast<long double>((*s)(i, k)) / tau);
      total += std::log(std::exp(static_cast<long double>((*s)(i, i)) / tau) / denom);
    }
  }
  return -total / (2.0L * static_cast<long double>(b));
}

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double lo = -1.0,
                                     double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  }
  return m;
}

/// Spearman rank correlation (average ranks for ties).
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j);
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += rx[i], my += ry[i];
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace scl::oracle
