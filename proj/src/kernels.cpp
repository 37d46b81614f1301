#include "splinebeta/kernels.hpp"

#include <algorithm>
#include <numeric>

#include <omp.h>

#include "splinebeta/error.hpp"

namespace splinebeta::kernels {

namespace {

std::vector<int> resolve_blocks(const DesignSystem& sys, const std::vector<int>& blocks) {
  if (!blocks.empty()) {
    for (int j : blocks) require(j >= 0 && j < sys.block_count(), "block index out of range");
    return blocks;
  }
  std::vector<int> all(sys.block_count());
  std::iota(all.begin(), all.end(), 0);
  return all;
}

// Reference versions stream over rows, the natural order for a sparse design.

Eigen::VectorXd apply_serial(const DesignSystem& sys, const Eigen::VectorXd& gamma) {
  const int n = sys.row_count(), p = sys.block_count(), K = sys.basis_count();
  const int w = static_cast<int>(sys.local.cols());
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j = 0; j < p; ++j) {
      const double x = sys.covariates(i, j);
      if (x == 0.0) continue;
      double s = 0.0;
      for (int l = 0; l < w; ++l) s += sys.local(i, l) * gamma[j * K + sys.first[i] + l];
      acc += x * s;
    }
    out[i] = acc;
  }
  return out;
}

Eigen::VectorXd apply_transpose_serial(const DesignSystem& sys, const Eigen::VectorXd& v) {
  const int n = sys.row_count(), p = sys.block_count(), K = sys.basis_count();
  const int w = static_cast<int>(sys.local.cols());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(sys.width());
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) {
      const double c = v[i] * sys.covariates(i, j);
      for (int l = 0; l < w; ++l) out[j * K + sys.first[i] + l] += c * sys.local(i, l);
    }
  }
  return out;
}

// Rows sharing a span touch the same basis columns, so each span contributes a
// dense product D^T diag(w) D with D(r, a*w + l) = x(i, block a) * b_l(i).
std::vector<std::vector<int>> rows_by_span(const DesignSystem& sys) {
  const int spans = sys.basis_count() - static_cast<int>(sys.local.cols()) + 1;
  std::vector<std::vector<int>> out(spans);
  for (int i = 0; i < sys.row_count(); ++i) out[sys.first[i]].push_back(i);
  return out;
}

Eigen::MatrixXd span_gram(const DesignSystem& sys, const Eigen::VectorXd* weights, const std::vector<int>& blocks,
                          const std::vector<int>& rows) {
  const int w = static_cast<int>(sys.local.cols());
  const int m = static_cast<int>(blocks.size());
  const int r = static_cast<int>(rows.size());
  Eigen::MatrixXd d(r, m * w), wd(r, m * w);
  for (int a = 0; a < m; ++a)
    for (int t = 0; t < r; ++t) {
      const int i = rows[t];
      const double x = sys.covariates(i, blocks[a]);
      const double wi = weights ? (*weights)[i] : 1.0;
      for (int l = 0; l < w; ++l) {
        d(t, a * w + l) = x * sys.local(i, l);
        wd(t, a * w + l) = wi * d(t, a * w + l);
      }
    }
  return d.transpose() * wd;
}

void scatter_span(Eigen::MatrixXd& g, const Eigen::MatrixXd& gf, int f, int m, int w, int K) {
  for (int b = 0; b < m; ++b)
    for (int a = 0; a < m; ++a)
      for (int l2 = 0; l2 < w; ++l2)
        for (int l1 = 0; l1 < w; ++l1) g(a * K + f + l1, b * K + f + l2) += gf(a * w + l1, b * w + l2);
}

Eigen::MatrixXd gram_serial(const DesignSystem& sys, const Eigen::VectorXd* weights,
                            const std::vector<int>& blocks) {
  const int K = sys.basis_count();
  const int w = static_cast<int>(sys.local.cols());
  const int m = static_cast<int>(blocks.size());
  const std::vector<std::vector<int>> spans = rows_by_span(sys);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(m * K, m * K);
  for (std::size_t f = 0; f < spans.size(); ++f) {
    if (spans[f].empty()) continue;
    scatter_span(g, span_gram(sys, weights, blocks, spans[f]), static_cast<int>(f), m, w, K);
  }
  return g;
}

Eigen::MatrixXd row_gram_serial(const DesignSystem& sys) {
  const int n = sys.row_count(), p = sys.block_count();
  const int w = static_cast<int>(sys.local.cols());
  Eigen::MatrixXd g(n, n);
  for (int i = 0; i < n; ++i) {
    for (int k = i; k < n; ++k) {
      double bb = 0.0;
      const int lo = std::max(sys.first[i], sys.first[k]);
      const int hi = std::min(sys.first[i], sys.first[k]) + w;
      for (int c = lo; c < hi; ++c) bb += sys.local(i, c - sys.first[i]) * sys.local(k, c - sys.first[k]);
      double xx = 0.0;
      if (bb != 0.0)
        for (int j = 0; j < p; ++j) xx += sys.covariates(i, j) * sys.covariates(k, j);
      g(i, k) = xx * bb;
      g(k, i) = g(i, k);
    }
  }
  return g;
}

}  // namespace

Eigen::VectorXd apply(const DesignSystem& sys, const Eigen::VectorXd& gamma, Exec exec) {
  require(gamma.size() == sys.width(), "coefficient length does not match design width");
  if (exec == Exec::Serial) return apply_serial(sys, gamma);
  const int n = sys.row_count(), p = sys.block_count(), K = sys.basis_count();
  const int w = static_cast<int>(sys.local.cols());
  Eigen::VectorXd out(n);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    const int f = sys.first[i];
    for (int j = 0; j < p; ++j) {
      const double x = sys.covariates(i, j);
      if (x == 0.0) continue;
      double s = 0.0;
      for (int l = 0; l < w; ++l) s += sys.local(i, l) * gamma[j * K + f + l];
      acc += x * s;
    }
    out[i] = acc;
  }
  return out;
}

Eigen::VectorXd apply_transpose(const DesignSystem& sys, const Eigen::VectorXd& v, Exec exec) {
  require(v.size() == sys.row_count(), "vector length does not match design rows");
  if (exec == Exec::Serial) return apply_transpose_serial(sys, v);
  const int n = sys.row_count(), p = sys.block_count(), K = sys.basis_count();
  const int w = static_cast<int>(sys.local.cols());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(sys.width());
  // each block owns a disjoint output segment
#pragma omp parallel for schedule(static)
  for (int j = 0; j < p; ++j) {
    double* seg = out.data() + static_cast<std::ptrdiff_t>(j) * K;
    for (int i = 0; i < n; ++i) {
      const double c = v[i] * sys.covariates(i, j);
      for (int l = 0; l < w; ++l) seg[sys.first[i] + l] += c * sys.local(i, l);
    }
  }
  return out;
}

Eigen::MatrixXd gram(const DesignSystem& sys, const Eigen::VectorXd* weights, const std::vector<int>& blocks,
                     Exec exec) {
  if (weights) require(weights->size() == sys.row_count(), "weight length does not match design rows");
  const std::vector<int> bl = resolve_blocks(sys, blocks);
  if (exec == Exec::Serial) return gram_serial(sys, weights, bl);

  const int K = sys.basis_count();
  const int w = static_cast<int>(sys.local.cols());
  const int m = static_cast<int>(bl.size());
  const std::vector<std::vector<int>> spans = rows_by_span(sys);
  const int ns = static_cast<int>(spans.size());
  // span products in parallel batches, accumulation in span order as in the reference
  const int batch = std::max(1, omp_get_max_threads());
  std::vector<Eigen::MatrixXd> parts(batch);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(m * K, m * K);
  for (int f0 = 0; f0 < ns; f0 += batch) {
    const int f1 = std::min(ns, f0 + batch);
#pragma omp parallel for schedule(dynamic)
    for (int f = f0; f < f1; ++f)
      if (!spans[f].empty()) parts[f - f0] = span_gram(sys, weights, bl, spans[f]);
    for (int f = f0; f < f1; ++f)
      if (!spans[f].empty()) scatter_span(g, parts[f - f0], f, m, w, K);
  }
  return g;
}

std::vector<Eigen::MatrixXd> block_grams(const DesignSystem& sys, Exec exec) {
  const int p = sys.block_count();
  std::vector<Eigen::MatrixXd> out(p);
  if (exec == Exec::Serial) {
    for (int j = 0; j < p; ++j) out[j] = gram_serial(sys, nullptr, {j});
    return out;
  }
#pragma omp parallel for schedule(static)
  for (int j = 0; j < p; ++j) out[j] = gram_serial(sys, nullptr, {j});
  return out;
}

Eigen::MatrixXd row_gram(const DesignSystem& sys, Exec exec) {
  if (exec == Exec::Serial) return row_gram_serial(sys);
  const int n = sys.row_count(), p = sys.block_count();
  const int w = static_cast<int>(sys.local.cols());
  Eigen::MatrixXd g(n, n);
#pragma omp parallel for schedule(dynamic, 16)
  for (int i = 0; i < n; ++i) {
    for (int k = i; k < n; ++k) {
      double bb = 0.0;
      const int lo = std::max(sys.first[i], sys.first[k]);
      const int hi = std::min(sys.first[i], sys.first[k]) + w;
      for (int c = lo; c < hi; ++c) bb += sys.local(i, c - sys.first[i]) * sys.local(k, c - sys.first[k]);
      double xx = 0.0;
      if (bb != 0.0)
        for (int j = 0; j < p; ++j) xx += sys.covariates(i, j) * sys.covariates(k, j);
      g(i, k) = xx * bb;
      g(k, i) = g(i, k);
    }
  }
  return g;
}

void set_threads(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace splinebeta::kernels
