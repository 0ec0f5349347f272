#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <utility>
#include <vector>

#include "graphgp/dataset.hpp"
#include "graphgp/errors.hpp"
#include "graphgp/kernels.hpp"
#include "graphgp/matrix.hpp"
#include "graphgp/numerics.hpp"

namespace graphgp {

struct BlockRef {
  int vertex;
  const Matrix* inputs;
};

inline std::vector<BlockRef> block_refs(const MultiDataset& data) {
  std::vector<BlockRef> refs;
  refs.reserve(data.num_vertices());
  for (std::size_t m = 0; m < data.num_vertices(); ++m)
    refs.push_back({static_cast<int>(m), &data.block(m).inputs});
  return refs;
}

inline std::vector<BlockRef> block_refs(const TestQuery& q) {
  std::vector<BlockRef> refs;
  refs.reserve(q.vertices.size());
  for (std::size_t k = 0; k < q.vertices.size(); ++k)
    refs.push_back({q.vertices[k], &q.inputs[k]});
  return refs;
}

// Block assembly: entry(m, m', x_i, x'_j) over the row blocks of `a` and the
// column blocks of `b`, rows and columns vertex-major.
template <typename EntryFn>
Matrix assemble_blocks(const std::vector<BlockRef>& a, const std::vector<BlockRef>& b,
                       EntryFn&& entry) {
  std::size_t rows = 0, cols = 0;
  for (const auto& r : a) rows += r.inputs->rows();
  for (const auto& c : b) cols += c.inputs->rows();
  Matrix out(rows, cols);
  std::size_t row0 = 0;
  for (const auto& ra : a) {
    std::size_t col0 = 0;
    for (const auto& rb : b) {
      for (std::size_t i = 0; i < ra.inputs->rows(); ++i)
        for (std::size_t j = 0; j < rb.inputs->rows(); ++j)
          out(row0 + i, col0 + j) =
              entry(ra.vertex, rb.vertex, ra.inputs->row(i), rb.inputs->row(j));
      col0 += rb.inputs->rows();
    }
    row0 += ra.inputs->rows();
  }
  return out;
}

inline Matrix assemble_covariance(const CompiledKernel& kernel, const std::vector<BlockRef>& a,
                                  const std::vector<BlockRef>& b) {
  return assemble_blocks(a, b, std::cref(kernel));
}

inline Matrix assemble_covariance(const MogpKernelSpec& spec, const Graph& g,
                                  const MultiDataset& a, const MultiDataset& b) {
  CompiledKernel kernel(spec, g);
  return assemble_covariance(kernel, block_refs(a), block_refs(b));
}

inline Matrix assemble_training_covariance(const CompiledKernel& kernel,
                                           const MultiDataset& data) {
  const auto refs = block_refs(data);
  return assemble_covariance(kernel, refs, refs);
}

// Per-row noise variances, vertex-major over the training blocks.
inline Vector noise_diagonal(const MultiDataset& data, const NoiseModel& noise) {
  if (noise.variances.size() != data.num_vertices())
    throw DimensionMismatch("noise model does not match the vertex count");
  Vector diag;
  diag.reserve(data.total_points());
  for (std::size_t m = 0; m < data.num_vertices(); ++m)
    diag.insert(diag.end(), data.block(m).size(), noise.variances[m]);
  return diag;
}

inline double log_marginal_likelihood(const CompiledKernel& kernel, const MultiDataset& data,
                                      const NoiseModel& noise) {
  const std::size_t n = data.total_points();
  if (n == 0) throw InputError("log_marginal_likelihood: empty dataset");
  Matrix k = assemble_training_covariance(kernel, data);
  const Vector sigma = noise_diagonal(data, noise);
  for (std::size_t i = 0; i < n; ++i) k(i, i) += sigma[i];
  const CholFactor factor = cholesky(k);
  const Vector y = data.stacked_outputs();
  const Vector alpha = solve_chol(factor, y);
  return -0.5 * (dot(y, alpha) + logdet(factor)) -
         0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
}

inline double log_marginal_likelihood(const MogpKernelSpec& spec, const Graph& g,
                                      const MultiDataset& data, const NoiseModel& noise) {
  return log_marginal_likelihood(CompiledKernel(spec, g), data, noise);
}

// Posterior over a query, vertex-major rows. cov_observed = cov_latent plus
// the per-test-point noise variance on the diagonal.
struct Prediction {
  Vector mean;
  Matrix cov_latent;
  Matrix cov_observed;
  std::vector<int> vertex_of_row;

  Vector latent_variances() const {
    Vector v(mean.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = cov_latent(i, i);
    return v;
  }
  Vector observed_variances() const {
    Vector v(mean.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = cov_observed(i, i);
    return v;
  }
};

// Trained model with the factorization caches prediction needs. Immutable
// after construction; rebuilding is how hyperparameter changes propagate.
class FittedModel {
 public:
  static FittedModel build(MogpKernelSpec spec, std::shared_ptr<const Graph> graph,
                           std::shared_ptr<const MultiDataset> data, NoiseModel noise) {
    if (!graph || !data) throw InputError("FittedModel: graph and data are required");
    if (data->num_vertices() != graph->num_vertices())
      throw DimensionMismatch("FittedModel: dataset vertex count disagrees with graph");
    noise.validate();
    auto ops = GraphOperators::build(*graph);
    CompiledKernel kernel(spec, ops);
    Matrix k = assemble_training_covariance(kernel, *data);
    const Vector sigma = noise_diagonal(*data, noise);
    for (std::size_t i = 0; i < k.rows(); ++i) k(i, i) += sigma[i];
    CholFactor factor = cholesky(k);
    const Vector y = data->stacked_outputs();
    Vector alpha = solve_chol(factor, y);
    const double lml =
        -0.5 * (dot(y, alpha) + logdet(factor)) -
        0.5 * static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi);
    return FittedModel(std::move(spec), std::move(graph), std::move(data), std::move(noise),
                       std::move(kernel), std::move(factor), std::move(alpha), lml);
  }

  const MogpKernelSpec& spec() const { return spec_; }
  const NoiseModel& noise() const { return noise_; }
  const Graph& graph() const { return *graph_; }
  const MultiDataset& data() const { return *data_; }
  const CompiledKernel& kernel() const { return kernel_; }
  const CholFactor& factor() const { return factor_; }
  const Vector& weights() const { return alpha_; }
  double log_marginal_likelihood() const { return lml_; }

  Prediction predict(const TestQuery& q) const {
    q.validate_against(graph_->num_vertices(), data_->input_dim());
    if (factor_.size() != data_->total_points())
      throw StaleCache("FittedModel: cached factor does not match the training data");
    const auto train_refs = block_refs(*data_);
    const auto query_refs = block_refs(q);
    const Matrix k_cross = assemble_covariance(kernel_, train_refs, query_refs);  // N x T
    const Matrix k_query = assemble_covariance(kernel_, query_refs, query_refs);  // T x T
    const std::size_t t = k_query.rows();

    Prediction pred;
    pred.mean.assign(t, 0.0);
    for (std::size_t j = 0; j < t; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < k_cross.rows(); ++i) s += k_cross(i, j) * alpha_[i];
      pred.mean[j] = s;
    }

    const Matrix v = solve_chol(factor_, k_cross);  // (K + Sigma)^-1 K_*
    Matrix cov = k_query;
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t j = 0; j < t; ++j) {
        double s = 0.0;
        for (std::size_t r = 0; r < k_cross.rows(); ++r) s += k_cross(r, i) * v(r, j);
        cov(i, j) -= s;
      }
    cov = symmetrized(std::move(cov));
    for (std::size_t i = 0; i < t; ++i)
      if (cov(i, i) < 0.0 && cov(i, i) >= -1e-8) cov(i, i) = 0.0;

    pred.vertex_of_row.reserve(t);
    for (std::size_t k = 0; k < q.vertices.size(); ++k)
      pred.vertex_of_row.insert(pred.vertex_of_row.end(), q.inputs[k].rows(), q.vertices[k]);

    pred.cov_observed = cov;
    for (std::size_t i = 0; i < t; ++i)
      pred.cov_observed(i, i) += noise_.variances[pred.vertex_of_row[i]];
    pred.cov_latent = std::move(cov);
    return pred;
  }

 private:
  FittedModel(MogpKernelSpec spec, std::shared_ptr<const Graph> graph,
              std::shared_ptr<const MultiDataset> data, NoiseModel noise,
              CompiledKernel kernel, CholFactor factor, Vector alpha, double lml)
      : spec_(std::move(spec)),
        graph_(std::move(graph)),
        data_(std::move(data)),
        noise_(std::move(noise)),
        kernel_(std::move(kernel)),
        factor_(std::move(factor)),
        alpha_(std::move(alpha)),
        lml_(lml) {}

  MogpKernelSpec spec_;
  std::shared_ptr<const Graph> graph_;
  std::shared_ptr<const MultiDataset> data_;
  NoiseModel noise_;
  CompiledKernel kernel_;
  CholFactor factor_;
  Vector alpha_;
  double lml_;
};

inline double mse(const Vector& y_true, const Vector& mean) {
  if (y_true.size() != mean.size()) throw DimensionMismatch("mse: lengths disagree");
  if (y_true.empty()) throw InputError("mse: empty vectors");
  double s = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const double d = y_true[i] - mean[i];
    s += d * d;
  }
  return s / static_cast<double>(y_true.size());
}

// Gaussian log-density of y_true under the predictive distribution.
inline double predictive_log_likelihood(const Vector& y_true, const Prediction& pred,
                                        bool use_observed = true) {
  const std::size_t t = y_true.size();
  if (t != pred.mean.size())
    throw DimensionMismatch("predictive_log_likelihood: lengths disagree");
  const Matrix& cov = use_observed ? pred.cov_observed : pred.cov_latent;
  const CholFactor factor = cholesky(cov);
  Vector q(t);
  for (std::size_t i = 0; i < t; ++i) q[i] = y_true[i] - pred.mean[i];
  const Vector sol = solve_chol(factor, q);
  return -0.5 * static_cast<double>(t) * std::log(2.0 * std::numbers::pi) -
         0.5 * logdet(factor) - 0.5 * dot(q, sol);
}

}  // namespace graphgp
