#pragma once

#include <cmath>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "graphgp/errors.hpp"
#include "graphgp/graph.hpp"
#include "graphgp/matrix.hpp"
#include "graphgp/numerics.hpp"

namespace graphgp {

// ---------------------------------------------------------------------------
// Data-space kernels
// ---------------------------------------------------------------------------

enum class DataKernelFamily { SquaredExponential, Matern };

// Stationary kernel on inputs. The squared exponential is
//   k(x, x') = v2 * exp(-r^2 / (2 ell))        r = ||x - x'||
// (ell enters linearly; it is trained, so the parameterization is a
// relabeling of the usual ell^2 form). Matern supports the half-integer
// closed forms nu in {1/2, 3/2, 5/2}.
struct DataKernelSpec {
  DataKernelFamily family = DataKernelFamily::SquaredExponential;
  double v2 = 1.0;
  double ell = 1.0;
  double nu = 1.5;  // Matern only

  void validate() const {
    if (!(v2 > 0.0)) throw InputError("data kernel: v2 must be positive");
    if (!(ell > 0.0)) throw InputError("data kernel: ell must be positive");
    if (family == DataKernelFamily::Matern && nu != 0.5 && nu != 1.5 && nu != 2.5)
      throw InputError("data kernel: Matern nu must be 1/2, 3/2 or 5/2");
  }

  int hyperparameter_count() const { return 2; }
};

inline double data_kernel(const DataKernelSpec& spec, std::span<const double> x,
                          std::span<const double> xp) {
  if (x.size() != xp.size())
    throw DimensionMismatch("data_kernel: input dimensions disagree");
  const double r2 = squared_distance(x, xp);
  switch (spec.family) {
    case DataKernelFamily::SquaredExponential:
      return spec.v2 * std::exp(-r2 / (2.0 * spec.ell));
    case DataKernelFamily::Matern: {
      const double r = std::sqrt(r2);
      if (spec.nu == 0.5) return spec.v2 * std::exp(-r / spec.ell);
      if (spec.nu == 1.5) {
        const double s = std::numbers::sqrt3 * r / spec.ell;
        return spec.v2 * (1.0 + s) * std::exp(-s);
      }
      const double s = std::sqrt(5.0) * r / spec.ell;
      return spec.v2 * (1.0 + s + s * s / 3.0) * std::exp(-s);
    }
  }
  return 0.0;
}

// Partial derivatives wrt the two hyperparameters, used by training.
inline double data_kernel_grad_v2(const DataKernelSpec& spec, std::span<const double> x,
                                  std::span<const double> xp) {
  return data_kernel(spec, x, xp) / spec.v2;
}

inline double data_kernel_grad_ell(const DataKernelSpec& spec, std::span<const double> x,
                                   std::span<const double> xp) {
  const double r2 = squared_distance(x, xp);
  switch (spec.family) {
    case DataKernelFamily::SquaredExponential:
      return data_kernel(spec, x, xp) * r2 / (2.0 * spec.ell * spec.ell);
    case DataKernelFamily::Matern: {
      const double r = std::sqrt(r2);
      if (spec.nu == 0.5)
        return spec.v2 * std::exp(-r / spec.ell) * r / (spec.ell * spec.ell);
      if (spec.nu == 1.5) {
        const double s = std::numbers::sqrt3 * r / spec.ell;
        return spec.v2 * s * s * std::exp(-s) / spec.ell;
      }
      const double s = std::sqrt(5.0) * r / spec.ell;
      return spec.v2 * (s * s / 3.0) * (1.0 + s) * std::exp(-s) / spec.ell;
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Graph kernels over vertices (the M x M matrix K_G)
// ---------------------------------------------------------------------------

enum class GraphKernelFamily {
  Laplacian,             // pinv(L)
  GlobalFiltering,       // C = (I + a L)^-1,  K_G = C C^T
  LocalAveraging,        // C = (I + a D)^-1 (I + a A),  K_G = C C^T
  RegularizedLaplacian,  // (I + a Ln)^-1
  Diffusion,             // expm(-(a/2) Ln)
  PStepRandomWalk,       // (a I - Ln)^p
  Cosine,                // cos(Ln pi/4)
  GraphMatern,           // ((2 nu / a) I + L-or-Ln)^-nu
  Polynomial,            // C = sum_i (beta_i / lmax(L)) L^i,  K_G = C C^T
  Icm,                   // w w^T + diag(kappa); no graph input
};

enum class LaplacianChoice { Unnormalized, Normalized };

struct GraphKernelSpec {
  GraphKernelFamily family = GraphKernelFamily::Diffusion;
  double alpha = 1.0;
  int p = 1;                            // PStepRandomWalk
  int nu = 2;                           // GraphMatern
  std::vector<double> beta;             // Polynomial, beta_0..beta_P
  Vector w, kappa;                      // Icm, length M
  LaplacianChoice laplacian_choice = LaplacianChoice::Unnormalized;  // GraphMatern

  bool has_alpha() const {
    switch (family) {
      case GraphKernelFamily::GlobalFiltering:
      case GraphKernelFamily::LocalAveraging:
      case GraphKernelFamily::RegularizedLaplacian:
      case GraphKernelFamily::Diffusion:
      case GraphKernelFamily::PStepRandomWalk:
      case GraphKernelFamily::GraphMatern:
        return true;
      default:
        return false;
    }
  }

  void validate(std::size_t num_vertices) const {
    // diffusion degenerates gracefully to the identity at alpha = 0
    if (family == GraphKernelFamily::Diffusion) {
      if (!(alpha >= 0.0)) throw InputError("graph kernel: alpha must be non-negative");
    } else if (has_alpha() && !(alpha > 0.0)) {
      throw InputError("graph kernel: alpha must be positive");
    }
    if (family == GraphKernelFamily::PStepRandomWalk && p < 1)
      throw InputError("graph kernel: p-step walk needs p >= 1");
    if (family == GraphKernelFamily::GraphMatern && nu < 1)
      throw InputError("graph kernel: graph Matern needs integer nu >= 1");
    if (family == GraphKernelFamily::Polynomial && beta.empty())
      throw InputError("graph kernel: polynomial needs beta_0..beta_P");
    if (family == GraphKernelFamily::Icm) {
      if (w.size() != num_vertices || kappa.size() != num_vertices)
        throw InputError("graph kernel: ICM vectors must have one entry per vertex");
      for (double k : kappa)
        if (k < 0.0) throw InputError("graph kernel: ICM kappa entries must be >= 0");
    }
  }

  // The N_g column: trained parameters this family contributes.
  int hyperparameter_count(std::size_t num_vertices) const {
    switch (family) {
      case GraphKernelFamily::Laplacian:
      case GraphKernelFamily::Cosine:
        return 0;
      case GraphKernelFamily::Polynomial:
        return static_cast<int>(beta.size());
      case GraphKernelFamily::Icm:
        return 2 * static_cast<int>(num_vertices);
      default:
        return 1;
    }
  }
};

// Spectral data for one graph, shared across kernel builds so the Laplacian
// eigendecompositions are computed once per graph.
struct GraphOperators {
  std::size_t num_vertices = 0;
  Matrix adjacency;
  Matrix laplacian;
  Matrix norm_laplacian;
  EigDecomp eig_laplacian;
  EigDecomp eig_norm_laplacian;
  Vector degrees;

  double lambda_max() const { return eig_laplacian.values.back(); }
  double lambda_max_normalized() const { return eig_norm_laplacian.values.back(); }

  static std::shared_ptr<const GraphOperators> build(const Graph& g) {
    auto ops = std::make_shared<GraphOperators>();
    ops->num_vertices = g.num_vertices();
    ops->adjacency = graphgp::adjacency(g);
    ops->laplacian = graphgp::laplacian(g, false);
    ops->norm_laplacian = graphgp::laplacian(g, true);
    ops->eig_laplacian = sym_eig(ops->laplacian);
    ops->eig_norm_laplacian = sym_eig(ops->norm_laplacian);
    ops->degrees = g.degrees();
    return ops;
  }
};

namespace detail {

inline Matrix local_averaging_filter(double alpha, const GraphOperators& ops) {
  const std::size_t m = ops.num_vertices;
  Matrix c(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    const double row_scale = 1.0 / (1.0 + alpha * ops.degrees[i]);
    for (std::size_t j = 0; j < m; ++j) {
      double v = alpha * ops.adjacency(i, j);
      if (i == j) v += 1.0;
      c(i, j) = row_scale * v;
    }
  }
  return c;
}

inline Matrix polynomial_filter_spectrum(const GraphKernelSpec& spec,
                                         const GraphOperators& ops, bool squared) {
  const double lmax = ops.lambda_max();
  if (!(lmax > 0.0))
    throw SingularMatrix("polynomial graph kernel: lambda_max(L) is zero (edgeless graph)");
  const std::size_t m = ops.num_vertices;
  Vector mapped(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double lam = ops.eig_laplacian.values[i];
    double c = 0.0;
    double lam_pow = 1.0;
    for (double b : spec.beta) {
      c += b * lam_pow / lmax;
      lam_pow *= lam;
    }
    mapped[i] = squared ? c * c : c;
  }
  return spectral_apply(ops.eig_laplacian, mapped);
}

}  // namespace detail

// Builds the M x M vertex covariance for one family. Matrix-function rows are
// evaluated through the cached Laplacian eigendecomposition.
inline Matrix graph_kernel_matrix(const GraphKernelSpec& spec, const GraphOperators& ops) {
  spec.validate(ops.num_vertices);
  const std::size_t m = ops.num_vertices;
  switch (spec.family) {
    case GraphKernelFamily::Laplacian:
      return matrix_function(ops.eig_laplacian, SpectralFn::pinv());
    case GraphKernelFamily::GlobalFiltering: {
      Vector mapped(m);
      for (std::size_t i = 0; i < m; ++i) {
        const double f = 1.0 / (1.0 + spec.alpha * ops.eig_laplacian.values[i]);
        mapped[i] = f * f;
      }
      return spectral_apply(ops.eig_laplacian, mapped);
    }
    case GraphKernelFamily::LocalAveraging: {
      const Matrix c = detail::local_averaging_filter(spec.alpha, ops);
      return symmetrized(c * c.transposed());
    }
    case GraphKernelFamily::RegularizedLaplacian: {
      Vector mapped(m);
      for (std::size_t i = 0; i < m; ++i)
        mapped[i] = 1.0 / (1.0 + spec.alpha * ops.eig_norm_laplacian.values[i]);
      return spectral_apply(ops.eig_norm_laplacian, mapped);
    }
    case GraphKernelFamily::Diffusion: {
      Vector mapped(m);
      for (std::size_t i = 0; i < m; ++i)
        mapped[i] = std::exp(-0.5 * spec.alpha * ops.eig_norm_laplacian.values[i]);
      return spectral_apply(ops.eig_norm_laplacian, mapped);
    }
    case GraphKernelFamily::PStepRandomWalk: {
      const double lmax = ops.lambda_max_normalized();
      if (spec.alpha < lmax - 1e-9 * std::max(1.0, lmax))
        throw InputError("p-step walk: alpha must be >= lambda_max of the normalized Laplacian");
      Vector mapped(m);
      for (std::size_t i = 0; i < m; ++i)
        mapped[i] = std::pow(std::max(spec.alpha - ops.eig_norm_laplacian.values[i], 0.0),
                             static_cast<double>(spec.p));
      return spectral_apply(ops.eig_norm_laplacian, mapped);
    }
    case GraphKernelFamily::Cosine: {
      if (ops.lambda_max_normalized() > 2.0 + 1e-8)
        throw InputError("cosine kernel: normalized Laplacian spectrum exceeds [0, 2]");
      Vector mapped(m);
      for (std::size_t i = 0; i < m; ++i)
        mapped[i] = std::cos(ops.eig_norm_laplacian.values[i] * std::numbers::pi / 4.0);
      return spectral_apply(ops.eig_norm_laplacian, mapped);
    }
    case GraphKernelFamily::GraphMatern: {
      const bool normalized = spec.laplacian_choice == LaplacianChoice::Normalized;
      const EigDecomp& eig = normalized ? ops.eig_norm_laplacian : ops.eig_laplacian;
      const double shift = 2.0 * spec.nu / spec.alpha;
      Vector mapped(m);
      for (std::size_t i = 0; i < m; ++i)
        mapped[i] = std::pow(shift + std::max(eig.values[i], 0.0),
                             -static_cast<double>(spec.nu));
      return spectral_apply(eig, mapped);
    }
    case GraphKernelFamily::Polynomial:
      return detail::polynomial_filter_spectrum(spec, ops, /*squared=*/true);
    case GraphKernelFamily::Icm: {
      Matrix k(m, m);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) k(i, j) = spec.w[i] * spec.w[j];
      for (std::size_t i = 0; i < m; ++i) k(i, i) += spec.kappa[i];
      return k;
    }
  }
  throw InputError("graph_kernel_matrix: unknown family");
}

inline Matrix graph_kernel_matrix(const GraphKernelSpec& spec, const Graph& g) {
  return graph_kernel_matrix(spec, *GraphOperators::build(g));
}

// Families whose alpha derivative is assembled in closed form. The remaining
// parameterized families (diffusion, graph Matern, p-step walk) go through
// finite differences in the trainer.
inline bool graph_kernel_has_analytic_alpha_gradient(GraphKernelFamily f) {
  return f == GraphKernelFamily::GlobalFiltering ||
         f == GraphKernelFamily::LocalAveraging ||
         f == GraphKernelFamily::RegularizedLaplacian;
}

inline Matrix graph_kernel_matrix_dalpha(const GraphKernelSpec& spec,
                                         const GraphOperators& ops) {
  const std::size_t m = ops.num_vertices;
  switch (spec.family) {
    case GraphKernelFamily::GlobalFiltering: {
      Vector mapped(m);
      for (std::size_t i = 0; i < m; ++i) {
        const double lam = ops.eig_laplacian.values[i];
        const double f = 1.0 + spec.alpha * lam;
        mapped[i] = -2.0 * lam / (f * f * f);
      }
      return spectral_apply(ops.eig_laplacian, mapped);
    }
    case GraphKernelFamily::RegularizedLaplacian: {
      Vector mapped(m);
      for (std::size_t i = 0; i < m; ++i) {
        const double lam = ops.eig_norm_laplacian.values[i];
        const double f = 1.0 + spec.alpha * lam;
        mapped[i] = -lam / (f * f);
      }
      return spectral_apply(ops.eig_norm_laplacian, mapped);
    }
    case GraphKernelFamily::LocalAveraging: {
      const Matrix c = detail::local_averaging_filter(spec.alpha, ops);
      Matrix dc(m, m);
      for (std::size_t i = 0; i < m; ++i) {
        const double denom = 1.0 + spec.alpha * ops.degrees[i];
        const double dscale = -ops.degrees[i] / (denom * denom);
        for (std::size_t j = 0; j < m; ++j) {
          double base = spec.alpha * ops.adjacency(i, j);
          if (i == j) base += 1.0;
          dc(i, j) = dscale * base + ops.adjacency(i, j) / denom;
        }
      }
      return symmetrized(dc * c.transposed() + c * dc.transposed());
    }
    default:
      throw InputError("graph_kernel_matrix_dalpha: family has no analytic alpha gradient");
  }
}

// d K_G / d beta_i for the polynomial filter: 2 C dC with shared eigenvectors.
inline Matrix graph_kernel_matrix_dbeta(const GraphKernelSpec& spec,
                                        const GraphOperators& ops, std::size_t beta_index) {
  const double lmax = ops.lambda_max();
  const std::size_t m = ops.num_vertices;
  Vector mapped(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double lam = ops.eig_laplacian.values[i];
    double c = 0.0;
    double lam_pow = 1.0;
    for (double b : spec.beta) {
      c += b * lam_pow / lmax;
      lam_pow *= lam;
    }
    mapped[i] = 2.0 * c * std::pow(lam, static_cast<double>(beta_index)) / lmax;
  }
  return spectral_apply(ops.eig_laplacian, mapped);
}

// ---------------------------------------------------------------------------
// Composite multi-output kernels over (vertex, input) pairs
// ---------------------------------------------------------------------------

struct MogpTerm {
  DataKernelSpec data;
  GraphKernelSpec graph;
};

// Process-convolution kernel with graph-derived amplitude and bandwidth:
//   k_mm'(x, x') = v^2 s_m s_m' / ((2 pi)^{D/2} |P|^{1/2}) exp(-(x-x')^T P^-1 (x-x') / 2)
// with s_m s_m' = K_G1[m][m'] and P = (K_G2[m][m'])^-1 I + ell^-1 I, or the
// degree-based variant P = (1/deg_m + 1/deg_m' + 1/ell) I.
struct GraphPcSpec {
  double v = 1.0;
  double ell = 1.0;
  GraphKernelSpec graph1;
  GraphKernelSpec graph2;
  bool degree_based = false;  // use vertex degrees instead of graph2
};

struct MogpKernelSpec {
  enum class Variant { SogpDiag, Separable, SumOfSeparable, GraphPc };

  Variant variant = Variant::SogpDiag;
  DataKernelSpec data;          // SogpDiag and Separable
  GraphKernelSpec graph;        // Separable
  std::vector<MogpTerm> terms;  // SumOfSeparable
  GraphPcSpec pc;               // GraphPc

  void validate(std::size_t num_vertices) const {
    switch (variant) {
      case Variant::SogpDiag:
        data.validate();
        break;
      case Variant::Separable:
        data.validate();
        graph.validate(num_vertices);
        break;
      case Variant::SumOfSeparable:
        if (terms.empty()) throw InputError("sum-of-separable kernel needs at least one term");
        for (const auto& t : terms) {
          t.data.validate();
          t.graph.validate(num_vertices);
        }
        break;
      case Variant::GraphPc:
        if (!(pc.v > 0.0)) throw InputError("graph PC kernel: v must be positive");
        if (!(pc.ell > 0.0)) throw InputError("graph PC kernel: ell must be positive");
        pc.graph1.validate(num_vertices);
        if (!pc.degree_based) pc.graph2.validate(num_vertices);
        break;
    }
  }
};

inline int count_hyperparameters(const MogpKernelSpec& spec, std::size_t num_vertices) {
  switch (spec.variant) {
    case MogpKernelSpec::Variant::SogpDiag:
      return spec.data.hyperparameter_count();
    case MogpKernelSpec::Variant::Separable:
      return spec.data.hyperparameter_count() + spec.graph.hyperparameter_count(num_vertices);
    case MogpKernelSpec::Variant::SumOfSeparable: {
      int n = 0;
      for (const auto& t : spec.terms)
        n += t.data.hyperparameter_count() + t.graph.hyperparameter_count(num_vertices);
      return n;
    }
    case MogpKernelSpec::Variant::GraphPc:
      return spec.pc.graph1.hyperparameter_count(num_vertices) +
             (spec.pc.degree_based ? 0 : spec.pc.graph2.hyperparameter_count(num_vertices)) + 2;
  }
  return 0;
}

inline int count_hyperparameters(const MogpKernelSpec& spec, const Graph& g) {
  return count_hyperparameters(spec, g.num_vertices());
}

// Immutable evaluation cache for one (spec, graph) pair. Rebuilt, never
// mutated, when hyperparameters change.
class CompiledKernel {
 public:
  CompiledKernel(MogpKernelSpec spec, std::shared_ptr<const GraphOperators> ops)
      : spec_(std::move(spec)), ops_(std::move(ops)) {
    spec_.validate(ops_->num_vertices);
    switch (spec_.variant) {
      case MogpKernelSpec::Variant::SogpDiag:
        break;
      case MogpKernelSpec::Variant::Separable:
        term_mats_.push_back(graph_kernel_matrix(spec_.graph, *ops_));
        break;
      case MogpKernelSpec::Variant::SumOfSeparable:
        for (const auto& t : spec_.terms)
          term_mats_.push_back(graph_kernel_matrix(t.graph, *ops_));
        break;
      case MogpKernelSpec::Variant::GraphPc: {
        pc_k1_ = graph_kernel_matrix(spec_.pc.graph1, *ops_);
        if (spec_.pc.degree_based) {
          for (double d : ops_->degrees)
            if (!(d > 0.0))
              throw NonpositivePEntry(
                  "graph PC kernel: degree-based bandwidth needs positive degrees");
        } else {
          pc_k2_ = graph_kernel_matrix(spec_.pc.graph2, *ops_);
          for (double v : pc_k2_.data())
            if (!(v > 1e-12))
              throw NonpositivePEntry(
                  "graph PC kernel: bandwidth graph kernel has a non-positive entry");
        }
        break;
      }
    }
  }

  CompiledKernel(const MogpKernelSpec& spec, const Graph& g)
      : CompiledKernel(spec, GraphOperators::build(g)) {}

  std::size_t num_vertices() const { return ops_->num_vertices; }
  const MogpKernelSpec& spec() const { return spec_; }
  const GraphOperators& ops() const { return *ops_; }
  std::shared_ptr<const GraphOperators> ops_ptr() const { return ops_; }
  const std::vector<Matrix>& term_graph_matrices() const { return term_mats_; }
  const Matrix& pc_amplitude_matrix() const { return pc_k1_; }
  const Matrix& pc_bandwidth_matrix() const { return pc_k2_; }

  // Scalar entry of P for a vertex pair (the bandwidth is isotropic).
  double pc_p_entry(int m, int mp) const {
    const double inv_ell = 1.0 / spec_.pc.ell;
    if (spec_.pc.degree_based)
      return 1.0 / ops_->degrees[m] + 1.0 / ops_->degrees[mp] + inv_ell;
    const double k2 = pc_k2_(m, mp);
    if (!(k2 > 0.0))
      throw NonpositivePEntry("graph PC kernel: non-positive bandwidth entry");
    return 1.0 / k2 + inv_ell;
  }

  double operator()(int m, int mp, std::span<const double> x,
                    std::span<const double> xp) const {
    if (x.size() != xp.size())
      throw DimensionMismatch("mogp kernel: input dimensions disagree");
    switch (spec_.variant) {
      case MogpKernelSpec::Variant::SogpDiag:
        return m == mp ? data_kernel(spec_.data, x, xp) : 0.0;
      case MogpKernelSpec::Variant::Separable:
        return data_kernel(spec_.data, x, xp) * term_mats_[0](m, mp);
      case MogpKernelSpec::Variant::SumOfSeparable: {
        double s = 0.0;
        for (std::size_t q = 0; q < spec_.terms.size(); ++q)
          s += data_kernel(spec_.terms[q].data, x, xp) * term_mats_[q](m, mp);
        return s;
      }
      case MogpKernelSpec::Variant::GraphPc:
        return pc_entry(m, mp, x, xp);
    }
    return 0.0;
  }

  // Gaussian form without the amplitude factor; shared with the gradient path.
  double pc_gauss(int m, int mp, std::span<const double> x,
                  std::span<const double> xp) const {
    const double pe = pc_p_entry(m, mp);
    const double d = static_cast<double>(x.size());
    const double norm = std::pow(2.0 * std::numbers::pi * pe, -0.5 * d);
    return norm * std::exp(-0.5 * squared_distance(x, xp) / pe);
  }

 private:
  double pc_entry(int m, int mp, std::span<const double> x,
                  std::span<const double> xp) const {
    return spec_.pc.v * spec_.pc.v * pc_k1_(m, mp) * pc_gauss(m, mp, x, xp);
  }

  MogpKernelSpec spec_;
  std::shared_ptr<const GraphOperators> ops_;
  std::vector<Matrix> term_mats_;
  Matrix pc_k1_, pc_k2_;
};

// One-off evaluation; compile the kernel once instead when evaluating many
// entries against the same graph.
inline double mogp_kernel(const MogpKernelSpec& spec, const Graph& g, int m, int mp,
                          std::span<const double> x, std::span<const double> xp) {
  const std::size_t mv = g.num_vertices();
  if (m < 0 || mp < 0 || static_cast<std::size_t>(m) >= mv ||
      static_cast<std::size_t>(mp) >= mv)
    throw InputError("mogp_kernel: vertex index out of range");
  return CompiledKernel(spec, g)(m, mp, x, xp);
}

}  // namespace graphgp
