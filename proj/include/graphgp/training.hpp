#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "graphgp/dataset.hpp"
#include "graphgp/errors.hpp"
#include "graphgp/kernels.hpp"
#include "graphgp/matrix.hpp"
#include "graphgp/model.hpp"
#include "graphgp/numerics.hpp"
#include "graphgp/rng.hpp"

namespace graphgp {

// ---------------------------------------------------------------------------
// Smooth reparameterizations between free optimizer space and constraint sets
// ---------------------------------------------------------------------------

enum class Transform { LogPositive, ShiftedSoftplus, Identity };

namespace detail {

inline double softplus(double u) { return u > 30.0 ? u : std::log1p(std::exp(u)); }
inline double softplus_inverse(double y) {
  if (!(y > 0.0)) throw InputError("softplus_inverse: argument must be positive");
  return y > 30.0 ? y : std::log(std::expm1(y));
}

}  // namespace detail

inline double apply_transform(Transform t, double shift, double u) {
  switch (t) {
    case Transform::LogPositive: return std::exp(u);
    case Transform::ShiftedSoftplus: return shift + detail::softplus(u);
    case Transform::Identity: return u;
  }
  return u;
}

inline double invert_transform(Transform t, double shift, double theta) {
  switch (t) {
    case Transform::LogPositive:
      if (!(theta > 0.0)) throw InputError("parameter must be positive for log transform");
      return std::log(theta);
    case Transform::ShiftedSoftplus: return detail::softplus_inverse(theta - shift);
    case Transform::Identity: return theta;
  }
  return theta;
}

// d theta / d u, the chain factor between transformed and free gradients.
inline double transform_slope(Transform t, double /*shift*/, double u) {
  switch (t) {
    case Transform::LogPositive: return std::exp(u);
    case Transform::ShiftedSoftplus: return 1.0 / (1.0 + std::exp(-u));
    case Transform::Identity: return 1.0;
  }
  return 1.0;
}

// ---------------------------------------------------------------------------
// Parameter vector layout
// ---------------------------------------------------------------------------

struct ParamEntry {
  enum class Target {
    DataV2,
    DataEll,
    GraphAlpha,
    PolyBeta,
    IcmW,
    IcmKappa,
    PcV,
    PcEll,
    NoiseVar,
  };

  std::string name;
  Target target;
  Transform transform = Transform::LogPositive;
  double shift = 0.0;       // ShiftedSoftplus offset
  bool finite_diff = false; // gradient via central differences
  int term = -1;            // SoS term index; 0/1 select graph1/graph2 for PC
  int index = -1;           // beta index / ICM vector index / noise vertex
};

struct ParamLayout {
  std::vector<ParamEntry> entries;
  std::size_t size() const { return entries.size(); }
};

namespace detail {

inline void push_graph_entries(std::vector<ParamEntry>& out, const GraphKernelSpec& spec,
                               const GraphOperators& ops, const std::string& prefix,
                               int term) {
  switch (spec.family) {
    case GraphKernelFamily::Laplacian:
    case GraphKernelFamily::Cosine:
      return;
    case GraphKernelFamily::PStepRandomWalk: {
      // alpha = lambda_max + softplus(u); the PSD constraint holds for any u
      ParamEntry e{prefix + "alpha", ParamEntry::Target::GraphAlpha,
                   Transform::ShiftedSoftplus, ops.lambda_max_normalized(), true, term, -1};
      out.push_back(std::move(e));
      return;
    }
    case GraphKernelFamily::Diffusion:
    case GraphKernelFamily::GraphMatern: {
      ParamEntry e{prefix + "alpha", ParamEntry::Target::GraphAlpha,
                   Transform::LogPositive, 0.0, true, term, -1};
      out.push_back(std::move(e));
      return;
    }
    case GraphKernelFamily::GlobalFiltering:
    case GraphKernelFamily::LocalAveraging:
    case GraphKernelFamily::RegularizedLaplacian: {
      ParamEntry e{prefix + "alpha", ParamEntry::Target::GraphAlpha,
                   Transform::LogPositive, 0.0, false, term, -1};
      out.push_back(std::move(e));
      return;
    }
    case GraphKernelFamily::Polynomial:
      for (std::size_t i = 0; i < spec.beta.size(); ++i)
        out.push_back({prefix + "beta" + std::to_string(i), ParamEntry::Target::PolyBeta,
                       Transform::Identity, 0.0, false, term, static_cast<int>(i)});
      return;
    case GraphKernelFamily::Icm: {
      for (std::size_t i = 0; i < ops.num_vertices; ++i)
        out.push_back({prefix + "w" + std::to_string(i), ParamEntry::Target::IcmW,
                       Transform::Identity, 0.0, false, term, static_cast<int>(i)});
      for (std::size_t i = 0; i < ops.num_vertices; ++i)
        out.push_back({prefix + "kappa" + std::to_string(i), ParamEntry::Target::IcmKappa,
                       Transform::LogPositive, 0.0, false, term, static_cast<int>(i)});
      return;
    }
  }
}

inline void push_data_entries(std::vector<ParamEntry>& out, const std::string& prefix,
                              int term) {
  out.push_back({prefix + "v2", ParamEntry::Target::DataV2, Transform::LogPositive, 0.0,
                 false, term, -1});
  out.push_back({prefix + "ell", ParamEntry::Target::DataEll, Transform::LogPositive, 0.0,
                 false, term, -1});
}

}  // namespace detail

// Ordering contract: data-kernel parameters, then graph-kernel parameters
// (per term for sum-of-separable), then noise variances.
inline ParamLayout make_param_layout(const MogpKernelSpec& spec, const NoiseModel& noise,
                                     const GraphOperators& ops) {
  ParamLayout layout;
  auto& out = layout.entries;
  switch (spec.variant) {
    case MogpKernelSpec::Variant::SogpDiag:
      detail::push_data_entries(out, "data.", -1);
      break;
    case MogpKernelSpec::Variant::Separable:
      detail::push_data_entries(out, "data.", -1);
      detail::push_graph_entries(out, spec.graph, ops, "graph.", -1);
      break;
    case MogpKernelSpec::Variant::SumOfSeparable:
      for (std::size_t q = 0; q < spec.terms.size(); ++q) {
        const std::string p = "term" + std::to_string(q) + ".";
        detail::push_data_entries(out, p + "data.", static_cast<int>(q));
        detail::push_graph_entries(out, spec.terms[q].graph, ops, p + "graph.",
                                   static_cast<int>(q));
      }
      break;
    case MogpKernelSpec::Variant::GraphPc:
      out.push_back({"pc.v", ParamEntry::Target::PcV, Transform::LogPositive, 0.0, false,
                     -1, -1});
      out.push_back({"pc.ell", ParamEntry::Target::PcEll, Transform::LogPositive, 0.0,
                     false, -1, -1});
      detail::push_graph_entries(out, spec.pc.graph1, ops, "pc.graph1.", 0);
      if (!spec.pc.degree_based)
        detail::push_graph_entries(out, spec.pc.graph2, ops, "pc.graph2.", 1);
      break;
  }
  if (noise.shared) {
    out.push_back({"noise.sigma2", ParamEntry::Target::NoiseVar, Transform::LogPositive,
                   0.0, false, -1, -1});
  } else {
    for (std::size_t m = 0; m < noise.variances.size(); ++m)
      out.push_back({"noise.sigma2." + std::to_string(m), ParamEntry::Target::NoiseVar,
                     Transform::LogPositive, 0.0, false, -1, static_cast<int>(m)});
  }
  return layout;
}

namespace detail {

inline GraphKernelSpec& graph_spec_slot(MogpKernelSpec& spec, const ParamEntry& e) {
  switch (spec.variant) {
    case MogpKernelSpec::Variant::Separable: return spec.graph;
    case MogpKernelSpec::Variant::SumOfSeparable: return spec.terms[e.term].graph;
    case MogpKernelSpec::Variant::GraphPc:
      return e.term == 0 ? spec.pc.graph1 : spec.pc.graph2;
    default: throw InputError("parameter layout does not match the kernel variant");
  }
}

inline const GraphKernelSpec& graph_spec_slot(const MogpKernelSpec& spec,
                                              const ParamEntry& e) {
  return graph_spec_slot(const_cast<MogpKernelSpec&>(spec), e);
}

inline double read_parameter(const MogpKernelSpec& spec, const NoiseModel& noise,
                             const ParamEntry& e) {
  switch (e.target) {
    case ParamEntry::Target::DataV2:
      return (e.term < 0 ? spec.data : spec.terms[e.term].data).v2;
    case ParamEntry::Target::DataEll:
      return (e.term < 0 ? spec.data : spec.terms[e.term].data).ell;
    case ParamEntry::Target::GraphAlpha: return graph_spec_slot(spec, e).alpha;
    case ParamEntry::Target::PolyBeta: return graph_spec_slot(spec, e).beta[e.index];
    case ParamEntry::Target::IcmW: return graph_spec_slot(spec, e).w[e.index];
    case ParamEntry::Target::IcmKappa: return graph_spec_slot(spec, e).kappa[e.index];
    case ParamEntry::Target::PcV: return spec.pc.v;
    case ParamEntry::Target::PcEll: return spec.pc.ell;
    case ParamEntry::Target::NoiseVar:
      return noise.variances[e.index < 0 ? 0 : e.index];
  }
  return 0.0;
}

inline void write_parameter(MogpKernelSpec& spec, NoiseModel& noise, const ParamEntry& e,
                            double theta) {
  switch (e.target) {
    case ParamEntry::Target::DataV2:
      (e.term < 0 ? spec.data : spec.terms[e.term].data).v2 = theta;
      return;
    case ParamEntry::Target::DataEll:
      (e.term < 0 ? spec.data : spec.terms[e.term].data).ell = theta;
      return;
    case ParamEntry::Target::GraphAlpha: graph_spec_slot(spec, e).alpha = theta; return;
    case ParamEntry::Target::PolyBeta: graph_spec_slot(spec, e).beta[e.index] = theta; return;
    case ParamEntry::Target::IcmW: graph_spec_slot(spec, e).w[e.index] = theta; return;
    case ParamEntry::Target::IcmKappa:
      graph_spec_slot(spec, e).kappa[e.index] = theta;
      return;
    case ParamEntry::Target::PcV: spec.pc.v = theta; return;
    case ParamEntry::Target::PcEll: spec.pc.ell = theta; return;
    case ParamEntry::Target::NoiseVar:
      if (e.index < 0)
        noise.variances.assign(noise.variances.size(), theta);
      else
        noise.variances[e.index] = theta;
      return;
  }
}

}  // namespace detail

inline Vector pack_parameters(const MogpKernelSpec& spec, const NoiseModel& noise,
                              const ParamLayout& layout) {
  Vector u(layout.size());
  for (std::size_t p = 0; p < layout.size(); ++p) {
    const ParamEntry& e = layout.entries[p];
    u[p] = invert_transform(e.transform, e.shift,
                            detail::read_parameter(spec, noise, e));
  }
  return u;
}

inline std::pair<MogpKernelSpec, NoiseModel> unpack_parameters(const Vector& u,
                                                               const MogpKernelSpec& spec,
                                                               const NoiseModel& noise,
                                                               const ParamLayout& layout) {
  if (u.size() != layout.size())
    throw DimensionMismatch("unpack_parameters: vector does not match the layout");
  MogpKernelSpec out_spec = spec;
  NoiseModel out_noise = noise;
  for (std::size_t p = 0; p < layout.size(); ++p) {
    const ParamEntry& e = layout.entries[p];
    detail::write_parameter(out_spec, out_noise, e,
                            apply_transform(e.transform, e.shift, u[p]));
  }
  return {std::move(out_spec), std::move(out_noise)};
}

// ---------------------------------------------------------------------------
// Likelihood, gradient, and the optimizer
// ---------------------------------------------------------------------------

struct OptimizerConfig {
  double learning_rate = 0.05;
  int max_iters = 500;
  double tol = 1e-6;  // relative improvement across a 10-iteration window
  int restarts = 3;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate > 0.0) || max_iters < 0 || !(tol > 0.0) || restarts < 1)
      throw InputError("OptimizerConfig: all fields must be positive");
  }
};

struct TraceRow {
  int iter;
  double log_likelihood;
  double step_scale;
};

// Marginal-likelihood objective over the free parameter vector for one
// (kernel structure, dataset, graph) triple.
class LikelihoodProblem {
 public:
  LikelihoodProblem(MogpKernelSpec spec, NoiseModel noise,
                    std::shared_ptr<const Graph> graph,
                    std::shared_ptr<const MultiDataset> data)
      : template_spec_(std::move(spec)),
        template_noise_(std::move(noise)),
        graph_(std::move(graph)),
        data_(std::move(data)),
        ops_(GraphOperators::build(*graph_)) {
    if (data_->total_points() == 0) throw InputError("fit: empty dataset");
    if (data_->num_vertices() != graph_->num_vertices())
      throw DimensionMismatch("fit: dataset vertex count disagrees with graph");
    size_icm_vectors(template_spec_);
    layout_ = make_param_layout(template_spec_, template_noise_, *ops_);
  }

  const ParamLayout& layout() const { return layout_; }
  const GraphOperators& ops() const { return *ops_; }
  std::shared_ptr<const Graph> graph() const { return graph_; }
  std::shared_ptr<const MultiDataset> data() const { return data_; }

  std::pair<MogpKernelSpec, NoiseModel> materialize(const Vector& u) const {
    return unpack_parameters(u, template_spec_, template_noise_, layout_);
  }

  // Scale-aware defaults: amplitude from the output variance, length scale
  // from the median pairwise input distance, noise at a tenth of the output
  // variance. ICM weights start at small seeded noise.
  Vector initial_params(std::uint64_t seed) const {
    MogpKernelSpec spec = template_spec_;
    NoiseModel noise = template_noise_;
    const double var_y = output_variance();
    const double med = median_pairwise_distance();
    auto rng = make_rng(mix_seed(seed, 0xA11CE));
    std::normal_distribution<double> gauss(0.0, 0.1);

    auto init_data = [&](DataKernelSpec& d) {
      d.v2 = var_y;
      d.ell = med;
    };
    auto init_graph = [&](GraphKernelSpec& g) {
      switch (g.family) {
        case GraphKernelFamily::PStepRandomWalk:
          g.alpha = ops_->lambda_max_normalized() + 1.0;
          break;
        case GraphKernelFamily::Polynomial:
          for (std::size_t i = 0; i < g.beta.size(); ++i) g.beta[i] = i == 0 ? 1.0 : 0.1;
          break;
        case GraphKernelFamily::Icm:
          g.w.assign(ops_->num_vertices, 0.0);
          for (auto& w : g.w) w = gauss(rng);
          g.kappa.assign(ops_->num_vertices, 0.1);
          break;
        default:
          if (g.has_alpha()) g.alpha = 1.0;
      }
    };
    switch (spec.variant) {
      case MogpKernelSpec::Variant::SogpDiag:
        init_data(spec.data);
        break;
      case MogpKernelSpec::Variant::Separable:
        init_data(spec.data);
        init_graph(spec.graph);
        break;
      case MogpKernelSpec::Variant::SumOfSeparable:
        for (auto& t : spec.terms) {
          init_data(t.data);
          init_graph(t.graph);
        }
        break;
      case MogpKernelSpec::Variant::GraphPc:
        spec.pc.v = std::sqrt(var_y);
        spec.pc.ell = med;
        init_graph(spec.pc.graph1);
        if (!spec.pc.degree_based) init_graph(spec.pc.graph2);
        break;
    }
    noise.variances.assign(noise.variances.size(), std::max(0.1 * var_y, 1e-4));
    return pack_parameters(spec, noise, layout_);
  }

  double value(const Vector& u) const {
    const auto [spec, noise] = materialize(u);
    CompiledKernel kernel(spec, ops_);
    return log_marginal_likelihood(kernel, *data_, noise);
  }

  std::pair<double, Vector> value_and_gradient(const Vector& u) const {
    const auto [spec, noise] = materialize(u);
    CompiledKernel kernel(spec, ops_);
    const std::size_t n = data_->total_points();
    const auto refs = block_refs(*data_);
    Matrix k = assemble_covariance(kernel, refs, refs);
    const Vector sigma = noise_diagonal(*data_, noise);
    for (std::size_t i = 0; i < n; ++i) k(i, i) += sigma[i];
    const CholFactor factor = cholesky(k);
    const Vector y = data_->stacked_outputs();
    const Vector alpha = solve_chol(factor, y);
    const double value =
        -0.5 * (dot(y, alpha) + logdet(factor)) -
        0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);

    Vector grad(layout_.size(), 0.0);
    bool need_kinv = false;
    for (const auto& e : layout_.entries)
      if (!e.finite_diff) need_kinv = true;
    Matrix kinv;
    if (need_kinv) kinv = solve_chol(factor, Matrix::identity(n));

    for (std::size_t p = 0; p < layout_.size(); ++p) {
      const ParamEntry& e = layout_.entries[p];
      if (e.finite_diff) {
        const double h = 1e-5;
        Vector up = u;
        up[p] = u[p] + h;
        const double fp = value_noexcept(up);
        up[p] = u[p] - h;
        const double fm = value_noexcept(up);
        grad[p] = (fp - fm) / (2.0 * h);
        continue;
      }
      if (e.target == ParamEntry::Target::NoiseVar) {
        // dK/du is diagonal: sigma2 on this entry's rows (log transform folded in)
        const double theta = detail::read_parameter(spec, noise, e);
        double acc = 0.0;
        std::size_t row = 0;
        for (std::size_t m = 0; m < data_->num_vertices(); ++m) {
          const std::size_t nm = data_->block(m).size();
          if (e.index < 0 || e.index == static_cast<int>(m))
            for (std::size_t i = 0; i < nm; ++i) {
              const std::size_t r = row + i;
              acc += alpha[r] * alpha[r] - kinv(r, r);
            }
          row += nm;
        }
        grad[p] = 0.5 * acc * theta;
        continue;
      }
      const Matrix dk = assemble_blocks(refs, refs, entry_derivative(kernel, spec, e));
      const Vector dka = dk * alpha;
      const double g_theta = 0.5 * (dot(alpha, dka) - dot(kinv, dk));
      grad[p] = g_theta * transform_slope(e.transform, e.shift, u[p]);
    }
    return {value, std::move(grad)};
  }

 private:
  // ICM vectors may arrive unsized; the trained values are data-driven anyway.
  void size_icm_vectors(MogpKernelSpec& spec) const {
    auto fix = [&](GraphKernelSpec& g) {
      if (g.family != GraphKernelFamily::Icm) return;
      if (g.w.size() != ops_->num_vertices) g.w.assign(ops_->num_vertices, 0.0);
      if (g.kappa.size() != ops_->num_vertices) g.kappa.assign(ops_->num_vertices, 0.1);
    };
    switch (spec.variant) {
      case MogpKernelSpec::Variant::Separable: fix(spec.graph); break;
      case MogpKernelSpec::Variant::SumOfSeparable:
        for (auto& t : spec.terms) fix(t.graph);
        break;
      case MogpKernelSpec::Variant::GraphPc:
        fix(spec.pc.graph1);
        if (!spec.pc.degree_based) fix(spec.pc.graph2);
        break;
      default: break;
    }
  }

  double value_noexcept(const Vector& u) const {
    try {
      return value(u);
    } catch (const NumericalError&) {
      return -std::numeric_limits<double>::infinity();
    }
  }

  double output_variance() const {
    const Vector y = data_->stacked_outputs();
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    double var = 0.0;
    for (double v : y) var += (v - mean) * (v - mean);
    var /= static_cast<double>(y.size());
    return var > 1e-12 ? var : 1.0;
  }

  double median_pairwise_distance() const {
    std::vector<std::span<const double>> xs;
    for (std::size_t m = 0; m < data_->num_vertices(); ++m)
      for (std::size_t i = 0; i < data_->block(m).size(); ++i)
        xs.push_back(data_->block(m).inputs.row(i));
    Vector dists;
    dists.reserve(xs.size() * (xs.size() - 1) / 2);
    for (std::size_t i = 0; i < xs.size(); ++i)
      for (std::size_t j = i + 1; j < xs.size(); ++j)
        dists.push_back(euclidean_distance(xs[i], xs[j]));
    if (dists.empty()) return 1.0;
    std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
    const double med = dists[dists.size() / 2];
    return med > 1e-12 ? med : 1.0;
  }

  // Entrywise d k_mm'(x, x') / d theta for analytic parameters.
  using EntryFn = std::function<double(int, int, std::span<const double>,
                                       std::span<const double>)>;

  EntryFn entry_derivative(const CompiledKernel& kernel, const MogpKernelSpec& spec,
                           const ParamEntry& e) const {
    using T = ParamEntry::Target;
    const bool sogp = spec.variant == MogpKernelSpec::Variant::SogpDiag;
    switch (e.target) {
      case T::DataV2:
      case T::DataEll: {
        const DataKernelSpec& d = e.term < 0 ? spec.data : spec.terms[e.term].data;
        const bool wrt_v2 = e.target == T::DataV2;
        if (sogp) {
          return [&d, wrt_v2](int m, int mp, auto x, auto xp) {
            if (m != mp) return 0.0;
            return wrt_v2 ? data_kernel_grad_v2(d, x, xp) : data_kernel_grad_ell(d, x, xp);
          };
        }
        const Matrix& kg = kernel.term_graph_matrices()[e.term < 0 ? 0 : e.term];
        return [&d, &kg, wrt_v2](int m, int mp, auto x, auto xp) {
          const double dk =
              wrt_v2 ? data_kernel_grad_v2(d, x, xp) : data_kernel_grad_ell(d, x, xp);
          return dk * kg(m, mp);
        };
      }
      case T::GraphAlpha: {
        if (spec.variant == MogpKernelSpec::Variant::GraphPc)
          return pc_graph_alpha_derivative(kernel, spec, e);
        const GraphKernelSpec& gs = detail::graph_spec_slot(spec, e);
        auto dkg = std::make_shared<Matrix>(graph_kernel_matrix_dalpha(gs, *ops_));
        const DataKernelSpec& d = e.term < 0 ? spec.data : spec.terms[e.term].data;
        return [&d, dkg](int m, int mp, auto x, auto xp) {
          return data_kernel(d, x, xp) * (*dkg)(m, mp);
        };
      }
      case T::PolyBeta: {
        const GraphKernelSpec& gs = detail::graph_spec_slot(spec, e);
        auto dkg = std::make_shared<Matrix>(
            graph_kernel_matrix_dbeta(gs, *ops_, static_cast<std::size_t>(e.index)));
        const DataKernelSpec& d = e.term < 0 ? spec.data : spec.terms[e.term].data;
        return [&d, dkg](int m, int mp, auto x, auto xp) {
          return data_kernel(d, x, xp) * (*dkg)(m, mp);
        };
      }
      case T::IcmW: {
        const GraphKernelSpec& gs = detail::graph_spec_slot(spec, e);
        const int i = e.index;
        const DataKernelSpec& d = e.term < 0 ? spec.data : spec.terms[e.term].data;
        const Vector& w = gs.w;
        return [&d, &w, i](int m, int mp, auto x, auto xp) {
          double dkg = 0.0;
          if (m == i) dkg += w[mp];
          if (mp == i) dkg += w[m];
          if (dkg == 0.0) return 0.0;
          return data_kernel(d, x, xp) * dkg;
        };
      }
      case T::IcmKappa: {
        const int i = e.index;
        const DataKernelSpec& d = e.term < 0 ? spec.data : spec.terms[e.term].data;
        return [&d, i](int m, int mp, auto x, auto xp) {
          if (m != i || mp != i) return 0.0;
          return data_kernel(d, x, xp);
        };
      }
      case T::PcV: {
        const double v = spec.pc.v;
        return [&kernel, v](int m, int mp, auto x, auto xp) {
          return 2.0 / v * kernel(m, mp, x, xp);
        };
      }
      case T::PcEll: {
        const double ell = spec.pc.ell;
        return [&kernel, ell](int m, int mp, auto x, auto xp) {
          const double pe = kernel.pc_p_entry(m, mp);
          const double k = kernel(m, mp, x, xp);
          const double r2 = squared_distance(x, xp);
          const double dim = static_cast<double>(x.size());
          const double dk_dpe = k * (-0.5 * dim / pe + 0.5 * r2 / (pe * pe));
          return dk_dpe * (-1.0 / (ell * ell));
        };
      }
      default:
        throw InputError("entry_derivative: unsupported target");
    }
  }

  EntryFn pc_graph_alpha_derivative(const CompiledKernel& kernel,
                                    const MogpKernelSpec& spec,
                                    const ParamEntry& e) const {
    const GraphKernelSpec& gs = detail::graph_spec_slot(spec, e);
    auto dkg = std::make_shared<Matrix>(graph_kernel_matrix_dalpha(gs, *ops_));
    const double v2 = spec.pc.v * spec.pc.v;
    if (e.term == 0) {
      // amplitude factor: k = v^2 K1 * gauss
      return [&kernel, dkg, v2](int m, int mp, auto x, auto xp) {
        return v2 * (*dkg)(m, mp) * kernel.pc_gauss(m, mp, x, xp);
      };
    }
    // bandwidth factor: chain through P = 1/K2 + 1/ell
    const Matrix& k2 = kernel.pc_bandwidth_matrix();
    return [&kernel, dkg, &k2](int m, int mp, auto x, auto xp) {
      const double pe = kernel.pc_p_entry(m, mp);
      const double k = kernel(m, mp, x, xp);
      const double r2 = squared_distance(x, xp);
      const double dim = static_cast<double>(x.size());
      const double dk_dpe = k * (-0.5 * dim / pe + 0.5 * r2 / (pe * pe));
      const double k2e = k2(m, mp);
      return dk_dpe * (-1.0 / (k2e * k2e)) * (*dkg)(m, mp);
    };
  }

  MogpKernelSpec template_spec_;
  NoiseModel template_noise_;
  std::shared_ptr<const Graph> graph_;
  std::shared_ptr<const MultiDataset> data_;
  std::shared_ptr<const GraphOperators> ops_;
  ParamLayout layout_;
};

struct FitResult {
  FittedModel model;
  Vector params;               // final free-parameter vector
  std::vector<TraceRow> trace; // winning restart, one row per accepted step
  int best_restart = 0;
  int failed_restarts = 0;
};

namespace detail {

struct RestartOutcome {
  Vector u;
  double value;
  std::vector<TraceRow> trace;
};

inline std::optional<RestartOutcome> run_gradient_ascent(const LikelihoodProblem& problem,
                                                         Vector u,
                                                         const OptimizerConfig& cfg) {
  constexpr int kWindow = 10;
  constexpr int kMaxHalvings = 20;
  std::vector<TraceRow> trace;
  Vector history;
  double value;
  Vector grad;
  try {
    std::tie(value, grad) = problem.value_and_gradient(u);
  } catch (const NumericalError&) {
    return std::nullopt;
  }
  trace.push_back({0, value, 0.0});
  history.push_back(value);

  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    double scale = 1.0;
    Vector u_try(u.size());
    double val_try = -std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int h = 0; h <= kMaxHalvings; ++h) {
      for (std::size_t p = 0; p < u.size(); ++p)
        u_try[p] = u[p] + scale * cfg.learning_rate * grad[p];
      try {
        val_try = problem.value(u_try);
      } catch (const NumericalError&) {
        val_try = -std::numeric_limits<double>::infinity();
      }
      if (val_try >= value && std::isfinite(val_try)) {
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted) break;  // no ascent direction left at the smallest step
    u = u_try;
    try {
      std::tie(value, grad) = problem.value_and_gradient(u);
    } catch (const NumericalError&) {
      break;
    }
    trace.push_back({iter, value, scale});
    history.push_back(value);
    if (static_cast<int>(history.size()) > kWindow) {
      const double gain = value - history[history.size() - 1 - kWindow];
      if (gain <= cfg.tol * std::max(1.0, std::abs(value))) break;
    }
  }
  return RestartOutcome{std::move(u), value, std::move(trace)};
}

}  // namespace detail

// Gradient ascent on the log-marginal likelihood with step halving and
// best-of-restarts selection. Deterministic for a fixed seed.
inline FitResult fit(const MogpKernelSpec& spec, std::shared_ptr<const Graph> graph,
                     std::shared_ptr<const MultiDataset> data, const OptimizerConfig& cfg,
                     bool shared_noise = true) {
  cfg.validate();
  NoiseModel noise_template;
  noise_template.shared = shared_noise;
  noise_template.variances.assign(graph->num_vertices(), 0.1);
  LikelihoodProblem problem(spec, noise_template, graph, std::move(data));

  const Vector u0 = problem.initial_params(cfg.seed);
  std::optional<detail::RestartOutcome> best;
  int best_restart = 0;
  int failed = 0;
  for (int r = 0; r < cfg.restarts; ++r) {
    Vector u = u0;
    if (r > 0) {
      auto rng = make_rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(r)));
      std::normal_distribution<double> gauss(0.0, 0.5);
      for (double& v : u) v += gauss(rng);
    }
    auto outcome = detail::run_gradient_ascent(problem, std::move(u), cfg);
    if (!outcome) {
      ++failed;
      continue;
    }
    if (!best || outcome->value > best->value) {
      best = std::move(outcome);
      best_restart = r;
    }
  }
  if (!best) throw AllRestartsFailed("fit: every optimizer restart failed to evaluate");

  auto [fitted_spec, fitted_noise] = problem.materialize(best->u);
  FittedModel model = FittedModel::build(std::move(fitted_spec), problem.graph(),
                                         problem.data(), std::move(fitted_noise));
  return FitResult{std::move(model), std::move(best->u), std::move(best->trace),
                   best_restart, failed};
}

}  // namespace graphgp
