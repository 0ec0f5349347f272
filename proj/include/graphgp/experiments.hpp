#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "graphgp/dataset.hpp"
#include "graphgp/errors.hpp"
#include "graphgp/graph.hpp"
#include "graphgp/io.hpp"
#include "graphgp/model.hpp"
#include "graphgp/rng.hpp"
#include "graphgp/training.hpp"

namespace graphgp {

// ---------------------------------------------------------------------------
// Synthetic generators
// ---------------------------------------------------------------------------

// Random-regular-graph study: isotopic inputs on [0, 5], one latent term per
// vertex, and each vertex observing the sum over its neighbors:
//   y_mn = sum_{j in N(m)} (p_j cos(q_j x_n) + r_j x_n) + eps,  eps ~ N(0, noise_var)
// p_j ~ U[0,10], q_j ~ U[qj_lo, qj_hi], r_j ~ U[-6,6], fixed per vertex.
struct RegularSuiteParams {
  std::size_t m = 32;
  std::size_t k = 6;
  std::size_t n_train = 10;
  std::size_t n_test = 10;
  double noise_var = 5.0;
  double qj_lo = 5.0;
  double qj_hi = 5.0;
  double x_lo = 0.0;
  double x_hi = 5.0;
};

struct SincSuiteParams {
  double noise_var = 1e-4;  // N(0, 0.01) read as a standard deviation
  std::size_t n_test = 10;
};

// A drawn test set: inputs plus both target flavors.
struct TestDraw {
  TestQuery query;
  Vector truth_clean;  // underlying function values, vertex-major
  Vector truth_noisy;  // with fresh observation noise
};

namespace detail {

inline double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(x) / x; }

}  // namespace detail

// Fixed (graph, training data) with repeatable per-trial test draws.
class RegularInstance {
 public:
  RegularInstance(const RegularSuiteParams& params, std::uint64_t seed)
      : params_(params), seed_(seed) {
    graph_ = std::make_shared<Graph>(random_k_regular(params.m, params.k, mix_seed(seed, 1)));
    neighbors_ = graph_->neighbor_lists();

    auto rng = make_rng(mix_seed(seed, 2));
    std::uniform_real_distribution<double> p_draw(0.0, 10.0);
    std::uniform_real_distribution<double> q_draw(params.qj_lo, params.qj_hi);
    std::uniform_real_distribution<double> r_draw(-6.0, 6.0);
    p_.resize(params.m);
    q_.resize(params.m);
    r_.resize(params.m);
    for (std::size_t j = 0; j < params.m; ++j) {
      p_[j] = p_draw(rng);
      q_[j] = q_draw(rng);
      r_[j] = r_draw(rng);
    }

    std::uniform_real_distribution<double> x_draw(params.x_lo, params.x_hi);
    train_inputs_ = Matrix(params.n_train, 1);
    for (std::size_t n = 0; n < params.n_train; ++n) train_inputs_(n, 0) = x_draw(rng);

    std::normal_distribution<double> noise(0.0, std::sqrt(params.noise_var));
    std::vector<VertexBlock> blocks(params.m);
    for (std::size_t m = 0; m < params.m; ++m) {
      blocks[m].inputs = train_inputs_;
      blocks[m].outputs.resize(params.n_train);
      for (std::size_t n = 0; n < params.n_train; ++n)
        blocks[m].outputs[n] =
            underlying(m, train_inputs_(n, 0)) + (params.noise_var > 0.0 ? noise(rng) : 0.0);
    }
    data_ = std::make_shared<MultiDataset>(std::move(blocks));
  }

  std::shared_ptr<const Graph> graph() const { return graph_; }
  std::shared_ptr<const MultiDataset> data() const { return data_; }
  const RegularSuiteParams& params() const { return params_; }
  const Vector& amplitude() const { return p_; }
  const Vector& frequency() const { return q_; }
  const Vector& slope() const { return r_; }

  double underlying(std::size_t vertex, double x) const {
    double s = 0.0;
    for (int j : neighbors_[vertex]) s += p_[j] * std::cos(q_[j] * x) + r_[j] * x;
    return s;
  }

  // Fresh shared test inputs and targets; disjoint from the training inputs.
  TestDraw draw_test(std::uint64_t trial) const {
    auto rng = make_rng(mix_seed(seed_, 1000 + trial));
    std::uniform_real_distribution<double> x_draw(params_.x_lo, params_.x_hi);
    std::set<double> train_x(train_inputs_.data().begin(), train_inputs_.data().end());
    Matrix xs(params_.n_test, 1);
    for (std::size_t n = 0; n < params_.n_test; ++n) {
      double x = x_draw(rng);
      while (train_x.count(x)) x = x_draw(rng);
      xs(n, 0) = x;
    }
    std::normal_distribution<double> noise(0.0, std::sqrt(params_.noise_var));
    TestDraw draw{TestQuery::all_vertices(std::vector<Matrix>(params_.m, xs)), {}, {}};
    draw.truth_clean.reserve(params_.m * params_.n_test);
    draw.truth_noisy.reserve(params_.m * params_.n_test);
    for (std::size_t m = 0; m < params_.m; ++m)
      for (std::size_t n = 0; n < params_.n_test; ++n) {
        const double f = underlying(m, xs(n, 0));
        draw.truth_clean.push_back(f);
        draw.truth_noisy.push_back(f + (params_.noise_var > 0.0 ? noise(rng) : 0.0));
      }
    return draw;
  }

 private:
  RegularSuiteParams params_;
  std::uint64_t seed_;
  std::shared_ptr<const Graph> graph_;
  std::shared_ptr<const MultiDataset> data_;
  std::vector<std::vector<int>> neighbors_;
  Vector p_, q_, r_;
  Matrix train_inputs_;
};

// Induced-subgraph study: six vertices owning equal-width intervals of
// [-15, 15] left to right, outputs sin(x)/x plus noise. Vertices 1..5 hold 20
// points each, vertex 6 holds 10; prediction happens on vertex 6's interval.
// The graph is the chain 1-2-3-4-5-6 plus the symmetry pairs (1,6) and (2,5)
// ((3,4) already sits on the chain).
class SincInstance {
 public:
  static constexpr std::size_t kNumVertices = 6;

  SincInstance(const SincSuiteParams& params, std::uint64_t seed)
      : params_(params), seed_(seed) {
    graph_ = std::make_shared<Graph>(
        kNumVertices,
        std::vector<Edge>{{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {0, 5}, {1, 4}});
    auto rng = make_rng(mix_seed(seed, 11));
    std::normal_distribution<double> noise(0.0, std::sqrt(params.noise_var));
    std::vector<VertexBlock> blocks(kNumVertices);
    for (std::size_t v = 0; v < kNumVertices; ++v) {
      const std::size_t n = v + 1 < kNumVertices ? 20 : 10;
      std::uniform_real_distribution<double> x_draw(interval_lo(v), interval_hi(v));
      blocks[v].inputs = Matrix(n, 1);
      blocks[v].outputs.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double x = x_draw(rng);
        blocks[v].inputs(i, 0) = x;
        blocks[v].outputs[i] =
            detail::sinc(x) + (params.noise_var > 0.0 ? noise(rng) : 0.0);
      }
    }
    data_ = std::make_shared<MultiDataset>(std::move(blocks));
  }

  static double interval_lo(std::size_t v) { return -15.0 + 5.0 * static_cast<double>(v); }
  static double interval_hi(std::size_t v) { return interval_lo(v) + 5.0; }

  std::shared_ptr<const Graph> graph() const { return graph_; }
  std::shared_ptr<const MultiDataset> data() const { return data_; }
  const SincSuiteParams& params() const { return params_; }

  TestDraw draw_test(std::uint64_t trial) const {
    auto rng = make_rng(mix_seed(seed_, 2000 + trial));
    const std::size_t target = kNumVertices - 1;
    std::uniform_real_distribution<double> x_draw(interval_lo(target), interval_hi(target));
    std::normal_distribution<double> noise(0.0, std::sqrt(params_.noise_var));
    Matrix xs(params_.n_test, 1);
    TestDraw draw{TestQuery({static_cast<int>(target)}, {Matrix()}), {}, {}};
    for (std::size_t i = 0; i < params_.n_test; ++i) {
      const double x = x_draw(rng);
      xs(i, 0) = x;
      const double f = detail::sinc(x);
      draw.truth_clean.push_back(f);
      draw.truth_noisy.push_back(f + (params_.noise_var > 0.0 ? noise(rng) : 0.0));
    }
    draw.query.inputs[0] = std::move(xs);
    return draw;
  }

 private:
  SincSuiteParams params_;
  std::uint64_t seed_;
  std::shared_ptr<const Graph> graph_;
  std::shared_ptr<const MultiDataset> data_;
};

// Convenience single-draw forms.
struct GeneratedExperiment {
  std::shared_ptr<const Graph> graph;
  std::shared_ptr<const MultiDataset> data;
  TestDraw test;
};

inline GeneratedExperiment gen_regular_experiment_data(const RegularSuiteParams& params,
                                                       std::uint64_t seed) {
  RegularInstance inst(params, seed);
  return {inst.graph(), inst.data(), inst.draw_test(0)};
}

inline GeneratedExperiment gen_sinc_subgraph_data(std::uint64_t seed,
                                                  const SincSuiteParams& params = {}) {
  SincInstance inst(params, seed);
  return {inst.graph(), inst.data(), inst.draw_test(0)};
}

// ---------------------------------------------------------------------------
// Suite runner
// ---------------------------------------------------------------------------

struct MethodSpec {
  std::string name;
  MogpKernelSpec kernel;
};

struct ExperimentOptions {
  std::string suite;  // "regular" | "subgraph" | "real"
  std::vector<MethodSpec> methods;
  int trials = 100;
  std::uint64_t seed = 0;
  OptimizerConfig opt;
  bool emit_raw = false;
  bool noisy_targets = false;   // evaluate against noisy targets instead of the
                                // underlying function values
  bool observed_cov = false;    // log-likelihood under the observed covariance
  RegularSuiteParams regular;
  SincSuiteParams sinc;
  // real suite inputs
  std::string data_csv_path;
  std::string graph_json_path;
  std::size_t real_n_train = 0;
  std::size_t real_n_test = 0;
};

struct MethodOutcome {
  std::string name;
  bool failed = false;
  std::string error;
  Vector trial_mse;
  Vector trial_loglik;
  double mse_mean = 0.0, mse_se = 0.0;
  double loglik_mean = 0.0, loglik_se = 0.0;
  double wall_seconds = 0.0;
  std::vector<Vector> raw_means;    // per trial, when emit_raw
  std::vector<Vector> raw_targets;  // per trial, when emit_raw
};

struct ExperimentReport {
  ExperimentOptions options;
  std::vector<MethodOutcome> rows;
  JsonValue generator_metadata = JsonValue::object();
  std::string generated_at;
};

namespace detail {

inline std::pair<double, double> mean_and_se(const Vector& xs) {
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double v : xs) mean += v;
  mean /= n;
  if (xs.size() < 2) return {mean, 0.0};
  double var = 0.0;
  for (double v : xs) var += (v - mean) * (v - mean);
  var /= (n - 1.0);
  return {mean, std::sqrt(var) / std::sqrt(n)};
}

inline double mean_of(const Vector& xs) {
  double s = 0.0;
  for (double v : xs) s += v;
  return s / static_cast<double>(xs.size());
}

inline std::string iso8601_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

// Empty out the blocks of vertices that are never queried. This is the
// conventional reformulation a no-coupling baseline is limited to when the
// prediction targets a vertex subset: it can only see those vertices' own
// observations.
inline std::shared_ptr<const MultiDataset> restrict_to_queried(
    const MultiDataset& data, const std::vector<TestDraw>& draws) {
  std::vector<bool> queried(data.num_vertices(), false);
  for (const TestDraw& d : draws)
    for (int v : d.query.vertices) queried[v] = true;
  std::vector<VertexBlock> blocks;
  for (std::size_t m = 0; m < data.num_vertices(); ++m) {
    if (queried[m])
      blocks.push_back(data.block(m));
    else
      blocks.push_back(VertexBlock{Matrix(0, data.input_dim()), {}});
  }
  return std::make_shared<MultiDataset>(std::move(blocks));
}

// Fit once on the fixed training set, then score every prepared test draw.
inline MethodOutcome evaluate_fixed_training(const MethodSpec& method,
                                             std::shared_ptr<const Graph> graph,
                                             std::shared_ptr<const MultiDataset> data,
                                             const std::vector<TestDraw>& draws,
                                             const ExperimentOptions& opts,
                                             std::uint64_t fit_seed,
                                             bool restrict_sogp_to_query = false) {
  MethodOutcome out;
  out.name = method.name;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (restrict_sogp_to_query &&
        method.kernel.variant == MogpKernelSpec::Variant::SogpDiag)
      data = restrict_to_queried(*data, draws);
    const double y_mean = mean_of(data->stacked_outputs());
    const auto centered =
        std::make_shared<MultiDataset>(data->with_outputs_shifted(-y_mean));
    OptimizerConfig cfg = opts.opt;
    cfg.seed = fit_seed;
    const FitResult result = fit(method.kernel, graph, centered, cfg);
    for (const TestDraw& draw : draws) {
      Prediction pred = result.model.predict(draw.query);
      for (double& v : pred.mean) v += y_mean;
      const Vector& target = opts.noisy_targets ? draw.truth_noisy : draw.truth_clean;
      out.trial_mse.push_back(mse(target, pred.mean));
      out.trial_loglik.push_back(
          predictive_log_likelihood(target, pred, opts.observed_cov));
      if (opts.emit_raw) {
        out.raw_means.push_back(pred.mean);
        out.raw_targets.push_back(target);
      }
    }
  } catch (const Error& e) {
    out.failed = true;
    out.error = e.what();
  }
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!out.failed) {
    std::tie(out.mse_mean, out.mse_se) = mean_and_se(out.trial_mse);
    std::tie(out.loglik_mean, out.loglik_se) = mean_and_se(out.trial_loglik);
  }
  return out;
}

}  // namespace detail

inline ExperimentReport run_experiment(const ExperimentOptions& opts) {
  if (opts.methods.empty()) throw InputError("experiment: no methods given");
  if (opts.trials < 1) throw InputError("experiment: trials must be >= 1");
  ExperimentReport report;
  report.options = opts;
  report.generated_at = detail::iso8601_now();

  if (opts.suite == "regular" || opts.suite == "subgraph") {
    std::shared_ptr<const Graph> graph;
    std::shared_ptr<const MultiDataset> data;
    std::vector<TestDraw> draws;
    JsonValue meta = JsonValue::object();
    if (opts.suite == "regular") {
      RegularInstance inst(opts.regular, opts.seed);
      graph = inst.graph();
      data = inst.data();
      for (int t = 0; t < opts.trials; ++t)
        draws.push_back(inst.draw_test(static_cast<std::uint64_t>(t)));
      meta["type"] = JsonValue("k_regular");
      meta["m"] = JsonValue(opts.regular.m);
      meta["k"] = JsonValue(opts.regular.k);
      meta["n_train"] = JsonValue(opts.regular.n_train);
      meta["n_test"] = JsonValue(opts.regular.n_test);
      meta["noise_var"] = JsonValue(opts.regular.noise_var);
      JsonValue qj = JsonValue::array();
      qj.push_back(JsonValue(opts.regular.qj_lo));
      qj.push_back(JsonValue(opts.regular.qj_hi));
      meta["qj_range"] = std::move(qj);
    } else {
      SincInstance inst(opts.sinc, opts.seed);
      graph = inst.graph();
      data = inst.data();
      for (int t = 0; t < opts.trials; ++t)
        draws.push_back(inst.draw_test(static_cast<std::uint64_t>(t)));
      meta["type"] = JsonValue("sinc_subgraph");
      meta["noise_var"] = JsonValue(opts.sinc.noise_var);
      meta["block_sizes"] = JsonValue::array_of(Vector{20, 20, 20, 20, 20, 10});
      meta["topology"] =
          JsonValue("chain 1-2-3-4-5-6 plus symmetry edges (1,6) and (2,5)");
      meta["sogp_baseline"] =
          JsonValue("trained on the queried vertices' own observations only");
    }
    report.generator_metadata = std::move(meta);
    const bool restrict_sogp = opts.suite == "subgraph";
    for (std::size_t i = 0; i < opts.methods.size(); ++i)
      report.rows.push_back(detail::evaluate_fixed_training(
          opts.methods[i], graph, data, draws, opts, mix_seed(opts.seed, 3000 + i),
          restrict_sogp));
    return report;
  }

  if (opts.suite == "real") {
    const Graph graph_value = read_graph_json(opts.graph_json_path);
    const auto graph = std::make_shared<const Graph>(graph_value);
    const MultiDataset full =
        read_dataset_csv(opts.data_csv_path, graph->num_vertices());
    const std::size_t n_train = opts.real_n_train, n_test = opts.real_n_test;
    if (n_train == 0 || n_test == 0)
      throw InputError("real suite: --n-train and --n-test are required");
    for (std::size_t m = 0; m < full.num_vertices(); ++m)
      if (full.block(m).size() < n_train + n_test)
        throw InputError("real suite: vertex " + std::to_string(m) +
                         " has fewer than n_train + n_test points");
    const bool isotopic = full.isotopic();
    JsonValue meta = JsonValue::object();
    meta["type"] = JsonValue("real");
    meta["data"] = JsonValue(opts.data_csv_path);
    meta["graph"] = JsonValue(opts.graph_json_path);
    meta["n_train"] = JsonValue(n_train);
    meta["n_test"] = JsonValue(n_test);
    meta["isotopic"] = JsonValue(isotopic);
    report.generator_metadata = std::move(meta);

    for (std::size_t mi = 0; mi < opts.methods.size(); ++mi) {
      MethodOutcome out;
      out.name = opts.methods[mi].name;
      const auto t0 = std::chrono::steady_clock::now();
      try {
        for (int trial = 0; trial < opts.trials; ++trial) {
          auto rng = make_rng(mix_seed(opts.seed, 500 + trial));
          // random train/test split per vertex; shared indices when isotopic
          std::vector<std::vector<std::size_t>> picks(full.num_vertices());
          std::vector<std::size_t> shared_pick;
          for (std::size_t m = 0; m < full.num_vertices(); ++m) {
            if (isotopic && m > 0) {
              picks[m] = shared_pick;
              continue;
            }
            std::vector<std::size_t> idx(full.block(m).size());
            for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
            std::shuffle(idx.begin(), idx.end(), rng);
            picks[m] = idx;
            if (m == 0) shared_pick = idx;
          }
          std::vector<VertexBlock> train_blocks(full.num_vertices());
          std::vector<int> q_vertices;
          std::vector<Matrix> q_inputs;
          Vector target;
          for (std::size_t m = 0; m < full.num_vertices(); ++m) {
            const auto& b = full.block(m);
            train_blocks[m].inputs = Matrix(n_train, full.input_dim());
            train_blocks[m].outputs.resize(n_train);
            for (std::size_t i = 0; i < n_train; ++i) {
              for (std::size_t d = 0; d < full.input_dim(); ++d)
                train_blocks[m].inputs(i, d) = b.inputs(picks[m][i], d);
              train_blocks[m].outputs[i] = b.outputs[picks[m][i]];
            }
            Matrix test_in(n_test, full.input_dim());
            for (std::size_t i = 0; i < n_test; ++i) {
              for (std::size_t d = 0; d < full.input_dim(); ++d)
                test_in(i, d) = b.inputs(picks[m][n_train + i], d);
              target.push_back(b.outputs[picks[m][n_train + i]]);
            }
            q_vertices.push_back(static_cast<int>(m));
            q_inputs.push_back(std::move(test_in));
          }
          const auto data = std::make_shared<MultiDataset>(std::move(train_blocks));
          const double y_mean = detail::mean_of(data->stacked_outputs());
          const auto centered =
              std::make_shared<MultiDataset>(data->with_outputs_shifted(-y_mean));
          OptimizerConfig cfg = opts.opt;
          cfg.seed = mix_seed(opts.seed, 3000 + mi);
          const FitResult result = fit(opts.methods[mi].kernel, graph, centered, cfg);
          Prediction pred =
              result.model.predict(TestQuery(q_vertices, q_inputs));
          for (double& v : pred.mean) v += y_mean;
          out.trial_mse.push_back(mse(target, pred.mean));
          // held-out points are observations, so score under the observed covariance
          out.trial_loglik.push_back(predictive_log_likelihood(target, pred, true));
          if (opts.emit_raw) {
            out.raw_means.push_back(pred.mean);
            out.raw_targets.push_back(target);
          }
        }
      } catch (const Error& e) {
        out.failed = true;
        out.error = e.what();
      }
      out.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (!out.failed) {
        std::tie(out.mse_mean, out.mse_se) = detail::mean_and_se(out.trial_mse);
        std::tie(out.loglik_mean, out.loglik_se) = detail::mean_and_se(out.trial_loglik);
      }
      report.rows.push_back(std::move(out));
    }
    return report;
  }

  throw InputError("experiment: unknown suite \"" + opts.suite + "\"");
}

inline JsonValue report_to_json(const ExperimentReport& report) {
  JsonValue out = JsonValue::object();
  out["suite"] = JsonValue(report.options.suite);

  JsonValue meta = JsonValue::object();
  meta["seed"] = JsonValue(report.options.seed);
  meta["trials"] = JsonValue(report.options.trials);
  meta["targets"] = JsonValue(report.options.noisy_targets ? "noisy" : "noise-free");
  meta["loglik_covariance"] =
      JsonValue(report.options.suite == "real"
                    ? "observed"
                    : (report.options.observed_cov ? "observed" : "latent"));
  meta["std_convention"] = JsonValue("standard error: sample std / sqrt(trials)");
  JsonValue opt = JsonValue::object();
  opt["lr"] = JsonValue(report.options.opt.learning_rate);
  opt["max_iters"] = JsonValue(report.options.opt.max_iters);
  opt["tol"] = JsonValue(report.options.opt.tol);
  opt["restarts"] = JsonValue(report.options.opt.restarts);
  meta["optimizer"] = std::move(opt);
  meta["generator"] = report.generator_metadata;
  JsonValue methods = JsonValue::array();
  for (const auto& m : report.options.methods) {
    JsonValue entry = JsonValue::object();
    entry["name"] = JsonValue(m.name);
    entry["kernel"] = kernel_spec_to_json(m.kernel);
    methods.push_back(std::move(entry));
  }
  meta["methods"] = std::move(methods);
  out["metadata"] = std::move(meta);

  JsonValue results = JsonValue::array();
  for (const auto& row : report.rows) {
    JsonValue r = JsonValue::object();
    r["method"] = JsonValue(row.name);
    if (row.failed) {
      r["failed"] = JsonValue(true);
      r["error"] = JsonValue(row.error);
    } else {
      r["mse_mean"] = JsonValue(row.mse_mean);
      r["mse_std"] = JsonValue(row.mse_se);
      r["log_likelihood_mean"] = JsonValue(row.loglik_mean);
      r["log_likelihood_std"] = JsonValue(row.loglik_se);
      r["trials"] = JsonValue(static_cast<std::int64_t>(row.trial_mse.size()));
    }
    results.push_back(std::move(r));
  }
  out["results"] = std::move(results);

  if (report.options.emit_raw) {
    JsonValue raw = JsonValue::object();
    for (const auto& row : report.rows) {
      if (row.failed) continue;
      JsonValue r = JsonValue::object();
      r["mse"] = JsonValue::array_of(row.trial_mse);
      r["log_likelihood"] = JsonValue::array_of(row.trial_loglik);
      JsonValue means = JsonValue::array();
      JsonValue targets = JsonValue::array();
      for (std::size_t t = 0; t < row.raw_means.size(); ++t) {
        means.push_back(JsonValue::array_of(row.raw_means[t]));
        targets.push_back(JsonValue::array_of(row.raw_targets[t]));
      }
      r["means"] = std::move(means);
      r["targets"] = std::move(targets);
      raw[row.name] = std::move(r);
    }
    out["raw"] = std::move(raw);
  }

  // volatile fields live here and only here
  JsonValue timing = JsonValue::object();
  timing["generated_at"] = JsonValue(report.generated_at);
  JsonValue wall = JsonValue::object();
  for (const auto& row : report.rows) wall[row.name] = JsonValue(row.wall_seconds);
  timing["wall_seconds"] = std::move(wall);
  out["timing"] = std::move(timing);
  return out;
}

inline OptimizerConfig optimizer_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("optimizer config: expected a JSON object");
  detail::reject_unknown_fields(j, {"lr", "max_iters", "tol", "restarts", "seed"},
                                "optimizer config");
  OptimizerConfig cfg;
  if (j.contains("lr")) cfg.learning_rate = j["lr"].get<double>();
  if (j.contains("max_iters")) cfg.max_iters = j["max_iters"].get<int>();
  if (j.contains("tol")) cfg.tol = j["tol"].get<double>();
  if (j.contains("restarts")) cfg.restarts = j["restarts"].get<int>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  cfg.validate();
  return cfg;
}

inline JsonValue optimizer_config_to_json(const OptimizerConfig& cfg) {
  JsonValue out = JsonValue::object();
  out["lr"] = JsonValue(cfg.learning_rate);
  out["max_iters"] = JsonValue(cfg.max_iters);
  out["tol"] = JsonValue(cfg.tol);
  out["restarts"] = JsonValue(cfg.restarts);
  out["seed"] = JsonValue(cfg.seed);
  return out;
}

// Methods file: [{"name": "...", "kernel": {...}}, ...]
inline std::vector<MethodSpec> methods_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty())
    throw ParseError("methods: expected a non-empty JSON array");
  std::vector<MethodSpec> methods;
  for (const auto& entry : j) {
    detail::reject_unknown_fields(entry, {"name", "kernel"}, "methods entry");
    if (!entry.contains("name") || !entry["name"].is_string() || !entry.contains("kernel"))
      throw ParseError("methods entry: needs \"name\" and \"kernel\"");
    methods.push_back(
        {entry["name"].get<std::string>(), kernel_spec_from_json(entry["kernel"])});
  }
  return methods;
}

inline std::string report_to_csv(const ExperimentReport& report) {
  std::string out =
      "method,mse_mean,mse_std,log_likelihood_mean,log_likelihood_std,trials\n";
  for (const auto& row : report.rows) {
    if (row.failed) {
      out += row.name + ",,,,,0\n";
      continue;
    }
    out += row.name + "," + format_double(row.mse_mean) + "," + format_double(row.mse_se) +
           "," + format_double(row.loglik_mean) + "," + format_double(row.loglik_se) +
           "," + std::to_string(row.trial_mse.size()) + "\n";
  }
  return out;
}

}  // namespace graphgp
