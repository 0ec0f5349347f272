// Command-line front end: synthetic data generation, train/predict/eval
// pipelines, and the experiment suites.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "graphgp/graphgp.hpp"

namespace {

using namespace graphgp;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

MogpKernelSpec default_sogp() {
  MogpKernelSpec spec;
  spec.variant = MogpKernelSpec::Variant::SogpDiag;
  return spec;
}

MogpKernelSpec default_separable(GraphKernelFamily family) {
  MogpKernelSpec spec;
  spec.variant = MogpKernelSpec::Variant::Separable;
  spec.graph.family = family;
  spec.graph.alpha = 1.0;
  return spec;
}

MogpKernelSpec default_graph_pc() {
  MogpKernelSpec spec;
  spec.variant = MogpKernelSpec::Variant::GraphPc;
  spec.pc.graph1.family = GraphKernelFamily::GlobalFiltering;
  spec.pc.graph1.alpha = 1.0;
  spec.pc.graph2.family = GraphKernelFamily::GraphMatern;
  spec.pc.graph2.alpha = 1.0;
  spec.pc.graph2.nu = 2;
  spec.pc.graph2.laplacian_choice = LaplacianChoice::Unnormalized;
  return spec;
}

std::vector<MethodSpec> default_methods(const std::string& suite) {
  if (suite == "regular")
    return {{"sogp", default_sogp()},
            {"local_averaging", default_separable(GraphKernelFamily::LocalAveraging)}};
  if (suite == "subgraph")
    return {{"sogp", default_sogp()},
            {"global_filtering", default_separable(GraphKernelFamily::GlobalFiltering)},
            {"graph_pc", default_graph_pc()}};
  return {{"sogp", default_sogp()},
          {"diffusion", default_separable(GraphKernelFamily::Diffusion)}};
}

struct CommonArgs {
  std::string graph_path, data_path, kernel_path, opt_path, out_path;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

OptimizerConfig load_opt(const std::string& path) {
  if (path.empty()) return {};
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("optimizer file " + path + ": " + e.what());
  }
  return optimizer_config_from_json(j);
}

void write_with_dirs(const std::string& path, const std::string& contents) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  write_file(path, contents);
}

int run_gen(const std::string& suite, const std::string& out_dir, std::uint64_t seed,
            const RegularSuiteParams& regular, double noise_var, bool noise_given) {
  GeneratedExperiment gen;
  if (suite == "regular") {
    RegularSuiteParams params = regular;
    if (noise_given) params.noise_var = noise_var;
    gen = gen_regular_experiment_data(params, seed);
  } else if (suite == "subgraph") {
    SincSuiteParams params;
    if (noise_given) params.noise_var = noise_var;
    gen = gen_sinc_subgraph_data(seed, params);
  } else {
    throw InputError("gen: unknown suite \"" + suite + "\" (use regular or subgraph)");
  }
  std::filesystem::create_directories(out_dir);
  const auto join = [&](const char* name) {
    return (std::filesystem::path(out_dir) / name).string();
  };
  write_file(join("graph.json"), graph_to_json(*gen.graph).dump());
  write_file(join("train.csv"), dataset_to_csv(*gen.data));
  write_file(join("test.csv"), query_to_csv(gen.test.query, &gen.test.truth_noisy));
  write_file(join("test_truth.csv"), query_to_csv(gen.test.query, &gen.test.truth_clean));
  std::cout << "wrote graph.json, train.csv, test.csv, test_truth.csv to " << out_dir
            << "\n";
  return kExitOk;
}

int run_train(const CommonArgs& args, bool per_vertex_noise,
              const std::string& trace_path) {
  const std::string graph_bytes = read_file(args.graph_path);
  const std::string data_bytes = read_file(args.data_path);
  nlohmann::json graph_json;
  try {
    graph_json = nlohmann::json::parse(graph_bytes);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("graph file " + args.graph_path + ": " + e.what());
  }
  const auto graph = std::make_shared<const Graph>(graph_from_json(graph_json));
  const MultiDataset raw =
      dataset_from_csv(data_bytes, graph->num_vertices(), "dataset " + args.data_path);
  const MogpKernelSpec spec = read_kernel_spec_json(args.kernel_path);
  OptimizerConfig cfg = load_opt(args.opt_path);
  if (args.seed_given) cfg.seed = args.seed;

  double y_mean = 0.0;
  for (double v : raw.stacked_outputs()) y_mean += v;
  y_mean /= static_cast<double>(raw.total_points());
  const auto centered = std::make_shared<MultiDataset>(raw.with_outputs_shifted(-y_mean));

  const FitResult result = fit(spec, graph, centered, cfg, !per_vertex_noise);

  JsonValue model = JsonValue::object();
  model["kernel"] = kernel_spec_to_json(result.model.spec());
  JsonValue noise = JsonValue::object();
  noise["shared"] = JsonValue(result.model.noise().shared);
  noise["variances"] = JsonValue::array_of(result.model.noise().variances);
  model["noise"] = std::move(noise);
  model["y_mean"] = JsonValue(y_mean);
  model["data_hash"] = JsonValue(content_hash(data_bytes));
  model["graph_hash"] = JsonValue(content_hash(graph_bytes));
  JsonValue training = JsonValue::object();
  training["log_marginal_likelihood"] = JsonValue(result.model.log_marginal_likelihood());
  training["iterations"] = JsonValue(static_cast<std::int64_t>(result.trace.size()) - 1);
  training["best_restart"] = JsonValue(result.best_restart);
  training["failed_restarts"] = JsonValue(result.failed_restarts);
  training["seed"] = JsonValue(cfg.seed);
  model["training"] = std::move(training);
  write_with_dirs(args.out_path, model.dump());

  if (!trace_path.empty()) {
    std::string csv = "iter,log_likelihood,step_scale\n";
    for (const auto& row : result.trace)
      csv += std::to_string(row.iter) + "," + format_double(row.log_likelihood) + "," +
             format_double(row.step_scale) + "\n";
    write_with_dirs(trace_path, csv);
  }
  std::cout << "trained model written to " << args.out_path
            << " (log marginal likelihood "
            << format_double(result.model.log_marginal_likelihood()) << ")\n";
  return kExitOk;
}

int run_predict(const CommonArgs& args, const std::string& model_path,
                const std::string& query_path, bool full_cov) {
  nlohmann::json model_json;
  try {
    model_json = nlohmann::json::parse(read_file(model_path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("model file " + model_path + ": " + e.what());
  }
  const std::string graph_bytes = read_file(args.graph_path);
  const std::string data_bytes = read_file(args.data_path);
  if (model_json.at("graph_hash").get<std::string>() != content_hash(graph_bytes))
    throw InputError("predict: supplied graph does not match the model's graph_hash");
  if (model_json.at("data_hash").get<std::string>() != content_hash(data_bytes))
    throw InputError("predict: supplied data does not match the model's data_hash");

  const auto graph = std::make_shared<const Graph>(
      graph_from_json(nlohmann::json::parse(graph_bytes)));
  const MultiDataset raw =
      dataset_from_csv(data_bytes, graph->num_vertices(), "dataset " + args.data_path);
  const MogpKernelSpec spec = kernel_spec_from_json(model_json.at("kernel"));
  const double y_mean = model_json.at("y_mean").get<double>();
  NoiseModel noise;
  noise.shared = model_json.at("noise").at("shared").get<bool>();
  noise.variances = model_json.at("noise").at("variances").get<Vector>();

  const auto centered = std::make_shared<MultiDataset>(raw.with_outputs_shifted(-y_mean));
  const FittedModel model = FittedModel::build(spec, graph, centered, noise);
  const TestQuery query = query_from_csv(read_file(query_path), graph->num_vertices(),
                                         nullptr, "query " + query_path);
  Prediction pred = model.predict(query);
  for (double& v : pred.mean) v += y_mean;

  JsonValue out = JsonValue::object();
  out["ordering"] = JsonValue("vertex-major");
  JsonValue vertices = JsonValue::array();
  for (int v : pred.vertex_of_row) vertices.push_back(JsonValue(std::int64_t{v}));
  out["vertices"] = std::move(vertices);
  out["mean"] = JsonValue::array_of(pred.mean);
  out["var_latent"] = JsonValue::array_of(pred.latent_variances());
  out["var_observed"] = JsonValue::array_of(pred.observed_variances());
  if (full_cov) out["cov"] = JsonValue::array_of(pred.cov_observed);
  write_with_dirs(args.out_path, out.dump());
  std::cout << "prediction written to " << args.out_path << " (" << pred.mean.size()
            << " points)\n";
  return kExitOk;
}

int run_eval(const std::string& pred_path, const std::string& truth_path, bool latent,
             const std::string& out_path) {
  nlohmann::json pred_json;
  try {
    pred_json = nlohmann::json::parse(read_file(pred_path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("prediction file " + pred_path + ": " + e.what());
  }
  Prediction pred;
  pred.mean = pred_json.at("mean").get<Vector>();
  const Vector var_latent = pred_json.at("var_latent").get<Vector>();
  const Vector var_observed = pred_json.at("var_observed").get<Vector>();
  for (int v : pred_json.at("vertices").get<std::vector<int>>())
    pred.vertex_of_row.push_back(v);
  const std::size_t t = pred.mean.size();
  pred.cov_latent = Matrix(t, t);
  pred.cov_observed = Matrix(t, t);
  for (std::size_t i = 0; i < t; ++i) {
    pred.cov_latent(i, i) = var_latent[i];
    pred.cov_observed(i, i) = var_observed[i];
  }
  if (pred_json.contains("cov")) {
    const auto& cov = pred_json["cov"];
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t j = 0; j < t; ++j)
        pred.cov_observed(i, j) = cov.at(i).at(j).get<double>();
  }

  int max_vertex = 0;
  for (int v : pred.vertex_of_row) max_vertex = std::max(max_vertex, v);
  Vector truths;
  const TestQuery truth_query =
      query_from_csv(read_file(truth_path), static_cast<std::size_t>(max_vertex) + 1,
                     &truths, "truth " + truth_path);
  if (truths.size() != t)
    throw InputError("eval: truth row count disagrees with the prediction");
  std::size_t row = 0;
  for (std::size_t k = 0; k < truth_query.vertices.size(); ++k)
    for (std::size_t i = 0; i < truth_query.inputs[k].rows(); ++i, ++row)
      if (truth_query.vertices[k] != pred.vertex_of_row[row])
        throw InputError("eval: truth vertices disagree with the prediction ordering");

  JsonValue out = JsonValue::object();
  out["points"] = JsonValue(static_cast<std::int64_t>(t));
  out["mse"] = JsonValue(mse(truths, pred.mean));
  out["log_likelihood"] = JsonValue(predictive_log_likelihood(truths, pred, !latent));
  const std::string text = out.dump();
  std::cout << text;
  if (!out_path.empty()) write_with_dirs(out_path, text);
  return kExitOk;
}

int run_experiment_cmd(ExperimentOptions opts, const std::string& methods_path,
                       const std::string& opt_path, const std::string& out_path) {
  const std::uint64_t master_seed = opts.seed;
  opts.opt = load_opt(opt_path);
  opts.seed = master_seed;
  if (!methods_path.empty()) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(methods_path));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("methods file " + methods_path + ": " + e.what());
    }
    opts.methods = methods_from_json(j);
  } else {
    opts.methods = default_methods(opts.suite);
  }
  const ExperimentReport report = run_experiment(opts);
  write_with_dirs(out_path, report_to_json(report).dump());
  std::filesystem::path csv_path(out_path);
  csv_path.replace_extension(".csv");
  write_with_dirs(csv_path.string(), report_to_csv(report));
  std::cout << report_to_csv(report);
  std::cout << "report written to " << out_path << " and " << csv_path.string() << "\n";
  for (const auto& row : report.rows)
    if (row.failed)
      std::cout << "note: method " << row.name << " failed: " << row.error << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-output Gaussian process regression for graph-structured data"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen", "Generate a synthetic study (graph + CSV data)");
  std::string gen_suite, gen_out = "generated";
  std::uint64_t gen_seed = 0;
  RegularSuiteParams gen_regular;
  double gen_noise = 0.0;
  bool gen_noise_given = false;
  std::string qj_range_text;
  gen->add_option("--suite", gen_suite, "regular | subgraph")->required();
  gen->add_option("--out", gen_out, "output directory");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--m", gen_regular.m, "vertex count (regular suite)");
  gen->add_option("--k", gen_regular.k, "vertex degree (regular suite)");
  gen->add_option("--n-train", gen_regular.n_train, "training points per vertex");
  gen->add_option("--n-test", gen_regular.n_test, "test points per vertex");
  auto* noise_opt =
      gen->add_option("--noise-var", gen_noise, "observation noise variance");
  gen->add_option("--qj-range", qj_range_text,
                  "frequency range lo,hi for the regular generator");

  auto* train = app.add_subcommand("train", "Fit hyperparameters and save a model");
  CommonArgs train_args;
  bool per_vertex_noise = false;
  std::string trace_path;
  train->add_option("--data", train_args.data_path, "training CSV")->required();
  train->add_option("--graph", train_args.graph_path, "graph JSON")->required();
  train->add_option("--kernel", train_args.kernel_path, "kernel spec JSON")->required();
  train->add_option("--opt", train_args.opt_path, "optimizer config JSON");
  auto* train_seed =
      train->add_option("--seed", train_args.seed, "optimizer seed (overrides config)");
  train->add_option("--out", train_args.out_path, "model JSON output")->required();
  train->add_flag("--per-vertex-noise", per_vertex_noise,
                  "train one noise variance per vertex");
  train->add_option("--trace", trace_path, "write the optimizer trace CSV here");

  auto* predict = app.add_subcommand("predict", "Posterior prediction from a model");
  CommonArgs pred_args;
  std::string model_path, query_path;
  bool full_cov = false;
  predict->add_option("--model", model_path, "model JSON from train")->required();
  predict->add_option("--data", pred_args.data_path, "training CSV (hash-checked)")
      ->required();
  predict->add_option("--graph", pred_args.graph_path, "graph JSON (hash-checked)")
      ->required();
  predict->add_option("--query", query_path, "query CSV (vertex,x0,...)")->required();
  predict->add_option("--out", pred_args.out_path, "prediction JSON output")->required();
  predict->add_flag("--full-cov", full_cov, "include the full observed covariance");

  auto* eval = app.add_subcommand("eval", "Score a prediction against truths");
  std::string eval_pred, eval_truth, eval_out;
  bool eval_latent = false;
  eval->add_option("--pred", eval_pred, "prediction JSON")->required();
  eval->add_option("--truth", eval_truth, "truth CSV with y column")->required();
  eval->add_flag("--latent", eval_latent, "score under the latent covariance");
  eval->add_option("--out", eval_out, "also write the metrics JSON here");

  auto* experiment = app.add_subcommand("experiment", "Run a study suite end to end");
  ExperimentOptions exp_opts;
  std::string methods_path, exp_opt_path, exp_out = "report.json";
  experiment->add_option("--suite", exp_opts.suite, "regular | subgraph | real")
      ->required();
  experiment->add_option("--methods", methods_path, "methods JSON file");
  experiment->add_option("--trials", exp_opts.trials, "number of trials");
  experiment->add_option("--seed", exp_opts.seed, "master seed");
  experiment->add_option("--opt", exp_opt_path, "optimizer config JSON");
  experiment->add_option("--out", exp_out, "report JSON path");
  experiment->add_flag("--emit-raw", exp_opts.emit_raw,
                       "persist per-trial metrics and predictions");
  experiment->add_flag("--noisy-targets", exp_opts.noisy_targets,
                       "score against noisy targets instead of the underlying function");
  experiment->add_flag("--observed-cov", exp_opts.observed_cov,
                       "score log-likelihood under the observed covariance");
  double exp_noise = 0.0;
  auto* exp_noise_opt = experiment->add_option("--noise-var", exp_noise,
                                               "override the generator noise variance");
  experiment->add_option("--m", exp_opts.regular.m, "vertex count (regular suite)");
  experiment->add_option("--k", exp_opts.regular.k, "vertex degree (regular suite)");
  experiment->add_option("--n-train", exp_opts.real_n_train,
                         "training points per vertex (real suite)");
  experiment->add_option("--n-test", exp_opts.real_n_test,
                         "test points per vertex (real suite)");
  experiment->add_option("--data", exp_opts.data_csv_path, "dataset CSV (real suite)");
  experiment->add_option("--graph", exp_opts.graph_json_path, "graph JSON (real suite)");

  try {
    app.parse(argc, argv);
    if (gen->parsed()) {
      if (!qj_range_text.empty()) {
        const auto comma = qj_range_text.find(',');
        if (comma == std::string::npos)
          throw InputError("gen: --qj-range expects \"lo,hi\"");
        gen_regular.qj_lo = std::stod(qj_range_text.substr(0, comma));
        gen_regular.qj_hi = std::stod(qj_range_text.substr(comma + 1));
      }
      gen_noise_given = noise_opt->count() > 0;
      return run_gen(gen_suite, gen_out, gen_seed, gen_regular, gen_noise,
                     gen_noise_given);
    }
    if (train->parsed()) {
      train_args.seed_given = train_seed->count() > 0;
      return run_train(train_args, per_vertex_noise, trace_path);
    }
    if (predict->parsed()) return run_predict(pred_args, model_path, query_path, full_cov);
    if (eval->parsed()) return run_eval(eval_pred, eval_truth, eval_latent, eval_out);
    if (experiment->parsed()) {
      if (exp_noise_opt->count() > 0) {
        exp_opts.regular.noise_var = exp_noise;
        exp_opts.sinc.noise_var = exp_noise;
      }
      return run_experiment_cmd(exp_opts, methods_path, exp_opt_path, exp_out);
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitOk;
}
