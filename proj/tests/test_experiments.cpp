#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "graphgp/experiments.hpp"
#include "test_support.hpp"

using namespace graphgp;

namespace {

OptimizerConfig quick_opt() {
  OptimizerConfig cfg;
  cfg.max_iters = 15;
  cfg.restarts = 1;
  return cfg;
}

std::string stripped_report(const ExperimentReport& report) {
  auto j = nlohmann::json::parse(report_to_json(report).dump());
  j.erase("timing");
  return j.dump();
}

}  // namespace

TEST_CASE("sinc generator shapes and targets") {
  SincSuiteParams params;
  SincInstance inst(params, 11);
  const auto data = inst.data();
  REQUIRE(data->num_vertices() == 6);
  const std::vector<std::size_t> want{20, 20, 20, 20, 20, 10};
  for (std::size_t v = 0; v < 6; ++v) REQUIRE(data->block(v).size() == want[v]);
  REQUIRE_FALSE(data->isotopic());
  REQUIRE_FALSE(data->symmetric_counts());

  SECTION("inputs stay inside each vertex's interval") {
    for (std::size_t v = 0; v < 6; ++v)
      for (std::size_t i = 0; i < data->block(v).size(); ++i) {
        const double x = data->block(v).inputs(i, 0);
        REQUIRE(x >= SincInstance::interval_lo(v));
        REQUIRE(x <= SincInstance::interval_hi(v));
      }
  }
  SECTION("noise-free outputs equal sinc exactly, including the x=0 limit") {
    SincSuiteParams clean;
    clean.noise_var = 0.0;
    SincInstance noiseless(clean, 11);
    for (std::size_t v = 0; v < 6; ++v) {
      const auto& b = noiseless.data()->block(v);
      for (std::size_t i = 0; i < b.size(); ++i) {
        const double x = b.inputs(i, 0);
        REQUIRE(b.outputs[i] == (x == 0.0 ? 1.0 : std::sin(x) / x));
      }
    }
    const TestDraw draw = noiseless.draw_test(0);
    REQUIRE(draw.truth_clean == draw.truth_noisy);
  }
  SECTION("test draws live on vertex 6 and carry both target flavors") {
    const TestDraw draw = inst.draw_test(3);
    REQUIRE(draw.query.vertices == std::vector<int>{5});
    REQUIRE(draw.query.inputs[0].rows() == 10);
    for (std::size_t i = 0; i < 10; ++i) {
      const double x = draw.query.inputs[0](i, 0);
      REQUIRE(x >= 10.0);
      REQUIRE(x <= 15.0);
      REQUIRE(draw.truth_clean[i] == std::sin(x) / x);
      REQUIRE(draw.truth_noisy[i] != draw.truth_clean[i]);
    }
  }
  SECTION("the graph is the chain plus the two symmetry pairs") {
    const auto& edges = inst.graph()->edges();
    REQUIRE(edges.size() == 7);
    REQUIRE(std::count(edges.begin(), edges.end(), Edge{0, 5}) == 1);
    REQUIRE(std::count(edges.begin(), edges.end(), Edge{1, 4}) == 1);
  }
}

TEST_CASE("regular generator ties outputs to neighbor parameters") {
  RegularSuiteParams params;
  params.m = 16;
  params.k = 4;
  params.noise_var = 0.0;
  RegularInstance inst(params, 5);
  const auto nbr = inst.graph()->neighbor_lists();
  const auto data = inst.data();
  REQUIRE(data->isotopic());
  for (std::size_t m = 0; m < params.m; ++m) {
    const auto& b = data->block(m);
    for (std::size_t n = 0; n < b.size(); ++n) {
      const double x = b.inputs(n, 0);
      double want = 0.0;
      for (int j : nbr[m])
        want += inst.amplitude()[j] * std::cos(inst.frequency()[j] * x) +
                inst.slope()[j] * x;
      REQUIRE(b.outputs[n] == Catch::Approx(want).margin(1e-12));
      REQUIRE(x >= 0.0);
      REQUIRE(x <= 5.0);
    }
  }
  SECTION("regeneration with the same seed is identical") {
    RegularInstance again(params, 5);
    REQUIRE(gpt::max_abs_diff(again.data()->stacked_outputs(),
                              data->stacked_outputs()) == 0.0);
  }
  SECTION("test inputs are disjoint from training inputs") {
    const TestDraw draw = inst.draw_test(0);
    for (std::size_t i = 0; i < draw.query.inputs[0].rows(); ++i)
      for (std::size_t n = 0; n < data->block(0).size(); ++n)
        REQUIRE(draw.query.inputs[0](i, 0) != data->block(0).inputs(n, 0));
  }
  SECTION("the literal frequency range pins q_j to the constant") {
    for (double q : inst.frequency()) REQUIRE(q == 5.0);
  }
}

TEST_CASE("denser graphs produce more output variance on average") {
  auto mean_block_variance = [](std::size_t k) {
    double acc = 0.0;
    int count = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      RegularSuiteParams params;
      params.m = 32;
      params.k = k;
      RegularInstance inst(params, seed);
      for (std::size_t m = 0; m < params.m; ++m) {
        const auto& y = inst.data()->block(m).outputs;
        double mean = 0.0;
        for (double v : y) mean += v;
        mean /= static_cast<double>(y.size());
        double var = 0.0;
        for (double v : y) var += (v - mean) * (v - mean);
        acc += var / static_cast<double>(y.size());
        ++count;
      }
    }
    return acc / count;
  };
  REQUIRE(mean_block_variance(24) > mean_block_variance(6));
}

TEST_CASE("experiment reports are deterministic and self-consistent") {
  ExperimentOptions opts;
  opts.suite = "subgraph";
  opts.trials = 3;
  opts.seed = 9;
  opts.opt = quick_opt();
  opts.emit_raw = true;
  MethodSpec sogp;
  sogp.name = "sogp";
  sogp.kernel.variant = MogpKernelSpec::Variant::SogpDiag;
  opts.methods = {sogp};

  const ExperimentReport a = run_experiment(opts);
  const ExperimentReport b = run_experiment(opts);

  SECTION("identical runs serialize identically outside the timing section") {
    REQUIRE(stripped_report(a) == stripped_report(b));
  }
  SECTION("one method row with the requested trial count") {
    REQUIRE(a.rows.size() == 1);
    REQUIRE(a.rows[0].trial_mse.size() == 3);
    REQUIRE(a.rows[0].mse_se > 0.0);
  }
  SECTION("aggregates recompute from the raw per-trial data") {
    const auto& row = a.rows[0];
    double mean = 0.0;
    for (double v : row.trial_mse) mean += v;
    mean /= static_cast<double>(row.trial_mse.size());
    REQUIRE(std::abs(mean - row.mse_mean) <= 1e-12);
    for (std::size_t t = 0; t < row.trial_mse.size(); ++t) {
      REQUIRE(std::abs(mse(row.raw_targets[t], row.raw_means[t]) - row.trial_mse[t]) <=
              1e-12);
    }
    double ll = 0.0;
    for (double v : row.trial_loglik) ll += v;
    ll /= static_cast<double>(row.trial_loglik.size());
    REQUIRE(std::abs(ll - row.loglik_mean) <= 1e-12);
  }
}

TEST_CASE("json helpers for optimizer configs and method lists") {
  const auto cfg = optimizer_config_from_json(nlohmann::json::parse(
      R"({"lr":0.1,"max_iters":50,"tol":1e-5,"restarts":2,"seed":4})"));
  REQUIRE(cfg.learning_rate == 0.1);
  REQUIRE(cfg.max_iters == 50);
  REQUIRE(cfg.seed == 4);
  REQUIRE_THROWS_AS(optimizer_config_from_json(nlohmann::json::parse(R"({"lr":0.1,"x":1})")),
                    ParseError);

  const auto methods = methods_from_json(nlohmann::json::parse(
      R"([{"name":"a","kernel":{"variant":"sogp","data":{"family":"se","v2":1.0,"ell":1.0}}}])"));
  REQUIRE(methods.size() == 1);
  REQUIRE(methods[0].name == "a");
  REQUIRE_THROWS_AS(methods_from_json(nlohmann::json::parse("[]")), ParseError);
}

TEST_CASE("report csv carries one row per method") {
  ExperimentOptions opts;
  opts.suite = "subgraph";
  opts.trials = 2;
  opts.seed = 1;
  opts.opt = quick_opt();
  MethodSpec sogp;
  sogp.name = "sogp";
  sogp.kernel.variant = MogpKernelSpec::Variant::SogpDiag;
  MethodSpec gf;
  gf.name = "gf";
  gf.kernel.variant = MogpKernelSpec::Variant::Separable;
  gf.kernel.graph.family = GraphKernelFamily::GlobalFiltering;
  opts.methods = {sogp, gf};
  const ExperimentReport report = run_experiment(opts);
  const std::string csv = report_to_csv(report);
  REQUIRE(csv.find("sogp,") != std::string::npos);
  REQUIRE(csv.find("gf,") != std::string::npos);
  REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 3);  // header + 2 rows
}
