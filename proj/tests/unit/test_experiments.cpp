#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "kbridge/errors.hpp"
#include "kbridge/experiments.hpp"
#include "kbridge/filters.hpp"
#include "oracles.hpp"

using namespace kbridge;

namespace {

ExperimentSpec small_spec(std::vector<double> sigmas) {
  ExperimentSpec spec;
  spec.inputs = corpus_sources(16);
  spec.sigmas = std::move(sigmas);
  spec.alpha_multipliers = {0.5, 1.0, 2.0};
  return spec;
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

}  // namespace

TEST_CASE("csv formatting") {
  CsvTable t;
  t.header = {"name", "value", "count"};
  t.rows.push_back({std::string("a,b"), 0.1, 3LL});
  t.rows.push_back({std::string("q\"x"), std::numeric_limits<double>::infinity(), -1LL});
  CHECK(format_csv(t) == "name,value,count\n\"a,b\",0.10000000000000001,3\n\"q\"\"x\",inf,-1\n");
}

TEST_CASE("csv emission") {
  CsvTable t;
  t.header = {"x"};
  t.rows.push_back({1.5});
  CHECK_THROWS_AS(emit_csv(t, ""), IoError);
  CHECK_THROWS_AS(emit_csv(t, "/nonexistent-dir/out.csv"), IoError);
  const auto path = std::filesystem::temp_directory_path() / "kbridge_emit_test.csv";
  emit_csv(t, path.string());
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str() == "x\n1.5\n");
  std::filesystem::remove(path);
}

TEST_CASE("huber-tv sweep") {
  const auto spec = small_spec({5.0, 20.0});
  const auto r = run_huber_tv_experiment(spec);
  CHECK(r.rows.size() == 4 * 2);
  const auto csv = format_csv(to_table(r));
  CHECK(first_line(csv) == "image,family,sigma,psnr_first,psnr_second,iterations_map");
  CHECK(csv == format_csv(to_table(run_huber_tv_experiment(spec))));
  for (const auto& row : r.rows) {
    CHECK(row.family == "huber");
    CHECK(std::isfinite(row.psnr_first));
    CHECK(row.iterations_first > 0);
  }
}

TEST_CASE("timing columns are opt-in") {
  auto spec = small_spec({5.0});
  spec.inputs.resize(1);
  spec.include_timing = true;
  const auto csv = format_csv(to_table(run_huber_tv_experiment(spec)));
  CHECK(first_line(csv) ==
        "image,family,sigma,psnr_first,psnr_second,iterations_map,runtime_ms_reference,"
        "runtime_ms_first,runtime_ms_second");
}

TEST_CASE("small sigma without noise is near identity") {
  auto spec = small_spec({0.01});
  spec.noise_sigma = 0.0;
  for (const auto& row : run_huber_tv_experiment(spec).rows) {
    CHECK(row.psnr_first > 60.0);
    CHECK(row.psnr_second > 60.0);
  }
}

TEST_CASE("bilateral inversion sweep") {
  auto spec = small_spec({10.0});
  spec.inputs.resize(2);
  const auto r = run_bilateral_inversion_experiment(spec, "gaussian");
  REQUIRE(r.rows.size() == 2 * 3);
  CHECK(first_line(format_csv(to_table(r))) ==
        "image,family,sigma,alpha,alpha_over_sigma2,psnr_first,psnr_second,best_first,"
        "best_second,iterations_first,iterations_second");
  CHECK(format_csv(to_table(r)) ==
        format_csv(to_table(run_bilateral_inversion_experiment(spec, "gaussian"))));

  // One best row per group and order: the first row reaching the group max.
  std::map<std::string, std::vector<SweepRow>> groups;
  for (const auto& row : r.rows) groups[row.image].push_back(row);
  for (const auto& [name, rows] : groups) {
    for (int order = 0; order < 2; ++order) {
      auto val = [&](const SweepRow& x) { return order == 0 ? x.psnr_first : x.psnr_second; };
      auto best = [&](const SweepRow& x) { return order == 0 ? x.best_first : x.best_second; };
      double mx = -1e300;
      for (const auto& x : rows) mx = std::max(mx, val(x));
      int count = 0;
      bool seen_max = false;
      for (const auto& x : rows) {
        if (best(x)) {
          ++count;
          CHECK(val(x) == mx);
          CHECK_FALSE(seen_max);
        }
        if (val(x) == mx) seen_max = true;
      }
      CHECK(count == 1);
    }
    CHECK(rows[1].alpha == doctest::Approx(100.0 / (255.0 * 255.0)));
  }
  const auto best = best_points(r);
  CHECK(best.size() == 2);

  CHECK_THROWS_AS(run_bilateral_inversion_experiment(spec, "cauchy"), InvalidArgument);
  spec.alpha_multipliers = {1.0, 1.0};
  CHECK_THROWS_AS(run_bilateral_inversion_experiment(spec, "gaussian"), InvalidArgument);
}

TEST_CASE("spec validation") {
  auto spec = small_spec({});
  CHECK_THROWS_AS(run_huber_tv_experiment(spec), InvalidArgument);
  spec.sigmas = {10.0, 5.0};
  CHECK_THROWS_AS(run_huber_tv_experiment(spec), InvalidArgument);
  spec.sigmas = {5.0};
  spec.inputs.clear();
  CHECK_THROWS_AS(run_huber_tv_experiment(spec), InvalidArgument);
}

TEST_CASE("dirichlet figure") {
  const std::vector<double> sigmas{0.05, 0.1, 0.2, 0.35, 0.5};
  const auto fig = run_dirichlet_figure(256, sigmas);
  for (std::size_t i = 1; i < sigmas.size(); ++i) CHECK(fig.l1_distance[i] > fig.l1_distance[i - 1]);
  const auto t = to_table(fig);
  CHECK(t.rows.size() == 256 * sigmas.size());

  const auto small = run_dirichlet_figure(16, {0.3});
  const auto ref = oracle::circulant_inverse_row(16, 2.0 * 0.3 * 0.3);
  CHECK(oracle::max_abs_diff(small.exact[0], ref) <= 1e-9);
}
