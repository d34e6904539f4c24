// Exercises the shared library through the C header only.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "kbridge/kbridge.h"

namespace {

struct Images {
  std::vector<kb_image*> list;
  ~Images() {
    for (auto* p : list) kb_image_free(p);
  }
  kb_image* keep(kb_image* p) {
    list.push_back(p);
    return p;
  }
};

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::string(kb_version()).size() > 0);
  CHECK(std::string(kb_status_name(KB_OK)) == "ok");
  CHECK(std::string(kb_status_name(KB_ERR_DIVERGENCE)) == "divergence");
}

TEST_CASE("null handles are rejected") {
  kb_image* img = nullptr;
  CHECK(kb_image_create(2, 2, nullptr, nullptr) == KB_ERR_INVALID_ARGUMENT);
  CHECK(std::string(kb_last_error()).size() > 0);
  CHECK(kb_loss_parse(nullptr, nullptr) == KB_ERR_INVALID_ARGUMENT);
  CHECK(kb_image_create(0, 2, nullptr, &img) == KB_ERR_INVALID_ARGUMENT);
  CHECK(img == nullptr);
  kb_image_free(nullptr);
  kb_loss_free(nullptr);
  kb_trace_free(nullptr);
}

TEST_CASE("images round trip") {
  Images keep;
  const double px[] = {0.0, 64.0, 128.0, 255.0, 10.0, 20.0};
  kb_image* img = nullptr;
  REQUIRE(kb_image_create(3, 2, px, &img) == KB_OK);
  keep.keep(img);
  CHECK(kb_image_width(img) == 3);
  CHECK(kb_image_height(img) == 2);
  CHECK(kb_image_data(img)[3] == 255.0);

  const std::string path = "kbridge_capi_roundtrip.pgm";
  REQUIRE(kb_image_save_pgm(img, path.c_str()) == KB_OK);
  kb_image* back = nullptr;
  REQUIRE(kb_image_load_pgm(path.c_str(), &back) == KB_OK);
  keep.keep(back);
  double p = 0.0;
  REQUIRE(kb_psnr(img, back, 255.0, &p) == KB_OK);
  CHECK(std::isinf(p));
  std::remove(path.c_str());

  kb_image* missing = nullptr;
  CHECK(kb_image_load_pgm("does-not-exist.pgm", &missing) == KB_ERR_IO);
  CHECK(kb_write_file_atomic("/nonexistent-dir/x", "a", 1) == KB_ERR_IO);

  kb_image* other = nullptr;
  REQUIRE(kb_image_create(2, 2, nullptr, &other) == KB_OK);
  keep.keep(other);
  CHECK(kb_psnr(img, other, 255.0, &p) == KB_ERR_DIMENSION_MISMATCH);
}

TEST_CASE("losses and kernels") {
  kb_loss* loss = nullptr;
  REQUIRE(kb_loss_parse("huber:gamma=2", &loss) == KB_OK);
  double rho = 0, d1 = 0, d2 = 0;
  REQUIRE(kb_loss_eval(loss, 3.0, &rho, &d1, &d2) == KB_OK);
  CHECK(rho == doctest::Approx(4.0));
  CHECK(d1 == doctest::Approx(2.0));
  CHECK(d2 == 0.0);
  CHECK(kb_loss_is_convex(loss) == 1);

  kb_scale scale{1.0, 2.0, 1.0};
  kb_kernel* k = nullptr;
  REQUIRE(kb_kernel_from_loss(loss, 1, &scale, &k) == KB_OK);
  double kv = 0;
  REQUIRE(kb_kernel_eval(k, 4.0, &kv) == KB_OK);
  CHECK(kv == doctest::Approx(0.5));
  CHECK(kb_kernel_from_loss(loss, 3, &scale, &k) == KB_ERR_INVALID_ARGUMENT);
  kb_kernel_free(k);
  kb_loss_free(loss);

  kb_loss* bad = nullptr;
  CHECK(kb_loss_parse("huber:gamma=-1", &bad) != KB_OK);
  CHECK(bad == nullptr);
  CHECK(std::string(kb_last_error()).find("gamma") != std::string::npos);

  kb_kernel* g = nullptr;
  REQUIRE(kb_kernel_parse("gaussian:gamma=1", &g) == KB_OK);
  kb_loss* back = nullptr;
  REQUIRE(kb_loss_from_kernel(g, 1, &back) == KB_OK);
  REQUIRE(kb_loss_eval(back, 1.0, &rho, nullptr, nullptr) == KB_OK);
  CHECK(rho == doctest::Approx(1.0 - std::exp(-0.5)));
  kb_loss_free(back);
  kb_kernel_free(g);
}

TEST_CASE("filters and solver") {
  Images keep;
  kb_image* x = nullptr;
  REQUIRE(kb_corpus_image("blocks", 16, 7, &x) == KB_OK);
  keep.keep(x);
  kb_loss* loss = nullptr;
  REQUIRE(kb_loss_parse("huber:gamma=5", &loss) == KB_OK);
  kb_stencil* s = nullptr;
  REQUIRE(kb_stencil_box(1, &s) == KB_OK);

  kb_filter_params fp;
  kb_filter_params_default(&fp);
  fp.sigma = 2.0;
  fp.alpha = 4.0;
  kb_image* f1 = nullptr;
  REQUIRE(kb_filter_first_order(x, loss, s, &fp, &f1) == KB_OK);
  keep.keep(f1);

  kb_solver_params sp;
  kb_solver_params_default(&sp);
  sp.heavy_ball = 1;
  sp.momentum = -1.0;
  kb_image* u = nullptr;
  kb_trace* tr = nullptr;
  REQUIRE(kb_solve_map(x, loss, s, 2.0, &sp, &u, &tr) == KB_OK);
  keep.keep(u);
  CHECK(kb_trace_converged(tr) == 1);
  CHECK(kb_trace_size(tr) == static_cast<size_t>(kb_trace_iterations(tr)));
  int it = -1;
  double obj = 0, gn = 0;
  CHECK(kb_trace_row(tr, 0, &it, &obj, &gn) == KB_OK);
  CHECK(kb_trace_row(tr, kb_trace_size(tr), &it, &obj, &gn) == KB_ERR_INVALID_ARGUMENT);
  kb_trace_free(tr);

  sp.heavy_ball = 0;
  sp.step = 1e4;
  kb_image* v = nullptr;
  CHECK(kb_solve_map(x, loss, s, 10.0, &sp, &v, nullptr) == KB_ERR_DIVERGENCE);
  CHECK(v == nullptr);
  CHECK(std::string(kb_last_error()).find("divergence at iteration") != std::string::npos);

  kb_stencil_free(s);
  kb_loss_free(loss);
}

TEST_CASE("experiment csv") {
  kb_experiment_params p;
  kb_experiment_params_default(&p);
  p.name = "dirichlet";
  p.n = 8;
  const double sig[] = {0.1, 0.2};
  p.sigmas = sig;
  p.sigma_count = 2;
  kb_buffer* buf = nullptr;
  REQUIRE(kb_experiment_csv(&p, &buf) == KB_OK);
  const std::string csv(kb_buffer_data(buf), kb_buffer_size(buf));
  CHECK(csv.rfind("sigma,n,exact,approx,l1_distance\n", 0) == 0);
  kb_buffer_free(buf);

  p.name = "nope";
  CHECK(kb_experiment_csv(&p, &buf) == KB_ERR_INVALID_ARGUMENT);
}
