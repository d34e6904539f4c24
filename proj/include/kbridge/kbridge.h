/* C interface to the kbridge library.
 *
 * Every object is an opaque handle released with its *_free function.
 * Functions return kb_status; on failure kb_last_error() holds a message
 * for the calling thread until its next failing call.
 */
#ifndef KBRIDGE_KBRIDGE_H
#define KBRIDGE_KBRIDGE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define KB_API __declspec(dllexport)
#else
#define KB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum kb_status {
  KB_OK = 0,
  KB_ERR_INVALID_ARGUMENT = 1,
  KB_ERR_DIMENSION_MISMATCH = 2,
  KB_ERR_PARSE = 3,
  KB_ERR_NUMERIC = 4,
  KB_ERR_QUADRATURE = 5,
  KB_ERR_DIVERGENCE = 6,
  KB_ERR_IO = 7,
  KB_ERR_INTERNAL = 8
} kb_status;

typedef struct kb_image kb_image;
typedef struct kb_loss kb_loss;
typedef struct kb_kernel kb_kernel;
typedef struct kb_stencil kb_stencil;
typedef struct kb_trace kb_trace;
typedef struct kb_buffer kb_buffer;

KB_API const char* kb_version(void);
KB_API const char* kb_last_error(void);
/* Short lowercase name of a status, e.g. "divergence". */
KB_API const char* kb_status_name(kb_status status);

/* ---- images ---------------------------------------------------------- */

KB_API kb_status kb_image_create(int width, int height, const double* data, kb_image** out);
KB_API kb_status kb_image_load_pgm(const char* path, kb_image** out);
/* Values are rounded and clamped to [0, 255]; the write is atomic. */
KB_API kb_status kb_image_save_pgm(const kb_image* img, const char* path);
KB_API kb_status kb_corpus_image(const char* name, int size, uint64_t seed, kb_image** out);
/* Space separated corpus names, e.g. "blocks ramp sinus texture". */
KB_API const char* kb_corpus_names(void);
KB_API void kb_image_free(kb_image* img);
KB_API int kb_image_width(const kb_image* img);
KB_API int kb_image_height(const kb_image* img);
/* Row-major pixels, valid while the image lives. */
KB_API const double* kb_image_data(const kb_image* img);
/* out = img * factor */
KB_API kb_status kb_image_scale(const kb_image* img, double factor, kb_image** out);
KB_API kb_status kb_add_noise(const kb_image* img, double sigma, uint64_t seed, kb_image** out);
/* Returns +inf for identical images. */
KB_API kb_status kb_psnr(const kb_image* a, const kb_image* b, double peak, double* out);

/* ---- losses and kernels -------------------------------------------- */

/* "huber:gamma=5", "barron:beta=0,gamma=1", "tv", "welsch:gamma=2" */
KB_API kb_status kb_loss_parse(const char* spec, kb_loss** out);
KB_API void kb_loss_free(kb_loss* loss);
/* gamma and the TV epsilon multiplied by factor. */
KB_API kb_status kb_loss_rescale(const kb_loss* loss, double factor, kb_loss** out);
/* Any of the output pointers may be NULL. */
KB_API kb_status kb_loss_eval(const kb_loss* loss, double t, double* rho, double* rho_prime,
                              double* rho_second);
KB_API int kb_loss_is_convex(const kb_loss* loss);

/* "constant", "boxcar:gamma=20", "gaussian:gamma=20", "cauchy:gamma=1",
 * "exponential:gamma=1" */
KB_API kb_status kb_kernel_parse(const char* spec, kb_kernel** out);
KB_API void kb_kernel_free(kb_kernel* k);
KB_API kb_status kb_kernel_rescale(const kb_kernel* k, double factor, kb_kernel** out);
KB_API kb_status kb_kernel_eval(const kb_kernel* k, double t, double* out);
/* Set when a derived second-order kernel goes negative somewhere. */
KB_API int kb_kernel_non_psd(const kb_kernel* k);

/* Translation scale (2 sigma^2 / alpha) h; sigma = 1, alpha = 2, h = 1 gives 1. */
typedef struct kb_scale {
  double sigma;
  double alpha;
  double h;
} kb_scale;

/* order is 1 (k = rho'/t) or 2 (k = rho''). */
KB_API kb_status kb_kernel_from_loss(const kb_loss* loss, int order, const kb_scale* scale,
                                     kb_kernel** out);
/* order 1: rho = int tau k; order 2: rho'' = k. */
KB_API kb_status kb_loss_from_kernel(const kb_kernel* k, int order, kb_loss** out);

/* ---- stencils ------------------------------------------------------ */

KB_API kb_status kb_stencil_box(int radius, kb_stencil** out);
KB_API kb_status kb_stencil_gaussian(int radius, double spatial_sigma, kb_stencil** out);
KB_API void kb_stencil_free(kb_stencil* s);

/* ---- filters ------------------------------------------------------- */

typedef struct kb_filter_params {
  double sigma;
  double alpha;
  int patch_radius;
  int periodic; /* 0 reflect, 1 periodic */
  int threads;
} kb_filter_params;

KB_API void kb_filter_params_default(kb_filter_params* p);

KB_API kb_status kb_filter_normalized(const kb_image* x, const kb_kernel* k, const kb_stencil* s,
                                      const kb_filter_params* p, kb_image** out);
KB_API kb_status kb_filter_bilateral_df(const kb_image* x, const kb_kernel* k,
                                        const kb_stencil* s, const kb_filter_params* p,
                                        kb_image** out);
KB_API kb_status kb_filter_first_order(const kb_image* x, const kb_loss* loss, const kb_stencil* s,
                                       const kb_filter_params* p, kb_image** out);
KB_API kb_status kb_filter_second_order(const kb_image* x, const kb_loss* loss,
                                        const kb_stencil* s, const kb_filter_params* p,
                                        kb_image** out);
/* exact = 0: (1 - sigma^2) x; exact = 1: x / (1 + sigma^2). */
KB_API kb_status kb_filter_l2(const kb_image* x, double sigma, int exact, kb_image** out);
/* Dirichlet filters applied to each row as a periodic 1D signal. exact = 0
 * uses the 3-tap approximation; half_taps selects the half-strength taps. */
KB_API kb_status kb_filter_dirichlet_rows(const kb_image* x, double sigma, int exact,
                                          int half_taps, kb_image** out);

/* ---- MAP solvers --------------------------------------------------- */

typedef struct kb_solver_params {
  int max_iters;
  double step;     /* 0: automatic */
  double momentum; /* negative: automatic */
  double grad_tol; /* 0: automatic */
  double dynamic_range; /* 0: from the observed image */
  int heavy_ball;
  int pointwise; /* 1: phi(u) = sum rho(u_i) instead of pairwise */
  int periodic;
} kb_solver_params;

KB_API void kb_solver_params_default(kb_solver_params* p);

KB_API kb_status kb_solve_map(const kb_image* observed, const kb_loss* loss, const kb_stencil* s,
                              double sigma, const kb_solver_params* p, kb_image** out,
                              kb_trace** trace);
KB_API void kb_trace_free(kb_trace* t);
KB_API size_t kb_trace_size(const kb_trace* t);
KB_API kb_status kb_trace_row(const kb_trace* t, size_t i, int* iter, double* objective,
                              double* grad_norm);
KB_API int kb_trace_iterations(const kb_trace* t);
KB_API int kb_trace_converged(const kb_trace* t);
KB_API double kb_trace_step(const kb_trace* t);
KB_API double kb_trace_momentum(const kb_trace* t);
KB_API size_t kb_trace_warning_count(const kb_trace* t);
KB_API const char* kb_trace_warning(const kb_trace* t, size_t i);

/* ---- graph check --------------------------------------------------- */

typedef struct kb_graph_report {
  int nodes;
  double alpha_exact;
  double alpha_mean_degree;
  double alpha_rel_gap;
  double residual_exact;
  double residual_mean_degree;
  double row_sum_max_dev;     /* max |W 1 - 1| */
  double null_norm_max;       /* max |L_norm 1| */
  double null_unnorm_max;     /* max |L_unnorm 1| */
  double degree_identity_max; /* worst (alpha / 2 sigma^2)(d_i - 1) - h_self */
} kb_graph_report;

KB_API kb_status kb_graph_check(const kb_image* x, const kb_kernel* k, const kb_stencil* s,
                                int patch_radius, double sigma, kb_graph_report* out);

/* ---- experiments --------------------------------------------------- */

typedef struct kb_experiment_params {
  const char* name;   /* "huber-tv", "bilateral-inversion" or "dirichlet" */
  const char* family; /* bilateral-inversion: gaussian, boxcar, exponential or all */
  uint64_t seed;
  int size;           /* corpus image size */
  const char* images; /* comma separated corpus names; NULL for all */
  const char* input;  /* optional PGM used instead of the corpus */
  const double* sigmas;
  size_t sigma_count; /* 0: default grid */
  double noise_sigma; /* negative: noise follows sigma */
  double gamma;       /* 0: experiment default */
  size_t alpha_points; /* 0: default */
  int n;              /* dirichlet signal length */
  int threads;
  int include_timing;
} kb_experiment_params;

KB_API void kb_experiment_params_default(kb_experiment_params* p);
KB_API kb_status kb_experiment_csv(const kb_experiment_params* p, kb_buffer** out);

/* ---- buffers and files --------------------------------------------- */

KB_API const char* kb_buffer_data(const kb_buffer* b);
KB_API size_t kb_buffer_size(const kb_buffer* b);
KB_API void kb_buffer_free(kb_buffer* b);
/* Temp file + rename; no partial file is left behind on failure. */
KB_API kb_status kb_write_file_atomic(const char* path, const char* data, size_t size);

#ifdef __cplusplus
}
#endif

#endif
