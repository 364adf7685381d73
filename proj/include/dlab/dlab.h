/* C interface to the dlab adversarial-training library.
 *
 * Every function returns a dlab_status. On failure the message is available
 * from dlab_last_error() on the calling thread until the next failing call.
 * Handles are opaque and released with the matching *_free function; passing
 * NULL to a *_free function is a no-op.
 *
 * Matrices cross the boundary as row-major double arrays.
 */
#ifndef DLAB_DLAB_H
#define DLAB_DLAB_H

#include <stddef.h>
#include <stdint.h>

#if defined(DLAB_BUILDING_LIBRARY)
#define DLAB_API __attribute__((visibility("default")))
#else
#define DLAB_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dlab_status {
    DLAB_OK = 0,
    DLAB_ERR_VALIDATION = 1, /* bad argument, config or precondition */
    DLAB_ERR_NUMERIC = 2,    /* non-finite or out-of-domain value */
    DLAB_ERR_IO = 3,         /* file missing, unreadable or malformed */
    DLAB_ERR_INTERNAL = 4
} dlab_status;

typedef struct dlab_config dlab_config;
typedef struct dlab_run dlab_run;
typedef struct dlab_mlp dlab_mlp;
typedef struct dlab_bogonet dlab_bogonet;

DLAB_API const char* dlab_version(void);
DLAB_API const char* dlab_last_error(void);
/* Strings returned through char** out-parameters. */
DLAB_API void dlab_string_free(char* s);

/* ---- configuration ---- */

/* A missing file is a validation error ("config not found"). */
DLAB_API dlab_status dlab_config_load(const char* path, dlab_config** out);
DLAB_API dlab_status dlab_config_parse(const char* json, dlab_config** out);
DLAB_API dlab_status dlab_config_set_seed(dlab_config* cfg, uint64_t seed);
DLAB_API dlab_status dlab_config_seed(const dlab_config* cfg, uint64_t* seed);
/* Normalized JSON echo of the configuration, including defaults. */
DLAB_API dlab_status dlab_config_to_json(const dlab_config* cfg, char** out);
DLAB_API void dlab_config_free(dlab_config* cfg);

/* ---- training ---- */

typedef struct dlab_train_options {
    /* Directory for level-set snapshots (PGM + CSV); NULL disables them. */
    const char* levelset_dir;
    int levelset_resolution; /* 0 selects 64 */
    int levelset_every;      /* snapshot every n-th evaluation row; 0 selects 10 */
    int record_wall_clock;   /* nonzero fills wall_ms; logs stop being reproducible */
} dlab_train_options;

typedef struct dlab_train_row {
    long g_iter;
    long d_iter;
    double d_loss;
    double g_loss;
    double penalty;
    double grad_norm_real;
    int covered_modes;
    double hq_fraction;
    double wall_ms;
} dlab_train_row;

/* A run that hits a non-finite loss still succeeds here; query
 * dlab_run_failed. */
DLAB_API dlab_status dlab_train(const dlab_config* cfg, const dlab_train_options* opts, dlab_run** out);
DLAB_API size_t dlab_run_row_count(const dlab_run* run);
DLAB_API dlab_status dlab_run_row(const dlab_run* run, size_t i, dlab_train_row* row);
/* *failed is 0 or 1; *at receives the generator iteration of the failure. */
DLAB_API dlab_status dlab_run_failed(const dlab_run* run, int* failed, long* at);
DLAB_API const char* dlab_run_failure(const dlab_run* run);
DLAB_API dlab_status dlab_run_update_counts(const dlab_run* run, long* g_updates, long* d_updates);
DLAB_API dlab_status dlab_run_write_csv(const dlab_run* run, const char* path);
/* Copies of the final players. */
DLAB_API dlab_status dlab_run_generator(const dlab_run* run, dlab_mlp** out);
DLAB_API dlab_status dlab_run_discriminator(const dlab_run* run, dlab_mlp** out);
DLAB_API void dlab_run_free(dlab_run* run);

/* ---- networks ---- */

DLAB_API dlab_status dlab_mlp_load(const char* path, dlab_mlp** out);
DLAB_API dlab_status dlab_mlp_save(const dlab_mlp* m, const char* path);
DLAB_API int dlab_mlp_input_dim(const dlab_mlp* m);
DLAB_API int dlab_mlp_output_dim(const dlab_mlp* m);
/* x: n x input_dim, out: n x output_dim. */
DLAB_API dlab_status dlab_mlp_forward(const dlab_mlp* m, const double* x, size_t n, double* out);
DLAB_API void dlab_mlp_free(dlab_mlp* m);

/* Level-set grid of a 2-input, 1-output network over
 * bounds = {xmin, xmax, ymin, ymax}. Either path may be NULL. */
DLAB_API dlab_status dlab_levelset_write(const dlab_mlp* d, const double bounds[4], int resolution,
                                         const char* pgm_path, const char* csv_path, const char* comment);

/* steps rows of G((1-t) z0 + t z1); out holds steps x output_dim values. */
DLAB_API dlab_status dlab_latent_walk(const dlab_mlp* g, const double* z0, const double* z1, int steps, double* out);

/* ---- regret dynamics ---- */

typedef struct dlab_game_options {
    int iters;
    double phi0;
    double theta0;
    double eta;       /* eta_t = eta / sqrt(t) unless constant_eta */
    int constant_eta;
} dlab_game_options;

typedef struct dlab_game_summary {
    double phi_bar;
    double theta_bar;
    double regret_phi;
    double regret_theta;
    double duality_gap;      /* of the averaged iterates at the last round */
    double last_iterate_gap; /* of the last played pair */
} dlab_game_summary;

DLAB_API void dlab_game_options_default(dlab_game_options* opts);
/* Bilinear self-play on J = phi * theta over [-1, 1]^2. csv_path may be NULL. */
DLAB_API dlab_status dlab_game_demo(const dlab_game_options* opts, const char* csv_path, dlab_game_summary* out);

/* ---- benchmark ---- */

typedef struct dlab_bogonet_options {
    int instances;
    long g_iters;
    uint64_t seed;
    int threads;
    double dragan_c;
    double alpha; /* Adam step size shared by all three algorithms */
} dlab_bogonet_options;

typedef struct dlab_series_summary {
    double final_mean;
    double final_std;
    double auc_mean;
    double auc_std;
    size_t runs;
} dlab_series_summary;

DLAB_API void dlab_bogonet_options_default(dlab_bogonet_options* opts);
DLAB_API dlab_status dlab_bogonet_run(const dlab_bogonet_options* opts, dlab_bogonet** out);
DLAB_API size_t dlab_bogonet_algorithm_count(const dlab_bogonet* b);
DLAB_API const char* dlab_bogonet_algorithm(const dlab_bogonet* b, size_t i);
DLAB_API dlab_status dlab_bogonet_summary(const dlab_bogonet* b, size_t i, dlab_series_summary* out);
DLAB_API dlab_status dlab_bogonet_write_csv(const dlab_bogonet* b, const char* summary_path,
                                            const char* instances_path);
DLAB_API void dlab_bogonet_free(dlab_bogonet* b);

/* ---- finite-difference suites ---- */

typedef struct dlab_gradcheck_result {
    int first_order_trials;
    double first_order_max_error;
    /* dragan_sq, dragan_hinge, dragan_eq1, coupled_gp */
    double second_order_max_error[4];
    int second_order_trials;
} dlab_gradcheck_result;

DLAB_API dlab_status dlab_gradcheck(uint64_t seed, int trials, dlab_gradcheck_result* out);

#ifdef __cplusplus
}
#endif

#endif
