#include "dlab/dlab.h"

#include "dlab/error.hpp"
#include "dlab/gradcheck.hpp"
#include "dlab/harness.hpp"
#include "dlab/metrics.hpp"
#include "dlab/regretgame.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <new>
#include <sstream>
#include <string>

struct dlab_config {
    dlab::GameConfig cfg;
};

struct dlab_run {
    dlab::TrainResult result;
};

struct dlab_mlp {
    dlab::Mlp mlp;
};

struct dlab_bogonet {
    dlab::BogonetReport report;
};

namespace {

thread_local std::string g_last_error;

dlab_status fail(dlab_status code, const char* message) {
    g_last_error = message;
    return code;
}

// Runs f, mapping exceptions onto status codes.
template <class F>
dlab_status guarded(F&& f) {
    try {
        f();
        return DLAB_OK;
    } catch (const dlab::ValidationError& e) {
        return fail(DLAB_ERR_VALIDATION, e.what());
    } catch (const dlab::NumericError& e) {
        return fail(DLAB_ERR_NUMERIC, e.what());
    } catch (const dlab::IoError& e) {
        return fail(DLAB_ERR_IO, e.what());
    } catch (const std::bad_alloc&) {
        return fail(DLAB_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(DLAB_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(DLAB_ERR_INTERNAL, "unknown error");
    }
}

void require(const void* p, const char* what) {
    if (!p) throw dlab::ValidationError(std::string(what) + " must not be NULL");
}

char* copy_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

std::ofstream open_out(const char* path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw dlab::IoError(std::string("cannot open '") + path + "' for writing");
    return os;
}

void finish(std::ofstream& os, const char* path) {
    os.flush();
    if (!os) throw dlab::IoError(std::string("write failed for '") + path + "'");
}

void write_levelset_files(const dlab::Mlp& d, const dlab::GridBounds& bounds, int resolution, const char* pgm_path,
                          const char* csv_path, const std::string& comment) {
    const dlab::LevelSetGrid grid = dlab::levelset_grid(d, bounds, resolution);
    if (pgm_path) {
        auto os = open_out(pgm_path);
        dlab::write_pgm(os, grid, comment);
        finish(os, pgm_path);
    }
    if (csv_path) {
        auto os = open_out(csv_path);
        dlab::write_levelset_csv(os, grid);
        finish(os, csv_path);
    }
}

}  // namespace

extern "C" {

const char* dlab_version(void) { return "0.1.0"; }

const char* dlab_last_error(void) { return g_last_error.c_str(); }

void dlab_string_free(char* s) { std::free(s); }

// ---- configuration ----

dlab_status dlab_config_load(const char* path, dlab_config** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = new dlab_config{dlab::load_game_config(path)};
    });
}

dlab_status dlab_config_parse(const char* json, dlab_config** out) {
    return guarded([&] {
        require(json, "json");
        require(out, "out");
        *out = new dlab_config{dlab::parse_game_config(json)};
    });
}

dlab_status dlab_config_set_seed(dlab_config* cfg, uint64_t seed) {
    return guarded([&] {
        require(cfg, "cfg");
        cfg->cfg.seed = seed;
    });
}

dlab_status dlab_config_seed(const dlab_config* cfg, uint64_t* seed) {
    return guarded([&] {
        require(cfg, "cfg");
        require(seed, "seed");
        *seed = cfg->cfg.seed;
    });
}

dlab_status dlab_config_to_json(const dlab_config* cfg, char** out) {
    return guarded([&] {
        require(cfg, "cfg");
        require(out, "out");
        *out = copy_string(dlab::game_config_to_json(cfg->cfg));
    });
}

void dlab_config_free(dlab_config* cfg) { delete cfg; }

// ---- training ----

dlab_status dlab_train(const dlab_config* cfg, const dlab_train_options* opts, dlab_run** out) {
    return guarded([&] {
        require(cfg, "cfg");
        require(out, "out");
        dlab_train_options o{};
        if (opts) o = *opts;
        const int resolution = o.levelset_resolution > 0 ? o.levelset_resolution : 64;
        const int every = o.levelset_every > 0 ? o.levelset_every : 10;
        if (o.levelset_dir && cfg->cfg.discriminator.input_dim != 2)
            throw dlab::ValidationError("level sets need 2-dimensional data");

        dlab::TrainHooks hooks;
        hooks.record_wall_clock = o.record_wall_clock != 0;
        std::filesystem::path dir;
        if (o.levelset_dir) {
            dir = o.levelset_dir;
            std::filesystem::create_directories(dir);
            long evals = 0;
            const long total = cfg->cfg.generator_iterations();
            const std::uint64_t seed = cfg->cfg.seed;
            hooks.on_eval = [&, evals, total, seed](const dlab::TrainRow& row, const dlab::Mlp&,
                                                    const dlab::Mlp& d) mutable {
                ++evals;
                if (evals % every != 0 && row.g_iter != total) return;
                std::ostringstream name;
                name << "levelset_" << std::setw(7) << std::setfill('0') << row.g_iter;
                const std::string pgm = (dir / (name.str() + ".pgm")).string();
                const std::string csv = (dir / (name.str() + ".csv")).string();
                write_levelset_files(d, dlab::GridBounds{}, resolution, pgm.c_str(), csv.c_str(),
                                     "seed " + std::to_string(seed) + " g_iter " + std::to_string(row.g_iter));
            };
        }
        auto run = std::make_unique<dlab_run>();
        run->result = dlab::agd_train(cfg->cfg, hooks);
        *out = run.release();
    });
}

size_t dlab_run_row_count(const dlab_run* run) { return run ? run->result.log.rows.size() : 0; }

dlab_status dlab_run_row(const dlab_run* run, size_t i, dlab_train_row* row) {
    return guarded([&] {
        require(run, "run");
        require(row, "row");
        if (i >= run->result.log.rows.size()) throw dlab::ValidationError("row index out of range");
        const dlab::TrainRow& r = run->result.log.rows[i];
        *row = dlab_train_row{r.g_iter,         r.d_iter,        r.d_loss,      r.g_loss, r.penalty,
                              r.grad_norm_real, r.covered_modes, r.hq_fraction, r.wall_ms};
    });
}

dlab_status dlab_run_failed(const dlab_run* run, int* failed, long* at) {
    return guarded([&] {
        require(run, "run");
        require(failed, "failed");
        *failed = run->result.log.failed() ? 1 : 0;
        if (at) *at = run->result.log.failed_at.value_or(0);
    });
}

const char* dlab_run_failure(const dlab_run* run) { return run ? run->result.log.failure.c_str() : ""; }

dlab_status dlab_run_update_counts(const dlab_run* run, long* g_updates, long* d_updates) {
    return guarded([&] {
        require(run, "run");
        if (g_updates) *g_updates = run->result.log.g_updates;
        if (d_updates) *d_updates = run->result.log.d_updates;
    });
}

dlab_status dlab_run_write_csv(const dlab_run* run, const char* path) {
    return guarded([&] {
        require(run, "run");
        require(path, "path");
        auto os = open_out(path);
        dlab::write_train_log_csv(os, run->result.log);
        finish(os, path);
    });
}

dlab_status dlab_run_generator(const dlab_run* run, dlab_mlp** out) {
    return guarded([&] {
        require(run, "run");
        require(out, "out");
        *out = new dlab_mlp{run->result.generator};
    });
}

dlab_status dlab_run_discriminator(const dlab_run* run, dlab_mlp** out) {
    return guarded([&] {
        require(run, "run");
        require(out, "out");
        *out = new dlab_mlp{run->result.discriminator};
    });
}

void dlab_run_free(dlab_run* run) { delete run; }

// ---- networks ----

dlab_status dlab_mlp_load(const char* path, dlab_mlp** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = new dlab_mlp{dlab::load_mlp(std::string(path))};
    });
}

dlab_status dlab_mlp_save(const dlab_mlp* m, const char* path) {
    return guarded([&] {
        require(m, "mlp");
        require(path, "path");
        dlab::save_mlp(m->mlp, std::string(path));
    });
}

int dlab_mlp_input_dim(const dlab_mlp* m) { return m ? m->mlp.input_dim() : 0; }

int dlab_mlp_output_dim(const dlab_mlp* m) { return m ? m->mlp.output_dim() : 0; }

dlab_status dlab_mlp_forward(const dlab_mlp* m, const double* x, size_t n, double* out) {
    return guarded([&] {
        require(m, "mlp");
        require(x, "x");
        require(out, "out");
        if (n == 0) throw dlab::ValidationError("forward: empty batch");
        const auto rows = static_cast<Eigen::Index>(n);
        using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        const dlab::Tensor in = Eigen::Map<const RowMajor>(x, rows, m->mlp.input_dim());
        Eigen::Map<RowMajor>(out, rows, m->mlp.output_dim()) = dlab::predict(m->mlp, in);
    });
}

void dlab_mlp_free(dlab_mlp* m) { delete m; }

dlab_status dlab_levelset_write(const dlab_mlp* d, const double bounds[4], int resolution, const char* pgm_path,
                                const char* csv_path, const char* comment) {
    return guarded([&] {
        require(d, "mlp");
        dlab::GridBounds b;
        if (bounds) b = {bounds[0], bounds[1], bounds[2], bounds[3]};
        write_levelset_files(d->mlp, b, resolution, pgm_path, csv_path, comment ? comment : "");
    });
}

dlab_status dlab_latent_walk(const dlab_mlp* g, const double* z0, const double* z1, int steps, double* out) {
    return guarded([&] {
        require(g, "mlp");
        require(z0, "z0");
        require(z1, "z1");
        require(out, "out");
        const int dim = g->mlp.input_dim();
        const Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(z0, dim);
        const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(z1, dim);
        const dlab::Tensor walk = dlab::latent_walk(g->mlp, a, b, steps);
        using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        Eigen::Map<RowMajor>(out, walk.rows(), walk.cols()) = walk;
    });
}

// ---- regret dynamics ----

void dlab_game_options_default(dlab_game_options* opts) {
    if (!opts) return;
    const dlab::SelfPlayOptions d;
    *opts = dlab_game_options{d.iters, d.phi0, d.theta0, d.eta, d.constant_eta ? 1 : 0};
}

dlab_status dlab_game_demo(const dlab_game_options* opts, const char* csv_path, dlab_game_summary* out) {
    return guarded([&] {
        require(opts, "opts");
        dlab::SelfPlayOptions o;
        o.iters = opts->iters;
        o.phi0 = opts->phi0;
        o.theta0 = opts->theta0;
        o.eta = opts->eta;
        o.constant_eta = opts->constant_eta != 0;
        if (!o.box.contains(Eigen::VectorXd::Constant(1, o.phi0)) ||
            !o.box.contains(Eigen::VectorXd::Constant(1, o.theta0)))
            throw dlab::ValidationError("game-demo: start point must lie in [-1, 1]^2");
        const auto rows = dlab::bilinear_self_play(o);
        if (csv_path) {
            auto os = open_out(csv_path);
            dlab::write_self_play_csv(os, rows);
            finish(os, csv_path);
        }
        if (out) {
            const dlab::SelfPlayRow& last = rows.back();
            out->phi_bar = last.phi_bar;
            out->theta_bar = last.theta_bar;
            out->regret_phi = last.regret_phi;
            out->regret_theta = last.regret_theta;
            out->duality_gap = last.duality_gap;
            out->last_iterate_gap = std::abs(last.phi) + std::abs(last.theta);
        }
    });
}

// ---- benchmark ----

void dlab_bogonet_options_default(dlab_bogonet_options* opts) {
    if (!opts) return;
    *opts = dlab_bogonet_options{20, 2000, 0, 1, 0.5, 1e-3};
}

dlab_status dlab_bogonet_run(const dlab_bogonet_options* opts, dlab_bogonet** out) {
    return guarded([&] {
        require(opts, "opts");
        require(out, "out");
        if (opts->g_iters < 1) throw dlab::ValidationError("bogonet: g_iters must be >= 1");
        if (!(opts->alpha > 0.0)) throw dlab::ValidationError("bogonet: alpha must be > 0");
        auto algorithms = dlab::default_bogonet_algorithms(opts->g_iters, opts->dragan_c);
        for (auto& a : algorithms) a.config.optimizer.alpha = opts->alpha;
        auto b = std::make_unique<dlab_bogonet>();
        b->report = dlab::bogonet_run(opts->instances, algorithms, opts->seed, opts->threads);
        *out = b.release();
    });
}

size_t dlab_bogonet_algorithm_count(const dlab_bogonet* b) { return b ? b->report.algorithms.size() : 0; }

const char* dlab_bogonet_algorithm(const dlab_bogonet* b, size_t i) {
    if (!b || i >= b->report.algorithms.size()) return nullptr;
    return b->report.algorithms[i].c_str();
}

dlab_status dlab_bogonet_summary(const dlab_bogonet* b, size_t i, dlab_series_summary* out) {
    return guarded([&] {
        require(b, "bogonet");
        require(out, "out");
        if (i >= b->report.summaries.size()) throw dlab::ValidationError("algorithm index out of range");
        const dlab::SeriesSummary& s = b->report.summaries[i];
        *out = dlab_series_summary{s.final_mean, s.final_std, s.auc_mean, s.auc_std, s.runs};
    });
}

dlab_status dlab_bogonet_write_csv(const dlab_bogonet* b, const char* summary_path, const char* instances_path) {
    return guarded([&] {
        require(b, "bogonet");
        if (summary_path) {
            auto os = open_out(summary_path);
            dlab::write_bogonet_summary_csv(os, b->report);
            finish(os, summary_path);
        }
        if (instances_path) {
            auto os = open_out(instances_path);
            dlab::write_bogonet_instances_csv(os, b->report);
            finish(os, instances_path);
        }
    });
}

void dlab_bogonet_free(dlab_bogonet* b) { delete b; }

// ---- finite-difference suites ----

dlab_status dlab_gradcheck(uint64_t seed, int trials, dlab_gradcheck_result* out) {
    return guarded([&] {
        require(out, "out");
        const dlab::FirstOrderCheck first = dlab::first_order_suite(seed, trials);
        out->first_order_trials = first.trials;
        out->first_order_max_error = first.max_error;
        const auto second = dlab::second_order_suite(seed);
        for (std::size_t i = 0; i < second.size() && i < 4; ++i) out->second_order_max_error[i] = second[i].max_error;
        out->second_order_trials = second.empty() ? 0 : second.front().trials;
    });
}

}  // extern "C"
