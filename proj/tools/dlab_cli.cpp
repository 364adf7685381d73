// dlab command-line front end. Talks to the library only through dlab.h.

#include "dlab/dlab.h"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

int report(dlab_status s) {
    if (s == DLAB_OK) return 0;
    std::cerr << "error: " << dlab_last_error() << "\n";
    return s == DLAB_ERR_VALIDATION ? kExitValidation : kExitRuntime;
}

struct Globals {
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";
    std::string config;
};

int ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        std::cerr << "error: cannot create output directory '" << dir << "': " << ec.message() << "\n";
        return kExitRuntime;
    }
    return 0;
}

std::string in_dir(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

// ---- train ----

struct TrainArgs {
    int levelset_resolution = 64;
    int levelset_every = 10;
    bool no_levelsets = false;
    bool wall_clock = false;
};

int cmd_train(const Globals& g, const TrainArgs& a) {
    if (g.config.empty()) {
        std::cerr << "error: train needs --config <path>\n";
        return kExitValidation;
    }
    dlab_config* cfg = nullptr;
    if (int rc = report(dlab_config_load(g.config.c_str(), &cfg))) return rc;
    struct Guard {
        dlab_config* c;
        ~Guard() { dlab_config_free(c); }
    } guard{cfg};
    if (g.seed) dlab_config_set_seed(cfg, *g.seed);
    if (int rc = ensure_dir(g.out_dir)) return rc;

    char* json = nullptr;
    if (int rc = report(dlab_config_to_json(cfg, &json))) return rc;
    {
        std::ofstream os(in_dir(g.out_dir, "config.json"));
        os << json;
    }
    dlab_string_free(json);

    const std::string levelset_dir = in_dir(g.out_dir, "levelsets");
    dlab_train_options opts{};
    opts.levelset_dir = a.no_levelsets ? nullptr : levelset_dir.c_str();
    opts.levelset_resolution = a.levelset_resolution;
    opts.levelset_every = a.levelset_every;
    opts.record_wall_clock = a.wall_clock ? 1 : 0;

    dlab_run* run = nullptr;
    if (int rc = report(dlab_train(cfg, &opts, &run))) return rc;
    int rc = report(dlab_run_write_csv(run, in_dir(g.out_dir, "train_log.csv").c_str()));
    dlab_mlp* gen = nullptr;
    dlab_mlp* disc = nullptr;
    if (!rc) rc = report(dlab_run_generator(run, &gen));
    if (!rc) rc = report(dlab_mlp_save(gen, in_dir(g.out_dir, "generator.mlp").c_str()));
    if (!rc) rc = report(dlab_run_discriminator(run, &disc));
    if (!rc) rc = report(dlab_mlp_save(disc, in_dir(g.out_dir, "discriminator.mlp").c_str()));
    dlab_mlp_free(gen);
    dlab_mlp_free(disc);

    int failed = 0;
    long at = 0;
    dlab_run_failed(run, &failed, &at);
    const std::size_t rows = dlab_run_row_count(run);
    if (!rc && rows > 0) {
        dlab_train_row last{};
        dlab_run_row(run, rows - 1, &last);
        std::printf("g_iter %ld  d_loss %.6g  g_loss %.6g  covered_modes %d  hq_fraction %.4f\n", last.g_iter,
                    last.d_loss, last.g_loss, last.covered_modes, last.hq_fraction);
    }
    if (!rc && failed) {
        std::cerr << "error: run failed at generator iteration " << at << ": " << dlab_run_failure(run) << "\n";
        rc = kExitRuntime;
    }
    dlab_run_free(run);
    return rc;
}

// ---- game-demo ----

int cmd_game_demo(const Globals& g, const dlab_game_options& opts) {
    if (int rc = ensure_dir(g.out_dir)) return rc;
    dlab_game_summary s{};
    const std::string path = in_dir(g.out_dir, "game_demo.csv");
    if (int rc = report(dlab_game_demo(&opts, path.c_str(), &s))) return rc;
    std::printf("phi_bar %.6g  theta_bar %.6g\nregret_1 %.6g  regret_2 %.6g\n", s.phi_bar, s.theta_bar, s.regret_phi,
                s.regret_theta);
    std::printf("duality_gap(averaged) %.6g  duality_gap(last iterate) %.6g\n", s.duality_gap, s.last_iterate_gap);
    return 0;
}

// ---- bogonet ----

int cmd_bogonet(const Globals& g, dlab_bogonet_options opts) {
    if (g.seed) opts.seed = *g.seed;
    if (int rc = ensure_dir(g.out_dir)) return rc;
    dlab_bogonet* b = nullptr;
    if (int rc = report(dlab_bogonet_run(&opts, &b))) return rc;
    int rc = report(dlab_bogonet_write_csv(b, in_dir(g.out_dir, "bogonet_summary.csv").c_str(),
                                           in_dir(g.out_dir, "bogonet_instances.csv").c_str()));
    for (std::size_t i = 0; !rc && i < dlab_bogonet_algorithm_count(b); ++i) {
        dlab_series_summary s{};
        dlab_bogonet_summary(b, i, &s);
        std::printf("%-8s final %.4f +- %.4f  auc %.2f +- %.2f  (%zu runs)\n", dlab_bogonet_algorithm(b, i),
                    s.final_mean, s.final_std, s.auc_mean, s.auc_std, s.runs);
    }
    dlab_bogonet_free(b);
    return rc;
}

// ---- levelset ----

int cmd_levelset(const Globals& g, const std::string& checkpoint, int resolution, const std::vector<double>& bounds) {
    dlab_mlp* d = nullptr;
    if (int rc = report(dlab_mlp_load(checkpoint.c_str(), &d))) return rc;
    int rc = ensure_dir(g.out_dir);
    const std::string comment = g.seed ? "seed " + std::to_string(*g.seed) : "";
    if (!rc)
        rc = report(dlab_levelset_write(d, bounds.data(), resolution, in_dir(g.out_dir, "levelset.pgm").c_str(),
                                        in_dir(g.out_dir, "levelset.csv").c_str(), comment.c_str()));
    dlab_mlp_free(d);
    return rc;
}

// ---- gradcheck ----

int cmd_gradcheck(const Globals& g, int trials) {
    dlab_gradcheck_result r{};
    if (int rc = report(dlab_gradcheck(g.seed.value_or(0), trials, &r))) return rc;
    static const char* names[] = {"dragan_sq", "dragan_hinge", "dragan_eq1", "coupled_gp"};
    std::printf("first-order   trials %d  max relative error %.3e\n", r.first_order_trials, r.first_order_max_error);
    bool ok = r.first_order_max_error <= 1e-4;
    for (int i = 0; i < 4; ++i) {
        std::printf("second-order  %-12s trials %d  max relative error %.3e\n", names[i], r.second_order_trials,
                    r.second_order_max_error[i]);
        ok = ok && r.second_order_max_error[i] <= 1e-3;
    }
    if (!ok) {
        std::cerr << "error: gradient check exceeded tolerance\n";
        return kExitRuntime;
    }
    return 0;
}

// ---- latent-walk ----

int cmd_latent_walk(const Globals& g, const std::string& checkpoint, int steps, std::vector<double> z0,
                    std::vector<double> z1) {
    dlab_mlp* m = nullptr;
    if (int rc = report(dlab_mlp_load(checkpoint.c_str(), &m))) return rc;
    const int in = dlab_mlp_input_dim(m);
    const int out = dlab_mlp_output_dim(m);
    std::mt19937_64 rng(g.seed.value_or(0));
    std::normal_distribution<double> normal;
    if (z0.empty())
        for (int i = 0; i < in; ++i) z0.push_back(normal(rng));
    if (z1.empty())
        for (int i = 0; i < in; ++i) z1.push_back(normal(rng));
    int rc = 0;
    if (static_cast<int>(z0.size()) != in || static_cast<int>(z1.size()) != in) {
        std::cerr << "error: latent vectors need " << in << " entries\n";
        rc = kExitValidation;
    }
    std::vector<double> walk(static_cast<std::size_t>(steps > 0 ? steps : 0) * out);
    if (!rc) rc = report(dlab_latent_walk(m, z0.data(), z1.data(), steps, walk.data()));
    if (!rc) rc = ensure_dir(g.out_dir);
    if (!rc) {
        std::ofstream os(in_dir(g.out_dir, "latent_walk.csv"));
        os << "step,t";
        for (int j = 0; j < out; ++j) os << ",x" << j;
        os << '\n';
        char buf[40];
        for (int s = 0; s < steps; ++s) {
            std::snprintf(buf, sizeof buf, "%.17g", static_cast<double>(s) / (steps - 1));
            os << s << ',' << buf;
            for (int j = 0; j < out; ++j) {
                std::snprintf(buf, sizeof buf, "%.17g", walk[static_cast<std::size_t>(s) * out + j]);
                os << ',' << buf;
            }
            os << '\n';
        }
        if (!os) {
            std::cerr << "error: cannot write latent_walk.csv\n";
            rc = kExitRuntime;
        }
    }
    dlab_mlp_free(m);
    return rc;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dlab: adversarial training laboratory"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    std::uint64_t seed = 0;
    auto* seed_opt = app.add_option("--seed", seed, "Random seed (overrides the config seed)");
    app.add_option("--out-dir", g.out_dir, "Output directory")->capture_default_str();
    app.add_option("--config", g.config, "JSON experiment configuration");

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "Train a GAN from a config file");
    train->add_option("--levelset-resolution", train_args.levelset_resolution, "Level-set grid size")
        ->check(CLI::Range(2, 4096))
        ->capture_default_str();
    train->add_option("--levelset-every", train_args.levelset_every, "Snapshot every n-th evaluation")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    train->add_flag("--no-levelsets", train_args.no_levelsets, "Skip level-set snapshots");
    train->add_flag("--wall-clock", train_args.wall_clock, "Record wall-clock times (not reproducible)");

    dlab_game_options game_opts;
    dlab_game_options_default(&game_opts);
    bool constant_eta = false;
    auto* game = app.add_subcommand("game-demo", "No-regret self-play on J = phi * theta");
    game->add_option("--iters", game_opts.iters, "Rounds")->check(CLI::PositiveNumber)->capture_default_str();
    game->add_option("--phi0", game_opts.phi0, "Start of player 1")->capture_default_str();
    game->add_option("--theta0", game_opts.theta0, "Start of player 2")->capture_default_str();
    game->add_option("--eta", game_opts.eta, "Step scale")->check(CLI::PositiveNumber)->capture_default_str();
    game->add_flag("--constant-eta", constant_eta, "Use eta for every round instead of eta / sqrt(t)");

    dlab_bogonet_options bogo_opts;
    dlab_bogonet_options_default(&bogo_opts);
    auto* bogo = app.add_subcommand("bogonet", "Random-architecture stability benchmark");
    bogo->add_option("--instances", bogo_opts.instances, "Number of games")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    bogo->add_option("--g-iters", bogo_opts.g_iters, "Generator iterations per run")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    bogo->add_option("--threads", bogo_opts.threads, "Worker threads")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    bogo->add_option("--dragan-c", bogo_opts.dragan_c, "Perturbation scale for DRAGAN")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    bogo->add_option("--alpha", bogo_opts.alpha, "Adam step size for every algorithm")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    std::string checkpoint;
    int resolution = 64;
    std::vector<double> bounds{-3, 3, -3, 3};
    auto* level = app.add_subcommand("levelset", "Level-set grid of a discriminator checkpoint");
    level->add_option("--checkpoint", checkpoint, "Discriminator checkpoint")->required();
    level->add_option("--resolution", resolution, "Grid size")->check(CLI::Range(2, 4096))->capture_default_str();
    level->add_option("--bounds", bounds, "xmin xmax ymin ymax")->expected(4)->capture_default_str();

    int trials = 100;
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference checks of the differentiation engine");
    gradcheck->add_option("--trials", trials, "Random networks for the first-order suite")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    int steps = 10;
    std::vector<double> z0, z1;
    auto* walk = app.add_subcommand("latent-walk", "Generator outputs along a latent segment");
    walk->add_option("--checkpoint", checkpoint, "Generator checkpoint")->required();
    walk->add_option("--steps", steps, "Points on the segment")->check(CLI::Range(2, 1000000))->capture_default_str();
    walk->add_option("--z0", z0, "Start latent vector (random by default)");
    walk->add_option("--z1", z1, "End latent vector (random by default)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return kExitValidation;
    }
    if (*seed_opt) g.seed = seed;

    if (train->parsed()) return cmd_train(g, train_args);
    if (game->parsed()) {
        game_opts.constant_eta = constant_eta ? 1 : 0;
        return cmd_game_demo(g, game_opts);
    }
    if (bogo->parsed()) return cmd_bogonet(g, bogo_opts);
    if (level->parsed()) return cmd_levelset(g, checkpoint, resolution, bounds);
    if (gradcheck->parsed()) return cmd_gradcheck(g, trials);
    if (walk->parsed()) return cmd_latent_walk(g, checkpoint, steps, z0, z1);
    std::cerr << app.help();
    return kExitValidation;
}
