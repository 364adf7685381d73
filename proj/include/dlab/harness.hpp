#pragma once

// Alternating-gradient GAN training, optimizers, experiment configuration and
// the BogoNet random-architecture stability benchmark.

#include "dlab/metrics.hpp"
#include "dlab/nets.hpp"
#include "dlab/objectives.hpp"
#include "dlab/penalties.hpp"
#include "dlab/synthdata.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dlab {

// ---- optimizers -------------------------------------------------------------

struct OptimizerConfig {
    enum class Kind { Sgd, Adam };
    Kind kind = Kind::Adam;
    double eta = 1e-3;  // sgd
    double alpha = 1e-4;
    double beta1 = 0.5;
    double beta2 = 0.9;
    double eps = 1e-8;

    void validate() const;
};

struct AdamMoments {
    Tensor m;
    Tensor v;
};

// One bias-corrected Adam update of `param` at step t >= 1. Zero-initializes
// the moments on first use. Throws NumericError on a non-finite gradient.
void adam_step(Tensor& param, const Tensor& g, AdamMoments& state, long t, double alpha, double beta1, double beta2,
               double eps);

class Optimizer {
public:
    explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}
    void step(std::vector<Tensor>& params, const std::vector<Tensor>& grads);
    long steps() const { return t_; }

private:
    OptimizerConfig cfg_;
    std::vector<AdamMoments> moments_;
    long t_ = 0;
};

// ---- configuration ----------------------------------------------------------

enum class UpdateMode { Alternating, Simultaneous };
enum class IterationBudget { Generator, Discriminator };

struct GameConfig {
    ObjectiveKind objective;
    bool non_saturating = false;
    PenaltyConfig penalty;
    OptimizerConfig optimizer;
    int d_steps_per_g_step = 1;
    int batch_size = 64;
    long total_g_iters = 10000;
    int eval_interval = 100;
    int eval_samples = 1000;
    std::uint64_t seed = 0;
    std::string dataset = "8gaussians";  // 8gaussians | swissroll | mnist
    std::string data_path;               // IDX image file for mnist
    ArchSpec generator;
    ArchSpec discriminator;
    UpdateMode update_mode = UpdateMode::Alternating;
    InitScheme init = InitScheme::He;
    // Discriminator-matched accounting: run total_g_iters * reference / d_steps
    // generator iterations.
    IterationBudget budget = IterationBudget::Generator;
    int budget_reference_d_steps = 5;
    // Defaults to 0.01 for wgan without a penalty, off otherwise.
    std::optional<double> weight_clip;

    void validate() const;
    long generator_iterations() const;
    double effective_weight_clip() const;  // 0 when disabled
};

// Desk-scale defaults for an objective/penalty pair: adam(1e-4, 0.5, 0.9),
// batch 64, 10000 generator iterations, eval every 100, 1-hidden-layer width
// 128 players on 8-Gaussians, 5 critic steps for wgan, 1 otherwise.
GameConfig default_game_config(const ObjectiveKind& objective, PenaltyConfig penalty);

// Strict JSON schema: unknown fields are rejected.
GameConfig parse_game_config(std::string_view json_text);
GameConfig load_game_config(const std::string& path);
std::string game_config_to_json(const GameConfig& cfg);

std::unique_ptr<DataSource> make_data_source(const GameConfig& cfg);

// ---- training ----------------------------------------------------------------

struct TrainRow {
    long g_iter = 0;
    long d_iter = 0;
    double d_loss = 0.0;
    double g_loss = 0.0;
    double penalty = 0.0;
    double grad_norm_real = 0.0;
    int covered_modes = 0;
    double hq_fraction = 0.0;
    double wall_ms = 0.0;
};

struct TrainLog {
    std::vector<TrainRow> rows;
    std::optional<long> failed_at;  // generator iteration of the first non-finite value
    std::string failure;
    std::uint64_t seed = 0;
    long g_updates = 0;
    long d_updates = 0;

    bool failed() const { return failed_at.has_value(); }
};

inline constexpr const char* kTrainLogHeader =
    "g_iter,d_iter,d_loss,g_loss,penalty,grad_norm_real,covered_modes,hq_fraction,wall_ms";

void write_train_log_csv(std::ostream& os, const TrainLog& log);

struct TrainResult {
    TrainLog log;
    Mlp generator;
    Mlp discriminator;
};

struct TrainHooks {
    // Called after each logged row with the current players.
    std::function<void(const TrainRow&, const Mlp& generator, const Mlp& discriminator)> on_eval;
    // Wall-clock timing makes logs non-reproducible, so it is opt-in.
    bool record_wall_clock = false;
};

TrainResult agd_train(const GameConfig& cfg, const TrainHooks& hooks = {});
TrainResult agd_train(const GameConfig& cfg, const DataSource& data, const TrainHooks& hooks = {});

// Generator samples for a trained model.
Tensor generate(const Mlp& generator, std::size_t n, Rng& rng);

// ---- BogoNet -----------------------------------------------------------------

struct AlgorithmTemplate {
    std::string name;
    GameConfig config;
};

// DRAGAN (vanilla + dragan_eq1), vanilla GAN, and WGAN-GP, all with the given
// generator-iteration budget.
std::vector<AlgorithmTemplate> default_bogonet_algorithms(long g_iters, double dragan_c = 0.5);

struct BogonetInstanceResult {
    int index = 0;
    ArchSpec generator;
    ArchSpec discriminator;
    std::vector<ScoreSeries> series;  // per algorithm
    std::vector<bool> failed;         // per algorithm
};

struct BogonetReport {
    std::vector<std::string> algorithms;
    std::vector<SeriesSummary> summaries;  // per algorithm
    std::vector<BogonetInstanceResult> instances;
};

// Score series of a run on a mixture dataset: (g_iter, covered_modes +
// hq_fraction) per logged row, with 0 from the failure point to the budget.
ScoreSeries score_series(const TrainLog& log, long total_g_iters, int eval_interval);

// Instance i samples generator and discriminator architectures with seed
// seed + i and trains every algorithm on that pair with the same data seed.
BogonetReport bogonet_run(int n_instances, const std::vector<AlgorithmTemplate>& algorithms, std::uint64_t seed,
                          int threads = 1,
                          const std::vector<FamilyWeight>& pool = default_arch_pool());

// algorithm,final_mean,final_std,auc_mean,auc_std,runs
void write_bogonet_summary_csv(std::ostream& os, const BogonetReport& report);
// instance,algorithm,g_family,g_depth,g_widths,d_family,d_depth,d_widths,failed,final,auc
void write_bogonet_instances_csv(std::ostream& os, const BogonetReport& report);

}  // namespace dlab
