#include "dlab/harness.hpp"

#include "dlab/csv.hpp"
#include "dlab/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace dlab {

using json = nlohmann::json;

// ---- optimizers -------------------------------------------------------------

void OptimizerConfig::validate() const {
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (kind == Kind::Sgd) {
        if (!positive(eta)) throw ValidationError("optimizer: sgd eta must be > 0");
        return;
    }
    if (!positive(alpha)) throw ValidationError("optimizer: adam alpha must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ValidationError("optimizer: beta1 must be in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ValidationError("optimizer: beta2 must be in [0, 1)");
    if (!positive(eps)) throw ValidationError("optimizer: eps must be > 0");
}

void adam_step(Tensor& param, const Tensor& g, AdamMoments& state, long t, double alpha, double beta1, double beta2,
               double eps) {
    if (t < 1) throw ValidationError("adam_step: t must be >= 1");
    if (g.rows() != param.rows() || g.cols() != param.cols())
        throw ShapeError("shape error: adam_step gradient/parameter mismatch");
    if (!g.allFinite()) throw NumericError("adam_step: non-finite gradient");
    if (state.m.size() == 0) {
        state.m = Tensor::Zero(param.rows(), param.cols());
        state.v = Tensor::Zero(param.rows(), param.cols());
    }
    state.m = beta1 * state.m + (1.0 - beta1) * g;
    state.v = beta2 * state.v + (1.0 - beta2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    param.array() -= alpha * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + eps);
}

void Optimizer::step(std::vector<Tensor>& params, const std::vector<Tensor>& grads) {
    if (params.size() != grads.size()) throw ValidationError("optimizer: parameter/gradient count mismatch");
    ++t_;
    if (cfg_.kind == OptimizerConfig::Kind::Sgd) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (!grads[i].allFinite()) throw NumericError("sgd: non-finite gradient");
            params[i] -= cfg_.eta * grads[i];
        }
        return;
    }
    if (moments_.empty()) moments_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i)
        adam_step(params[i], grads[i], moments_[i], t_, cfg_.alpha, cfg_.beta1, cfg_.beta2, cfg_.eps);
}

// ---- configuration ----------------------------------------------------------

namespace {

int dataset_dim(const GameConfig& cfg) {
    if (cfg.dataset == "8gaussians" || cfg.dataset == "swissroll") return 2;
    if (cfg.dataset == "mnist") return 28 * 28;
    throw ValidationError("unknown dataset '" + cfg.dataset + "'");
}

}  // namespace

void GameConfig::validate() const {
    penalty.validate();
    optimizer.validate();
    if (d_steps_per_g_step < 1) throw ValidationError("d_steps_per_g_step must be >= 1");
    if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
    if (total_g_iters < 1) throw ValidationError("total_g_iters must be >= 1");
    if (eval_interval < 1) throw ValidationError("eval_interval must be >= 1");
    if (eval_samples < 1) throw ValidationError("eval_samples must be >= 1");
    if (budget_reference_d_steps < 1) throw ValidationError("budget_reference_d_steps must be >= 1");
    if (dataset == "mnist" && data_path.empty()) throw ValidationError("dataset mnist requires data_path");
    const int dim = dataset == "mnist" ? discriminator.input_dim : dataset_dim(*this);
    generator.validate();
    discriminator.validate();
    if (generator.output_dim != dim)
        throw ValidationError("generator output_dim " + std::to_string(generator.output_dim) +
                              " does not match data dimension " + std::to_string(dim));
    if (discriminator.input_dim != generator.output_dim)
        throw ValidationError("discriminator input_dim must equal generator output_dim");
    if (discriminator.output_dim != 1) throw ValidationError("discriminator output_dim must be 1");
    if (discriminator.output_activation != discriminator_head(objective))
        throw ValidationError("discriminator output_activation must be '" +
                              std::string(activation_label(discriminator_head(objective))) + "' for objective " +
                              objective.label());
    if (weight_clip && !(std::isfinite(*weight_clip) && *weight_clip >= 0.0))
        throw ValidationError("weight_clip must be finite and >= 0");
}

long GameConfig::generator_iterations() const {
    if (budget == IterationBudget::Generator) return total_g_iters;
    const long n = total_g_iters * budget_reference_d_steps / d_steps_per_g_step;
    return std::max(1L, n);
}

double GameConfig::effective_weight_clip() const {
    if (weight_clip) return *weight_clip;
    if (objective.variant == ObjectiveKind::Variant::Wgan && penalty.variant == PenaltyVariant::None) return 0.01;
    return 0.0;
}

GameConfig default_game_config(const ObjectiveKind& objective, PenaltyConfig penalty) {
    GameConfig cfg;
    cfg.objective = objective;
    cfg.penalty = penalty;
    cfg.d_steps_per_g_step = objective.variant == ObjectiveKind::Variant::Wgan ? 5 : 1;
    cfg.generator = ArchSpec{"mlp", 1, {128}, Activation::Relu, Activation::Identity, 2, 2};
    cfg.discriminator = ArchSpec{"mlp", 1, {128}, Activation::Relu, discriminator_head(objective), 2, 1};
    return cfg;
}

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ValidationError(where + ": expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || it.key() == a;
        if (!ok) throw ValidationError(where + ": unknown field '" + it.key() + "'");
    }
}

template <class T>
T get_field(const json& j, const char* key, const std::string& where) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError(where + ": field '" + key + "' has the wrong type");
    }
}

void parse_arch(const json& j, ArchSpec& a, bool generator, bool& output_set) {
    const std::string where = generator ? "generator" : "discriminator";
    if (generator)
        reject_unknown(j, {"family", "depth", "widths", "hidden_activation", "output_activation", "latent_dim"}, where);
    else
        reject_unknown(j, {"family", "depth", "widths", "hidden_activation", "output_activation"}, where);
    if (j.contains("family")) a.family = get_field<std::string>(j, "family", where);
    if (j.contains("widths")) {
        a.widths = get_field<std::vector<int>>(j, "widths", where);
        a.depth = static_cast<int>(a.widths.size());
    }
    if (j.contains("depth")) a.depth = get_field<int>(j, "depth", where);
    if (j.contains("hidden_activation"))
        a.hidden_activation = parse_activation(get_field<std::string>(j, "hidden_activation", where));
    if (j.contains("output_activation")) {
        a.output_activation = parse_activation(get_field<std::string>(j, "output_activation", where));
        output_set = true;
    }
    if (j.contains("latent_dim")) a.input_dim = get_field<int>(j, "latent_dim", where);
}

json arch_json(const ArchSpec& a, bool generator) {
    json j{{"family", a.family},
           {"depth", a.depth},
           {"widths", a.widths},
           {"hidden_activation", std::string(activation_label(a.hidden_activation))},
           {"output_activation", std::string(activation_label(a.output_activation))}};
    if (generator) j["latent_dim"] = a.input_dim;
    return j;
}

}  // namespace

GameConfig parse_game_config(std::string_view json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config: invalid JSON: ") + e.what());
    }
    const std::string where = "config";
    reject_unknown(j,
                   {"objective", "non_saturating", "penalty", "optimizer", "d_steps_per_g_step", "batch_size",
                    "total_g_iters", "eval_interval", "eval_samples", "seed", "dataset", "data_path", "generator",
                    "discriminator", "update_mode", "init", "budget", "budget_reference_d_steps", "weight_clip"},
                   where);

    ObjectiveKind objective;
    if (j.contains("objective")) objective = ObjectiveKind::parse(get_field<std::string>(j, "objective", where));
    PenaltyConfig penalty;
    if (j.contains("penalty")) {
        const json& p = j.at("penalty");
        reject_unknown(p, {"variant", "lambda", "k", "c", "target"}, "penalty");
        if (p.contains("variant")) penalty.variant = parse_penalty(get_field<std::string>(p, "variant", "penalty"));
        if (p.contains("lambda")) penalty.lambda = get_field<double>(p, "lambda", "penalty");
        if (p.contains("k")) penalty.k = get_field<double>(p, "k", "penalty");
        if (p.contains("c")) penalty.c = get_field<double>(p, "c", "penalty");
        if (p.contains("target"))
            penalty.target = parse_penalty_target(get_field<std::string>(p, "target", "penalty"));
    }
    GameConfig cfg = default_game_config(objective, penalty);

    if (j.contains("non_saturating")) cfg.non_saturating = get_field<bool>(j, "non_saturating", where);
    if (j.contains("optimizer")) {
        const json& o = j.at("optimizer");
        reject_unknown(o, {"kind", "eta", "alpha", "beta1", "beta2", "eps"}, "optimizer");
        if (o.contains("kind")) {
            const auto kind = get_field<std::string>(o, "kind", "optimizer");
            if (kind == "sgd")
                cfg.optimizer.kind = OptimizerConfig::Kind::Sgd;
            else if (kind == "adam")
                cfg.optimizer.kind = OptimizerConfig::Kind::Adam;
            else
                throw ValidationError("optimizer: unknown kind '" + kind + "'");
        }
        if (o.contains("eta")) cfg.optimizer.eta = get_field<double>(o, "eta", "optimizer");
        if (o.contains("alpha")) cfg.optimizer.alpha = get_field<double>(o, "alpha", "optimizer");
        if (o.contains("beta1")) cfg.optimizer.beta1 = get_field<double>(o, "beta1", "optimizer");
        if (o.contains("beta2")) cfg.optimizer.beta2 = get_field<double>(o, "beta2", "optimizer");
        if (o.contains("eps")) cfg.optimizer.eps = get_field<double>(o, "eps", "optimizer");
    }
    if (j.contains("d_steps_per_g_step")) cfg.d_steps_per_g_step = get_field<int>(j, "d_steps_per_g_step", where);
    if (j.contains("batch_size")) cfg.batch_size = get_field<int>(j, "batch_size", where);
    if (j.contains("total_g_iters")) cfg.total_g_iters = get_field<long>(j, "total_g_iters", where);
    if (j.contains("eval_interval")) cfg.eval_interval = get_field<int>(j, "eval_interval", where);
    if (j.contains("eval_samples")) cfg.eval_samples = get_field<int>(j, "eval_samples", where);
    if (j.contains("seed")) cfg.seed = get_field<std::uint64_t>(j, "seed", where);
    if (j.contains("dataset")) cfg.dataset = get_field<std::string>(j, "dataset", where);
    if (j.contains("data_path")) cfg.data_path = get_field<std::string>(j, "data_path", where);

    const bool mnist = cfg.dataset == "mnist";
    if (mnist) {
        cfg.generator.input_dim = 64;
        cfg.generator.output_activation = Activation::Tanh;
    }
    bool g_out = false, d_out = false;
    if (j.contains("generator")) parse_arch(j.at("generator"), cfg.generator, true, g_out);
    if (j.contains("discriminator")) parse_arch(j.at("discriminator"), cfg.discriminator, false, d_out);
    const int dim = dataset_dim(cfg);
    cfg.generator.output_dim = dim;
    cfg.discriminator.input_dim = dim;
    cfg.discriminator.output_dim = 1;
    if (!d_out) cfg.discriminator.output_activation = discriminator_head(cfg.objective);

    if (j.contains("update_mode")) {
        const auto m = get_field<std::string>(j, "update_mode", where);
        if (m == "alternating")
            cfg.update_mode = UpdateMode::Alternating;
        else if (m == "simultaneous")
            cfg.update_mode = UpdateMode::Simultaneous;
        else
            throw ValidationError("config: unknown update_mode '" + m + "'");
    }
    if (j.contains("init")) {
        const auto s = get_field<std::string>(j, "init", where);
        if (s == "he")
            cfg.init = InitScheme::He;
        else if (s == "xavier")
            cfg.init = InitScheme::Xavier;
        else
            throw ValidationError("config: unknown init '" + s + "'");
    }
    if (j.contains("budget")) {
        const auto s = get_field<std::string>(j, "budget", where);
        if (s == "generator")
            cfg.budget = IterationBudget::Generator;
        else if (s == "discriminator")
            cfg.budget = IterationBudget::Discriminator;
        else
            throw ValidationError("config: unknown budget '" + s + "'");
    }
    if (j.contains("budget_reference_d_steps"))
        cfg.budget_reference_d_steps = get_field<int>(j, "budget_reference_d_steps", where);
    if (j.contains("weight_clip") && !j.at("weight_clip").is_null())
        cfg.weight_clip = get_field<double>(j, "weight_clip", where);

    cfg.validate();
    return cfg;
}

GameConfig load_game_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("config not found: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_game_config(ss.str());
}

std::string game_config_to_json(const GameConfig& cfg) {
    json opt;
    if (cfg.optimizer.kind == OptimizerConfig::Kind::Sgd)
        opt = {{"kind", "sgd"}, {"eta", cfg.optimizer.eta}};
    else
        opt = {{"kind", "adam"},
               {"alpha", cfg.optimizer.alpha},
               {"beta1", cfg.optimizer.beta1},
               {"beta2", cfg.optimizer.beta2},
               {"eps", cfg.optimizer.eps}};
    json j{{"objective", cfg.objective.label()},
           {"non_saturating", cfg.non_saturating},
           {"penalty",
            {{"variant", std::string(penalty_label(cfg.penalty.variant))},
             {"lambda", cfg.penalty.lambda},
             {"k", cfg.penalty.k},
             {"c", cfg.penalty.c},
             {"target", std::string(penalty_target_label(cfg.penalty.target))}}},
           {"optimizer", opt},
           {"d_steps_per_g_step", cfg.d_steps_per_g_step},
           {"batch_size", cfg.batch_size},
           {"total_g_iters", cfg.total_g_iters},
           {"eval_interval", cfg.eval_interval},
           {"eval_samples", cfg.eval_samples},
           {"seed", cfg.seed},
           {"dataset", cfg.dataset},
           {"generator", arch_json(cfg.generator, true)},
           {"discriminator", arch_json(cfg.discriminator, false)},
           {"update_mode", cfg.update_mode == UpdateMode::Alternating ? "alternating" : "simultaneous"},
           {"init", cfg.init == InitScheme::He ? "he" : "xavier"},
           {"budget", cfg.budget == IterationBudget::Generator ? "generator" : "discriminator"},
           {"budget_reference_d_steps", cfg.budget_reference_d_steps}};
    if (!cfg.data_path.empty()) j["data_path"] = cfg.data_path;
    if (cfg.weight_clip) j["weight_clip"] = *cfg.weight_clip;
    return j.dump(2) + "\n";
}

std::unique_ptr<DataSource> make_data_source(const GameConfig& cfg) {
    if (cfg.dataset == "8gaussians") return std::make_unique<EightGaussiansSource>();
    if (cfg.dataset == "swissroll") return std::make_unique<SwissrollSource>();
    if (cfg.dataset == "mnist") return std::make_unique<ImageSource>(read_idx(cfg.data_path));
    throw ValidationError("unknown dataset '" + cfg.dataset + "'");
}

// ---- training ----------------------------------------------------------------

void write_train_log_csv(std::ostream& os, const TrainLog& log) {
    os << kTrainLogHeader << '\n';
    for (const TrainRow& r : log.rows) {
        os << r.g_iter << ',' << r.d_iter;
        for (double v : {r.d_loss, r.g_loss, r.penalty, r.grad_norm_real}) {
            os << ',';
            write_real(os, v);
        }
        os << ',' << r.covered_modes << ',';
        write_real(os, r.hq_fraction);
        os << ',';
        write_real(os, r.wall_ms);
        os << '\n';
    }
}

Tensor generate(const Mlp& generator, std::size_t n, Rng& rng) {
    return predict(generator, sample_noise(n, static_cast<std::size_t>(generator.input_dim()), rng));
}

namespace {

// Stream ids for the independent random sources of a run.
enum Stream : std::uint64_t { kInitStream = 1, kDataStream, kNoiseStream, kPenaltyStream, kEvalStream };

void clip_weights(Mlp& m, double c) {
    for (auto& w : m.weights) w = w.cwiseMax(-c).cwiseMin(c);
    for (auto& b : m.biases) b = b.cwiseMax(-c).cwiseMin(c);
}

struct StepValues {
    double d_loss = 0.0;
    double g_loss = 0.0;
    double penalty = 0.0;
};

bool finite(const StepValues& v) {
    return std::isfinite(v.d_loss) && std::isfinite(v.g_loss) && std::isfinite(v.penalty);
}

std::vector<Tensor> gradient_values(const Values& vals, const std::vector<Node>& grads) {
    std::vector<Tensor> out;
    out.reserve(grads.size());
    for (const Node& g : grads) out.push_back(vals[g]);
    return out;
}

class Trainer {
public:
    Trainer(const GameConfig& cfg, const DataSource& data)
        : cfg_(cfg),
          data_(data),
          data_rng_(Rng::stream(cfg.seed, kDataStream)),
          noise_rng_(Rng::stream(cfg.seed, kNoiseStream)),
          penalty_rng_(Rng::stream(cfg.seed, kPenaltyStream)),
          eval_rng_(Rng::stream(cfg.seed, kEvalStream)),
          g_opt_(cfg.optimizer),
          d_opt_(cfg.optimizer),
          clip_(cfg.effective_weight_clip()) {
        Rng init = Rng::stream(cfg.seed, kInitStream);
        g_ = mlp_init(cfg.generator, cfg.init, init);
        d_ = mlp_init(cfg.discriminator, cfg.init, init);
        if (data.dim() != cfg.generator.output_dim)
            throw ValidationError("data dimension " + std::to_string(data.dim()) +
                                  " does not match generator output_dim");
    }

    TrainResult run(const TrainHooks& hooks) {
        using Clock = std::chrono::steady_clock;
        const auto start = Clock::now();
        TrainLog log;
        log.seed = cfg_.seed;
        const long total = cfg_.generator_iterations();
        StepValues last;
        for (long it = 1; it <= total; ++it) {
            std::string failure;
            try {
                last = iteration();
                if (!finite(last)) failure = "non-finite loss";
            } catch (const NumericError& e) {
                failure = e.what();
                last = {std::nan(""), std::nan(""), std::nan("")};
            }
            const bool eval_now = it % cfg_.eval_interval == 0 || it == total;
            if (failure.empty() && !eval_now) continue;

            TrainRow row;
            row.g_iter = it;
            row.d_iter = d_updates_;
            row.d_loss = last.d_loss;
            row.g_loss = last.g_loss;
            row.penalty = last.penalty;
            if (failure.empty()) {
                try {
                    evaluate(row);
                } catch (const NumericError& e) {
                    failure = e.what();
                }
            } else {
                row.grad_norm_real = std::nan("");
            }
            if (hooks.record_wall_clock)
                row.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
            log.rows.push_back(row);
            if (!failure.empty()) {
                log.failed_at = it;
                log.failure = failure;
                break;
            }
            if (hooks.on_eval) hooks.on_eval(row, g_, d_);
        }
        log.g_updates = g_updates_;
        log.d_updates = d_updates_;
        return {std::move(log), std::move(g_), std::move(d_)};
    }

private:
    Tensor real_batch() { return data_.batch(static_cast<std::size_t>(cfg_.batch_size), data_rng_); }
    Tensor noise_batch() {
        return sample_noise(static_cast<std::size_t>(cfg_.batch_size), static_cast<std::size_t>(g_.input_dim()),
                            noise_rng_);
    }

    StepValues iteration() {
        StepValues v;
        const bool simultaneous = cfg_.update_mode == UpdateMode::Simultaneous;
        const int plain_d = simultaneous ? cfg_.d_steps_per_g_step - 1 : cfg_.d_steps_per_g_step;
        for (int s = 0; s < plain_d; ++s) {
            const auto [loss, pen] = d_step();
            v.d_loss = loss;
            v.penalty = pen;
        }
        if (simultaneous) {
            const StepValues joint = joint_step();
            v.d_loss = joint.d_loss;
            v.penalty = joint.penalty;
            v.g_loss = joint.g_loss;
        } else {
            v.g_loss = g_step();
        }
        return v;
    }

    std::pair<double, double> d_step() {
        const Tensor x_real = real_batch();
        const Tensor x_fake = predict(g_, noise_batch());
        Graph graph;
        const MlpNodes dn = bind_variables(graph, d_);
        const Node d_real = mlp_forward(dn, graph.constant(x_real));
        const Node d_fake = mlp_forward(dn, graph.constant(x_fake));
        const LossPair losses = make_losses(cfg_.objective, d_real, d_fake, cfg_.non_saturating);
        const Node pen = make_penalty(dn, x_real, x_fake, cfg_.penalty, graph, penalty_rng_);
        const Node total = losses.d_loss + pen;
        const auto params = dn.parameters();
        const auto grads = grad(total, params, false);
        const Values vals = eval_forward(graph);
        const double loss = vals.scalar(losses.d_loss);
        const double p = vals.scalar(pen);
        if (!std::isfinite(loss) || !std::isfinite(p)) return {loss, p};
        apply(d_, d_opt_, gradient_values(vals, grads));
        if (clip_ > 0.0) clip_weights(d_, clip_);
        ++d_updates_;
        return {loss, p};
    }

    double g_step() {
        const Tensor x_real = real_batch();
        const Tensor z = noise_batch();
        Graph graph;
        const MlpNodes gn = bind_variables(graph, g_);
        const MlpNodes dn = bind_constants(graph, d_);
        const Node fake = mlp_forward(gn, graph.constant(z));
        const LossPair losses =
            make_losses(cfg_.objective, mlp_forward(dn, graph.constant(x_real)), mlp_forward(dn, fake),
                        cfg_.non_saturating);
        const auto grads = grad(losses.g_loss, gn.parameters(), false);
        const Values vals = eval_forward(graph);
        const double loss = vals.scalar(losses.g_loss);
        if (!std::isfinite(loss)) return loss;
        apply(g_, g_opt_, gradient_values(vals, grads));
        ++g_updates_;
        return loss;
    }

    // Both players' gradients from one batch, applied together.
    StepValues joint_step() {
        const Tensor x_real = real_batch();
        const Tensor z = noise_batch();
        const Tensor x_fake = predict(g_, z);
        Graph graph;
        const MlpNodes gn = bind_variables(graph, g_);
        const MlpNodes dn = bind_variables(graph, d_);
        const Node fake = mlp_forward(gn, graph.constant(z));
        const LossPair losses = make_losses(cfg_.objective, mlp_forward(dn, graph.constant(x_real)),
                                            mlp_forward(dn, fake), cfg_.non_saturating);
        const Node pen = make_penalty(dn, x_real, x_fake, cfg_.penalty, graph, penalty_rng_);
        const auto d_grads = grad(losses.d_loss + pen, dn.parameters(), false);
        const auto g_grads = grad(losses.g_loss, gn.parameters(), false);
        const Values vals = eval_forward(graph);
        StepValues v{vals.scalar(losses.d_loss), vals.scalar(losses.g_loss), vals.scalar(pen)};
        if (!finite(v)) return v;
        apply(d_, d_opt_, gradient_values(vals, d_grads));
        apply(g_, g_opt_, gradient_values(vals, g_grads));
        if (clip_ > 0.0) clip_weights(d_, clip_);
        ++d_updates_;
        ++g_updates_;
        return v;
    }

    static void apply(Mlp& m, Optimizer& opt, const std::vector<Tensor>& grads) {
        std::vector<Tensor> params = get_parameters(m);
        opt.step(params, grads);
        assign_parameters(m, params);
    }

    void evaluate(TrainRow& row) {
        const auto n = static_cast<std::size_t>(cfg_.eval_samples);
        row.grad_norm_real = grad_norm_at_real(d_, data_.batch(n, eval_rng_));
        if (!std::isfinite(row.grad_norm_real)) throw NumericError("non-finite gradient norm at real points");
        if (const auto centers = data_.centers()) {
            const Tensor samples = generate(g_, n, eval_rng_);
            if (!samples.allFinite()) throw NumericError("non-finite generator output");
            const auto k = static_cast<std::size_t>(centers->rows());
            const CoverageReport rep =
                mode_coverage(samples, *centers, data_.mode_std().value_or(kSyntheticStd), default_min_count(n, k));
            row.covered_modes = rep.covered_modes;
            row.hq_fraction = rep.hq_fraction;
        }
    }

    const GameConfig& cfg_;
    const DataSource& data_;
    Rng data_rng_, noise_rng_, penalty_rng_, eval_rng_;
    Mlp g_, d_;
    Optimizer g_opt_, d_opt_;
    double clip_;
    long g_updates_ = 0;
    long d_updates_ = 0;
};

}  // namespace

TrainResult agd_train(const GameConfig& cfg, const DataSource& data, const TrainHooks& hooks) {
    cfg.validate();
    Trainer trainer(cfg, data);
    return trainer.run(hooks);
}

TrainResult agd_train(const GameConfig& cfg, const TrainHooks& hooks) {
    cfg.validate();
    const auto data = make_data_source(cfg);
    return agd_train(cfg, *data, hooks);
}

// ---- BogoNet -----------------------------------------------------------------

std::vector<AlgorithmTemplate> default_bogonet_algorithms(long g_iters, double dragan_c) {
    auto with_budget = [g_iters](GameConfig cfg) {
        cfg.total_g_iters = g_iters;
        cfg.eval_interval = static_cast<int>(std::max(1L, g_iters / 20));
        return cfg;
    };
    const ObjectiveKind vanilla = ObjectiveKind::parse("vanilla");
    const ObjectiveKind wgan = ObjectiveKind::parse("wgan");
    PenaltyConfig dragan{PenaltyVariant::DraganEq1, 10.0, 1.0, dragan_c};
    PenaltyConfig gp{PenaltyVariant::CoupledGp, 10.0, 1.0, 10.0};
    return {{"dragan", with_budget(default_game_config(vanilla, dragan))},
            {"vanilla", with_budget(default_game_config(vanilla, PenaltyConfig{}))},
            {"wgan-gp", with_budget(default_game_config(wgan, gp))}};
}

ScoreSeries score_series(const TrainLog& log, long total_g_iters, int eval_interval) {
    ScoreSeries s;
    for (const TrainRow& r : log.rows) {
        if (log.failed_at && r.g_iter >= *log.failed_at) break;
        s.emplace_back(static_cast<double>(r.g_iter), r.covered_modes + r.hq_fraction);
    }
    if (!log.failed_at) return s;
    const long from = *log.failed_at;
    s.emplace_back(static_cast<double>(from), 0.0);
    for (long it = (from / eval_interval + 1) * eval_interval; it <= total_g_iters; it += eval_interval)
        s.emplace_back(static_cast<double>(it), 0.0);
    if (s.back().first < static_cast<double>(total_g_iters)) s.emplace_back(static_cast<double>(total_g_iters), 0.0);
    return s;
}

namespace {

GameConfig instance_config(const GameConfig& tmpl, const ArchSpec& g_arch, const ArchSpec& d_arch,
                           std::uint64_t seed) {
    GameConfig cfg = tmpl;
    cfg.seed = seed;
    cfg.generator = g_arch;
    cfg.generator.input_dim = tmpl.generator.input_dim;
    cfg.generator.output_dim = tmpl.generator.output_dim;
    cfg.generator.output_activation = tmpl.generator.output_activation;
    cfg.discriminator = d_arch;
    cfg.discriminator.input_dim = tmpl.discriminator.input_dim;
    cfg.discriminator.output_dim = 1;
    cfg.discriminator.output_activation = discriminator_head(tmpl.objective);
    return cfg;
}

BogonetInstanceResult run_instance(int i, const std::vector<AlgorithmTemplate>& algorithms, std::uint64_t seed,
                                   const std::vector<FamilyWeight>& pool) {
    const std::uint64_t instance_seed = seed + static_cast<std::uint64_t>(i);
    Rng arch_rng(instance_seed);
    BogonetInstanceResult res;
    res.index = i;
    res.generator = sample_arch(pool, arch_rng);
    res.discriminator = sample_arch(pool, arch_rng);
    for (const auto& alg : algorithms) {
        const GameConfig cfg = instance_config(alg.config, res.generator, res.discriminator, instance_seed);
        res.generator.input_dim = cfg.generator.input_dim;
        res.generator.output_dim = cfg.generator.output_dim;
        res.discriminator.input_dim = cfg.discriminator.input_dim;
        const TrainResult tr = agd_train(cfg);
        res.series.push_back(score_series(tr.log, cfg.generator_iterations(), cfg.eval_interval));
        res.failed.push_back(tr.log.failed());
    }
    return res;
}

}  // namespace

BogonetReport bogonet_run(int n_instances, const std::vector<AlgorithmTemplate>& algorithms, std::uint64_t seed,
                          int threads, const std::vector<FamilyWeight>& pool) {
    if (n_instances < 1) throw ValidationError("bogonet: n_instances must be >= 1");
    if (algorithms.empty()) throw ValidationError("bogonet: no algorithms");
    for (const auto& alg : algorithms) alg.config.validate();
    BogonetReport report;
    for (const auto& alg : algorithms) report.algorithms.push_back(alg.name);
    report.instances.resize(static_cast<std::size_t>(n_instances));

    const int workers = std::clamp(threads, 1, n_instances);
    if (workers == 1) {
        for (int i = 0; i < n_instances; ++i) report.instances[i] = run_instance(i, algorithms, seed, pool);
    } else {
        std::atomic<int> next{0};
        std::exception_ptr error;
        std::mutex error_mutex;
        std::vector<std::thread> pool_threads;
        for (int w = 0; w < workers; ++w) {
            pool_threads.emplace_back([&] {
                for (int i = next++; i < n_instances; i = next++) {
                    try {
                        report.instances[i] = run_instance(i, algorithms, seed, pool);
                    } catch (...) {
                        std::lock_guard lock(error_mutex);
                        if (!error) error = std::current_exception();
                    }
                }
            });
        }
        for (auto& t : pool_threads) t.join();
        if (error) std::rethrow_exception(error);
    }

    for (std::size_t a = 0; a < algorithms.size(); ++a) {
        std::vector<ScoreSeries> runs;
        for (const auto& inst : report.instances) runs.push_back(inst.series[a]);
        report.summaries.push_back(bogonet_summary(runs));
    }
    return report;
}

void write_bogonet_summary_csv(std::ostream& os, const BogonetReport& report) {
    os << "algorithm,final_mean,final_std,auc_mean,auc_std,runs\n";
    for (std::size_t a = 0; a < report.algorithms.size(); ++a) {
        const SeriesSummary& s = report.summaries[a];
        os << report.algorithms[a];
        for (double v : {s.final_mean, s.final_std, s.auc_mean, s.auc_std}) {
            os << ',';
            write_real(os, v);
        }
        os << ',' << s.runs << '\n';
    }
}

namespace {

std::string widths_label(const std::vector<int>& w) {
    std::string s;
    for (std::size_t i = 0; i < w.size(); ++i) s += (i ? "-" : "") + std::to_string(w[i]);
    return s;
}

}  // namespace

void write_bogonet_instances_csv(std::ostream& os, const BogonetReport& report) {
    os << "instance,algorithm,g_family,g_depth,g_widths,d_family,d_depth,d_widths,failed,final,auc\n";
    for (const auto& inst : report.instances) {
        for (std::size_t a = 0; a < report.algorithms.size(); ++a) {
            os << inst.index << ',' << report.algorithms[a] << ',' << inst.generator.family << ','
               << inst.generator.depth << ',' << widths_label(inst.generator.widths) << ','
               << inst.discriminator.family << ',' << inst.discriminator.depth << ','
               << widths_label(inst.discriminator.widths) << ',' << (inst.failed[a] ? 1 : 0) << ',';
            write_real(os, inst.series[a].back().second);
            os << ',';
            write_real(os, trapezoid_auc(inst.series[a]));
            os << '\n';
        }
    }
}

}  // namespace dlab
