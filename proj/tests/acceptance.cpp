// Acceptance runner. One line per criterion:
//   PASS|FAIL <id> <name>: <measurements>
// Usage: dlab_acceptance [criterion ...]   (default: all)
// Exit status is 0 only when every selected criterion passes.

#include "dlab/gradcheck.hpp"
#include "dlab/harness.hpp"
#include "dlab/metrics.hpp"
#include "dlab/regretgame.hpp"
#include "dlab/synthdata.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#ifndef DLAB_CLI_PATH
#define DLAB_CLI_PATH "dlab"
#endif

using namespace dlab;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

void print(const std::string& id, const std::string& name, const Outcome& o) {
    std::cout << (o.pass ? "PASS " : "FAIL ") << id << ' ' << name << ": " << o.detail << std::endl;
}

// Learning rate for the desk-scale training criteria (4, 6, 7, 8). The
// library default of 1e-4 barely moves either player within 10^4 iterations.
constexpr double kDeskAlpha = 1e-3;

GameConfig mode_collapse_config(bool dragan, std::uint64_t seed) {
    PenaltyConfig p;
    if (dragan) {
        p.variant = PenaltyVariant::DraganEq1;
        p.lambda = 10.0;
        p.k = 1.0;
        p.c = 0.5;
    }
    GameConfig cfg = default_game_config(ObjectiveKind::parse("vanilla"), p);
    cfg.optimizer.alpha = kDeskAlpha;
    cfg.seed = seed;
    return cfg;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("dlab_acceptance_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// ---- 1 ----------------------------------------------------------------------

Outcome gradient_correctness() {
    const auto t0 = Clock::now();
    const FirstOrderCheck first = first_order_suite(2024, 100);
    const auto second = second_order_suite(2024, 25);
    const double point = single_point_penalty_check(2024);
    double worst2 = point;
    int trials2 = 0;
    std::string per_variant;
    for (const auto& s : second) {
        worst2 = std::max(worst2, s.max_error);
        trials2 += s.trials;
        per_variant += " " + std::string(penalty_label(s.variant)) + "=" + fmt("%.2e", s.max_error);
    }
    const double secs = seconds_since(t0);
    Outcome o;
    o.pass = first.trials >= 100 && first.max_error <= 1e-4 && worst2 <= 1e-3 && secs < 60.0;
    o.detail = "first-order " + std::to_string(first.trials) + " nets max rel err " + fmt("%.2e", first.max_error) +
               " (<= 1e-4); second-order " + std::to_string(trials2) + " nets max " + fmt("%.2e", worst2) +
               " (<= 1e-3):" + per_variant + " single-point=" + fmt("%.2e", point) + "; " + fmt("%.1f", secs) +
               " s (< 60 s)";
    return o;
}

// ---- 2, 3 -------------------------------------------------------------------

std::vector<SelfPlayRow> self_play() {
    SelfPlayOptions opts;
    opts.iters = 10000;
    opts.phi0 = 0.5;
    opts.theta0 = 0.5;
    return bilinear_self_play(opts);
}

Outcome convex_concave() {
    const auto t0 = Clock::now();
    const auto rows = self_play();
    const double secs = seconds_since(t0);
    const SelfPlayRow& last = rows.back();
    const double gap_100 = rows[99].duality_gap;
    const double last_iterate_gap = std::abs(last.phi) + std::abs(last.theta);
    Outcome o;
    o.pass = last.duality_gap <= 0.05 && last.duality_gap < gap_100 && last_iterate_gap > 0.05 && secs < 10.0;
    o.detail = "averaged gap at T=1e4 " + fmt("%.5f", last.duality_gap) + " (<= 0.05), at T=1e2 " +
               fmt("%.5f", gap_100) + "; last-iterate gap " + fmt("%.4f", last_iterate_gap) +
               " (must exceed 0.05); " + fmt("%.2f", secs) + " s (< 10 s)";
    return o;
}

Outcome regret_sandwich_literal() {
    const auto rows = self_play();
    int upper_bad = 0, lower_bad = 0;
    long first_bad = -1;
    for (const auto& r : rows) {
        const double t = r.round;
        const bool up = r.max_response <= 0.0 + r.regret_phi / t + 1e-9;
        const bool lo = r.min_response >= 0.0 - r.regret_theta / t - 1e-9;
        upper_bad += !up;
        lower_bad += !lo;
        if ((!up || !lo) && first_bad < 0) first_bad = r.round;
    }
    Outcome o;
    o.pass = upper_bad == 0 && lower_bad == 0;
    o.detail = "max_theta J(phi_bar,theta) <= R1/T violated at " + std::to_string(upper_bad) +
               " of 10000 checkpoints, min_phi J(phi,theta_bar) >= -R2/T violated at " + std::to_string(lower_bad) +
               (first_bad > 0 ? " (first at T=" + std::to_string(first_bad) + ")" : "");
    return o;
}

// The two-sided chain around V* = 0 with each regret on the side it bounds:
// -R2/T <= max - R2/T <= min + R1/T <= R1/T.
Outcome regret_sandwich_chain() {
    const auto rows = self_play();
    int bad = 0;
    double worst_slack = 1e300;
    for (const auto& r : rows) {
        const double t = r.round, r1 = r.regret_phi / t, r2 = r.regret_theta / t;
        const double a = -r2, b = r.max_response - r2, c = r.min_response + r1, d = r1;
        const bool ok = a <= b + 1e-9 && b <= c + 1e-9 && c <= d + 1e-9;
        bad += !ok;
        worst_slack = std::min({worst_slack, b - a, c - b, d - c});
    }
    Outcome o;
    o.pass = bad == 0;
    o.detail = "V*-R2/T <= max-R2/T <= min+R1/T <= V*+R1/T violated at " + std::to_string(bad) +
               " of 10000 checkpoints; smallest slack " + fmt("%.3e", worst_slack);
    return o;
}

// ---- 4, 6 -------------------------------------------------------------------

struct SeedRun {
    std::uint64_t seed = 0;
    int covered = 0;
    bool failed = false;
    std::vector<double> grad_norms;
};

std::vector<SeedRun> seed_sweep(bool dragan, int seeds) {
    std::vector<SeedRun> out;
    for (int s = 0; s < seeds; ++s) {
        const TrainResult r = agd_train(mode_collapse_config(dragan, static_cast<std::uint64_t>(s)));
        SeedRun run;
        run.seed = static_cast<std::uint64_t>(s);
        run.failed = r.log.failed();
        run.covered = r.log.rows.empty() ? 0 : r.log.rows.back().covered_modes;
        for (const auto& row : r.log.rows) run.grad_norms.push_back(row.grad_norm_real);
        out.push_back(std::move(run));
    }
    return out;
}

std::string covered_list(const std::vector<SeedRun>& runs) {
    std::string s = "[";
    for (std::size_t i = 0; i < runs.size(); ++i) s += (i ? "," : "") + std::to_string(runs[i].covered);
    return s + "]";
}

Outcome mode_collapse() {
    const auto t0 = Clock::now();
    const auto dragan = seed_sweep(true, 10);
    const auto vanilla = seed_sweep(false, 10);
    const double secs = seconds_since(t0);
    std::vector<double> dc, vc;
    int good = 0;
    for (const auto& r : dragan) {
        dc.push_back(r.covered);
        good += r.covered >= 7;
    }
    for (const auto& r : vanilla) vc.push_back(r.covered);
    const double dm = median(dc), vm = median(vc);
    Outcome o;
    // Target 7/10 seeds, tolerance down to 6/10.
    o.pass = good >= 6 && vm < dm && secs < 900.0;
    o.detail = "dragan covered_modes>=7 in " + std::to_string(good) + "/10 seeds (need >= 6, target 7) " +
               covered_list(dragan) + "; median dragan " + fmt("%.1f", dm) + " vs vanilla " + fmt("%.1f", vm) + " " +
               covered_list(vanilla) + " (vanilla must be strictly lower); " + fmt("%.0f", secs) + " s (< 900 s)";
    return o;
}

Outcome grad_norm_diagnostic() {
    // Seed selection as in the mode-collapse sweep: the vanilla seed with the
    // fewest covered modes (ties to the lowest seed).
    const auto vanilla = seed_sweep(false, 10);
    const SeedRun* collapsed = &vanilla.front();
    for (const auto& r : vanilla)
        if (r.covered < collapsed->covered) collapsed = &r;
    const auto& v = collapsed->grad_norms;
    double early = 0.0;
    const std::size_t n_early = std::min<std::size_t>(10, v.size());
    for (std::size_t i = 0; i < n_early; ++i) early += v[i] / static_cast<double>(n_early);
    const double vmax = *std::max_element(v.begin(), v.end());

    const TrainResult d = agd_train(mode_collapse_config(true, collapsed->seed));
    double dmax = 0.0;
    for (const auto& row : d.log.rows) dmax = std::max(dmax, row.grad_norm_real);
    const double k = 1.0, limit = 4.0 * k * k;
    Outcome o;
    o.pass = vmax >= 10.0 * early && dmax < limit && !d.log.failed();
    o.detail = "vanilla seed " + std::to_string(collapsed->seed) + " (covered " + std::to_string(collapsed->covered) +
               "): max " + fmt("%.4g", vmax) + " vs 10x early mean " + fmt("%.4g", 10.0 * early) +
               "; dragan same seed: max " + fmt("%.4g", dmax) + " (< 4 k^2 = " + fmt("%.1f", limit) + ")";
    return o;
}

// ---- 5 ------------------------------------------------------------------------

Outcome locality() {
    Rng rng(77);
    int dragan_same = 0, coupled_changed = 0;
    const int configs = 20;
    for (int i = 0; i < configs; ++i) {
        ArchSpec spec = sample_arch(default_arch_pool(), rng);
        spec.input_dim = 2;
        spec.output_dim = 1;
        spec.output_activation = i % 2 ? Activation::Sigmoid : Activation::Identity;
        const Mlp d = mlp_init(spec, InitScheme::He, rng);
        const auto n = static_cast<Eigen::Index>(rng.uniform_int(4, 64));
        const Tensor real = sample_8gaussians(static_cast<std::size_t>(n), rng).points;
        const Tensor fake_a = sample_noise(static_cast<std::size_t>(n), 2, rng);
        const Tensor fake_b = 2.0 * sample_noise(static_cast<std::size_t>(n), 2, rng);
        PenaltyConfig cfg;
        cfg.lambda = rng.uniform(1.0, 20.0);
        cfg.c = rng.uniform(0.1, 10.0);
        const std::uint64_t stream = rng.next();
        auto value = [&](PenaltyVariant v, const Tensor& fake) {
            PenaltyConfig c = cfg;
            c.variant = v;
            Graph g;
            Rng r(stream);
            const Node p = make_penalty(bind_variables(g, d), real, fake, c, g, r);
            return eval_forward(g).scalar(p);
        };
        const double a = value(PenaltyVariant::DraganEq1, fake_a), b = value(PenaltyVariant::DraganEq1, fake_b);
        dragan_same += std::memcmp(&a, &b, sizeof a) == 0;
        coupled_changed += value(PenaltyVariant::CoupledGp, fake_a) != value(PenaltyVariant::CoupledGp, fake_b);
    }
    Outcome o;
    o.pass = dragan_same == configs && coupled_changed == configs;
    o.detail = "dragan_eq1 bit-identical under fake replacement in " + std::to_string(dragan_same) + "/20 configs; " +
               "coupled_gp changed in " + std::to_string(coupled_changed) + "/20";
    return o;
}

// ---- 7 ------------------------------------------------------------------------

constexpr long kBogonetIters = 2000;

Outcome bogonet() {
    const auto t0 = Clock::now();
    auto algs = default_bogonet_algorithms(kBogonetIters, 0.5);
    for (auto& a : algs) a.config.optimizer.alpha = kDeskAlpha;
    const BogonetReport rep = bogonet_run(20, algs, 1000, 1);
    const double secs = seconds_since(t0);
    std::map<std::string, SeriesSummary> s;
    for (std::size_t i = 0; i < rep.algorithms.size(); ++i) s[rep.algorithms[i]] = rep.summaries[i];
    const auto& d = s["dragan"];
    const auto& v = s["vanilla"];
    const auto& w = s["wgan-gp"];
    Outcome o;
    o.pass = d.final_mean >= v.final_mean - 0.25 && d.final_mean >= w.final_mean - 0.25 && d.auc_mean >= v.auc_mean &&
             secs < 3600.0;
    std::string detail;
    for (const auto& name : rep.algorithms)
        detail += name + " final " + fmt("%.3f", s[name].final_mean) + " auc " + fmt("%.1f", s[name].auc_mean) + "; ";
    o.detail = "20 instances x " + std::to_string(kBogonetIters) + " g-iters: " + detail +
               "need dragan final >= others - 0.25 and dragan auc >= vanilla auc; " + fmt("%.0f", secs) +
               " s (< 3600 s)";
    return o;
}

// ---- 8 ------------------------------------------------------------------------

constexpr long kSweepIters = 5000;

Outcome objective_sweep() {
    const auto t0 = Clock::now();
    bool pass = true;
    std::string detail;
    for (const char* obj : {"forward_kl", "reverse_kl", "pearson_chi2", "squared_hellinger", "total_variation"}) {
        int finite = 0;
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            PenaltyConfig p;
            p.variant = PenaltyVariant::DraganEq1;
            p.c = 0.5;
            GameConfig cfg = default_game_config(ObjectiveKind::parse(obj), p);
            cfg.optimizer.alpha = kDeskAlpha;
            cfg.total_g_iters = kSweepIters;
            cfg.discriminator.depth = 4;
            cfg.discriminator.widths = {64, 64, 64, 64};
            cfg.generator.depth = 1;
            cfg.generator.widths = {32};
            cfg.seed = seed;
            finite += !agd_train(cfg).log.failed();
        }
        const bool exempt = std::string(obj) == "total_variation";
        if (!exempt) pass = pass && finite >= 4;
        detail += std::string(obj) + " " + std::to_string(finite) + "/5" + (exempt ? " (exempt)" : "") + "; ";
    }
    Outcome o;
    o.pass = pass;
    o.detail = "finite runs (need >= 4/5, D 4x64, G 1x32, " + std::to_string(kSweepIters) + " g-iters): " + detail +
               fmt("%.0f", seconds_since(t0)) + " s";
    return o;
}

// ---- 9 ------------------------------------------------------------------------

int run_cli(const std::string& args) {
    const std::string cmd = std::string("\"") + DLAB_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return rc == -1 ? -1 : WEXITSTATUS(rc);
}

std::map<std::string, std::string> tree_bytes(const fs::path& root) {
    std::map<std::string, std::string> m;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) m[fs::relative(e.path(), root).string()] = slurp(e.path());
    return m;
}

Outcome determinism() {
    const fs::path dir = scratch_dir("determinism");
    {
        std::ofstream os(dir / "cfg.json");
        os << R"({"objective":"vanilla","penalty":{"variant":"dragan_eq1","c":0.5},"optimizer":{"alpha":0.001},)"
           << R"("total_g_iters":500,"eval_interval":50})";
    }
    const std::string cfg = (dir / "cfg.json").string();
    const int a = run_cli("--seed 5 --out-dir \"" + (dir / "a").string() + "\" train --config \"" + cfg +
                          "\" --levelset-resolution 32 --levelset-every 2");
    const int b = run_cli("--seed 5 --out-dir \"" + (dir / "b").string() + "\" train --config \"" + cfg +
                          "\" --levelset-resolution 32 --levelset-every 2");
    Outcome o;
    if (a != 0 || b != 0) {
        o.detail = "train exited with " + std::to_string(a) + " and " + std::to_string(b);
        return o;
    }
    const auto ta = tree_bytes(dir / "a"), tb = tree_bytes(dir / "b");
    const bool csv_same = ta.count("train_log.csv") && ta.at("train_log.csv") == tb.at("train_log.csv");
    int csv_files = 0;
    for (const auto& [name, bytes] : ta)
        if (name.size() > 4 && name.substr(name.size() - 4) == ".csv") ++csv_files;
    o.pass = csv_same && ta == tb;
    o.detail = std::string("train_log.csv ") + (csv_same ? "identical" : "differs") + "; " + std::to_string(ta.size()) +
               " output files (" + std::to_string(csv_files) + " CSV) " + (ta == tb ? "all byte-identical" : "differ");
    fs::remove_all(dir);
    return o;
}

// ---- 10 -----------------------------------------------------------------------

std::string be32(std::uint32_t v) {
    std::string s(4, '\0');
    for (int i = 0; i < 4; ++i) s[static_cast<std::size_t>(i)] = static_cast<char>((v >> (24 - 8 * i)) & 0xff);
    return s;
}

Outcome format_fidelity() {
    const fs::path dir = scratch_dir("formats");
    Rng rng(10);
    ArchSpec spec{"mlp", 2, {16, 16}, Activation::Tanh, Activation::Sigmoid, 2, 1};
    const Mlp d = mlp_init(spec, InitScheme::Xavier, rng);
    const LevelSetGrid grid = levelset_grid(d, GridBounds{}, 48);
    {
        std::ofstream os(dir / "plain.pgm", std::ios::binary);
        write_pgm(os, grid);
        std::ofstream oc(dir / "comment.pgm", std::ios::binary);
        write_pgm(oc, grid, "seed 10 g_iter 0");
    }
    // Raw bytes expected by the viewer, from our own strict reader.
    std::ifstream is(dir / "plain.pgm", std::ios::binary);
    const PgmImage ours = read_pgm(is);
    {
        std::ofstream raw(dir / "expected.raw", std::ios::binary);
        raw.write(reinterpret_cast<const char*>(ours.pixels.data()), static_cast<std::streamsize>(ours.pixels.size()));
    }
    const std::string py = "import sys\n"
                           "from PIL import Image\n"
                           "exp = open(sys.argv[1], 'rb').read()\n"
                           "for p in sys.argv[2:]:\n"
                           "    im = Image.open(p)\n"
                           "    im.load()\n"
                           "    assert im.format == 'PPM' and im.mode == 'L', (im.format, im.mode)\n"
                           "    assert im.size == (48, 48), im.size\n"
                           "    assert im.tobytes() == exp\n";
    {
        std::ofstream os(dir / "check.py");
        os << py;
    }
    const std::string cmd = "python3 \"" + (dir / "check.py").string() + "\" \"" + (dir / "expected.raw").string() +
                            "\" \"" + (dir / "plain.pgm").string() + "\" \"" + (dir / "comment.pgm").string() +
                            "\" > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    const bool pgm_ok = rc == 0;

    // Hand-built 1x2x2 IDX fixture.
    const std::string fixture = be32(kIdxImageMagic) + be32(1) + be32(2) + be32(2) + std::string("\x00\xff\x00\xff", 4);
    std::istringstream in(fixture);
    const ImageDataset img = read_idx(in);
    std::ostringstream out;
    write_idx_images(out, img);
    const bool values_ok = img.images.rows() == 1 && img.images.cols() == 4 && img.images(0, 0) == -1.0 &&
                           img.images(0, 1) == 1.0 && img.images(0, 2) == -1.0 && img.images(0, 3) == 1.0;
    const bool idx_ok = values_ok && out.str() == fixture;

    Outcome o;
    o.pass = pgm_ok && idx_ok;
    o.detail = std::string("PIL opens both PGMs as 48x48 'L' with matching pixels: ") + (pgm_ok ? "yes" : "no") +
               " (exit " + std::to_string(rc) + "); IDX fixture values {-1,1,-1,1} and byte round trip: " +
               (idx_ok ? "yes" : "no");
    fs::remove_all(dir);
    return o;
}

struct Criterion {
    std::string id;
    std::string name;
    std::function<Outcome()> run;
};

const std::vector<Criterion>& criteria() {
    static const std::vector<Criterion> all{
        {"1", "gradient-correctness", gradient_correctness},
        {"2", "convex-concave-convergence", convex_concave},
        {"3", "regret-sandwich", regret_sandwich_literal},
        {"3b", "regret-sandwich-two-sided-chain", regret_sandwich_chain},
        {"4", "mode-collapse-mitigation", mode_collapse},
        {"5", "penalty-locality", locality},
        {"6", "gradient-norm-diagnostic", grad_norm_diagnostic},
        {"7", "bogonet-desk-scale", bogonet},
        {"8", "objective-sweep", objective_sweep},
        {"9", "cli-determinism", determinism},
        {"10", "format-fidelity", format_fidelity},
    };
    return all;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> wanted(argv + 1, argv + argc);
    if (wanted.empty() || wanted == std::vector<std::string>{"all"})
        for (const auto& c : criteria()) wanted.push_back(c.id);
    bool all_pass = true;
    for (const auto& id : wanted) {
        if (id == "all") continue;
        const auto it = std::find_if(criteria().begin(), criteria().end(), [&](const Criterion& c) { return c.id == id; });
        if (it == criteria().end()) {
            std::cerr << "unknown criterion '" << id << "'\n";
            return 2;
        }
        Outcome o;
        try {
            o = it->run();
        } catch (const std::exception& e) {
            o.detail = std::string("exception: ") + e.what();
        }
        print(it->id, it->name, o);
        all_pass = all_pass && o.pass;
    }
    return all_pass ? 0 : 1;
}
