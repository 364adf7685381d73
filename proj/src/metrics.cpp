#include "dlab/metrics.hpp"

#include "dlab/csv.hpp"
#include "dlab/error.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

namespace dlab {

CoverageReport mode_coverage(const Tensor& samples, const Tensor& centers, double std, int min_count) {
    if (centers.rows() == 0) throw ValidationError("mode_coverage: no mode centers");
    if (!(std > 0.0)) throw ValidationError("mode_coverage: std must be > 0");
    if (min_count < 1) throw ValidationError("mode_coverage: min_count must be >= 1");
    if (samples.rows() > 0 && samples.cols() != centers.cols())
        throw ShapeError("shape error: samples and centers differ in dimension");

    CoverageReport rep;
    rep.per_mode_counts.assign(static_cast<std::size_t>(centers.rows()), 0);
    const double radius2 = (3.0 * std) * (3.0 * std);
    int hq = 0;
    for (Eigen::Index i = 0; i < samples.rows(); ++i) {
        Eigen::Index nearest = 0;
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index k = 0; k < centers.rows(); ++k) {
            const double d2 = (samples.row(i) - centers.row(k)).squaredNorm();
            if (d2 < best) best = d2, nearest = k;
        }
        if (best <= radius2) {
            ++rep.per_mode_counts[static_cast<std::size_t>(nearest)];
            ++hq;
        }
    }
    for (int c : rep.per_mode_counts)
        if (c >= min_count) ++rep.covered_modes;
    rep.hq_fraction = samples.rows() ? static_cast<double>(hq) / static_cast<double>(samples.rows()) : 0.0;
    return rep;
}

int default_min_count(std::size_t samples, std::size_t modes) {
    if (modes == 0) return 1;
    return std::max<int>(1, static_cast<int>(samples / (10 * modes)));
}

double grad_norm_at_real(const Mlp& d, const Tensor& x_real) {
    if (x_real.rows() == 0) throw ValidationError("grad_norm_at_real: empty batch");
    Graph g;
    MlpNodes nodes = bind_constants(g, d);
    Node x = g.constant(x_real);
    Node gx = grad(sum(mlp_forward(nodes, x)), x, /*create_graph=*/false);
    const Tensor v = eval_forward(g)[gx];
    const double result = v.rowwise().squaredNorm().mean();
    if (!std::isfinite(result)) throw NumericError("grad_norm_at_real: non-finite gradient");
    return result;
}

double LevelSetGrid::x_of(int col) const {
    return bounds.xmin + (bounds.xmax - bounds.xmin) * col / (resolution - 1);
}

double LevelSetGrid::y_of(int row) const {
    return bounds.ymax - (bounds.ymax - bounds.ymin) * row / (resolution - 1);
}

LevelSetGrid levelset_grid(const Mlp& d, const GridBounds& bounds, int resolution) {
    if (resolution < 2) throw ValidationError("levelset_grid: resolution must be >= 2");
    if (d.input_dim() != 2 || d.output_dim() != 1)
        throw ShapeError("shape error: level sets need a 2-input, 1-output discriminator");
    LevelSetGrid grid;
    grid.resolution = resolution;
    grid.bounds = bounds;
    Tensor pts(static_cast<Eigen::Index>(resolution) * resolution, 2);
    for (int r = 0; r < resolution; ++r)
        for (int c = 0; c < resolution; ++c) {
            pts(r * resolution + c, 0) = grid.x_of(c);
            pts(r * resolution + c, 1) = grid.y_of(r);
        }
    const Tensor out = predict(d, pts);
    grid.values.assign(out.data(), out.data() + out.size());
    grid.min = *std::min_element(grid.values.begin(), grid.values.end());
    grid.max = *std::max_element(grid.values.begin(), grid.values.end());
    return grid;
}

void write_pgm(std::ostream& os, const LevelSetGrid& grid, const std::string& comment) {
    os << "P5\n";
    if (!comment.empty()) os << "# " << comment << '\n';
    os << grid.resolution << ' ' << grid.resolution << "\n255\n";
    const double range = grid.max - grid.min;
    for (double v : grid.values) {
        double level = range > 0.0 ? (v - grid.min) / range * 255.0 : 0.0;
        if (!std::isfinite(level)) level = 0.0;
        os.put(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(level, 0.0, 255.0)))));
    }
}

void write_levelset_csv(std::ostream& os, const LevelSetGrid& grid) {
    os << "row,col,x,y,value\n";
    for (int r = 0; r < grid.resolution; ++r)
        for (int c = 0; c < grid.resolution; ++c) {
            os << r << ',' << c << ',';
            write_real(os, grid.x_of(c));
            os << ',';
            write_real(os, grid.y_of(r));
            os << ',';
            write_real(os, grid.at(r, c));
            os << '\n';
        }
}

namespace {

int read_pgm_int(std::istream& is) {
    // Skip whitespace and comments.
    for (;;) {
        int ch = is.peek();
        if (ch == '#') {
            std::string line;
            std::getline(is, line);
        } else if (ch == ' ' || ch == '\n' || ch == '\r' || ch == '\t') {
            is.get();
        } else {
            break;
        }
    }
    int v = -1;
    if (!(is >> v) || v < 0) throw FormatError("PGM: bad header integer");
    return v;
}

}  // namespace

PgmImage read_pgm(std::istream& is) {
    char magic[2];
    if (!is.read(magic, 2) || magic[0] != 'P' || magic[1] != '5') throw FormatError("PGM: not a P5 file");
    PgmImage img;
    img.width = read_pgm_int(is);
    img.height = read_pgm_int(is);
    img.maxval = read_pgm_int(is);
    if (img.width < 1 || img.height < 1 || img.maxval < 1 || img.maxval > 255)
        throw FormatError("PGM: unsupported dimensions or maxval");
    const int sep = is.get();
    if (sep != ' ' && sep != '\n' && sep != '\r' && sep != '\t') throw FormatError("PGM: missing header separator");
    img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
    if (!is.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size())))
        throw FormatError("PGM: truncated pixel data");
    if (is.peek() != std::char_traits<char>::eof()) throw FormatError("PGM: trailing bytes after pixel data");
    for (unsigned char p : img.pixels)
        if (p > img.maxval) throw FormatError("PGM: pixel exceeds maxval");
    return img;
}

Tensor latent_walk(const Mlp& g, const Eigen::VectorXd& z0, const Eigen::VectorXd& z1, int steps) {
    if (steps < 2) throw ValidationError("latent_walk: steps must be >= 2");
    if (z0.size() != g.input_dim() || z1.size() != g.input_dim())
        throw ShapeError("shape error: latent vectors must match the generator input dimension");
    // Each point is evaluated on its own so the endpoints match G(z0), G(z1) bit for bit.
    Tensor out(steps, g.output_dim());
    for (int s = 0; s < steps; ++s) {
        const double t = static_cast<double>(s) / (steps - 1);
        Eigen::VectorXd z = s == 0 ? z0 : (s == steps - 1 ? z1 : Eigen::VectorXd((1.0 - t) * z0 + t * z1));
        out.row(s) = predict(g, Tensor(z.transpose())).row(0);
    }
    return out;
}

double trapezoid_auc(const ScoreSeries& series) {
    double auc = 0.0;
    for (std::size_t i = 1; i < series.size(); ++i)
        auc += 0.5 * (series[i].second + series[i - 1].second) * (series[i].first - series[i - 1].first);
    return auc;
}

SeriesSummary bogonet_summary(const std::vector<ScoreSeries>& runs) {
    if (runs.empty()) throw ValidationError("bogonet_summary: no runs");
    std::vector<double> finals, aucs;
    for (const auto& s : runs) {
        if (s.empty()) throw ValidationError("bogonet_summary: empty score series");
        for (std::size_t i = 1; i < s.size(); ++i)
            if (!(s[i].first > s[i - 1].first))
                throw ValidationError("bogonet_summary: iterations must be strictly increasing");
        finals.push_back(s.back().second);
        aucs.push_back(trapezoid_auc(s));
    }
    auto stats = [](const std::vector<double>& v) {
        double m = 0.0;
        for (double x : v) m += x;
        m /= static_cast<double>(v.size());
        double var = 0.0;
        for (double x : v) var += (x - m) * (x - m);
        return std::pair{m, std::sqrt(var / static_cast<double>(v.size()))};
    };
    SeriesSummary out;
    out.runs = runs.size();
    std::tie(out.final_mean, out.final_std) = stats(finals);
    std::tie(out.auc_mean, out.auc_std) = stats(aucs);
    return out;
}

}  // namespace dlab
