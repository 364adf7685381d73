#pragma once

#include "dlab/diffgraph.hpp"
#include "dlab/nets.hpp"

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace dlab {

struct CoverageReport {
    int covered_modes = 0;
    double hq_fraction = 0.0;
    std::vector<int> per_mode_counts;

    // Desk-scale quality score: covered_modes + hq_fraction, in [0, k + 1].
    double score() const { return covered_modes + hq_fraction; }
};

// A sample is high quality when it lies within 3 std of its nearest center; a
// mode is covered when it owns at least min_count high-quality samples.
CoverageReport mode_coverage(const Tensor& samples, const Tensor& centers, double std, int min_count);
// max(1, samples / (10 k)).
int default_min_count(std::size_t samples, std::size_t modes);

// Mean over the batch of |grad_x D(x)|^2 at the given (unperturbed) points.
double grad_norm_at_real(const Mlp& d, const Tensor& x_real);

struct GridBounds {
    double xmin = -3, xmax = 3, ymin = -3, ymax = 3;
};

// D evaluated on a resolution x resolution grid. Row-major; row 0 is y = ymax
// (image orientation), column 0 is x = xmin.
struct LevelSetGrid {
    int resolution = 0;
    GridBounds bounds;
    std::vector<double> values;
    double min = 0.0;
    double max = 0.0;

    double at(int row, int col) const { return values[static_cast<std::size_t>(row) * resolution + col]; }
    double x_of(int col) const;
    double y_of(int row) const;
};

LevelSetGrid levelset_grid(const Mlp& d, const GridBounds& bounds, int resolution);

// Binary PGM (P5, maxval 255), linear min-max normalization; a constant grid
// maps to 0.
// A non-empty comment (single line) goes into the header.
void write_pgm(std::ostream& os, const LevelSetGrid& grid, const std::string& comment = {});
void write_levelset_csv(std::ostream& os, const LevelSetGrid& grid);

struct PgmImage {
    int width = 0;
    int height = 0;
    int maxval = 0;
    std::vector<unsigned char> pixels;
};
// Strict P5 reader (used to validate emitted files).
PgmImage read_pgm(std::istream& is);

// G((1 - t) z0 + t z1) for t = 0, 1/(steps-1), ..., 1; one row per step.
Tensor latent_walk(const Mlp& g, const Eigen::VectorXd& z0, const Eigen::VectorXd& z1, int steps);

using ScoreSeries = std::vector<std::pair<double, double>>;  // (iteration, score)

struct SeriesSummary {
    double final_mean = 0.0;
    double final_std = 0.0;
    double auc_mean = 0.0;
    double auc_std = 0.0;
    std::size_t runs = 0;
};

double trapezoid_auc(const ScoreSeries& series);
// Finals and trapezoid AUCs aggregated across runs (population std).
SeriesSummary bogonet_summary(const std::vector<ScoreSeries>& runs);

}  // namespace dlab
