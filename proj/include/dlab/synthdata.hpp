#pragma once

#include "dlab/diffgraph.hpp"
#include "dlab/rng.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dlab {

struct Dataset2D {
    Tensor points;                      // n x 2
    std::optional<Tensor> mode_centers; // k x 2
    std::optional<double> mode_std;
};

inline constexpr double kEightGaussiansRadius = 2.0;
inline constexpr double kSyntheticStd = 0.02;

// Eight modes on the radius-2 circle at angles 2 pi i / 8, std 0.02.
Dataset2D sample_8gaussians(std::size_t n, Rng& rng);
Tensor eight_gaussian_centers();

// t ~ U[1.5 pi, 4.5 pi], (t cos t, t sin t) * 2 / (4.5 pi) plus N(0, 0.02^2).
Dataset2D sample_swissroll(std::size_t n, Rng& rng);

// n x dim standard normal entries.
Tensor sample_noise(std::size_t n, std::size_t dim, Rng& rng);

struct ImageDataset {
    Tensor images;  // n x (rows*cols), values in [-1, 1]
    std::optional<std::vector<int>> labels;
    int rows = 0;
    int cols = 0;
};

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

double byte_to_real(std::uint8_t b);
std::uint8_t real_to_byte(double v);

// Big-endian IDX tensors. read_idx expects a rank-3 unsigned-byte image file.
ImageDataset read_idx(std::istream& is);
ImageDataset read_idx(const std::string& path);
std::vector<int> read_idx_labels(std::istream& is);
std::vector<int> read_idx_labels(const std::string& path);
// Images are written back as bytes via real_to_byte.
void write_idx_images(std::ostream& os, const ImageDataset& data);

// x,y columns with 17 significant digits.
void write_points_csv(std::ostream& os, const Tensor& points);

// Source of training batches for the harness.
class DataSource {
public:
    virtual ~DataSource() = default;
    virtual Tensor batch(std::size_t n, Rng& rng) const = 0;
    virtual int dim() const = 0;
    // Mode centers and std when the data is a known mixture.
    virtual std::optional<Tensor> centers() const { return std::nullopt; }
    virtual std::optional<double> mode_std() const { return std::nullopt; }
};

class EightGaussiansSource final : public DataSource {
public:
    Tensor batch(std::size_t n, Rng& rng) const override { return sample_8gaussians(n, rng).points; }
    int dim() const override { return 2; }
    std::optional<Tensor> centers() const override { return eight_gaussian_centers(); }
    std::optional<double> mode_std() const override { return kSyntheticStd; }
};

class SwissrollSource final : public DataSource {
public:
    Tensor batch(std::size_t n, Rng& rng) const override { return sample_swissroll(n, rng).points; }
    int dim() const override { return 2; }
};

class ImageSource final : public DataSource {
public:
    explicit ImageSource(ImageDataset data);
    Tensor batch(std::size_t n, Rng& rng) const override;
    int dim() const override { return static_cast<int>(data_.images.cols()); }

private:
    ImageDataset data_;
};

}  // namespace dlab
