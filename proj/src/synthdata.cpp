#include "dlab/synthdata.hpp"

#include "dlab/csv.hpp"
#include "dlab/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>

namespace dlab {

Tensor eight_gaussian_centers() {
    Tensor c(8, 2);
    for (int i = 0; i < 8; ++i) {
        const double a = 2.0 * std::numbers::pi * i / 8.0;
        c(i, 0) = kEightGaussiansRadius * std::cos(a);
        c(i, 1) = kEightGaussiansRadius * std::sin(a);
    }
    return c;
}

Dataset2D sample_8gaussians(std::size_t n, Rng& rng) {
    const Tensor centers = eight_gaussian_centers();
    Dataset2D d;
    d.points.resize(static_cast<Eigen::Index>(n), 2);
    for (Eigen::Index i = 0; i < d.points.rows(); ++i) {
        const auto k = rng.uniform_int(0, 7);
        d.points(i, 0) = centers(k, 0) + rng.normal(0.0, kSyntheticStd);
        d.points(i, 1) = centers(k, 1) + rng.normal(0.0, kSyntheticStd);
    }
    d.mode_centers = centers;
    d.mode_std = kSyntheticStd;
    return d;
}

Dataset2D sample_swissroll(std::size_t n, Rng& rng) {
    constexpr double lo = 1.5 * std::numbers::pi;
    constexpr double hi = 4.5 * std::numbers::pi;
    Dataset2D d;
    d.points.resize(static_cast<Eigen::Index>(n), 2);
    for (Eigen::Index i = 0; i < d.points.rows(); ++i) {
        const double t = rng.uniform(lo, hi);
        const double scale = 2.0 / hi;
        d.points(i, 0) = t * std::cos(t) * scale + rng.normal(0.0, kSyntheticStd);
        d.points(i, 1) = t * std::sin(t) * scale + rng.normal(0.0, kSyntheticStd);
    }
    return d;
}

Tensor sample_noise(std::size_t n, std::size_t dim, Rng& rng) {
    if (n < 1 || dim < 1) throw ValidationError("sample_noise: n and dim must be >= 1");
    Tensor z(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
    for (Eigen::Index r = 0; r < z.rows(); ++r)
        for (Eigen::Index c = 0; c < z.cols(); ++c) z(r, c) = rng.normal();
    return z;
}

double byte_to_real(std::uint8_t b) { return static_cast<double>(b) / 127.5 - 1.0; }

std::uint8_t real_to_byte(double v) {
    const double x = std::round((v + 1.0) * 127.5);
    return static_cast<std::uint8_t>(std::clamp(x, 0.0, 255.0));
}

namespace {

std::uint32_t read_be32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw FormatError("unexpected EOF");
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) | b[3];
}

void write_be32(std::ostream& os, std::uint32_t v) {
    const char b[4] = {char(v >> 24), char(v >> 16), char(v >> 8), char(v)};
    os.write(b, 4);
}

std::vector<unsigned char> read_payload(std::istream& is, std::size_t n) {
    std::vector<unsigned char> buf(n);
    if (n && !is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n)))
        throw FormatError("unexpected EOF");
    return buf;
}

std::ifstream open_binary(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path + "'");
    return is;
}

}  // namespace

ImageDataset read_idx(std::istream& is) {
    std::uint32_t magic = 0;
    try {
        magic = read_be32(is);
    } catch (const FormatError&) {
        throw FormatError("not an IDX file");
    }
    if (magic != kIdxImageMagic) throw FormatError("not an IDX file (expected unsigned-byte rank-3 image tensor)");
    const std::uint32_t n = read_be32(is);
    const std::uint32_t rows = read_be32(is);
    const std::uint32_t cols = read_be32(is);
    if (rows == 0 || cols == 0) throw FormatError("IDX image with zero-sized dimension");
    const std::size_t d = std::size_t(rows) * cols;
    const auto bytes = read_payload(is, std::size_t(n) * d);
    ImageDataset out;
    out.rows = static_cast<int>(rows);
    out.cols = static_cast<int>(cols);
    out.images.resize(n, static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) out.images(i, j) = byte_to_real(bytes[i * d + j]);
    return out;
}

ImageDataset read_idx(const std::string& path) {
    auto is = open_binary(path);
    return read_idx(is);
}

std::vector<int> read_idx_labels(std::istream& is) {
    std::uint32_t magic = 0;
    try {
        magic = read_be32(is);
    } catch (const FormatError&) {
        throw FormatError("not an IDX file");
    }
    if (magic != kIdxLabelMagic) throw FormatError("not an IDX file (expected unsigned-byte label vector)");
    const std::uint32_t n = read_be32(is);
    const auto bytes = read_payload(is, n);
    return {bytes.begin(), bytes.end()};
}

std::vector<int> read_idx_labels(const std::string& path) {
    auto is = open_binary(path);
    return read_idx_labels(is);
}

void write_idx_images(std::ostream& os, const ImageDataset& data) {
    if (data.images.cols() != Eigen::Index(data.rows) * data.cols)
        throw ValidationError("write_idx_images: rows*cols disagrees with image width");
    write_be32(os, kIdxImageMagic);
    write_be32(os, static_cast<std::uint32_t>(data.images.rows()));
    write_be32(os, static_cast<std::uint32_t>(data.rows));
    write_be32(os, static_cast<std::uint32_t>(data.cols));
    for (Eigen::Index i = 0; i < data.images.rows(); ++i)
        for (Eigen::Index j = 0; j < data.images.cols(); ++j) os.put(static_cast<char>(real_to_byte(data.images(i, j))));
}

void write_points_csv(std::ostream& os, const Tensor& points) {
    if (points.cols() != 2) throw ShapeError("shape error: point CSV needs n x 2");
    os << "x,y\n";
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        write_real(os, points(i, 0));
        os << ',';
        write_real(os, points(i, 1));
        os << '\n';
    }
}

ImageSource::ImageSource(ImageDataset data) : data_(std::move(data)) {
    if (data_.images.rows() == 0) throw ValidationError("image dataset is empty");
}

Tensor ImageSource::batch(std::size_t n, Rng& rng) const {
    Tensor out(static_cast<Eigen::Index>(n), data_.images.cols());
    for (Eigen::Index i = 0; i < out.rows(); ++i)
        out.row(i) = data_.images.row(rng.uniform_int(0, data_.images.rows() - 1));
    return out;
}

}  // namespace dlab
