#pragma once

#include "dreamid/core.hpp"

#include <array>
#include <filesystem>

namespace dreamid {

// RGB image with channel values in [0, 1], one Eigen matrix per channel
// (row = y, col = x).
struct Image {
    std::array<Mat, 3> rgb;

    Image() = default;
    Image(Index height, Index width) {
        for (auto& c : rgb) c = Mat::Zero(height, width);
    }

    Index height() const { return rgb[0].rows(); }
    Index width() const { return rgb[0].cols(); }
    bool empty() const { return rgb[0].size() == 0; }

    Mat luminance() const {
        return 0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2];
    }
};

// Binary PPM (P6, 8-bit), the lossless on-disk format used throughout.
void write_ppm(const Image& img, const std::filesystem::path& path);
Image read_ppm(const std::filesystem::path& path);

// Serialized P6 bytes, for content hashing without touching disk.
std::string ppm_bytes(const Image& img);

Image resize_bilinear(const Image& img, Index height, Index width);
// Average pooling by an integer factor; dimensions must divide evenly.
Mat avg_pool(const Mat& m, Index factor);

}  // namespace dreamid
