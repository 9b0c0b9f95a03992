#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace poseforge {

struct Size {
    int w = 0;
    int h = 0;

    bool operator==(const Size&) const = default;
};

/// Interleaved RGB image with float channels in [0, 1].
struct Image {
    int width = 0;
    int height = 0;
    std::vector<float> data;

    Image() = default;
    Image(int w, int h, float fill = 0.0f)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, fill) {}

    Size size() const { return {width, height}; }
    float& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    float at(int x, int y, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }

    bool operator==(const Image&) const = default;
};

/// 8-bit quantization used by the PPM writer (round to nearest).
std::vector<std::uint8_t> to_bytes(const Image& img);
Image from_bytes(int width, int height, const std::vector<std::uint8_t>& rgb);

std::string encode_ppm(const Image& img);
Image decode_ppm(const std::string& bytes);
void write_ppm(const std::string& path, const Image& img);
Image read_ppm(const std::string& path);

} // namespace poseforge
