#include "poseforge/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "poseforge/error.hpp"

namespace poseforge {

std::vector<std::uint8_t> to_bytes(const Image& img) {
    std::vector<std::uint8_t> out(img.data.size());
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const float v = std::clamp(img.data[i], 0.0f, 1.0f);
        out[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
    return out;
}

Image from_bytes(int width, int height, const std::vector<std::uint8_t>& rgb) {
    if (rgb.size() != static_cast<std::size_t>(width) * height * 3)
        throw Error(ErrorCode::SizeMismatch, "RGB buffer size does not match dimensions");
    Image img(width, height);
    for (std::size_t i = 0; i < rgb.size(); ++i) img.data[i] = static_cast<float>(rgb[i]) / 255.0f;
    return img;
}

std::string encode_ppm(const Image& img) {
    std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    const auto bytes = to_bytes(img);
    out.append(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    return out;
}

Image decode_ppm(const std::string& bytes) {
    std::size_t pos = 0;
    auto token = [&]() {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
                ++pos;
            } else {
                break;
            }
        }
        const std::size_t start = pos;
        while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
        return bytes.substr(start, pos - start);
    };
    if (token() != "P6") throw Error(ErrorCode::IoFailure, "not a binary PPM (P6)");
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(token());
        h = std::stoi(token());
        maxval = std::stoi(token());
    } catch (const std::exception&) {
        throw Error(ErrorCode::IoFailure, "bad PPM header");
    }
    if (w <= 0 || h <= 0 || maxval != 255) throw Error(ErrorCode::IoFailure, "unsupported PPM header");
    ++pos; // single whitespace after maxval
    const std::size_t n = static_cast<std::size_t>(w) * h * 3;
    if (bytes.size() < pos + n) throw Error(ErrorCode::IoFailure, "truncated PPM data");
    std::vector<std::uint8_t> rgb(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                  bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
    return from_bytes(w, h, rgb);
}

void write_ppm(const std::string& path, const Image& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path);
    const std::string bytes = encode_ppm(img);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Image read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return decode_ppm(ss.str());
}

} // namespace poseforge
