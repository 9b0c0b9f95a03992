#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "poseforge/core.hpp"
#include "poseforge/error.hpp"
#include "poseforge/rng.hpp"

namespace pft {

inline poseforge::PersonInstance person(int K, double x0 = 20.0, double y0 = 30.0, int v = 2) {
    poseforge::PersonInstance p;
    for (int k = 0; k < K; ++k) p.keypoints.push_back({x0 + 3.0 * k, y0 + 2.0 * k, v});
    p.bbox = {x0 - 5.0, y0 - 5.0, 3.0 * K + 10.0, 2.0 * K + 10.0};
    p.area = 100.0;
    return p;
}

template <class F>
poseforge::ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const poseforge::Error& e) {
        return e.code();
    }
    throw std::runtime_error("expected a poseforge::Error");
}

inline std::string data_path(const std::string& rel) { return std::string(POSEFORGE_DATA_DIR) + "/" + rel; }

} // namespace pft
