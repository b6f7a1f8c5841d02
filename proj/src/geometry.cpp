// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 matr contributors

#include <matr/common.hpp>
#include <matr/geometry.hpp>

#include <algorithm>
#include <cmath>

namespace matr {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

bool box_valid(const NormBox& b) {
    return std::isfinite(b.cx) && std::isfinite(b.cy) && std::isfinite(b.w) &&
           std::isfinite(b.h) && b.cx >= 0.0 && b.cx <= 1.0 && b.cy >= 0.0 && b.cy <= 1.0 &&
           b.w > 0.0 && b.w <= 1.0 && b.h > 0.0 && b.h <= 1.0;
}

void validate_box(const NormBox& b) {
    if (!box_valid(b)) throw_data("invalid normalized box");
}

double iou(const NormBox& a, const NormBox& b) {
    BoxCorners ca = to_corners(a), cb = to_corners(b);
    double iw = std::min(ca.right, cb.right) - std::max(ca.left, cb.left);
    double ih = std::min(ca.bottom, cb.bottom) - std::max(ca.top, cb.top);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    double inter = iw * ih;
    double uni = a.w * a.h + b.w * b.h - inter;
    return inter / uni;
}

double giou(const NormBox& a, const NormBox& b) {
    BoxCorners ca = to_corners(a), cb = to_corners(b);
    double iw = std::max(0.0, std::min(ca.right, cb.right) - std::max(ca.left, cb.left));
    double ih = std::max(0.0, std::min(ca.bottom, cb.bottom) - std::max(ca.top, cb.top));
    double inter = iw * ih;
    double uni = a.w * a.h + b.w * b.h - inter;
    double ew = std::max(ca.right, cb.right) - std::min(ca.left, cb.left);
    double eh = std::max(ca.bottom, cb.bottom) - std::min(ca.top, cb.top);
    double enclosing = ew * eh;
    return inter / uni - (enclosing - uni) / enclosing;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double inverse_logistic(double p, double eps) {
    double q = std::clamp(p, eps, 1.0 - eps);
    return std::log(q / (1.0 - q));
}

NormBox refine_anchor(const NormBox& anchor, const BoxDelta& delta) {
    return {logistic(inverse_logistic(anchor.cx) + delta.dcx),
            logistic(inverse_logistic(anchor.cy) + delta.dcy),
            logistic(inverse_logistic(anchor.w) + delta.dw),
            logistic(inverse_logistic(anchor.h) + delta.dh)};
}

double sinusoid_omega(int pair_index, int pair_count, double temperature) {
    return kTwoPi / std::pow(temperature, static_cast<double>(pair_index) / pair_count);
}

void sinusoid_features(double value, int count, double temperature, double* out) {
    int pairs = count / 2;
    for (int j = 0; j < pairs; ++j) {
        double angle = sinusoid_omega(j, pairs, temperature) * value;
        out[2 * j] = std::sin(angle);
        out[2 * j + 1] = std::cos(angle);
    }
}

std::vector<double> box_to_embedding(const NormBox& box, int dim, double temperature) {
    if (dim <= 0 || dim % 8 != 0) throw_usage("box embedding dim must be a positive multiple of 8");
    std::vector<double> out(static_cast<size_t>(dim));
    int per_coord = dim / 4;
    const double coords[4] = {box.cx, box.cy, box.w, box.h};
    for (int c = 0; c < 4; ++c)
        sinusoid_features(coords[c], per_coord, temperature, out.data() + c * per_coord);
    return out;
}

Tensor pairwise_distance(const std::vector<NormBox>& predicted,
                         const std::vector<NormBox>& targets) {
    Tensor out(static_cast<int>(predicted.size()), static_cast<int>(targets.size()));
    for (size_t i = 0; i < predicted.size(); ++i)
        for (size_t j = 0; j < targets.size(); ++j)
            out.at(static_cast<int>(i), static_cast<int>(j)) = 1.0 - iou(predicted[i], targets[j]);
    return out;
}

}  // namespace matr
