// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 matr contributors

#pragma once

#include <matr/tensor.hpp>

#include <vector>

namespace matr {

// Normalized center-format box. Canonical field order everywhere is
// (cx, cy, w, h); all file I/O converts explicitly.
struct NormBox {
    double cx = 0.0;
    double cy = 0.0;
    double w = 0.0;
    double h = 0.0;
};

// Unbounded offsets applied in logit space.
struct BoxDelta {
    double dcx = 0.0;
    double dcy = 0.0;
    double dw = 0.0;
    double dh = 0.0;
};

struct BoxCorners {
    double left, top, right, bottom;
};

inline BoxCorners to_corners(const NormBox& b) {
    return {b.cx - b.w / 2.0, b.cy - b.h / 2.0, b.cx + b.w / 2.0, b.cy + b.h / 2.0};
}

inline NormBox from_corners(const BoxCorners& c) {
    return {(c.left + c.right) / 2.0, (c.top + c.bottom) / 2.0, c.right - c.left,
            c.bottom - c.top};
}

bool box_valid(const NormBox& b);
void validate_box(const NormBox& b);

// Intersection over union, in [0, 1].
double iou(const NormBox& a, const NormBox& b);

// Generalized IoU, in [-1, 1]; equals IoU when the enclosing box equals the union.
double giou(const NormBox& a, const NormBox& b);

constexpr double kLogitEps = 1e-4;

double logistic(double x);
// Clamps p to [eps, 1-eps] before taking the log-odds.
double inverse_logistic(double p, double eps = kLogitEps);

// Component-wise logistic(inverse_logistic(anchor) + delta). Zero delta is the
// identity up to the logit clamp.
NormBox refine_anchor(const NormBox& anchor, const BoxDelta& delta);

constexpr double kBoxEmbedTemperature = 20.0;

// Sinusoidal features of a single scalar: `count` values alternating
// sin/cos over a geometric frequency schedule. Shared by box and grid
// position encodings.
void sinusoid_features(double value, int count, double temperature, double* out);
// Angular frequency of feature pair j (used by the autodiff backward).
double sinusoid_omega(int pair_index, int pair_count, double temperature);

// Sinusoidal encoding of (cx, cy, w, h); dim must be divisible by 8.
std::vector<double> box_to_embedding(const NormBox& box, int dim,
                                     double temperature = kBoxEmbedTemperature);

// Entry (i, j) = 1 - iou(predicted[i], targets[j]).
Tensor pairwise_distance(const std::vector<NormBox>& predicted,
                         const std::vector<NormBox>& targets);

}  // namespace matr
