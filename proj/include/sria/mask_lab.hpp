#pragma once

#include <cstdint>

#include "sria/raster.hpp"

/// Classical segmentation baseline, mask quality scoring and the two
/// box-supervised mask losses (projection + pairwise affinity).
namespace sria::mask_lab {

struct OtsuResult {
    std::uint8_t threshold = 0;
    /// Pixels strictly above the threshold.
    BinaryMask mask;
    /// Set for single-intensity images: threshold is that intensity and the
    /// foreground is empty.
    bool degenerate = false;
};

/// Maximizes between-class variance over the 256-bin histogram. Ties resolve
/// to the smallest maximizing threshold; comparisons are exact.
OtsuResult otsu_threshold(const GrayImage& img);

/// Between-class variance (unnormalized by N^2) of splitting `hist` at
/// `threshold` (class 0 = values <= threshold). Zero when a class is empty.
double between_class_variance(const std::array<std::uint64_t, 256>& hist, int threshold);

std::array<std::uint64_t, 256> histogram(const GrayImage& img);

/// 2|X∩Y| / (|X|+|Y|), defined as 1 when both masks are empty.
double dice(const BinaryMask& a, const BinaryMask& b);

inline constexpr double kSoftDiceEpsilon = 1e-6;

/// Sum over both axes of (1 - soft-Dice) between the max-projection of
/// `pred` and the box indicator projection. Soft-Dice uses squared terms in
/// the denominator: (2·Σab + ε) / (Σa² + Σb² + ε).
double projection_loss(const SoftMask& pred, const BoundingBox& box);

/// d projection_loss / d pred. Each axis routes its gradient to the first
/// maximal element of the corresponding row/column.
SoftMask projection_loss_gradient(const SoftMask& pred, const BoundingBox& box);

struct PairwiseLossConfig {
    double tau = 0.3;
    int dilation = 2;
    double sigma = 10.0;

    void validate() const;
};

/// One undirected neighbor pair (i, j) given as pixel coordinates.
struct Edge {
    Point a;
    Point b;
};

/// Pairs at offsets k·d for d in the four forward 8-neighborhood directions
/// and k = 1..dilation, so each undirected pair appears exactly once.
std::vector<Edge> neighborhood_edges(int width, int height, int dilation);

/// exp(-‖c_i − c_j‖₂ / sigma) on 0–255 RGB.
double color_similarity(const Rgb& a, const Rgb& b, double sigma);

/// Mean of −log(p_i p_j + (1−p_i)(1−p_j)) over edges whose color similarity
/// reaches tau; 0 when no edge qualifies.
double pairwise_loss(const RgbImage& img, const SoftMask& pred,
                     const PairwiseLossConfig& cfg = {});

SoftMask pairwise_loss_gradient(const RgbImage& img, const SoftMask& pred,
                                const PairwiseLossConfig& cfg = {});

/// Same-label probability is floored here so saturated disagreeing pairs
/// give a large finite loss instead of infinity.
inline constexpr double kMinSameLabelProbability = 1e-12;

}  // namespace sria::mask_lab
