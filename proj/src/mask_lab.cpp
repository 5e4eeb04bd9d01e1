#include "sria/mask_lab.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sria::mask_lab {
namespace {

using boost::multiprecision::int256_t;

struct Split {
    std::uint64_t w0 = 0;
    std::uint64_t w1 = 0;
    __int128 deviation = 0;  // N·S0 − W0·S
};

int256_t to_int256(__int128 v) {
    const bool negative = v < 0;
    const auto magnitude = negative ? -static_cast<unsigned __int128>(v) : static_cast<unsigned __int128>(v);
    int256_t r = static_cast<std::uint64_t>(magnitude >> 64);
    r <<= 64;
    r += static_cast<std::uint64_t>(magnitude);
    return negative ? int256_t(-r) : r;
}

std::vector<Split> cumulative_splits(const std::array<std::uint64_t, 256>& hist) {
    std::uint64_t n = 0;
    __int128 s = 0;
    for (int v = 0; v < 256; ++v) {
        n += hist[v];
        s += static_cast<__int128>(v) * hist[v];
    }
    std::vector<Split> splits(256);
    std::uint64_t w0 = 0;
    __int128 s0 = 0;
    for (int t = 0; t < 256; ++t) {
        w0 += hist[t];
        s0 += static_cast<__int128>(t) * hist[t];
        splits[t] = {w0, n - w0, static_cast<__int128>(n) * s0 - static_cast<__int128>(w0) * s};
    }
    return splits;
}

void require_box_inside(const SoftMask& pred, const BoundingBox& box) {
    if (!box.valid()) {
        throw InvalidArgument("projection loss needs a non-degenerate box");
    }
    if (box.x_min < 0 || box.y_min < 0 || box.x_max > pred.width() || box.y_max > pred.height()) {
        throw InvalidArgument("projection loss box lies outside the mask");
    }
}

// Per-axis projections together with the index that attains each maximum.
struct Projection {
    std::vector<double> values;
    std::vector<int> argmax;
};

Projection project_x(const SoftMask& pred) {
    Projection p{std::vector<double>(pred.width(), 0.0), std::vector<int>(pred.width(), 0)};
    for (int x = 0; x < pred.width(); ++x) {
        double best = pred.at(x, 0);
        int arg = 0;
        for (int y = 1; y < pred.height(); ++y) {
            if (pred.at(x, y) > best) {
                best = pred.at(x, y);
                arg = y;
            }
        }
        p.values[x] = best;
        p.argmax[x] = arg;
    }
    return p;
}

Projection project_y(const SoftMask& pred) {
    Projection p{std::vector<double>(pred.height(), 0.0), std::vector<int>(pred.height(), 0)};
    for (int y = 0; y < pred.height(); ++y) {
        double best = pred.at(0, y);
        int arg = 0;
        for (int x = 1; x < pred.width(); ++x) {
            if (pred.at(x, y) > best) {
                best = pred.at(x, y);
                arg = x;
            }
        }
        p.values[y] = best;
        p.argmax[y] = arg;
    }
    return p;
}

std::vector<double> indicator(int length, int lo, int hi) {
    std::vector<double> v(length, 0.0);
    std::fill(v.begin() + lo, v.begin() + hi, 1.0);
    return v;
}

struct DiceTerms {
    double numerator;
    double denominator;
};

DiceTerms soft_dice_terms(const std::vector<double>& a, const std::vector<double>& b) {
    double inter = 0.0, sa = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        inter += a[i] * b[i];
        sa += a[i] * a[i];
        sb += b[i] * b[i];
    }
    return {2.0 * inter + kSoftDiceEpsilon, sa + sb + kSoftDiceEpsilon};
}

double soft_dice_loss(const std::vector<double>& a, const std::vector<double>& b) {
    const auto t = soft_dice_terms(a, b);
    return 1.0 - t.numerator / t.denominator;
}

// d(1 − N/D)/da_i with N = 2Σab + ε, D = Σa² + Σb² + ε.
std::vector<double> soft_dice_loss_grad(const std::vector<double>& a, const std::vector<double>& b) {
    const auto t = soft_dice_terms(a, b);
    std::vector<double> g(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        g[i] = -(2.0 * b[i] * t.denominator - t.numerator * 2.0 * a[i]) /
               (t.denominator * t.denominator);
    }
    return g;
}

void require_same_shape(const RgbImage& img, const SoftMask& pred) {
    if (!img.same_shape(pred)) {
        throw InvalidArgument("pairwise loss: image and prediction dimensions differ");
    }
}

double same_label_probability(double pi, double pj) {
    return std::max(pi * pj + (1.0 - pi) * (1.0 - pj), kMinSameLabelProbability);
}

}  // namespace

std::array<std::uint64_t, 256> histogram(const GrayImage& img) {
    std::array<std::uint64_t, 256> hist{};
    for (auto v : img.pixels()) ++hist[v];
    return hist;
}

double between_class_variance(const std::array<std::uint64_t, 256>& hist, int threshold) {
    const auto splits = cumulative_splits(hist);
    const auto& s = splits.at(static_cast<std::size_t>(threshold));
    if (s.w0 == 0 || s.w1 == 0) return 0.0;
    const auto d = static_cast<double>(s.deviation);
    return d * d / (static_cast<double>(s.w0) * static_cast<double>(s.w1));
}

OtsuResult otsu_threshold(const GrayImage& img) {
    if (img.empty()) {
        throw InvalidArgument("otsu_threshold needs a non-empty image");
    }
    const auto hist = histogram(img);
    const auto splits = cumulative_splits(hist);

    // Maximize deviation² / (w0·w1) without rounding: compare cross products.
    int best = -1;
    int256_t best_num = 0;
    int256_t best_den = 1;
    for (int t = 0; t < 256; ++t) {
        const auto& s = splits[t];
        if (s.w0 == 0 || s.w1 == 0) continue;
        const int256_t d = to_int256(s.deviation);
        const int256_t num = d * d;
        const int256_t den = int256_t(s.w0) * int256_t(s.w1);
        if (best < 0 || num * best_den > best_num * den) {
            best = t;
            best_num = num;
            best_den = den;
        }
    }

    OtsuResult result;
    result.mask = BinaryMask(img.width(), img.height());
    if (best < 0) {
        // Single intensity: every split leaves one class empty.
        result.threshold = img.pixels()[0];
        result.degenerate = true;
        return result;
    }
    result.threshold = static_cast<std::uint8_t>(best);
    auto dst = result.mask.pixels();
    auto src = img.pixels();
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = src[i] > result.threshold ? 1 : 0;
    }
    return result;
}

double dice(const BinaryMask& a, const BinaryMask& b) {
    if (!a.same_shape(b)) {
        throw InvalidArgument("dice: mask dimensions differ");
    }
    std::uint64_t na = 0, nb = 0, both = 0;
    auto pa = a.pixels();
    auto pb = b.pixels();
    for (std::size_t i = 0; i < pa.size(); ++i) {
        const bool x = pa[i] != 0;
        const bool y = pb[i] != 0;
        na += x;
        nb += y;
        both += x && y;
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

double projection_loss(const SoftMask& pred, const BoundingBox& box) {
    require_box_inside(pred, box);
    const auto px = project_x(pred);
    const auto py = project_y(pred);
    return soft_dice_loss(px.values, indicator(pred.width(), box.x_min, box.x_max)) +
           soft_dice_loss(py.values, indicator(pred.height(), box.y_min, box.y_max));
}

SoftMask projection_loss_gradient(const SoftMask& pred, const BoundingBox& box) {
    require_box_inside(pred, box);
    const auto px = project_x(pred);
    const auto py = project_y(pred);
    const auto gx = soft_dice_loss_grad(px.values, indicator(pred.width(), box.x_min, box.x_max));
    const auto gy = soft_dice_loss_grad(py.values, indicator(pred.height(), box.y_min, box.y_max));
    SoftMask grad(pred.width(), pred.height(), 0.0);
    for (int x = 0; x < pred.width(); ++x) grad.at(x, px.argmax[x]) += gx[x];
    for (int y = 0; y < pred.height(); ++y) grad.at(py.argmax[y], y) += gy[y];
    return grad;
}

void PairwiseLossConfig::validate() const {
    if (!(tau >= 0.0 && tau <= 1.0)) throw InvalidArgument("pairwise tau must lie in [0,1]");
    if (dilation < 1) throw InvalidArgument("pairwise dilation must be a positive integer");
    if (!(sigma > 0.0)) throw InvalidArgument("pairwise sigma must be positive");
}

std::vector<Edge> neighborhood_edges(int width, int height, int dilation) {
    static constexpr std::array<Point, 4> kForward{{{1, 0}, {0, 1}, {1, 1}, {-1, 1}}};
    std::vector<Edge> edges;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            for (const auto& d : kForward) {
                for (int k = 1; k <= dilation; ++k) {
                    const int nx = x + d.x * k;
                    const int ny = y + d.y * k;
                    if (nx < 0 || ny < 0 || nx >= width || ny >= height) break;
                    edges.push_back({{x, y}, {nx, ny}});
                }
            }
        }
    }
    return edges;
}

double color_similarity(const Rgb& a, const Rgb& b, double sigma) {
    double sq = 0.0;
    for (int c = 0; c < 3; ++c) {
        const double d = static_cast<double>(a[c]) - static_cast<double>(b[c]);
        sq += d * d;
    }
    return std::exp(-std::sqrt(sq) / sigma);
}

double pairwise_loss(const RgbImage& img, const SoftMask& pred, const PairwiseLossConfig& cfg) {
    require_same_shape(img, pred);
    cfg.validate();
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& e : neighborhood_edges(img.width(), img.height(), cfg.dilation)) {
        if (color_similarity(img.at(e.a.x, e.a.y), img.at(e.b.x, e.b.y), cfg.sigma) < cfg.tau) continue;
        total -= std::log(same_label_probability(pred.at(e.a.x, e.a.y), pred.at(e.b.x, e.b.y)));
        ++count;
    }
    return count == 0 ? 0.0 : total / static_cast<double>(count);
}

SoftMask pairwise_loss_gradient(const RgbImage& img, const SoftMask& pred,
                                const PairwiseLossConfig& cfg) {
    require_same_shape(img, pred);
    cfg.validate();
    SoftMask grad(pred.width(), pred.height(), 0.0);
    std::vector<Edge> active;
    for (const auto& e : neighborhood_edges(img.width(), img.height(), cfg.dilation)) {
        if (color_similarity(img.at(e.a.x, e.a.y), img.at(e.b.x, e.b.y), cfg.sigma) >= cfg.tau) {
            active.push_back(e);
        }
    }
    if (active.empty()) return grad;
    const double scale = 1.0 / static_cast<double>(active.size());
    for (const auto& e : active) {
        const double pi = pred.at(e.a.x, e.a.y);
        const double pj = pred.at(e.b.x, e.b.y);
        const double raw = pi * pj + (1.0 - pi) * (1.0 - pj);
        if (raw < kMinSameLabelProbability) continue;  // floored: locally constant
        grad.at(e.a.x, e.a.y) -= scale * (2.0 * pj - 1.0) / raw;
        grad.at(e.b.x, e.b.y) -= scale * (2.0 * pi - 1.0) / raw;
    }
    return grad;
}

}  // namespace sria::mask_lab
