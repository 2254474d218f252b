#include "adsr/losses.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "adsr/error.hpp"

namespace adsr {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::vector<double> gaussian_kernel() {
    std::vector<double> k(kWindow);
    const int half = kWindow / 2;
    double sum = 0;
    for (int i = 0; i < kWindow; ++i) {
        const double d = i - half;
        k[i] = std::exp(-d * d / (2 * kSigma * kSigma));
        sum += k[i];
    }
    for (auto& v : k) v /= sum;
    return k;
}

/// Separable Gaussian blur of one channel; border windows renormalized to
/// the in-bounds weight.
std::vector<double> blur(const std::vector<double>& src, int w, int h) {
    static const std::vector<double> kernel = gaussian_kernel();
    const int half = kWindow / 2;
    std::vector<double> tmp(src.size()), out(src.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0, wsum = 0;
            for (int k = -half; k <= half; ++k) {
                const int xx = x + k;
                if (xx < 0 || xx >= w) continue;
                acc += kernel[k + half] * src[std::size_t(y) * w + xx];
                wsum += kernel[k + half];
            }
            tmp[std::size_t(y) * w + x] = acc / wsum;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0, wsum = 0;
            for (int k = -half; k <= half; ++k) {
                const int yy = y + k;
                if (yy < 0 || yy >= h) continue;
                acc += kernel[k + half] * tmp[std::size_t(yy) * w + x];
                wsum += kernel[k + half];
            }
            out[std::size_t(y) * w + x] = acc / wsum;
        }
    return out;
}

double ssim_channel(const std::vector<double>& a, const std::vector<double>& b, int w, int h) {
    const auto mu_a = blur(a, w, h);
    const auto mu_b = blur(b, w, h);
    std::vector<double> aa(a.size()), bb(a.size()), ab(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        aa[i] = a[i] * a[i];
        bb[i] = b[i] * b[i];
        ab[i] = a[i] * b[i];
    }
    const auto mu_aa = blur(aa, w, h);
    const auto mu_bb = blur(bb, w, h);
    const auto mu_ab = blur(ab, w, h);
    double total = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double va = mu_aa[i] - mu_a[i] * mu_a[i];
        const double vb = mu_bb[i] - mu_b[i] * mu_b[i];
        const double cov = mu_ab[i] - mu_a[i] * mu_b[i];
        const double num = (2 * mu_a[i] * mu_b[i] + kC1) * (2 * cov + kC2);
        const double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + kC1) * (va + vb + kC2);
        total += num / den;
    }
    return total / double(a.size());
}

bool in_mask(const MaskGrid& mask, int x, int y, int mask_id) {
    const std::uint8_t m = mask.at(x, y);
    return mask_id == 0 ? m != 0 : m == mask_id;
}

}  // namespace

double ssim(const ImageRGB& a, const ImageRGB& b) {
    if (a.width != b.width || a.height != b.height)
        throw Error("ssim: image dimensions differ");
    if (a.width == 0 || a.height == 0) throw Error("ssim: empty image");
    double total = 0;
    const std::size_t n = a.pixels.size();
    for (int c = 0; c < 3; ++c) {
        std::vector<double> ca(n), cb(n);
        for (std::size_t i = 0; i < n; ++i) {
            ca[i] = a.pixels[i][c];
            cb[i] = b.pixels[i][c];
        }
        total += ssim_channel(ca, cb, a.width, a.height);
    }
    return total / 3.0;
}

double loss_color(const ImageRGB& rendered, const ImageRGB& observed,
                  const MaskGrid& mask, double lambda_ssim, int mask_id) {
    if (rendered.width != observed.width || rendered.height != observed.height)
        throw Error("loss_color: image dimensions differ");
    if (mask.width != rendered.width || mask.height != rendered.height)
        throw Error("loss_color: mask dimensions differ");

    double l1 = 0;
    std::size_t count = 0;
    int bx0 = mask.width, bx1 = -1, by0 = mask.height, by1 = -1;
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) {
            if (!in_mask(mask, x, y, mask_id)) continue;
            l1 += (rendered.at(x, y) - observed.at(x, y)).cwiseAbs().sum() / 3.0;
            ++count;
            bx0 = std::min(bx0, x);
            bx1 = std::max(bx1, x);
            by0 = std::min(by0, y);
            by1 = std::max(by1, y);
        }
    if (count == 0) throw Error("loss_color: empty mask");
    l1 /= double(count);

    double ssim_term = 0;
    if (lambda_ssim > 0) {
        const int bw = bx1 - bx0 + 1, bh = by1 - by0 + 1;
        ImageRGB ca(bw, bh), cb(bw, bh);
        for (int y = 0; y < bh; ++y)
            for (int x = 0; x < bw; ++x) {
                ca.at(x, y) = rendered.at(bx0 + x, by0 + y);
                cb.at(x, y) = observed.at(bx0 + x, by0 + y);
            }
        ssim_term = 1.0 - ssim(ca, cb);
    }
    return (1.0 - lambda_ssim) * l1 + lambda_ssim * ssim_term;
}

double loss_depth(const DepthGrid& rendered, const DepthGrid& observed,
                  const MaskGrid& mask, int mask_id) {
    if (rendered.width != observed.width || rendered.height != observed.height)
        throw Error("loss_depth: depth dimensions differ");
    if (mask.width != rendered.width || mask.height != rendered.height)
        throw Error("loss_depth: mask dimensions differ");
    double sq = 0;
    std::size_t count = 0;
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) {
            if (!in_mask(mask, x, y, mask_id)) continue;
            const double d = observed.at(x, y);
            if (!std::isfinite(d)) continue;
            const double diff = rendered.at(x, y) - d;
            sq += diff * diff;
            ++count;
        }
    if (count == 0) throw Error("loss_depth: no valid masked pixel");
    return std::sqrt(sq / double(count));
}

double loss_total(double color_loss, double depth_loss, const LossWeights& w) {
    return w.lambda_color * color_loss + w.lambda_depth * depth_loss;
}

}  // namespace adsr
