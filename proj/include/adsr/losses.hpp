#pragma once

#include "adsr/image.hpp"

namespace adsr {

struct LossWeights {
    double lambda_color = 1.0;
    double lambda_depth = 10.0;
    double lambda_ssim = 0.2;
};

/// Standard SSIM: 11x11 Gaussian window sigma 1.5, C1=0.01^2, C2=0.03^2 on
/// [0,1] images, averaged over channels and pixels. Border windows are
/// renormalized to in-bounds weight.
double ssim(const ImageRGB& a, const ImageRGB& b);

/// (1 - lambda_ssim) * mean-L1 over masked pixels + lambda_ssim * (1 - ssim)
/// over the mask's bounding box. mask_id 0 means any nonzero pixel.
double loss_color(const ImageRGB& rendered, const ImageRGB& observed,
                  const MaskGrid& mask, double lambda_ssim, int mask_id = 0);

/// RMS difference over masked pixels with finite observed depth.
double loss_depth(const DepthGrid& rendered, const DepthGrid& observed,
                  const MaskGrid& mask, int mask_id = 0);

double loss_total(double color_loss, double depth_loss, const LossWeights& w);

}  // namespace adsr
