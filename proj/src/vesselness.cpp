#include "vesselseg/vesselness.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vesselseg/gaussian.hpp"

namespace vesselseg {

void FrangiParams::validate() const {
    if (sigmas.empty()) throw Error(ErrorCode::InvalidArgument, "sigmas must be nonempty");
    for (std::size_t i = 0; i < sigmas.size(); ++i) {
        if (!(sigmas[i] > 0.0) || !std::isfinite(sigmas[i])) {
            throw Error(ErrorCode::InvalidArgument, "sigmas must be positive");
        }
        if (i > 0 && !(sigmas[i] > sigmas[i - 1])) {
            throw Error(ErrorCode::InvalidArgument, "sigmas must be strictly ascending");
        }
    }
    if (!(beta > 0.0) || !std::isfinite(beta)) throw Error(ErrorCode::InvalidArgument, "beta must be positive");
    if (!(c > 0.0) || !std::isfinite(c)) throw Error(ErrorCode::InvalidArgument, "c must be positive");
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "threshold must be in [0,1]");
    }
}

void check_scale_fits(int width, int height, double sigma) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    if (width <= radius || height <= radius) {
        throw Error(ErrorCode::ImageTooSmall, std::to_string(width) + "x" + std::to_string(height) +
                                                  " image is too small for sigma " + std::to_string(sigma));
    }
}

HessianField hessian_at_scale(const Plane& img, double sigma) {
    const Kernel1D g0 = gaussian_kernel(sigma, 0);
    const Kernel1D g1 = gaussian_kernel(sigma, 1);
    const Kernel1D g2 = gaussian_kernel(sigma, 2);
    check_scale_fits(img.width(), img.height(), sigma);

    HessianField h{convolve_separable(img, g2, g0), convolve_separable(img, g1, g1),
                   convolve_separable(img, g0, g2)};
    const double s2 = sigma * sigma;
    for (Plane* p : {&h.dxx, &h.dxy, &h.dyy}) {
        for (double& v : p->data()) v *= s2;
    }
    return h;
}

HessianField hessian_at_scale(const GrayImage& img, double sigma) { return hessian_at_scale(img.plane(), sigma); }

EigenPair eig2x2_symmetric(double dxx, double dxy, double dyy) noexcept {
    const double half_trace = 0.5 * (dxx + dyy);
    const double radius = std::hypot(0.5 * (dxx - dyy), dxy);
    const double hi = half_trace + radius;
    const double lo = half_trace - radius;
    const double ahi = std::abs(hi);
    const double alo = std::abs(lo);
    if (alo < ahi) return {lo, hi};
    if (ahi < alo) return {hi, lo};
    // |hi| == |lo|: keep the negative one as lambda2.
    return {hi, lo};
}

double vesselness_response(EigenPair ev, double beta, double c) noexcept {
    if (!(ev.lambda2 < 0.0)) return 0.0;
    const double rb = ev.lambda1 / ev.lambda2;
    const double s2 = ev.lambda1 * ev.lambda1 + ev.lambda2 * ev.lambda2;
    const double v = std::exp(-(rb * rb) / (2.0 * beta * beta)) * (1.0 - std::exp(-s2 / (2.0 * c * c)));
    return std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
}

VesselnessMap vesselness_at_scale(const HessianField& h, double beta, double c) {
    if (!(beta > 0.0) || !(c > 0.0)) throw Error(ErrorCode::InvalidArgument, "beta and c must be positive");
    Plane out(h.width(), h.height());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = vesselness_response(eig2x2_symmetric(h.dxx[i], h.dxy[i], h.dyy[i]), beta, c);
    }
    return {GrayImage(std::move(out)), std::nullopt};
}

VesselnessMap frangi_multiscale(const GrayImage& img, const FrangiParams& p) {
    p.validate();
    check_scale_fits(img.width(), img.height(), p.sigmas.back());
    const GrayImage inverted = invert(img);

    Plane best(img.width(), img.height(), 0.0);
    Plane best_sigma(img.width(), img.height(), p.sigmas.front());
    // Scales are reduced in ascending order so ties resolve to the smallest.
    for (double sigma : p.sigmas) {
        const VesselnessMap v = vesselness_at_scale(hessian_at_scale(inverted, sigma), p.beta, p.c_internal());
        for (std::size_t i = 0; i < best.size(); ++i) {
            if (v.response[i] > best[i]) {
                best[i] = v.response[i];
                best_sigma[i] = sigma;
            }
        }
    }
    return {GrayImage(std::move(best)), std::move(best_sigma)};
}

BinaryMask threshold_map(const VesselnessMap& v, double t) {
    BinaryMask out(v.width(), v.height());
    for (std::size_t i = 0; i < out.size(); ++i) out.set(i, v.response[i] >= t);
    return out;
}

BinaryMask frangi_segment(const RasterImage& img, const FrangiParams& p) {
    return threshold_map(frangi_multiscale(green_channel(img), p), p.threshold);
}

}  // namespace vesselseg
