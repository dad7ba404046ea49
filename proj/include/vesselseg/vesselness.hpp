#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "vesselseg/image.hpp"

namespace vesselseg {

/// Parameters of the multi-scale Frangi filter.
///
/// `c` is given in 8-bit intensity units (the conventional default of 15)
/// and divided by 255 before use, since gray images live in [0, 1].
struct FrangiParams {
    std::vector<double> sigmas{1.0, 2.0, 3.0, 4.0};
    double beta = 0.5;
    double c = 15.0;
    double threshold = 0.05;

    /// c in the [0, 1] units the Hessian is computed in.
    double c_internal() const noexcept { return c / 255.0; }

    /// Throws InvalidArgument unless sigmas are nonempty, positive, strictly
    /// ascending, beta and c positive and threshold in [0, 1].
    void validate() const;

    bool operator==(const FrangiParams&) const = default;
};

/// Scale-normalized (sigma^2) second derivatives.
struct HessianField {
    Plane dxx;
    Plane dxy;
    Plane dyy;

    int width() const noexcept { return dxx.width(); }
    int height() const noexcept { return dxx.height(); }
};

struct VesselnessMap {
    GrayImage response;
    /// Sigma that produced the maximum at each pixel (multi-scale only).
    std::optional<Plane> best_sigma;

    int width() const noexcept { return response.width(); }
    int height() const noexcept { return response.height(); }
};

struct EigenPair {
    double lambda1;  ///< smaller magnitude
    double lambda2;  ///< larger magnitude
};

/// Throws ImageTooSmall when either dimension is <= ceil(3 sigma).
void check_scale_fits(int width, int height, double sigma);

HessianField hessian_at_scale(const Plane& img, double sigma);
HessianField hessian_at_scale(const GrayImage& img, double sigma);

/// Eigenvalues of [[dxx, dxy], [dxy, dyy]] with |lambda1| <= |lambda2|.
/// On a magnitude tie with opposite signs, lambda2 is the negative one.
EigenPair eig2x2_symmetric(double dxx, double dxy, double dyy) noexcept;

/// Frangi response for bright ridges on a dark background (lambda2 < 0).
/// `c` is in the Hessian's own units.
double vesselness_response(EigenPair ev, double beta, double c) noexcept;

VesselnessMap vesselness_at_scale(const HessianField& h, double beta, double c);

/// Pixelwise maximum over p.sigmas, computed on invert(img) so that dark
/// vessels on a bright fundus become bright ridges. Ties keep the smaller
/// sigma in best_sigma.
VesselnessMap frangi_multiscale(const GrayImage& img, const FrangiParams& p);

/// vessel iff value >= t.
BinaryMask threshold_map(const VesselnessMap& v, double t);

/// green_channel -> frangi_multiscale -> threshold_map(p.threshold).
BinaryMask frangi_segment(const RasterImage& img, const FrangiParams& p);

}  // namespace vesselseg
