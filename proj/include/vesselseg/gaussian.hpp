#pragma once

#include <vector>

#include "vesselseg/image.hpp"

namespace vesselseg {

/// Sampled Gaussian (order 0) or Gaussian derivative (order 1, 2), stored as
/// a convolution kernel: taps[i] is the weight at offset i - radius.
///
/// Taps are corrected so the discrete moments are exact:
///   order 0: sum = 1
///   order 1: sum = 0, sum(-j * k[j]) = 1   (recovers d/dx x = 1)
///   order 2: sum = 0, sum(j^2 * k[j]) = 2  (recovers d2/dx2 x^2 = 2)
struct Kernel1D {
    int radius = 0;
    std::vector<double> taps;

    double at(int offset) const { return taps[static_cast<std::size_t>(offset + radius)]; }
};

/// Half-width is ceil(3 sigma). Throws InvalidSigma for sigma <= 0 and
/// InvalidArgument for orders other than 0, 1, 2.
Kernel1D gaussian_kernel(double sigma, int order);

/// Edge-replicating 1-D convolutions along rows (x) and columns (y).
Plane convolve_x(const Plane& in, const Kernel1D& k);
Plane convolve_y(const Plane& in, const Kernel1D& k);

/// x-kernel then y-kernel.
Plane convolve_separable(const Plane& in, const Kernel1D& kx, const Kernel1D& ky);

Plane gaussian_smooth(const Plane& in, double sigma);

}  // namespace vesselseg
