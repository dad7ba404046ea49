#include "vesselseg/gaussian.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

namespace vesselseg {

Kernel1D gaussian_kernel(double sigma, int order) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw Error(ErrorCode::InvalidSigma, "sigma must be positive, got " + std::to_string(sigma));
    }
    if (order < 0 || order > 2) {
        throw Error(ErrorCode::InvalidArgument, "gaussian derivative order must be 0, 1 or 2");
    }
    Kernel1D k;
    k.radius = static_cast<int>(std::ceil(3.0 * sigma));
    k.taps.resize(static_cast<std::size_t>(2 * k.radius + 1));

    const double s2 = sigma * sigma;
    const double norm = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * sigma);
    for (int j = -k.radius; j <= k.radius; ++j) {
        const double g = norm * std::exp(-(j * j) / (2.0 * s2));
        double v = g;
        if (order == 1) v = -j / s2 * g;
        if (order == 2) v = (j * j / s2 - 1.0) / s2 * g;
        k.taps[static_cast<std::size_t>(j + k.radius)] = v;
    }

    auto& t = k.taps;
    const int r = k.radius;
    if (order == 0) {
        const double sum = std::accumulate(t.begin(), t.end(), 0.0);
        for (double& v : t) v /= sum;
    } else if (order == 1) {
        // Antisymmetric by construction; rescale the first moment and
        // rebuild from the positive half so taps cancel exactly.
        double moment = 0.0;
        for (int j = 1; j <= r; ++j) moment += 2.0 * j * -k.at(j);
        for (int j = 1; j <= r; ++j) {
            const double v = k.at(j) / moment;
            t[static_cast<std::size_t>(r + j)] = v;
            t[static_cast<std::size_t>(r - j)] = -v;
        }
        t[static_cast<std::size_t>(r)] = 0.0;
    } else {
        const double mean = std::accumulate(t.begin(), t.end(), 0.0) / static_cast<double>(t.size());
        for (double& v : t) v -= mean;
        double moment = 0.0;
        for (int j = -r; j <= r; ++j) moment += static_cast<double>(j) * j * k.at(j);
        for (double& v : t) v *= 2.0 / moment;
        // Fold the residual sum into the center tap.
        double rest = 0.0;
        for (int j = 1; j <= r; ++j) rest += k.at(j) + k.at(-j);
        t[static_cast<std::size_t>(r)] = -rest;
    }
    return k;
}

Plane convolve_x(const Plane& in, const Kernel1D& k) {
    Plane out(in.width(), in.height());
    const int r = k.radius;
    for (int y = 0; y < in.height(); ++y) {
        for (int x = 0; x < in.width(); ++x) {
            double acc = 0.0;
            for (int j = -r; j <= r; ++j) acc += k.at(j) * in.clamped(x - j, y);
            out(x, y) = acc;
        }
    }
    return out;
}

Plane convolve_y(const Plane& in, const Kernel1D& k) {
    Plane out(in.width(), in.height());
    const int r = k.radius;
    for (int y = 0; y < in.height(); ++y) {
        for (int x = 0; x < in.width(); ++x) {
            double acc = 0.0;
            for (int j = -r; j <= r; ++j) acc += k.at(j) * in.clamped(x, y - j);
            out(x, y) = acc;
        }
    }
    return out;
}

Plane convolve_separable(const Plane& in, const Kernel1D& kx, const Kernel1D& ky) {
    return convolve_y(convolve_x(in, kx), ky);
}

Plane gaussian_smooth(const Plane& in, double sigma) {
    const Kernel1D g = gaussian_kernel(sigma, 0);
    return convolve_separable(in, g, g);
}

}  // namespace vesselseg
