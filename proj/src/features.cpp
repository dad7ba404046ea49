#include "vesselseg/features.hpp"

#include <charconv>
#include <cmath>
#include <future>
#include <string_view>

#include "vesselseg/gaussian.hpp"
#include "vesselseg/vesselness.hpp"

namespace vesselseg {

std::string format_scale(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace {

std::optional<double> parse_suffix_double(std::string_view name, std::string_view prefix) {
    if (name.substr(0, prefix.size()) != prefix) return std::nullopt;
    const std::string_view rest = name.substr(prefix.size());
    double v = 0.0;
    const auto res = std::from_chars(rest.data(), rest.data() + rest.size(), v);
    if (res.ec != std::errc{} || res.ptr != rest.data() + rest.size()) return std::nullopt;
    return v;
}

Plane local_mean(const Plane& g, int r) {
    const double n = static_cast<double>((2 * r + 1) * (2 * r + 1));
    Plane mean(g.width(), g.height());
    for (int y = 0; y < g.height(); ++y) {
        for (int x = 0; x < g.width(); ++x) {
            double sum = 0.0;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) sum += g.clamped(x + dx, y + dy);
            mean(x, y) = sum / n;
        }
    }
    return mean;
}

Plane local_std(const Plane& g, int r) {
    const Plane mean = local_mean(g, r);
    const double n = static_cast<double>((2 * r + 1) * (2 * r + 1));
    Plane out(g.width(), g.height());
    for (int y = 0; y < g.height(); ++y) {
        for (int x = 0; x < g.width(); ++x) {
            double sq = 0.0;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    const double d = g.clamped(x + dx, y + dy) - mean(x, y);
                    sq += d * d;
                }
            out(x, y) = std::sqrt(sq / n);
        }
    }
    return out;
}

}  // namespace

std::size_t FeatureConfig::dimension() const noexcept {
    if (is_raw()) return raw_names.size();
    return 1 + 2 * scales.size() + 1 + 2 + (include_coordinates ? 2 : 0);
}

std::vector<std::string> FeatureConfig::feature_names() const {
    if (is_raw()) return raw_names;
    std::vector<std::string> names{"green"};
    for (double s : scales) names.push_back("smooth_s" + format_scale(s));
    for (double s : scales) names.push_back("vessel_s" + format_scale(s));
    names.push_back("gradmag");
    names.push_back("lmean_w" + std::to_string(window));
    names.push_back("lstd_w" + std::to_string(window));
    if (include_coordinates) {
        names.push_back("xnorm");
        names.push_back("ynorm");
    }
    return names;
}

void FeatureConfig::validate() const {
    if (is_raw()) return;
    if (window < 3 || window % 2 == 0) throw Error(ErrorCode::InvalidArgument, "window must be odd and >= 3");
    if (scales.empty()) throw Error(ErrorCode::InvalidArgument, "feature scales must be nonempty");
    for (std::size_t i = 0; i < scales.size(); ++i) {
        if (!(scales[i] > 0.0) || !std::isfinite(scales[i]) || (i > 0 && !(scales[i] > scales[i - 1]))) {
            throw Error(ErrorCode::InvalidArgument, "feature scales must be positive and strictly ascending");
        }
    }
}

FeatureConfig FeatureConfig::from_names(const std::vector<std::string>& names) {
    FeatureConfig raw;
    raw.raw_names = names;
    raw.scales.clear();
    if (names.empty()) return raw;

    // green + k smooth + k vessel + gradmag + lmean + lstd [+ xnorm ynorm]
    FeatureConfig cfg;
    cfg.include_coordinates = names.size() >= 2 && names[names.size() - 2] == "xnorm" && names.back() == "ynorm";
    const std::size_t core = names.size() - (cfg.include_coordinates ? 2 : 0);
    if (core < 6 || (core - 4) % 2 != 0 || names[0] != "green") return raw;
    const std::size_t k = (core - 4) / 2;

    cfg.scales.clear();
    for (std::size_t i = 0; i < k; ++i) {
        const auto s = parse_suffix_double(names[1 + i], "smooth_s");
        const auto v = parse_suffix_double(names[1 + k + i], "vessel_s");
        if (!s || !v || *s != *v) return raw;
        cfg.scales.push_back(*s);
    }
    if (names[1 + 2 * k] != "gradmag") return raw;
    const auto wm = parse_suffix_double(names[2 + 2 * k], "lmean_w");
    const auto ws = parse_suffix_double(names[3 + 2 * k], "lstd_w");
    if (!wm || !ws || *wm != *ws || *wm != std::floor(*wm) || *wm > 1e6) return raw;
    cfg.window = static_cast<int>(*wm);
    try {
        cfg.validate();
    } catch (const Error&) {
        return raw;
    }
    if (cfg.feature_names() != names) return raw;
    return cfg;
}

FeaturePlanes::FeaturePlanes(const RasterImage& img, const FeatureConfig& cfg)
    : cfg_(cfg), width_(img.width()), height_(img.height()) {
    if (cfg.is_raw()) throw Error(ErrorCode::InvalidArgument, "cannot extract features for a raw feature schema");
    cfg.validate();
    check_scale_fits(width_, height_, cfg.scales.back());

    const GrayImage green = green_channel(img);
    const GrayImage inverted = invert(green);
    const Plane& g = green.plane();

    // Each plane is independent; build them concurrently.
    std::vector<std::future<Plane>> tasks;
    auto spawn = [&tasks](auto fn) { tasks.push_back(std::async(std::launch::async, std::move(fn))); };
    for (double s : cfg.scales) spawn([&g, s] { return gaussian_smooth(g, s); });
    for (double s : cfg.scales) {
        spawn([&inverted, s] {
            const FrangiParams defaults;
            return vesselness_at_scale(hessian_at_scale(inverted, s), defaults.beta, defaults.c_internal())
                .response.plane();
        });
    }
    spawn([&g, s0 = cfg.scales.front()] {
        const Kernel1D g0 = gaussian_kernel(s0, 0);
        const Kernel1D g1 = gaussian_kernel(s0, 1);
        const Plane gx = convolve_separable(g, g1, g0);
        const Plane gy = convolve_separable(g, g0, g1);
        Plane grad(g.width(), g.height());
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = std::hypot(gx[i], gy[i]);
        return grad;
    });
    const int r = cfg.window / 2;
    spawn([&g, r] { return local_mean(g, r); });
    spawn([&g, r] { return local_std(g, r); });

    planes_.push_back(g);
    for (auto& t : tasks) planes_.push_back(t.get());
}

void FeaturePlanes::fill(int x, int y, std::span<double> out) const {
    const std::size_t idx = static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    std::size_t k = 0;
    for (const Plane& p : planes_) out[k++] = p[idx];
    if (cfg_.include_coordinates) {
        out[k++] = static_cast<double>(x) / width_;
        out[k++] = static_cast<double>(y) / height_;
    }
}

FeatureVector FeaturePlanes::at(int x, int y) const {
    if (x < 0 || y < 0 || x >= width_ || y >= height_) {
        throw Error(ErrorCode::OutOfBounds, "pixel (" + std::to_string(x) + "," + std::to_string(y) + ") outside image");
    }
    FeatureVector v(cfg_.dimension());
    fill(x, y, v);
    return v;
}

FeatureVector extract_features_pixel(const FeaturePlanes& cache, int x, int y) { return cache.at(x, y); }

}  // namespace vesselseg
