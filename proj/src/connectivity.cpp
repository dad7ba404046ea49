#include "vesselseg/connectivity.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>
#include <string>

namespace vesselseg {

void GrowthParams::validate() const {
    if (!(tolerance >= 0.0 && tolerance <= 1.0)) throw Error(ErrorCode::InvalidArgument, "tolerance must be in [0,1]");
    if (radius < 1) throw Error(ErrorCode::InvalidArgument, "radius must be >= 1");
    if (max_pixels && *max_pixels < 1) throw Error(ErrorCode::InvalidArgument, "max_pixels must be >= 1");
}

void ConnectivityParams::validate() const {
    frangi.validate();
    growth.validate();
    if (!(seed_threshold >= 0.0 && seed_threshold <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "seed_threshold must be in [0,1]");
    }
}

std::string_view to_string(Neighborhood n) noexcept { return n == Neighborhood::Four ? "4" : "8"; }

std::string_view to_string(GrowthReference r) noexcept {
    return r == GrowthReference::SeedValue ? "seed" : "mean";
}

std::string_view to_string(GrowthVariant v) noexcept { return v == GrowthVariant::Radial ? "radial" : "immediate"; }

Neighborhood parse_neighborhood(std::string_view s) {
    if (s == "4") return Neighborhood::Four;
    if (s == "8") return Neighborhood::Eight;
    throw Error(ErrorCode::InvalidArgument, "neighborhood must be 4 or 8, got '" + std::string(s) + "'");
}

GrowthReference parse_reference(std::string_view s) {
    if (s == "seed") return GrowthReference::SeedValue;
    if (s == "mean") return GrowthReference::RegionMean;
    throw Error(ErrorCode::InvalidArgument, "reference must be seed or mean, got '" + std::string(s) + "'");
}

GrowthVariant parse_variant(std::string_view s) {
    if (s == "immediate") return GrowthVariant::Immediate;
    if (s == "radial") return GrowthVariant::Radial;
    throw Error(ErrorCode::InvalidArgument, "variant must be immediate or radial, got '" + std::string(s) + "'");
}

std::vector<Point> neighborhood_offsets(Neighborhood n) {
    std::vector<Point> out;
    for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            if (n == Neighborhood::Four && dx != 0 && dy != 0) continue;
            out.push_back({dx, dy});
        }
    }
    return out;
}

std::vector<Point> disk_offsets(int radius) {
    if (radius < 1) throw Error(ErrorCode::InvalidArgument, "radius must be >= 1");
    std::vector<Point> out;
    for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
            if ((dx == 0 && dy == 0) || dx * dx + dy * dy > radius * radius) continue;
            out.push_back({dx, dy});
        }
    }
    return out;
}

SeedSet extract_seeds(const VesselnessMap& v, double seed_threshold) {
    SeedSet seeds;
    seeds.source_threshold = seed_threshold;
    for (int y = 0; y < v.height(); ++y) {
        for (int x = 0; x < v.width(); ++x) {
            if (v.response(x, y) >= seed_threshold) seeds.coords.push_back({x, y});
        }
    }
    return seeds;
}

namespace {

constexpr int kUnvisited = -1;

std::vector<std::size_t> canonical_seeds(const GrayImage& img, const SeedSet& seeds) {
    std::vector<std::size_t> idx;
    idx.reserve(seeds.coords.size());
    const std::size_t w = static_cast<std::size_t>(img.width());
    for (const Point& s : seeds.coords) {
        if (s.x < 0 || s.y < 0 || s.x >= img.width() || s.y >= img.height()) {
            throw Error(ErrorCode::SeedOutOfBounds,
                        "seed (" + std::to_string(s.x) + "," + std::to_string(s.y) + ") outside image");
        }
        idx.push_back(static_cast<std::size_t>(s.y) * w + static_cast<std::size_t>(s.x));
    }
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    return idx;
}

struct Grower {
    const GrayImage& img;
    std::span<const Point> offsets;
    double tolerance;
    std::size_t cap;

    int w() const { return img.width(); }
    int h() const { return img.height(); }

    template <typename Fn>
    void for_each_candidate(std::size_t p, Fn&& fn) const {
        const int x = static_cast<int>(p % static_cast<std::size_t>(w()));
        const int y = static_cast<int>(p / static_cast<std::size_t>(w()));
        for (const Point& o : offsets) {
            const int nx = x + o.x;
            const int ny = y + o.y;
            if (nx < 0 || ny < 0 || nx >= w() || ny >= h()) continue;
            fn(static_cast<std::size_t>(ny) * static_cast<std::size_t>(w()) + static_cast<std::size_t>(nx));
        }
    }

    // Seeds touching each other form one region; each region tracks the
    // running mean of everything it has accepted.
    BinaryMask region_mean(const std::vector<std::size_t>& seeds) const {
        BinaryMask out(w(), h());
        std::vector<int> owner(img.size(), kUnvisited);

        std::vector<int> parent(seeds.size());
        std::iota(parent.begin(), parent.end(), 0);
        auto find = [&](int a) {
            while (parent[static_cast<std::size_t>(a)] != a) {
                parent[static_cast<std::size_t>(a)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
                a = parent[static_cast<std::size_t>(a)];
            }
            return a;
        };
        for (std::size_t i = 0; i < seeds.size(); ++i) owner[seeds[i]] = static_cast<int>(i);
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            for_each_candidate(seeds[i], [&](std::size_t q) {
                if (owner[q] == kUnvisited) return;
                const int a = find(static_cast<int>(i));
                const int b = find(owner[q]);
                if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
            });
        }

        std::vector<double> sum(seeds.size(), 0.0);
        std::vector<std::size_t> count(seeds.size(), 0);
        std::deque<std::size_t> queue;
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            const int r = find(static_cast<int>(i));
            owner[seeds[i]] = r;
            sum[static_cast<std::size_t>(r)] += img[seeds[i]];
            ++count[static_cast<std::size_t>(r)];
            out.set(seeds[i]);
            queue.push_back(seeds[i]);
        }

        while (!queue.empty()) {
            const std::size_t p = queue.front();
            queue.pop_front();
            const auto r = static_cast<std::size_t>(owner[p]);
            for_each_candidate(p, [&](std::size_t q) {
                if (owner[q] != kUnvisited || count[r] >= cap) return;
                const double ref = sum[r] / static_cast<double>(count[r]);
                if (std::abs(img[q] - ref) > tolerance) return;
                owner[q] = static_cast<int>(r);
                sum[r] += img[q];
                ++count[r];
                out.set(q);
                queue.push_back(q);
            });
        }
        return out;
    }

    // Flood from `sources` through pixels within tolerance of `ref`, marking
    // into `out`. `stamp` tags visited pixels for this pass only.
    void flood(const std::vector<std::size_t>& sources, double ref, std::size_t limit, std::vector<std::uint32_t>& visit,
               std::uint32_t stamp, BinaryMask& out) const {
        std::deque<std::size_t> queue;
        std::size_t accepted = 0;
        for (std::size_t s : sources) {
            if (visit[s] == stamp) continue;
            visit[s] = stamp;
            out.set(s);
            ++accepted;
            queue.push_back(s);
        }
        while (!queue.empty()) {
            const std::size_t p = queue.front();
            queue.pop_front();
            for_each_candidate(p, [&](std::size_t q) {
                if (visit[q] == stamp || accepted >= limit) return;
                if (std::abs(img[q] - ref) > tolerance) return;
                visit[q] = stamp;
                out.set(q);
                ++accepted;
                queue.push_back(q);
            });
        }
    }

    BinaryMask seed_value(const std::vector<std::size_t>& seeds) const {
        BinaryMask out(w(), h());
        std::vector<std::uint32_t> visit(img.size(), 0);
        std::uint32_t stamp = 0;
        if (cap >= img.size()) {
            // Uncapped: seeds sharing a gray value share one flood.
            std::map<double, std::vector<std::size_t>> by_value;
            for (std::size_t s : seeds) by_value[img[s]].push_back(s);
            for (const auto& [value, group] : by_value) flood(group, value, img.size(), visit, ++stamp, out);
        } else {
            for (std::size_t s : seeds) flood({s}, img[s], cap, visit, ++stamp, out);
        }
        return out;
    }
};

}  // namespace

BinaryMask grow_region(const GrayImage& img, const SeedSet& seeds, const GrowthParams& p,
                       std::span<const Point> offsets) {
    p.validate();
    const std::vector<std::size_t> canon = canonical_seeds(img, seeds);
    const Grower grower{img, offsets, p.tolerance, p.max_pixels.value_or(img.size())};
    return p.reference == GrowthReference::RegionMean ? grower.region_mean(canon) : grower.seed_value(canon);
}

BinaryMask grow_immediate(const GrayImage& img, const SeedSet& seeds, const GrowthParams& p) {
    const std::vector<Point> offsets = neighborhood_offsets(p.neighborhood);
    return grow_region(img, seeds, p, offsets);
}

BinaryMask grow_radial(const GrayImage& img, const SeedSet& seeds, const GrowthParams& p) {
    p.validate();
    const std::vector<Point> offsets = disk_offsets(p.radius);
    return grow_region(img, seeds, p, offsets);
}

BinaryMask connectivity_filter(const RasterImage& img, const ConnectivityParams& p) {
    p.validate();
    const GrayImage gray = green_channel(img);
    const VesselnessMap v = frangi_multiscale(gray, p.frangi);
    const SeedSet seeds = extract_seeds(v, p.seed_threshold);
    const BinaryMask grown =
        p.variant == GrowthVariant::Radial ? grow_radial(gray, seeds, p.growth) : grow_immediate(gray, seeds, p.growth);
    return apply_cleanup(grown, p.cleanup);
}

}  // namespace vesselseg
