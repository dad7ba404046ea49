#pragma once

// Reference implementations used only by tests. They are written directly
// from the definitions, without sharing code paths with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <queue>
#include <set>
#include <utility>
#include <vector>

#include "vesselseg/image.hpp"

namespace vesselseg::testing {

/// Dilation as a union of translated copies of the mask.
inline BinaryMask oracle_dilate(const BinaryMask& m, const std::vector<Point>& offsets) {
    BinaryMask out(m.width(), m.height());
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x) {
            if (!m(x, y)) continue;
            for (const Point& o : offsets) {
                // Symmetric element: stamping +o equals testing -o.
                const int tx = x - o.x, ty = y - o.y;
                if (m.in_bounds(tx, ty)) out.set(tx, ty);
            }
        }
    return out;
}

/// Erosion as the set of placements fully inside the vessel set.
inline BinaryMask oracle_erode(const BinaryMask& m, const std::vector<Point>& offsets) {
    BinaryMask out(m.width(), m.height());
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x) {
            int inside = 0;
            for (const Point& o : offsets) {
                const int sx = x + o.x, sy = y + o.y;
                if (m.in_bounds(sx, sy) && m(sx, sy)) ++inside;
            }
            out.set(x, y, inside == static_cast<int>(offsets.size()));
        }
    return out;
}

/// Seed-value growth: union over seeds of the connected set reachable from
/// each seed through pixels within `tol` of that seed's value. One plain
/// flood per seed.
inline BinaryMask oracle_grow_seed_value(const GrayImage& img, const std::vector<Point>& seeds, double tol,
                                         const std::vector<Point>& offsets) {
    BinaryMask out(img.width(), img.height());
    for (const Point& s : seeds) {
        const double ref = img(s.x, s.y);
        std::vector<std::vector<bool>> seen(img.height(), std::vector<bool>(img.width(), false));
        std::queue<Point> q;
        q.push(s);
        seen[s.y][s.x] = true;
        while (!q.empty()) {
            const Point p = q.front();
            q.pop();
            out.set(p.x, p.y);
            for (const Point& o : offsets) {
                const Point n{p.x + o.x, p.y + o.y};
                if (n.x < 0 || n.y < 0 || n.x >= img.width() || n.y >= img.height()) continue;
                if (seen[n.y][n.x]) continue;
                if (std::abs(img(n.x, n.y) - ref) > tol) continue;
                seen[n.y][n.x] = true;
                q.push(n);
            }
        }
    }
    return out;
}

/// Running-region-mean growth. Seeds are taken in row-major order; seeds
/// adjacent under `offsets` are labelled into one region by BFS over the
/// seed set; then a single FIFO queue grows all regions, each against the
/// mean of its own accepted pixels.
inline BinaryMask oracle_grow_region_mean(const GrayImage& img, std::vector<Point> seeds, double tol,
                                          const std::vector<Point>& offsets, std::size_t cap) {
    auto before = [](const Point& a, const Point& b) { return a.y != b.y ? a.y < b.y : a.x < b.x; };
    std::sort(seeds.begin(), seeds.end(), before);
    seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());

    const int w = img.width(), h = img.height();
    std::vector<int> label(static_cast<std::size_t>(w * h), -1);
    std::map<std::pair<int, int>, int> seed_index;
    for (std::size_t i = 0; i < seeds.size(); ++i) seed_index[{seeds[i].x, seeds[i].y}] = static_cast<int>(i);

    // Label seed components; the label is the first (row-major) seed reached.
    std::vector<int> comp(seeds.size(), -1);
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        if (comp[i] != -1) continue;
        std::queue<std::size_t> q;
        q.push(i);
        comp[i] = static_cast<int>(i);
        while (!q.empty()) {
            const std::size_t k = q.front();
            q.pop();
            for (const Point& o : offsets) {
                auto it = seed_index.find({seeds[k].x + o.x, seeds[k].y + o.y});
                if (it == seed_index.end()) continue;
                const auto j = static_cast<std::size_t>(it->second);
                if (comp[j] == -1) {
                    comp[j] = static_cast<int>(i);
                    q.push(j);
                }
            }
        }
    }

    std::vector<double> total(seeds.size(), 0.0);
    std::vector<std::size_t> n(seeds.size(), 0);
    BinaryMask out(w, h);
    std::queue<Point> q;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        const Point s = seeds[i];
        label[static_cast<std::size_t>(s.y * w + s.x)] = comp[i];
        total[static_cast<std::size_t>(comp[i])] += img(s.x, s.y);
        n[static_cast<std::size_t>(comp[i])] += 1;
        out.set(s.x, s.y);
        q.push(s);
    }
    while (!q.empty()) {
        const Point p = q.front();
        q.pop();
        const int r = label[static_cast<std::size_t>(p.y * w + p.x)];
        for (const Point& o : offsets) {
            const Point c{p.x + o.x, p.y + o.y};
            if (c.x < 0 || c.y < 0 || c.x >= w || c.y >= h) continue;
            if (label[static_cast<std::size_t>(c.y * w + c.x)] != -1) continue;
            const auto ri = static_cast<std::size_t>(r);
            if (n[ri] >= cap) continue;
            if (std::abs(img(c.x, c.y) - total[ri] / static_cast<double>(n[ri])) > tol) continue;
            label[static_cast<std::size_t>(c.y * w + c.x)] = r;
            total[ri] += img(c.x, c.y);
            n[ri] += 1;
            out.set(c.x, c.y);
            q.push(c);
        }
    }
    return out;
}

/// Pixels of `mask` reachable from some seed by steps in `offsets` that
/// stay inside `mask`.
inline BinaryMask oracle_reachable(const BinaryMask& mask, const std::vector<Point>& seeds,
                                   const std::vector<Point>& offsets) {
    BinaryMask out(mask.width(), mask.height());
    std::queue<Point> q;
    for (const Point& s : seeds) {
        if (!mask(s.x, s.y) || out(s.x, s.y)) continue;
        out.set(s.x, s.y);
        q.push(s);
    }
    while (!q.empty()) {
        const Point p = q.front();
        q.pop();
        for (const Point& o : offsets) {
            const int x = p.x + o.x, y = p.y + o.y;
            if (!mask.in_bounds(x, y) || !mask(x, y) || out(x, y)) continue;
            out.set(x, y);
            q.push({x, y});
        }
    }
    return out;
}

/// Mean of the (2r+1)^2 window around (x, y) with edge replication.
inline double oracle_window_mean(const Plane& p, int x, int y, int r) {
    double s = 0.0;
    int n = 0;
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
            const int cx = std::clamp(x + dx, 0, p.width() - 1);
            const int cy = std::clamp(y + dy, 0, p.height() - 1);
            s += p(cx, cy);
            ++n;
        }
    return s / n;
}

}  // namespace vesselseg::testing
