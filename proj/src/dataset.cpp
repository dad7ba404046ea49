#include "vesselseg/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "vesselseg/rng.hpp"

namespace vesselseg {

std::string_view to_string(Label label) noexcept { return label == Label::Vessel ? "vessel" : "background"; }

std::string_view to_string(Sampling::Kind kind) noexcept {
    switch (kind) {
        case Sampling::Kind::All: return "all";
        case Sampling::Kind::Balanced: return "balanced";
        case Sampling::Kind::Random: return "random";
    }
    return "all";
}

Sampling::Kind parse_sampling_kind(std::string_view s) {
    if (s == "all") return Sampling::Kind::All;
    if (s == "balanced") return Sampling::Kind::Balanced;
    if (s == "random") return Sampling::Kind::Random;
    throw Error(ErrorCode::InvalidArgument, "sampling must be all, balanced or random");
}

std::size_t Dataset::count(Label label) const noexcept {
    return static_cast<std::size_t>(
        std::count_if(samples.begin(), samples.end(), [label](const Sample& s) { return s.label == label; }));
}

void Dataset::validate() const {
    const std::size_t d = config.dimension();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].features.size() != d) {
            throw Error(ErrorCode::SchemaError, "sample " + std::to_string(i) + " has " +
                                                    std::to_string(samples[i].features.size()) + " features, expected " +
                                                    std::to_string(d));
        }
    }
}

namespace {

std::vector<std::size_t> pick(std::vector<std::size_t> pool, std::size_t n, Rng& rng, const std::string& what) {
    if (pool.size() < n) {
        throw Error(ErrorCode::InsufficientPixels,
                    what + ": requested " + std::to_string(n) + ", only " + std::to_string(pool.size()) + " available");
    }
    partial_shuffle(pool, n, rng);
    pool.resize(n);
    return pool;
}

}  // namespace

Dataset build_dataset(std::span<const LabeledImage> images, const FeatureConfig& cfg, const Sampling& sampling) {
    cfg.validate();
    Dataset ds;
    ds.config = cfg;
    Rng rng(sampling.seed);

    for (std::size_t img_index = 0; img_index < images.size(); ++img_index) {
        const LabeledImage& li = images[img_index];
        if (li.truth.width() != li.image.width() || li.truth.height() != li.image.height()) {
            throw Error(ErrorCode::DimensionMismatch, "mask does not match image '" + li.id + "'");
        }
        const std::string id = li.id.empty() ? "image" + std::to_string(img_index) : li.id;

        std::vector<std::size_t> selected;
        if (sampling.kind == Sampling::Kind::All) {
            selected.resize(li.image.size());
            for (std::size_t i = 0; i < selected.size(); ++i) selected[i] = i;
        } else if (sampling.kind == Sampling::Kind::Balanced) {
            std::vector<std::size_t> vessel, background;
            for (std::size_t i = 0; i < li.truth.size(); ++i) (li.truth[i] ? vessel : background).push_back(i);
            selected = pick(std::move(vessel), sampling.n, rng, id + " vessel pixels");
            const auto bg = pick(std::move(background), sampling.n, rng, id + " background pixels");
            selected.insert(selected.end(), bg.begin(), bg.end());
        } else {
            std::vector<std::size_t> all(li.image.size());
            for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
            selected = pick(std::move(all), sampling.n, rng, id + " pixels");
        }
        std::sort(selected.begin(), selected.end());

        const FeaturePlanes planes(li.image, cfg);
        const auto w = static_cast<std::size_t>(li.image.width());
        for (std::size_t idx : selected) {
            const int x = static_cast<int>(idx % w);
            const int y = static_cast<int>(idx / w);
            Sample s;
            s.features.resize(cfg.dimension());
            planes.fill(x, y, s.features);
            s.label = li.truth[idx] ? Label::Vessel : Label::Background;
            s.origin = SampleOrigin{id, x, y};
            ds.samples.push_back(std::move(s));
        }
    }
    return ds;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double fraction, std::uint64_t seed, bool stratified) {
    if (ds.samples.empty()) throw Error(ErrorCode::EmptyDataset, "cannot split an empty dataset");
    if (!(fraction > 0.0 && fraction < 1.0)) throw Error(ErrorCode::InvalidArgument, "fraction must be in (0,1)");

    Rng rng(seed);
    std::vector<bool> first(ds.samples.size(), false);
    auto take = [&](std::vector<std::size_t> pool) {
        const auto n = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(pool.size())));
        partial_shuffle(pool, pool.size(), rng);
        for (std::size_t i = 0; i < n; ++i) first[pool[i]] = true;
    };
    if (stratified) {
        for (Label label : {Label::Background, Label::Vessel}) {
            std::vector<std::size_t> pool;
            for (std::size_t i = 0; i < ds.samples.size(); ++i)
                if (ds.samples[i].label == label) pool.push_back(i);
            take(std::move(pool));
        }
    } else {
        std::vector<std::size_t> pool(ds.samples.size());
        for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
        take(std::move(pool));
    }

    Dataset a{ds.config, {}, ds.relation};
    Dataset b{ds.config, {}, ds.relation};
    for (std::size_t i = 0; i < ds.samples.size(); ++i) (first[i] ? a : b).samples.push_back(ds.samples[i]);
    return {std::move(a), std::move(b)};
}

}  // namespace vesselseg
