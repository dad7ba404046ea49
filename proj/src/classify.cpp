#include "vesselseg/classify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <numbers>
#include <numeric>
#include <thread>

#include "vesselseg/image_io.hpp"
#include "vesselseg/json_io.hpp"

namespace vesselseg {

void ModelKind::validate() const {
    if (type == Type::Knn && (k < 1 || k % 2 == 0)) throw Error(ErrorCode::InvalidArgument, "k must be odd and >= 1");
    if (type == Type::DecisionTree) {
        if (max_depth < 1) throw Error(ErrorCode::InvalidArgument, "max_depth must be >= 1");
        if (min_leaf < 1) throw Error(ErrorCode::InvalidArgument, "min_leaf must be >= 1");
    }
}

bool ModelKind::operator==(const ModelKind& o) const {
    if (type != o.type) return false;
    switch (type) {
        case Type::GaussianNaiveBayes: return true;
        case Type::Knn: return k == o.k;
        case Type::DecisionTree: return max_depth == o.max_depth && min_leaf == o.min_leaf;
    }
    return false;
}

std::string_view to_string(ModelKind::Type type) noexcept {
    switch (type) {
        case ModelKind::Type::GaussianNaiveBayes: return "gaussian_naive_bayes";
        case ModelKind::Type::Knn: return "knn";
        case ModelKind::Type::DecisionTree: return "decision_tree";
    }
    return "gaussian_naive_bayes";
}

ModelKind::Type parse_model_type(std::string_view s) {
    if (s == "gaussian_naive_bayes" || s == "nb") return ModelKind::Type::GaussianNaiveBayes;
    if (s == "knn") return ModelKind::Type::Knn;
    if (s == "decision_tree" || s == "tree") return ModelKind::Type::DecisionTree;
    throw Error(ErrorCode::InvalidArgument, "model type must be gaussian_naive_bayes, knn or decision_tree");
}

namespace {

constexpr std::size_t kBg = 0;
constexpr std::size_t kVessel = 1;

std::size_t index_of(Label l) noexcept { return l == Label::Vessel ? kVessel : kBg; }

std::string current_timestamp() {
    std::time_t t = 0;
    if (const char* env = std::getenv("SOURCE_DATE_EPOCH"); env && *env) {
        t = static_cast<std::time_t>(std::strtoll(env, nullptr, 10));
    } else {
        t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    }
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// ---- naive Bayes ----

NaiveBayesParams fit_naive_bayes(const Dataset& ds) {
    const std::size_t d = ds.config.dimension();
    NaiveBayesParams p;
    double n[2] = {0.0, 0.0};
    for (std::size_t c = 0; c < 2; ++c) {
        p.mean[c].assign(d, 0.0);
        p.variance[c].assign(d, 0.0);
    }
    for (const Sample& s : ds.samples) {
        const std::size_t c = index_of(s.label);
        n[c] += 1.0;
        for (std::size_t i = 0; i < d; ++i) p.mean[c][i] += s.features[i];
    }
    for (std::size_t c = 0; c < 2; ++c)
        for (double& m : p.mean[c]) m /= n[c];
    for (const Sample& s : ds.samples) {
        const std::size_t c = index_of(s.label);
        for (std::size_t i = 0; i < d; ++i) {
            const double e = s.features[i] - p.mean[c][i];
            p.variance[c][i] += e * e;
        }
    }
    for (std::size_t c = 0; c < 2; ++c) {
        for (double& v : p.variance[c]) v = std::max(v / n[c], kVarianceFloor);
        p.prior[c] = n[c] / (n[0] + n[1]);
    }
    return p;
}

double score_naive_bayes(const NaiveBayesParams& p, std::span<const double> f) {
    double log_post[2];
    for (std::size_t c = 0; c < 2; ++c) {
        double lp = std::log(p.prior[c]);
        for (std::size_t i = 0; i < f.size(); ++i) {
            const double e = f[i] - p.mean[c][i];
            lp -= 0.5 * std::log(2.0 * std::numbers::pi * p.variance[c][i]) + e * e / (2.0 * p.variance[c][i]);
        }
        log_post[c] = lp;
    }
    return 1.0 / (1.0 + std::exp(log_post[kBg] - log_post[kVessel]));
}

// ---- kNN ----

double score_knn(const KnnParams& p, int k, std::span<const double> f) {
    const std::size_t n = p.points.size();
    std::vector<std::pair<double, std::size_t>> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < f.size(); ++j) {
            const double e = f[j] - p.points[i][j];
            s += e * e;
        }
        dist[i] = {s, i};
    }
    const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), n);
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
    std::size_t votes = 0;
    for (std::size_t i = 0; i < kk; ++i) votes += p.labels[dist[i].second] == Label::Vessel;
    return static_cast<double>(votes) / static_cast<double>(kk);
}

// ---- decision tree ----

__extension__ using u128 = unsigned __int128;

/// Sum over children of (a^2 + b^2) / n as an exact fraction; minimizing
/// weighted Gini impurity is the same as maximizing this.
struct Purity {
    u128 num = 0;
    u128 den = 1;

    bool operator>(const Purity& o) const { return num * o.den > o.num * den; }
};

Purity purity(const std::uint64_t l[2], const std::uint64_t r[2]) {
    const u128 nl = l[0] + l[1];
    const u128 nr = r[0] + r[1];
    const u128 a = u128(l[0]) * l[0] + u128(l[1]) * l[1];
    const u128 b = u128(r[0]) * r[0] + u128(r[1]) * r[1];
    if (nr == 0) return {a, nl};
    if (nl == 0) return {b, nr};
    return {a * nr + b * nl, nl * nr};
}

struct TreeBuilder {
    const Dataset& ds;
    const ModelKind& kind;
    std::vector<TreeNode> nodes;

    int build(std::vector<std::size_t>& idx, int depth) {
        TreeNode node;
        for (std::size_t i : idx) ++node.count[index_of(ds.samples[i].label)];
        const int id = static_cast<int>(nodes.size());
        nodes.push_back(node);

        const bool pure = node.count[kBg] == 0 || node.count[kVessel] == 0;
        if (pure || depth >= kind.max_depth || idx.size() < 2 * static_cast<std::size_t>(kind.min_leaf)) return id;

        const std::uint64_t none[2] = {0, 0};
        Purity best = purity(node.count, none);
        int best_feature = -1;
        double best_threshold = 0.0;

        const std::size_t d = ds.config.dimension();
        const std::size_t min_leaf = static_cast<std::size_t>(kind.min_leaf);
        std::vector<std::size_t> order(idx);
        for (std::size_t f = 0; f < d; ++f) {
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return ds.samples[a].features[f] < ds.samples[b].features[f];
            });
            std::uint64_t left[2] = {0, 0};
            std::uint64_t right[2] = {node.count[0], node.count[1]};
            for (std::size_t i = 0; i + 1 < order.size(); ++i) {
                const std::size_t c = index_of(ds.samples[order[i]].label);
                ++left[c];
                --right[c];
                const double a = ds.samples[order[i]].features[f];
                const double b = ds.samples[order[i + 1]].features[f];
                if (!(a < b)) continue;
                if (i + 1 < min_leaf || order.size() - i - 1 < min_leaf) continue;
                const Purity g = purity(left, right);
                if (g > best) {
                    best = g;
                    best_feature = static_cast<int>(f);
                    best_threshold = a + (b - a) / 2.0;
                    if (!(best_threshold < b)) best_threshold = a;
                }
            }
        }
        if (best_feature < 0) return id;

        std::vector<std::size_t> li, ri;
        for (std::size_t i : idx)
            (ds.samples[i].features[static_cast<std::size_t>(best_feature)] <= best_threshold ? li : ri).push_back(i);
        idx.clear();
        idx.shrink_to_fit();
        nodes[static_cast<std::size_t>(id)].feature = best_feature;
        nodes[static_cast<std::size_t>(id)].threshold = best_threshold;
        const int l = build(li, depth + 1);
        const int r = build(ri, depth + 1);
        nodes[static_cast<std::size_t>(id)].left = l;
        nodes[static_cast<std::size_t>(id)].right = r;
        return id;
    }
};

double score_tree(const TreeParams& p, std::span<const double> f) {
    std::size_t at = 0;
    while (!p.nodes[at].is_leaf()) {
        const TreeNode& n = p.nodes[at];
        at = static_cast<std::size_t>(f[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    const TreeNode& leaf = p.nodes[at];
    return static_cast<double>(leaf.count[kVessel]) / static_cast<double>(leaf.count[kBg] + leaf.count[kVessel]);
}

double score(const TrainedModel& m, std::span<const double> f) {
    return std::visit(
        [&](const auto& p) -> double {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, NaiveBayesParams>) {
                return score_naive_bayes(p, f);
            } else if constexpr (std::is_same_v<P, KnnParams>) {
                return score_knn(p, m.kind.k, f);
            } else {
                return score_tree(p, f);
            }
        },
        m.params);
}

}  // namespace

TrainedModel train(const Dataset& ds, const ModelKind& kind) {
    kind.validate();
    if (!ds.config.is_raw()) ds.config.validate();
    for (const Sample& s : ds.samples) {
        if (s.features.size() != ds.config.dimension()) {
            throw Error(ErrorCode::SchemaMismatch, "sample length differs from the dataset schema");
        }
        for (double v : s.features)
            if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "non-finite feature value");
    }
    const std::size_t nv = ds.count(Label::Vessel);
    const std::size_t nb = ds.count(Label::Background);
    if (nv == 0 || nb == 0) throw Error(ErrorCode::SingleClassDataset, "training needs samples of both classes");

    TrainedModel m;
    m.kind = kind;
    m.config = ds.config;
    m.meta.samples[kBg] = nb;
    m.meta.samples[kVessel] = nv;
    m.meta.timestamp = current_timestamp();

    switch (kind.type) {
        case ModelKind::Type::GaussianNaiveBayes: m.params = fit_naive_bayes(ds); break;
        case ModelKind::Type::Knn: {
            KnnParams p;
            for (const Sample& s : ds.samples) {
                p.points.push_back(s.features);
                p.labels.push_back(s.label);
            }
            m.params = std::move(p);
            break;
        }
        case ModelKind::Type::DecisionTree: {
            TreeBuilder b{ds, kind, {}};
            std::vector<std::size_t> idx(ds.samples.size());
            std::iota(idx.begin(), idx.end(), std::size_t{0});
            b.build(idx, 0);
            m.params = TreeParams{std::move(b.nodes)};
            break;
        }
    }
    return m;
}

Prediction predict_sample(const TrainedModel& m, std::span<const double> f, double threshold) {
    if (f.size() != m.config.dimension()) {
        throw Error(ErrorCode::SchemaMismatch, "feature vector has " + std::to_string(f.size()) +
                                                   " values, model expects " + std::to_string(m.config.dimension()));
    }
    const double s = std::clamp(score(m, f), 0.0, 1.0);
    return {s > threshold ? Label::Vessel : Label::Background, s};
}

MaskPrediction predict_mask(const TrainedModel& m, const RasterImage& img, double threshold) {
    if (m.config.is_raw()) {
        throw Error(ErrorCode::SchemaMismatch, "model was trained on a foreign feature schema and cannot read images");
    }
    const FeaturePlanes planes(img, m.config);
    const int w = img.width();
    const int h = img.height();
    Plane scores(w, h);
    BinaryMask mask(w, h);

    const unsigned workers = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(), 16u));
    auto run_rows = [&](int y0, int y1) {
        FeatureVector f(m.config.dimension());
        for (int y = y0; y < y1; ++y)
            for (int x = 0; x < w; ++x) {
                planes.fill(x, y, f);
                const Prediction p = predict_sample(m, f, threshold);
                scores(x, y) = p.score;
                mask.set(x, y, p.label == Label::Vessel);
            }
    };
    if (workers == 1) {
        run_rows(0, h);
    } else {
        std::vector<std::jthread> pool;
        const int step = (h + static_cast<int>(workers) - 1) / static_cast<int>(workers);
        for (int y0 = 0; y0 < h; y0 += step) pool.emplace_back(run_rows, y0, std::min(h, y0 + step));
    }
    return {std::move(mask), GrayImage(std::move(scores))};
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& o) noexcept {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
}

EvalReport EvalReport::from_confusion(const ConfusionMatrix& c) {
    auto ratio = [](std::uint64_t num, std::uint64_t den, bool agree) {
        if (den == 0) return agree ? 1.0 : 0.0;
        return static_cast<double>(num) / static_cast<double>(den);
    };
    EvalReport r;
    r.confusion = c;
    r.accuracy = ratio(c.tp + c.tn, c.total(), true);
    r.sensitivity = ratio(c.tp, c.tp + c.fn, c.fp == 0);
    r.specificity = ratio(c.tn, c.tn + c.fp, c.fn == 0);
    r.dice = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn, true);
    r.jaccard = ratio(c.tp, c.tp + c.fp + c.fn, true);
    return r;
}

ConfusionMatrix confusion(const BinaryMask& predicted, const BinaryMask& truth) {
    if (!predicted.same_shape(truth)) throw Error(ErrorCode::DimensionMismatch, "mask sizes differ");
    ConfusionMatrix c;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const bool p = predicted[i] != 0;
        const bool t = truth[i] != 0;
        (p ? (t ? c.tp : c.fp) : (t ? c.fn : c.tn))++;
    }
    return c;
}

EvalReport evaluate_masks(const BinaryMask& predicted, const BinaryMask& truth) {
    return EvalReport::from_confusion(confusion(predicted, truth));
}

EvalReport evaluate(const TrainedModel& m, std::span<const LabeledImage> pairs, double threshold) {
    ConfusionMatrix total;
    for (const LabeledImage& li : pairs) {
        if (li.truth.width() != li.image.width() || li.truth.height() != li.image.height()) {
            throw Error(ErrorCode::DimensionMismatch, "mask does not match image '" + li.id + "'");
        }
        total += confusion(predict_mask(m, li.image, threshold).mask, li.truth);
    }
    return EvalReport::from_confusion(total);
}

EvalReport evaluate_dataset(const TrainedModel& m, const Dataset& ds, double threshold) {
    ConfusionMatrix c;
    for (const Sample& s : ds.samples) {
        const bool p = predict_sample(m, s.features, threshold).label == Label::Vessel;
        const bool t = s.label == Label::Vessel;
        (p ? (t ? c.tp : c.fp) : (t ? c.fn : c.tn))++;
    }
    return EvalReport::from_confusion(c);
}

// ---- persistence ----

namespace {

Json counts_json(const std::uint64_t c[2]) { return Json{{"background", c[kBg]}, {"vessel", c[kVessel]}}; }

void read_counts(const Json& j, std::uint64_t c[2]) {
    c[kBg] = j.at("background").get<std::uint64_t>();
    c[kVessel] = j.at("vessel").get<std::uint64_t>();
}

[[noreturn]] void corrupt(const std::string& msg) { throw Error(ErrorCode::CorruptModel, msg); }

void check_model(const TrainedModel& m) {
    const std::size_t d = m.config.dimension();
    try {
        m.kind.validate();
        if (!m.config.is_raw()) m.config.validate();
    } catch (const Error& e) {
        corrupt(e.what());
    }
    if (const auto* nb = std::get_if<NaiveBayesParams>(&m.params)) {
        for (std::size_t c = 0; c < 2; ++c) {
            if (nb->mean[c].size() != d || nb->variance[c].size() != d) corrupt("naive Bayes moments have wrong length");
            if (!(nb->prior[c] > 0.0 && nb->prior[c] < 1.0)) corrupt("naive Bayes prior out of range");
            for (double v : nb->variance[c])
                if (!(v >= kVarianceFloor) || !std::isfinite(v)) corrupt("naive Bayes variance below floor");
            for (double v : nb->mean[c])
                if (!std::isfinite(v)) corrupt("naive Bayes mean not finite");
        }
    } else if (const auto* knn = std::get_if<KnnParams>(&m.params)) {
        if (knn->points.empty() || knn->points.size() != knn->labels.size()) corrupt("kNN training set is malformed");
        for (const auto& p : knn->points)
            if (p.size() != d) corrupt("kNN point has wrong length");
    } else {
        const auto& nodes = std::get<TreeParams>(m.params).nodes;
        if (nodes.empty()) corrupt("tree has no nodes");
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const TreeNode& n = nodes[i];
            if (n.count[0] + n.count[1] == 0) corrupt("tree node without samples");
            if (n.is_leaf()) continue;
            const auto in_range = [&](int c) { return c > static_cast<int>(i) && c < static_cast<int>(nodes.size()); };
            if (static_cast<std::size_t>(n.feature) >= d) corrupt("tree feature index out of range");
            if (!in_range(n.left) || !in_range(n.right) || n.left == n.right) corrupt("tree child index invalid");
        }
    }
}

}  // namespace

std::string model_to_json(const TrainedModel& m) {
    Json params;
    if (const auto* nb = std::get_if<NaiveBayesParams>(&m.params)) {
        for (std::size_t c = 0; c < 2; ++c) {
            const char* name = c == kVessel ? "vessel" : "background";
            params[name] = Json{{"prior", nb->prior[c]}, {"mean", nb->mean[c]}, {"variance", nb->variance[c]}};
        }
    } else if (const auto* knn = std::get_if<KnnParams>(&m.params)) {
        Json labels = Json::array();
        for (Label l : knn->labels) labels.push_back(to_string(l));
        params = Json{{"points", knn->points}, {"labels", labels}};
    } else {
        Json nodes = Json::array();
        for (const TreeNode& n : std::get<TreeParams>(m.params).nodes) {
            Json jn{{"counts", counts_json(n.count)}};
            if (!n.is_leaf()) {
                jn["feature"] = n.feature;
                jn["threshold"] = n.threshold;
                jn["left"] = n.left;
                jn["right"] = n.right;
            }
            nodes.push_back(std::move(jn));
        }
        params = Json{{"nodes", nodes}};
    }
    const Json doc{{"format", "vesselseg-model"},
                   {"version", kModelFormatVersion},
                   {"kind", m.kind},
                   {"config", m.config},
                   {"feature_names", m.config.feature_names()},
                   {"parameters", params},
                   {"training_meta",
                    {{"samples", counts_json(m.meta.samples)},
                     {"timestamp", m.meta.timestamp},
                     {"sources", m.meta.sources}}}};
    return doc.dump(2) + "\n";
}

TrainedModel model_from_json(std::string_view text) {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::exception& e) {
        corrupt(std::string("not a JSON document: ") + e.what());
    }
    if (!doc.is_object() || doc.value("format", "") != "vesselseg-model") corrupt("not a model document");
    if (!doc.contains("version") || !doc["version"].is_number_integer()) corrupt("missing version");
    if (doc["version"].get<int>() != kModelFormatVersion) {
        throw Error(ErrorCode::VersionMismatch, "model format version " + doc["version"].dump() + " is not supported");
    }
    TrainedModel m;
    try {
        m.kind = doc.at("kind").get<ModelKind>();
        m.config = doc.at("config").get<FeatureConfig>();
        const Json& p = doc.at("parameters");
        switch (m.kind.type) {
            case ModelKind::Type::GaussianNaiveBayes: {
                NaiveBayesParams nb;
                for (std::size_t c = 0; c < 2; ++c) {
                    const Json& jc = p.at(c == kVessel ? "vessel" : "background");
                    nb.prior[c] = jc.at("prior").get<double>();
                    nb.mean[c] = jc.at("mean").get<std::vector<double>>();
                    nb.variance[c] = jc.at("variance").get<std::vector<double>>();
                }
                m.params = std::move(nb);
                break;
            }
            case ModelKind::Type::Knn: {
                KnnParams knn;
                knn.points = p.at("points").get<std::vector<FeatureVector>>();
                for (const auto& l : p.at("labels")) {
                    const auto s = l.get<std::string>();
                    if (s != "vessel" && s != "background") corrupt("invalid kNN label '" + s + "'");
                    knn.labels.push_back(s == "vessel" ? Label::Vessel : Label::Background);
                }
                m.params = std::move(knn);
                break;
            }
            case ModelKind::Type::DecisionTree: {
                TreeParams t;
                for (const Json& jn : p.at("nodes")) {
                    TreeNode n;
                    read_counts(jn.at("counts"), n.count);
                    if (jn.contains("feature")) {
                        n.feature = jn.at("feature").get<int>();
                        n.threshold = jn.at("threshold").get<double>();
                        n.left = jn.at("left").get<int>();
                        n.right = jn.at("right").get<int>();
                        if (n.feature < 0) corrupt("negative tree feature index");
                    }
                    t.nodes.push_back(n);
                }
                m.params = std::move(t);
                break;
            }
        }
        const Json& meta = doc.at("training_meta");
        read_counts(meta.at("samples"), m.meta.samples);
        m.meta.timestamp = meta.at("timestamp").get<std::string>();
        m.meta.sources = meta.value("sources", std::vector<std::string>{});
    } catch (const Json::exception& e) {
        corrupt(e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::CorruptModel) throw;
        corrupt(e.what());
    }
    check_model(m);
    return m;
}

void save_model(const TrainedModel& m, const std::filesystem::path& path) {
    const std::string text = model_to_json(m);
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

TrainedModel load_model(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return model_from_json(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

}  // namespace vesselseg
