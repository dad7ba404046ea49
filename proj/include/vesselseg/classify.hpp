#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "vesselseg/dataset.hpp"
#include "vesselseg/features.hpp"
#include "vesselseg/image.hpp"

namespace vesselseg {

struct ModelKind {
    enum class Type { GaussianNaiveBayes, Knn, DecisionTree };

    Type type = Type::GaussianNaiveBayes;
    int k = 5;
    int max_depth = 8;
    int min_leaf = 1;

    static ModelKind naive_bayes() { return {}; }
    static ModelKind knn(int k) { return {Type::Knn, k, 8, 1}; }
    static ModelKind tree(int max_depth, int min_leaf = 1) { return {Type::DecisionTree, 5, max_depth, min_leaf}; }

    /// k odd and >= 1; max_depth >= 1; min_leaf >= 1. Throws InvalidArgument.
    void validate() const;
    bool operator==(const ModelKind& o) const;
};

std::string_view to_string(ModelKind::Type type) noexcept;
/// "gaussian_naive_bayes" (or "nb"), "knn", "decision_tree" (or "tree").
ModelKind::Type parse_model_type(std::string_view s);

inline constexpr double kVarianceFloor = 1e-9;

struct NaiveBayesParams {
    double prior[2] = {0.0, 0.0};  // indexed by Label
    std::vector<double> mean[2];
    std::vector<double> variance[2];

    bool operator==(const NaiveBayesParams&) const = default;
};

struct KnnParams {
    std::vector<FeatureVector> points;
    std::vector<Label> labels;

    bool operator==(const KnnParams&) const = default;
};

struct TreeNode {
    /// -1 for leaves. Internal nodes send x[feature] <= threshold left.
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::uint64_t count[2] = {0, 0};  // class histogram of training samples reaching the node

    bool is_leaf() const noexcept { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

struct TreeParams {
    std::vector<TreeNode> nodes;  // nodes[0] is the root; children always follow parents

    bool operator==(const TreeParams&) const = default;
};

struct TrainingMeta {
    std::uint64_t samples[2] = {0, 0};
    /// ISO 8601 UTC; taken from SOURCE_DATE_EPOCH when set so builds are reproducible.
    std::string timestamp;
    std::vector<std::string> sources;

    bool operator==(const TrainingMeta&) const = default;
};

struct TrainedModel {
    ModelKind kind;
    FeatureConfig config;
    std::variant<NaiveBayesParams, KnnParams, TreeParams> params;
    TrainingMeta meta;

    bool operator==(const TrainedModel&) const = default;
};

struct Prediction {
    Label label = Label::Background;
    double score = 0.0;  // vessel probability
};

inline constexpr double kDefaultDecisionThreshold = 0.5;

/// Errors: SingleClassDataset, SchemaMismatch, InvalidArgument.
TrainedModel train(const Dataset& ds, const ModelKind& kind);

/// label is vessel iff score > threshold. Errors: SchemaMismatch.
Prediction predict_sample(const TrainedModel& m, std::span<const double> f,
                          double threshold = kDefaultDecisionThreshold);

struct MaskPrediction {
    BinaryMask mask;
    GrayImage scores;
};

/// Errors: ImageTooSmall, SchemaMismatch.
MaskPrediction predict_mask(const TrainedModel& m, const RasterImage& img,
                            double threshold = kDefaultDecisionThreshold);

struct ConfusionMatrix {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fn = 0;

    std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
    ConfusionMatrix& operator+=(const ConfusionMatrix& o) noexcept;
    bool operator==(const ConfusionMatrix&) const = default;
};

/// A metric whose denominator is zero is 1.0 when the masks agree on the
/// empty case it measures and 0.0 otherwise:
///   sensitivity: 1 if fp == 0     specificity: 1 if fn == 0
///   dice, jaccard: 1 (both masks empty)   accuracy: 1 (nothing evaluated)
struct EvalReport {
    ConfusionMatrix confusion;
    double accuracy = 1.0;
    double sensitivity = 1.0;
    double specificity = 1.0;
    double dice = 1.0;
    double jaccard = 1.0;

    static EvalReport from_confusion(const ConfusionMatrix& c);
};

ConfusionMatrix confusion(const BinaryMask& predicted, const BinaryMask& truth);
/// Errors: DimensionMismatch.
EvalReport evaluate_masks(const BinaryMask& predicted, const BinaryMask& truth);
EvalReport evaluate(const TrainedModel& m, std::span<const LabeledImage> pairs,
                    double threshold = kDefaultDecisionThreshold);
EvalReport evaluate_dataset(const TrainedModel& m, const Dataset& ds, double threshold = kDefaultDecisionThreshold);

inline constexpr int kModelFormatVersion = 1;

std::string model_to_json(const TrainedModel& m);
/// Errors: VersionMismatch, CorruptModel.
TrainedModel model_from_json(std::string_view text);
void save_model(const TrainedModel& m, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace vesselseg
