#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace da {

enum class Loss { squared, absolute };

const char* to_string(Loss l);
Loss loss_from_string(const std::string& s);

/// L(y,F): squared is 0.5*(y-F)^2, absolute is |y-F|.
double loss_value(Loss loss, double y, double f);

struct AllZeroWeights : std::runtime_error {
    AllZeroWeights() : std::runtime_error("all sample weights are zero") {}
};
struct DimensionMismatch : std::runtime_error {
    DimensionMismatch(std::size_t got, std::size_t want)
        : std::runtime_error("feature vector length " + std::to_string(got) +
                             ", model expects " + std::to_string(want)) {}
};

struct WeightedSample {
    std::vector<double> x;
    double y = 0;
    double w = 1.0;
};

struct TrainConfig {
    int iterations = 300;
    double shrinkage = 0.1;
    int max_depth = 3;
    // Minimum child weight per leaf, in units of average-weight samples
    // (weights are rescaled to mean 1 over positive-weight samples before
    // fitting, so this knob is invariant to uniform weight scaling).
    double min_leaf_weight = 5.0;
    std::uint64_t seed = 0;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0;
    int left = -1;
    int right = -1;
    double value = 0;

    bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // root at index 0

    double operator()(std::span<const double> x) const;
};

struct GbmModel {
    struct Stage {
        RegressionTree tree;
        double gamma = 0;
    };
    double f0 = 0;
    std::vector<Stage> stages;
    double shrinkage = 0.1;
    Loss loss = Loss::squared;
    std::vector<std::string> manifest;

    /// f0 + sum shrinkage*gamma_m*tree_m(x). Throws DimensionMismatch when
    /// x.size() != manifest.size().
    double predict(std::span<const double> x) const;
};

/// argmin_g sum w_i L(y_i, g): weighted mean (squared) or weighted median
/// (absolute). Throws AllZeroWeights.
double fit_constant(std::span<const WeightedSample> samples, Loss loss);

/// Negative loss gradient at the current predictions.
std::vector<double> pseudo_residuals(std::span<const WeightedSample> samples,
                                     std::span<const double> preds, Loss loss);

/// Exact-search CART tree on (x, y, w) minimizing weighted squared error of
/// the targets. Zero-weight samples are excluded; ties in split gain break
/// toward the lowest feature index, then lowest threshold.
RegressionTree fit_tree(std::span<const WeightedSample> samples, const TrainConfig& cfg);

/// argmin_g sum w_i L(y_i, F_i + g*h(x_i)). Squared loss uses the closed
/// form; absolute loss uses golden-section search. Degenerate direction
/// (h == 0 on all weighted samples) returns 0.
double line_search_gamma(std::span<const WeightedSample> samples,
                         std::span<const double> preds, const RegressionTree& tree,
                         Loss loss);

GbmModel fit_gbm(std::span<const WeightedSample> samples, const TrainConfig& cfg,
                 Loss loss, std::vector<std::string> manifest);

/// Versioned JSON artifact; round-trip exact.
std::string gbm_to_json(const GbmModel& model);
GbmModel gbm_from_json(const std::string& json_text);

}  // namespace da
