#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "delay_adapt/gbm.hpp"

namespace da {

struct Dataset {
    std::vector<std::vector<double>> X;
    std::vector<double> y;

    std::size_t size() const { return X.size(); }
};

struct DomainSplit {
    Dataset source;
    Dataset target_finetune;
    Dataset target_eval;
    std::vector<std::string> manifest;
};

struct EmptyDomain : std::runtime_error {
    explicit EmptyDomain(const std::string& which)
        : std::runtime_error("empty domain: " + which) {}
};
struct WeightLengthMismatch : std::runtime_error {
    WeightLengthMismatch(std::size_t got, std::size_t want)
        : std::runtime_error("source_weights length " + std::to_string(got) +
                             ", expected " + std::to_string(want)) {}
};

struct GbbwConfig {
    double alpha = 0.5;  // target-side weight; source gets 1 - alpha
    TrainConfig train;
    bool normalize_domains = false;  // (1-a)/n1 and a/n2 instead of per-sample
    Loss loss = Loss::squared;
};

/// Balanced-weighting gradient boosting: source samples weighted (1-alpha),
/// fine-tune target samples weighted alpha, through initialization, tree
/// fitting, and the per-stage multiplier. alpha endpoints reduce exactly to
/// single-domain fits.
GbmModel fit_gbbw(const DomainSplit& split, const GbbwConfig& cfg);

/// GBM on source (given weights) plus unit-weight fine-tune target rows;
/// the learner behind the density-ratio baselines.
GbmModel fit_weighted_gbm(const DomainSplit& split, const std::vector<double>& source_weights,
                          const TrainConfig& cfg, Loss loss = Loss::squared);

struct TradaConfig {
    int rounds = 10;
    TrainConfig train;
};

struct TradaModel {
    struct Round {
        RegressionTree tree;
        double beta = 0;
    };
    std::vector<Round> rounds;
    std::vector<std::string> manifest;

    /// Weighted median of the last ceil(T/2) learners, weights ln(1/beta_t).
    double predict(std::span<const double> x) const;
};

/// AdaBoost.R2-style transfer boosting (Pardoe & Stone). Stops early on a
/// perfect fit (eps = 0) or when target-weighted error reaches 0.5.
TradaModel fit_tradaboost_r2(const DomainSplit& split, const TradaConfig& cfg);

std::string trada_to_json(const TradaModel& model);
TradaModel trada_from_json(const std::string& json_text);

struct TooFewTargetSamples : std::runtime_error {
    explicit TooFewTargetSamples(const std::string& msg) : std::runtime_error(msg) {}
};

struct GridPoint {
    double alpha = 0.5;
    TrainConfig train;
};

struct GridResult {
    GridPoint best;
    double cv_score = 0;  // mean target-fold MAPE, percent
    std::vector<double> scores;  // one per grid point, same order
};

/// k-fold CV over the fine-tune subset only; folds are held out from the
/// alpha-weighted target side. Ties break toward smaller M, smaller depth,
/// then alpha closest to 0.5, first occurrence winning.
GridResult grid_search(const DomainSplit& split, const std::vector<GridPoint>& grid,
                       int k = 3, Loss loss = Loss::squared);

}  // namespace da
