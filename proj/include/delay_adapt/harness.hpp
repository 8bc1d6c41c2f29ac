#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "delay_adapt/adapt.hpp"
#include "delay_adapt/features.hpp"
#include "delay_adapt/metrics.hpp"

namespace da {

struct InsufficientTargetData : std::runtime_error {
    explicit InsufficientTargetData(const std::string& msg) : std::runtime_error(msg) {}
};

enum class FinetunePolicy { first_complete_days, seeded_random };
FinetunePolicy finetune_policy_from_string(const std::string& s);
const char* to_string(FinetunePolicy p);

struct SplitIndices {
    std::vector<std::size_t> finetune;
    std::vector<std::size_t> eval;
};

/// Picks the fine-tune subset among a movement's rows. Default policy takes
/// the earliest complete days (24 rows each), truncated to the budget.
SplitIndices select_finetune(const FeatureTable& target, Movement movement, int budget,
                             FinetunePolicy policy, std::uint64_t seed);

/// LOIO fold split: all other intersections' rows form the source.
DomainSplit make_split(const std::vector<FeatureTable>& fleet, std::size_t target_idx,
                       Movement movement, int budget, FinetunePolicy policy,
                       std::uint64_t seed);

using Predictor = std::function<double(std::span<const double>)>;

struct ModelSpec {
    std::string name;
    std::function<Predictor(const DomainSplit&, std::uint64_t seed)> fit;
};

/// Registry options for the standard model names: gbm, gbbw, trada, kmm,
/// kliep, ulsif, rulsif, iwc.
struct ModelOptions {
    double alpha = 0.5;
    std::vector<double> gbbw_alpha_grid;  // nonempty: per-fold CV over alpha
    TrainConfig train;
    Loss loss = Loss::squared;
    int trada_rounds = 10;
    double kmm_B = 1000.0;
    double kmm_eps = 0.01;
    double lsif_lambda = 0.1;
    double rulsif_alpha = 0.1;
    double iwc_reg = 1e-3;
};

std::vector<ModelSpec> make_models(const std::vector<std::string>& names,
                                   const ModelOptions& opts);

struct FoldModelResult {
    std::string model;
    MetricsReport metrics;
    bool failed = false;
    std::string error;
    std::vector<double> y, yhat;  // kept for pooled aggregates
};

struct FoldResult {
    std::string target_id;
    bool failed = false;  // the whole fold (e.g. budget infeasible)
    std::string error;
    std::vector<FoldModelResult> models;
};

struct Aggregate {
    double mean_mape = 0, median_mape = 0;
    double mean_mae = 0, median_mae = 0;
    double mean_rmse = 0, median_rmse = 0;
    MetricsReport pooled;  // metrics over concatenated fold predictions
    int folds_used = 0;
};

struct LoioResult {
    Movement movement = Movement::through;
    int budget = 0;
    std::uint64_t seed = 0;
    std::vector<FoldResult> folds;
    std::map<std::string, Aggregate> aggregates;
    std::vector<std::string> failures;
};

/// One fold per intersection; folds run independently (jobs > 1 allowed,
/// results identical for any job count). Per-fold failures are recorded,
/// not fatal.
LoioResult run_loio(const std::vector<FeatureTable>& fleet,
                    const std::vector<ModelSpec>& models, Movement movement, int budget,
                    FinetunePolicy policy, std::uint64_t seed, int jobs = 1);

struct AblationRow {
    int budget = 0;
    double mean_mape_pct = 0;
};

/// Full LOIO per budget; the mean-MAPE-vs-budget curve.
std::vector<AblationRow> run_ablation(const std::vector<FeatureTable>& fleet,
                                      const ModelSpec& model, Movement movement,
                                      std::span<const int> budgets, FinetunePolicy policy,
                                      std::uint64_t seed, int jobs = 1);

std::string loio_report_json(const LoioResult& result, const std::string& run_config_json);
void write_boxplot_csv(std::ostream& out, const LoioResult& result);
void write_ablation_csv(std::ostream& out, std::span<const AblationRow> rows);

}  // namespace da
