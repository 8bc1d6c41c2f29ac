#include "delay_adapt/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <ostream>
#include <random>
#include <set>
#include <thread>

#include <json.hpp>

#include "delay_adapt/density_ratio.hpp"
#include "delay_adapt/util.hpp"

namespace da {

namespace {

constexpr std::int64_t kDayMs = 86'400'000;

std::vector<std::size_t> movement_rows_by_hour(const FeatureTable& table, Movement movement) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < table.rows.size(); ++i)
        if (table.rows[i].movement == movement) idx.push_back(i);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return table.rows[a].hour_start_ms < table.rows[b].hour_start_ms;
    });
    return idx;
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    if (n == 0) return 0;
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

FinetunePolicy finetune_policy_from_string(const std::string& s) {
    if (s == "first_complete_days") return FinetunePolicy::first_complete_days;
    if (s == "seeded_random") return FinetunePolicy::seeded_random;
    throw std::invalid_argument("unknown fine-tune policy: " + s);
}

const char* to_string(FinetunePolicy p) {
    switch (p) {
        case FinetunePolicy::first_complete_days: return "first_complete_days";
        case FinetunePolicy::seeded_random: return "seeded_random";
    }
    return "?";
}

SplitIndices select_finetune(const FeatureTable& target, Movement movement, int budget,
                             FinetunePolicy policy, std::uint64_t seed) {
    if (budget < 0) throw std::invalid_argument("budget must be >= 0");
    std::vector<std::size_t> idx = movement_rows_by_hour(target, movement);
    if (idx.size() < static_cast<std::size_t>(budget))
        throw InsufficientTargetData("budget " + std::to_string(budget) + " exceeds the " +
                                     std::to_string(idx.size()) + " available rows");

    SplitIndices out;
    if (budget == 0) {
        out.eval = std::move(idx);
        return out;
    }

    std::set<std::size_t> taken;
    if (policy == FinetunePolicy::seeded_random) {
        std::vector<std::size_t> shuffled = idx;
        std::mt19937_64 rng(seed);
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        shuffled.resize(static_cast<std::size_t>(budget));
        taken.insert(shuffled.begin(), shuffled.end());
    } else {
        // Earliest complete days first (24 hourly rows), then earliest
        // leftover hours if complete days cannot cover the budget.
        std::map<std::int64_t, std::vector<std::size_t>> by_day;
        for (std::size_t i : idx)
            by_day[target.rows[i].hour_start_ms / kDayMs].push_back(i);
        for (const auto& [day, rows] : by_day) {
            if (rows.size() != 24) continue;
            for (std::size_t i : rows) {
                if (taken.size() == static_cast<std::size_t>(budget)) break;
                taken.insert(i);
            }
            if (taken.size() == static_cast<std::size_t>(budget)) break;
        }
        for (std::size_t i : idx) {
            if (taken.size() == static_cast<std::size_t>(budget)) break;
            taken.insert(i);
        }
    }
    for (std::size_t i : idx) {
        if (taken.count(i))
            out.finetune.push_back(i);
        else
            out.eval.push_back(i);
    }
    return out;
}

DomainSplit make_split(const std::vector<FeatureTable>& fleet, std::size_t target_idx,
                       Movement movement, int budget, FinetunePolicy policy,
                       std::uint64_t seed) {
    if (target_idx >= fleet.size()) throw std::out_of_range("target_idx out of range");
    DomainSplit split;
    split.manifest = FeatureTable::default_manifest();
    for (std::size_t k = 0; k < fleet.size(); ++k) {
        if (k == target_idx) continue;
        for (std::size_t i : movement_rows_by_hour(fleet[k], movement)) {
            split.source.X.push_back(FeatureTable::features(fleet[k].rows[i]));
            split.source.y.push_back(fleet[k].rows[i].label_delay_s);
        }
    }
    SplitIndices sel = select_finetune(fleet[target_idx], movement, budget, policy, seed);
    for (std::size_t i : sel.finetune) {
        split.target_finetune.X.push_back(FeatureTable::features(fleet[target_idx].rows[i]));
        split.target_finetune.y.push_back(fleet[target_idx].rows[i].label_delay_s);
    }
    for (std::size_t i : sel.eval) {
        split.target_eval.X.push_back(FeatureTable::features(fleet[target_idx].rows[i]));
        split.target_eval.y.push_back(fleet[target_idx].rows[i].label_delay_s);
    }
    return split;
}

namespace {

Predictor wrap(GbmModel model) {
    auto shared = std::make_shared<GbmModel>(std::move(model));
    return [shared](std::span<const double> x) { return shared->predict(x); };
}

Predictor fit_ratio_model(const DomainSplit& split, const ModelOptions& opts,
                          std::uint64_t seed, const std::string& name) {
    KernelSpec kernel;
    kernel.seed = seed;
    WeightEstimate est;
    if (name == "kmm")
        est = kmm_weights(split.source.X, split.target_finetune.X, kernel, opts.kmm_B,
                          opts.kmm_eps);
    else if (name == "kliep")
        est = kliep_weights(split.source.X, split.target_finetune.X, kernel);
    else if (name == "ulsif")
        est = ulsif_weights(split.source.X, split.target_finetune.X, kernel, opts.lsif_lambda);
    else if (name == "rulsif")
        est = rulsif_weights(split.source.X, split.target_finetune.X, kernel, opts.lsif_lambda,
                             opts.rulsif_alpha);
    else
        est = iwc_weights(split.source.X, split.target_finetune.X, opts.iwc_reg);
    TrainConfig train = opts.train;
    train.seed = seed;
    return wrap(fit_weighted_gbm(split, est.weights, train, opts.loss));
}

}  // namespace

std::vector<ModelSpec> make_models(const std::vector<std::string>& names,
                                   const ModelOptions& opts) {
    std::vector<ModelSpec> specs;
    for (const std::string& name : names) {
        ModelSpec spec;
        spec.name = name;
        if (name == "gbm") {
            spec.fit = [opts](const DomainSplit& split, std::uint64_t seed) {
                std::vector<WeightedSample> samples;
                for (std::size_t i = 0; i < split.source.size(); ++i)
                    samples.push_back({split.source.X[i], split.source.y[i], 1.0});
                TrainConfig train = opts.train;
                train.seed = seed;
                return wrap(fit_gbm(samples, train, opts.loss, split.manifest));
            };
        } else if (name == "gbbw") {
            spec.fit = [opts](const DomainSplit& split, std::uint64_t seed) {
                GbbwConfig cfg;
                cfg.train = opts.train;
                cfg.train.seed = seed;
                cfg.loss = opts.loss;
                cfg.alpha = opts.alpha;
                if (!opts.gbbw_alpha_grid.empty()) {
                    std::vector<GridPoint> grid;
                    for (double a : opts.gbbw_alpha_grid) grid.push_back({a, cfg.train});
                    GridResult gr = grid_search(split, grid, 3, opts.loss);
                    cfg.alpha = gr.best.alpha;
                    cfg.train = gr.best.train;
                }
                return wrap(fit_gbbw(split, cfg));
            };
        } else if (name == "trada") {
            spec.fit = [opts](const DomainSplit& split, std::uint64_t seed) {
                TradaConfig cfg;
                cfg.rounds = opts.trada_rounds;
                cfg.train = opts.train;
                cfg.train.seed = seed;
                TradaModel model = fit_tradaboost_r2(split, cfg);
                auto shared = std::make_shared<TradaModel>(std::move(model));
                return Predictor(
                    [shared](std::span<const double> x) { return shared->predict(x); });
            };
        } else if (name == "kmm" || name == "kliep" || name == "ulsif" ||
                   name == "rulsif" || name == "iwc") {
            spec.fit = [opts, name](const DomainSplit& split, std::uint64_t seed) {
                return fit_ratio_model(split, opts, seed, name);
            };
        } else {
            throw std::invalid_argument("unknown model: " + name);
        }
        specs.push_back(std::move(spec));
    }
    return specs;
}

LoioResult run_loio(const std::vector<FeatureTable>& fleet,
                    const std::vector<ModelSpec>& models, Movement movement, int budget,
                    FinetunePolicy policy, std::uint64_t seed, int jobs) {
    if (fleet.size() < 2)
        throw std::invalid_argument("leave-one-out needs at least 2 intersections");
    if (models.empty()) throw std::invalid_argument("no models requested");
    if (jobs < 1) jobs = 1;

    LoioResult result;
    result.movement = movement;
    result.budget = budget;
    result.seed = seed;
    result.folds.resize(fleet.size());

    auto run_fold = [&](std::size_t f) {
        FoldResult& fold = result.folds[f];
        fold.target_id =
            fleet[f].rows.empty() ? "fold_" + std::to_string(f) : fleet[f].rows[0].intersection_id;
        std::uint64_t fold_seed = derive_seed(seed, f);
        DomainSplit split;
        try {
            split = make_split(fleet, f, movement, budget, policy, fold_seed);
            if (split.target_eval.size() == 0)
                throw InsufficientTargetData("no evaluation rows left after fine-tune selection");
        } catch (const std::exception& e) {
            fold.failed = true;
            fold.error = e.what();
            return;
        }
        for (const ModelSpec& spec : models) {
            FoldModelResult mr;
            mr.model = spec.name;
            try {
                Predictor predict = spec.fit(split, fold_seed);
                mr.y = split.target_eval.y;
                mr.yhat.resize(split.target_eval.size());
                for (std::size_t i = 0; i < split.target_eval.size(); ++i)
                    mr.yhat[i] = predict(split.target_eval.X[i]);
                mr.metrics = score(mr.y, mr.yhat);
            } catch (const std::exception& e) {
                mr.failed = true;
                mr.error = e.what();
            }
            fold.models.push_back(std::move(mr));
        }
    };

    if (jobs == 1 || fleet.size() == 1) {
        for (std::size_t f = 0; f < fleet.size(); ++f) run_fold(f);
    } else {
        std::atomic<std::size_t> next{0};
        std::size_t nthreads = std::min<std::size_t>(static_cast<std::size_t>(jobs), fleet.size());
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < nthreads; ++t)
            pool.emplace_back([&] {
                for (std::size_t f = next.fetch_add(1); f < result.folds.size();
                     f = next.fetch_add(1))
                    run_fold(f);
            });
        for (auto& th : pool) th.join();
    }

    for (const FoldResult& fold : result.folds)
        if (fold.failed)
            result.failures.push_back("fold " + fold.target_id + ": " + fold.error);

    std::set<std::string> names;
    for (const ModelSpec& spec : models) names.insert(spec.name);
    for (const std::string& name : names) {
        Aggregate agg;
        std::vector<double> mapes, maes, rmses, pooled_y, pooled_yhat;
        for (const FoldResult& fold : result.folds) {
            for (const FoldModelResult& mr : fold.models) {
                if (mr.model != name) continue;
                if (mr.failed) {
                    result.failures.push_back("fold " + fold.target_id + " model " + name +
                                              ": " + mr.error);
                    continue;
                }
                mapes.push_back(mr.metrics.mape_pct);
                maes.push_back(mr.metrics.mae_s);
                rmses.push_back(mr.metrics.rmse_s);
                pooled_y.insert(pooled_y.end(), mr.y.begin(), mr.y.end());
                pooled_yhat.insert(pooled_yhat.end(), mr.yhat.begin(), mr.yhat.end());
            }
        }
        agg.folds_used = static_cast<int>(mapes.size());
        if (agg.folds_used > 0) {
            auto mean = [](const std::vector<double>& v) {
                double s = 0;
                for (double x : v) s += x;
                return s / static_cast<double>(v.size());
            };
            agg.mean_mape = mean(mapes);
            agg.median_mape = median_of(mapes);
            agg.mean_mae = mean(maes);
            agg.median_mae = median_of(maes);
            agg.mean_rmse = mean(rmses);
            agg.median_rmse = median_of(rmses);
            try {
                agg.pooled = score(pooled_y, pooled_yhat);
            } catch (const std::exception& e) {
                result.failures.push_back("pooled metrics for " + name + ": " + e.what());
            }
        }
        result.aggregates[name] = agg;
    }
    return result;
}

std::vector<AblationRow> run_ablation(const std::vector<FeatureTable>& fleet,
                                      const ModelSpec& model, Movement movement,
                                      std::span<const int> budgets, FinetunePolicy policy,
                                      std::uint64_t seed, int jobs) {
    std::vector<AblationRow> rows;
    for (int budget : budgets) {
        LoioResult res = run_loio(fleet, {model}, movement, budget, policy, seed, jobs);
        const Aggregate& agg = res.aggregates.at(model.name);
        if (agg.folds_used == 0)
            throw std::runtime_error("every fold failed at budget " + std::to_string(budget));
        rows.push_back({budget, agg.mean_mape});
    }
    return rows;
}

std::string loio_report_json(const LoioResult& result, const std::string& run_config_json) {
    nlohmann::ordered_json j;
    j["run_config"] = run_config_json.empty()
                          ? nlohmann::ordered_json::object()
                          : nlohmann::ordered_json::parse(run_config_json);
    j["movement"] = to_string(result.movement);
    j["budget"] = result.budget;
    j["seed"] = result.seed;
    j["per_fold"] = nlohmann::ordered_json::array();
    for (const FoldResult& fold : result.folds) {
        nlohmann::ordered_json jf;
        jf["target"] = fold.target_id;
        if (fold.failed) {
            jf["failed"] = true;
            jf["error"] = fold.error;
        } else {
            jf["models"] = nlohmann::ordered_json::array();
            for (const FoldModelResult& mr : fold.models) {
                nlohmann::ordered_json jm;
                jm["name"] = mr.model;
                if (mr.failed) {
                    jm["error"] = mr.error;
                } else {
                    jm["mape_pct"] = mr.metrics.mape_pct;
                    jm["mae_s"] = mr.metrics.mae_s;
                    jm["rmse_s"] = mr.metrics.rmse_s;
                    jm["n_used"] = mr.metrics.n_used;
                    jm["n_dropped_zero_label"] = mr.metrics.n_dropped_zero_label;
                }
                jf["models"].push_back(std::move(jm));
            }
        }
        j["per_fold"].push_back(std::move(jf));
    }
    j["aggregate"] = nlohmann::ordered_json::object();
    for (const auto& [name, agg] : result.aggregates) {
        nlohmann::ordered_json ja;
        ja["folds_used"] = agg.folds_used;
        ja["mape_mean"] = agg.mean_mape;
        ja["mape_median"] = agg.median_mape;
        ja["mae_mean"] = agg.mean_mae;
        ja["mae_median"] = agg.median_mae;
        ja["rmse_mean"] = agg.mean_rmse;
        ja["rmse_median"] = agg.median_rmse;
        ja["pooled"] = {{"mape_pct", agg.pooled.mape_pct},
                        {"mae_s", agg.pooled.mae_s},
                        {"rmse_s", agg.pooled.rmse_s},
                        {"n_used", agg.pooled.n_used},
                        {"n_dropped_zero_label", agg.pooled.n_dropped_zero_label}};
        j["aggregate"][name] = std::move(ja);
    }
    j["failures"] = result.failures;
    return j.dump(2);
}

void write_boxplot_csv(std::ostream& out, const LoioResult& result) {
    out << "model,movement,fold,metric,value\n";
    char buf[64];
    for (const FoldResult& fold : result.folds) {
        for (const FoldModelResult& mr : fold.models) {
            if (mr.failed) continue;
            const std::pair<const char*, double> metrics[] = {
                {"mape_pct", mr.metrics.mape_pct},
                {"mae_s", mr.metrics.mae_s},
                {"rmse_s", mr.metrics.rmse_s},
            };
            for (const auto& [metric, value] : metrics) {
                std::snprintf(buf, sizeof(buf), "%.6f", value);
                out << mr.model << ',' << to_string(result.movement) << ',' << fold.target_id
                    << ',' << metric << ',' << buf << '\n';
            }
        }
    }
}

void write_ablation_csv(std::ostream& out, std::span<const AblationRow> rows) {
    out << "budget,mean_mape_pct\n";
    char buf[64];
    for (const AblationRow& row : rows) {
        std::snprintf(buf, sizeof(buf), "%.6f", row.mean_mape_pct);
        out << row.budget << ',' << buf << '\n';
    }
}

}  // namespace da
