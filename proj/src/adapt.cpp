#include "delay_adapt/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "delay_adapt/metrics.hpp"
#include "json_trees.hpp"

namespace da {

namespace {

void append_samples(std::vector<WeightedSample>& out, const Dataset& ds, double w) {
    for (std::size_t i = 0; i < ds.size(); ++i)
        out.push_back({ds.X[i], ds.y[i], w});
}

}  // namespace

GbmModel fit_gbbw(const DomainSplit& split, const GbbwConfig& cfg) {
    if (split.source.size() == 0) throw EmptyDomain("source");
    if (split.target_finetune.size() == 0) throw EmptyDomain("target_finetune");
    if (cfg.alpha < 0 || cfg.alpha > 1)
        throw std::invalid_argument("alpha must be in [0, 1]");
    double ws = 1.0 - cfg.alpha;
    double wt = cfg.alpha;
    if (cfg.normalize_domains) {
        ws /= static_cast<double>(split.source.size());
        wt /= static_cast<double>(split.target_finetune.size());
    }
    std::vector<WeightedSample> samples;
    samples.reserve(split.source.size() + split.target_finetune.size());
    append_samples(samples, split.source, ws);
    append_samples(samples, split.target_finetune, wt);
    return fit_gbm(samples, cfg.train, cfg.loss, split.manifest);
}

GbmModel fit_weighted_gbm(const DomainSplit& split, const std::vector<double>& source_weights,
                          const TrainConfig& cfg, Loss loss) {
    if (source_weights.size() != split.source.size())
        throw WeightLengthMismatch(source_weights.size(), split.source.size());
    std::vector<WeightedSample> samples;
    samples.reserve(split.source.size() + split.target_finetune.size());
    for (std::size_t i = 0; i < split.source.size(); ++i)
        samples.push_back({split.source.X[i], split.source.y[i], source_weights[i]});
    append_samples(samples, split.target_finetune, 1.0);
    return fit_gbm(samples, cfg, loss, split.manifest);
}

double TradaModel::predict(std::span<const double> x) const {
    if (x.size() != manifest.size()) throw DimensionMismatch(x.size(), manifest.size());
    if (rounds.empty()) throw std::runtime_error("empty TrAdaBoostR2 model");
    std::size_t take = (rounds.size() + 1) / 2;  // last ceil(T/2) learners
    std::vector<std::pair<double, double>> pw;   // (prediction, weight)
    double total = 0;
    for (std::size_t t = rounds.size() - take; t < rounds.size(); ++t) {
        double c = std::log(1.0 / std::max(rounds[t].beta, 1e-12));
        pw.push_back({rounds[t].tree(x), c});
        total += c;
    }
    std::sort(pw.begin(), pw.end());
    if (total <= 0) return pw[pw.size() / 2].first;
    double cum = 0;
    for (const auto& [pred, c] : pw) {
        cum += c;
        if (cum >= 0.5 * total) return pred;
    }
    return pw.back().first;
}

TradaModel fit_tradaboost_r2(const DomainSplit& split, const TradaConfig& cfg) {
    const std::size_t n1 = split.source.size(), n2 = split.target_finetune.size();
    if (n1 < 1) throw EmptyDomain("source");
    if (n2 < 2) throw EmptyDomain("target_finetune (needs >= 2 rows)");
    if (cfg.rounds < 1) throw std::invalid_argument("rounds must be >= 1");

    std::vector<WeightedSample> samples;
    samples.reserve(n1 + n2);
    append_samples(samples, split.source, 1.0);
    append_samples(samples, split.target_finetune, 1.0);
    const std::size_t n = n1 + n2;
    std::vector<double> w(n, 1.0 / static_cast<double>(n));

    const double beta_src =
        1.0 / (1.0 + std::sqrt(2.0 * std::log(static_cast<double>(n1)) / cfg.rounds));

    TradaModel model;
    model.manifest = split.manifest;
    for (int t = 0; t < cfg.rounds; ++t) {
        for (std::size_t i = 0; i < n; ++i) samples[i].w = w[i];
        RegressionTree tree = fit_tree(samples, cfg.train);

        std::vector<double> err(n);
        double max_err = 0;
        for (std::size_t i = 0; i < n; ++i) {
            err[i] = std::abs(samples[i].y - tree(samples[i].x));
            max_err = std::max(max_err, err[i]);
        }
        if (max_err == 0) {  // perfect fit; keep it and stop
            model.rounds.push_back({std::move(tree), 1e-10});
            break;
        }
        for (auto& e : err) e /= max_err;

        double tw = 0, te = 0;
        for (std::size_t j = n1; j < n; ++j) {
            tw += w[j];
            te += w[j] * err[j];
        }
        double eps = tw > 0 ? te / tw : 0.0;
        if (eps == 0) {
            model.rounds.push_back({std::move(tree), 1e-10});
            break;
        }
        if (eps >= 0.5) {
            // discard the round; but an empty ensemble cannot predict, so a
            // failing first round is kept with neutral-ish weight
            if (model.rounds.empty()) model.rounds.push_back({std::move(tree), 0.999});
            break;
        }
        double beta = eps / (1.0 - eps);
        model.rounds.push_back({tree, beta});

        for (std::size_t i = 0; i < n1; ++i) w[i] *= std::pow(beta_src, err[i]);
        for (std::size_t j = n1; j < n; ++j) w[j] *= std::pow(beta, -err[j]);
        double sum = std::accumulate(w.begin(), w.end(), 0.0);
        for (auto& wi : w) wi /= sum;
    }
    return model;
}

std::string trada_to_json(const TradaModel& model) {
    nlohmann::ordered_json j;
    j["version"] = 1;
    j["prediction_rule"] = "weighted_median_last_half";
    j["manifest"] = model.manifest;
    j["rounds"] = nlohmann::ordered_json::array();
    for (const auto& r : model.rounds) {
        nlohmann::ordered_json jr;
        jr["beta_t"] = r.beta;
        jr["nodes"] = detail::nodes_to_json(r.tree);
        j["rounds"].push_back(std::move(jr));
    }
    return j.dump();
}

TradaModel trada_from_json(const std::string& json_text) {
    auto j = nlohmann::json::parse(json_text);
    if (j.at("version").get<int>() != 1)
        throw std::runtime_error("unsupported TrAdaBoostR2 artifact version");
    TradaModel model;
    model.manifest = j.at("manifest").get<std::vector<std::string>>();
    for (const auto& jr : j.at("rounds")) {
        TradaModel::Round r;
        r.beta = jr.at("beta_t").get<double>();
        r.tree = detail::nodes_from_json(jr.at("nodes"));
        model.rounds.push_back(std::move(r));
    }
    return model;
}

GridResult grid_search(const DomainSplit& split, const std::vector<GridPoint>& grid,
                       int k, Loss loss) {
    if (grid.empty()) throw std::invalid_argument("empty grid");
    const std::size_t nt = split.target_finetune.size();
    if (nt < static_cast<std::size_t>(2 * k))
        throw TooFewTargetSamples("need >= " + std::to_string(2 * k) +
                                  " fine-tune rows for " + std::to_string(k) + "-fold CV");

    GridResult result;
    double best_score = std::numeric_limits<double>::infinity();
    std::size_t best_idx = 0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        double fold_sum = 0;
        int fold_n = 0;
        for (int fold = 0; fold < k; ++fold) {
            DomainSplit cv;
            cv.manifest = split.manifest;
            cv.source = split.source;
            for (std::size_t i = 0; i < nt; ++i) {
                Dataset& dst = (static_cast<int>(i % static_cast<std::size_t>(k)) == fold)
                                   ? cv.target_eval
                                   : cv.target_finetune;
                dst.X.push_back(split.target_finetune.X[i]);
                dst.y.push_back(split.target_finetune.y[i]);
            }
            GbmModel model = fit_gbbw(cv, {grid[g].alpha, grid[g].train, false, loss});
            std::vector<double> yhat(cv.target_eval.size());
            for (std::size_t i = 0; i < cv.target_eval.size(); ++i)
                yhat[i] = model.predict(cv.target_eval.X[i]);
            try {
                fold_sum += mape(cv.target_eval.y, yhat).mape_pct;
                ++fold_n;
            } catch (const AllLabelsZero&) {
                // fold carries no usable labels; skip it
            }
        }
        double score = fold_n ? fold_sum / fold_n : std::numeric_limits<double>::infinity();
        result.scores.push_back(score);

        const GridPoint& cand = grid[g];
        const GridPoint& inc = grid[best_idx];
        bool better = false;
        if (score < best_score) {
            better = true;
        } else if (score == best_score && g != best_idx) {
            auto key = [](const GridPoint& p) {
                return std::tuple<int, int, double>(p.train.iterations, p.train.max_depth,
                                                   std::abs(p.alpha - 0.5));
            };
            better = key(cand) < key(inc);
        }
        if (g == 0 || better) {
            best_score = score;
            best_idx = g;
        }
    }
    result.best = grid[best_idx];
    result.cv_score = best_score;
    return result;
}

}  // namespace da
