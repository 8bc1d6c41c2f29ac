// delay-adapt: generate synthetic controller logs, extract hourly features,
// train/evaluate delay models, and run leave-one-intersection-out studies.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "delay_adapt/adapt.hpp"
#include "delay_adapt/density_ratio.hpp"
#include "delay_adapt/events.hpp"
#include "delay_adapt/features.hpp"
#include "delay_adapt/harness.hpp"
#include "delay_adapt/metrics.hpp"
#include "delay_adapt/synthgen.hpp"
#include "delay_adapt/util.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kExitConfig = 2;    // bad flags, bad configuration files
constexpr int kExitData = 3;      // unreadable or malformed data files
constexpr int kExitProtocol = 4;  // infeasible protocol (budgets, folds, labels)

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DataError("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

da::FeatureTable load_features(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw DataError("cannot open " + p.string());
    try {
        return da::read_feature_csv(in);
    } catch (const da::CsvError& e) {
        throw DataError(p.string() + ": " + e.what());
    }
}

int default_jobs() {
    if (const char* env = std::getenv("DELAY_ADAPT_JOBS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    return 1;
}

// Run manifest written next to each primary output: what ran, with which
// resolved options, over which inputs (content digests).
void write_run_manifest(const fs::path& primary_out, const std::string& command,
                        const ordered_json& flags, std::uint64_t seed,
                        const std::vector<fs::path>& inputs) {
    ordered_json j;
    j["command"] = command;
    j["flags"] = flags;
    j["seed"] = seed;
    j["inputs"] = ordered_json::object();
    for (const fs::path& p : inputs)
        j["inputs"][p.string()] = da::hex64(da::fnv1a_file(p));
    j["artifact_version"] = 1;
    fs::path mp = primary_out;
    mp += ".manifest.json";
    da::atomic_write(mp, j.dump(2) + "\n");
}

da::Dataset to_dataset(const da::FeatureTable& table, da::Movement movement) {
    da::Dataset ds;
    for (const da::FeatureRow& row : table.rows) {
        if (row.movement != movement) continue;
        ds.X.push_back(da::FeatureTable::features(row));
        ds.y.push_back(row.label_delay_s);
    }
    return ds;
}

struct CommonModelFlags {
    std::string model = "gbbw";
    std::string movement = "through";
    double alpha = 0.5;
    int iterations = 300;
    double shrinkage = 0.1;
    int max_depth = 3;
    double min_leaf_weight = 5.0;
    std::string loss = "squared";
    int trada_rounds = 10;
    std::uint64_t seed = 0;

    void attach(CLI::App* app, bool with_model = true) {
        if (with_model)
            app->add_option("--model", model,
                            "gbm | gbbw | trada | kmm | kliep | ulsif | rulsif | iwc");
        app->add_option("--movement", movement, "left_turn | through");
        app->add_option("--alpha", alpha, "target-side weight for gbbw")
            ->check(CLI::Range(0.0, 1.0));
        app->add_option("--iterations", iterations)->check(CLI::PositiveNumber);
        app->add_option("--shrinkage", shrinkage)->check(CLI::PositiveNumber);
        app->add_option("--max-depth", max_depth)->check(CLI::PositiveNumber);
        app->add_option("--min-leaf-weight", min_leaf_weight)->check(CLI::PositiveNumber);
        app->add_option("--loss", loss)->check(CLI::IsMember({"squared", "absolute"}));
        app->add_option("--trada-rounds", trada_rounds)->check(CLI::PositiveNumber);
        app->add_option("--seed", seed);
    }

    da::TrainConfig train() const {
        da::TrainConfig t;
        t.iterations = iterations;
        t.shrinkage = shrinkage;
        t.max_depth = max_depth;
        t.min_leaf_weight = min_leaf_weight;
        t.seed = seed;
        return t;
    }

    da::Loss loss_enum() const {
        return loss == "absolute" ? da::Loss::absolute : da::Loss::squared;
    }

    da::ModelOptions model_options(const std::vector<double>& gbbw_grid = {}) const {
        da::ModelOptions o;
        o.alpha = alpha;
        o.gbbw_alpha_grid = gbbw_grid;
        o.train = train();
        o.loss = loss_enum();
        o.trada_rounds = trada_rounds;
        return o;
    }

    ordered_json flags_json() const {
        return {{"model", model},
                {"movement", movement},
                {"alpha", alpha},
                {"iterations", iterations},
                {"shrinkage", shrinkage},
                {"max_depth", max_depth},
                {"min_leaf_weight", min_leaf_weight},
                {"loss", loss},
                {"trada_rounds", trada_rounds}};
    }
};

// ---------------------------------------------------------------- generate

int cmd_generate(const fs::path& scenario_path, const fs::path& shift_path, int fleet_n,
                 std::uint64_t seed_override, bool has_seed, const fs::path& out_dir) {
    da::ScenarioConfig base = da::scenario_from_json(slurp(scenario_path));
    if (has_seed) base.seed = seed_override;
    base.validate();

    std::vector<da::ScenarioConfig> scenarios;
    if (fleet_n > 0) {
        da::ShiftRanges shift;
        if (!shift_path.empty()) shift = da::shift_ranges_from_json(slurp(shift_path));
        scenarios = da::make_fleet(base, fleet_n, shift, base.seed);
    } else {
        scenarios.push_back(base);
    }

    fs::create_directories(out_dir);
    for (const da::ScenarioConfig& cfg : scenarios) {
        da::GenerateResult res = da::generate(cfg);
        fs::path dir = scenarios.size() > 1 ? out_dir / cfg.intersection_id : out_dir;
        fs::create_directories(dir);
        {
            std::ostringstream ss;
            da::write_event_log(ss, res.events);
            da::atomic_write(dir / "events.csv", ss.str());
        }
        da::atomic_write(dir / "intersection.json",
                         da::intersection_config_to_json(res.config) + "\n");
        {
            std::ostringstream ss;
            da::write_ground_truth_csv(ss, res.ground_truth);
            da::atomic_write(dir / "ground_truth.csv", ss.str());
        }
        if (res.oversaturated)
            std::cerr << "warning: " << cfg.intersection_id
                      << " has hours with demand above capacity\n";
    }

    ordered_json flags = {{"scenario", scenario_path.string()},
                          {"fleet_n", fleet_n},
                          {"out_dir", out_dir.string()}};
    if (!shift_path.empty()) flags["shift"] = shift_path.string();
    std::vector<fs::path> inputs{scenario_path};
    if (!shift_path.empty()) inputs.push_back(shift_path);
    write_run_manifest(out_dir / "generate", "generate", flags, base.seed, inputs);
    return 0;
}

// ----------------------------------------------------------------- extract

int cmd_extract(const fs::path& events_path, const fs::path& config_path,
                const fs::path& out_path) {
    da::IntersectionConfig config = da::intersection_config_from_json(slurp(config_path));
    config.validate();

    std::ifstream in(events_path);
    if (!in) throw DataError("cannot open " + events_path.string());
    std::vector<da::EventRecord> events;
    try {
        events = da::parse_event_log(in);
    } catch (const da::ParseError& e) {
        throw DataError(events_path.string() + ": " + e.what());
    }
    da::SignalTimeline timeline = da::build_timeline(events);
    da::PairingStats stats;
    std::vector<da::Actuation> acts = da::pair_actuations(events, timeline, config, &stats);
    for (const std::string& id : stats.unknown_detectors)
        std::cerr << "warning: unknown detector " << id << " ignored\n";
    if (stats.dropped_unmatched_on || stats.dropped_zero_length ||
        stats.dropped_out_of_timeline)
        std::cerr << "warning: dropped actuations (unmatched=" << stats.dropped_unmatched_on
                  << ", zero_length=" << stats.dropped_zero_length
                  << ", out_of_timeline=" << stats.dropped_out_of_timeline << ")\n";

    da::FeatureTable table = da::extract_features(acts, timeline, config);
    std::ostringstream ss;
    da::write_feature_csv(ss, table);
    da::atomic_write(out_path, ss.str());

    ordered_json flags = {{"events", events_path.string()},
                          {"config", config_path.string()},
                          {"out", out_path.string()}};
    write_run_manifest(out_path, "extract", flags, 0, {events_path, config_path});
    return 0;
}

// ------------------------------------------------------------------- train

int cmd_train(const std::vector<fs::path>& source_paths, const fs::path& target_path,
              const CommonModelFlags& mf, const fs::path& out_path) {
    da::Movement movement = da::movement_from_string(mf.movement);
    da::DomainSplit split;
    split.manifest = da::FeatureTable::default_manifest();
    for (const fs::path& p : source_paths) {
        da::Dataset ds = to_dataset(load_features(p), movement);
        split.source.X.insert(split.source.X.end(), ds.X.begin(), ds.X.end());
        split.source.y.insert(split.source.y.end(), ds.y.begin(), ds.y.end());
    }
    if (!target_path.empty())
        split.target_finetune = to_dataset(load_features(target_path), movement);
    if (mf.model != "gbm" && split.target_finetune.size() == 0)
        throw CLI::ValidationError("--target-finetune is required for model " + mf.model);

    std::string artifact;
    if (mf.model == "trada") {
        da::TradaConfig cfg{mf.trada_rounds, mf.train()};
        artifact = da::trada_to_json(da::fit_tradaboost_r2(split, cfg));
    } else if (mf.model == "gbm") {
        std::vector<da::WeightedSample> samples;
        for (std::size_t i = 0; i < split.source.size(); ++i)
            samples.push_back({split.source.X[i], split.source.y[i], 1.0});
        artifact = da::gbm_to_json(
            da::fit_gbm(samples, mf.train(), mf.loss_enum(), split.manifest));
    } else if (mf.model == "gbbw") {
        da::GbbwConfig cfg{mf.alpha, mf.train(), false, mf.loss_enum()};
        artifact = da::gbm_to_json(da::fit_gbbw(split, cfg));
    } else {
        da::KernelSpec kernel;
        kernel.seed = mf.seed;
        da::WeightEstimate est;
        if (mf.model == "kmm")
            est = da::kmm_weights(split.source.X, split.target_finetune.X, kernel);
        else if (mf.model == "kliep")
            est = da::kliep_weights(split.source.X, split.target_finetune.X, kernel);
        else if (mf.model == "ulsif")
            est = da::ulsif_weights(split.source.X, split.target_finetune.X, kernel);
        else if (mf.model == "rulsif")
            est = da::rulsif_weights(split.source.X, split.target_finetune.X, kernel);
        else if (mf.model == "iwc")
            est = da::iwc_weights(split.source.X, split.target_finetune.X);
        else
            throw CLI::ValidationError("unknown model: " + mf.model);
        artifact = da::gbm_to_json(
            da::fit_weighted_gbm(split, est.weights, mf.train(), mf.loss_enum()));
    }
    da::atomic_write(out_path, artifact + "\n");

    ordered_json flags = mf.flags_json();
    flags["out"] = out_path.string();
    std::vector<fs::path> inputs = source_paths;
    if (!target_path.empty()) inputs.push_back(target_path);
    write_run_manifest(out_path, "train", flags, mf.seed, inputs);
    return 0;
}

// ---------------------------------------------------------------- evaluate

int cmd_evaluate(const fs::path& model_path, const fs::path& features_path,
                 const std::string& movement_str, const fs::path& out_path) {
    da::Movement movement = da::movement_from_string(movement_str);
    da::Dataset ds = to_dataset(load_features(features_path), movement);
    if (ds.size() == 0) throw DataError("no rows for movement " + movement_str);

    std::string text = slurp(model_path);
    auto peek = nlohmann::json::parse(text);
    std::vector<double> yhat(ds.size());
    if (peek.contains("prediction_rule")) {
        da::TradaModel model = da::trada_from_json(text);
        for (std::size_t i = 0; i < ds.size(); ++i) yhat[i] = model.predict(ds.X[i]);
    } else {
        da::GbmModel model = da::gbm_from_json(text);
        for (std::size_t i = 0; i < ds.size(); ++i) yhat[i] = model.predict(ds.X[i]);
    }
    da::MetricsReport rep = da::score(ds.y, yhat);

    ordered_json j = {{"mape_pct", rep.mape_pct},
                      {"mae_s", rep.mae_s},
                      {"rmse_s", rep.rmse_s},
                      {"n_used", rep.n_used},
                      {"n_dropped_zero_label", rep.n_dropped_zero_label}};
    std::string out = j.dump(2) + "\n";
    if (out_path.empty()) {
        std::cout << out;
    } else {
        da::atomic_write(out_path, out);
        ordered_json flags = {{"model", model_path.string()},
                              {"features", features_path.string()},
                              {"movement", movement_str}};
        write_run_manifest(out_path, "evaluate", flags, 0, {model_path, features_path});
    }
    return 0;
}

// -------------------------------------------------------------------- loio

std::vector<da::FeatureTable> load_fleet(const std::vector<fs::path>& paths) {
    if (paths.size() < 2)
        throw CLI::ValidationError("need at least 2 --features files for leave-one-out");
    std::vector<da::FeatureTable> fleet;
    for (const fs::path& p : paths) fleet.push_back(load_features(p));
    return fleet;
}

int cmd_loio(const std::vector<fs::path>& feature_paths, const std::vector<std::string>& models,
             const CommonModelFlags& mf, const std::vector<double>& gbbw_grid, int budget,
             const std::string& policy_str, int jobs, const fs::path& out_path,
             const fs::path& boxplot_path) {
    da::Movement movement = da::movement_from_string(mf.movement);
    da::FinetunePolicy policy = da::finetune_policy_from_string(policy_str);
    if (budget < 0) budget = movement == da::Movement::left_turn ? 72 : 96;

    std::vector<da::FeatureTable> fleet = load_fleet(feature_paths);
    std::vector<da::ModelSpec> specs = da::make_models(models, mf.model_options(gbbw_grid));
    da::LoioResult res =
        da::run_loio(fleet, specs, movement, budget, policy, mf.seed, jobs);

    ordered_json run_config = mf.flags_json();
    run_config.erase("model");
    run_config["models"] = models;
    run_config["budget"] = budget;
    run_config["policy"] = policy_str;
    run_config["fleet_size"] = fleet.size();
    if (!gbbw_grid.empty()) run_config["gbbw_grid"] = gbbw_grid;
    da::atomic_write(out_path, da::loio_report_json(res, run_config.dump()) + "\n");
    if (!boxplot_path.empty()) {
        std::ostringstream ss;
        da::write_boxplot_csv(ss, res);
        da::atomic_write(boxplot_path, ss.str());
    }
    write_run_manifest(out_path, "loio", run_config, mf.seed, feature_paths);

    for (const std::string& f : res.failures) std::cerr << "warning: " << f << "\n";
    return 0;
}

int cmd_ablate(const std::vector<fs::path>& feature_paths, const CommonModelFlags& mf,
               const std::vector<double>& gbbw_grid, std::vector<int> budgets,
               const std::string& policy_str, int jobs, const fs::path& out_path) {
    da::Movement movement = da::movement_from_string(mf.movement);
    da::FinetunePolicy policy = da::finetune_policy_from_string(policy_str);
    if (budgets.empty()) budgets = {24, 48, 72, 96, 120, 144, 168};

    std::vector<da::FeatureTable> fleet = load_fleet(feature_paths);
    std::vector<da::ModelSpec> specs = da::make_models({mf.model}, mf.model_options(gbbw_grid));
    std::vector<da::AblationRow> rows =
        da::run_ablation(fleet, specs[0], movement, budgets, policy, mf.seed, jobs);

    std::ostringstream ss;
    da::write_ablation_csv(ss, rows);
    da::atomic_write(out_path, ss.str());
    ordered_json flags = mf.flags_json();
    flags["budgets"] = budgets;
    flags["policy"] = policy_str;
    write_run_manifest(out_path, "ablate", flags, mf.seed, feature_paths);
    return 0;
}

// -------------------------------------------------------------- gridsearch

int cmd_gridsearch(const std::vector<fs::path>& source_paths, const fs::path& target_path,
                   const CommonModelFlags& mf, std::vector<double> alphas, int budget,
                   const std::string& policy_str, const fs::path& out_path) {
    da::Movement movement = da::movement_from_string(mf.movement);
    da::FinetunePolicy policy = da::finetune_policy_from_string(policy_str);
    if (alphas.empty()) alphas = {0.1, 0.3, 0.5, 0.7, 0.9};
    if (budget < 0) budget = movement == da::Movement::left_turn ? 72 : 96;

    da::DomainSplit split;
    split.manifest = da::FeatureTable::default_manifest();
    for (const fs::path& p : source_paths) {
        da::Dataset ds = to_dataset(load_features(p), movement);
        split.source.X.insert(split.source.X.end(), ds.X.begin(), ds.X.end());
        split.source.y.insert(split.source.y.end(), ds.y.begin(), ds.y.end());
    }
    da::FeatureTable target = load_features(target_path);
    da::SplitIndices sel = da::select_finetune(target, movement, budget, policy, mf.seed);
    for (std::size_t i : sel.finetune) {
        split.target_finetune.X.push_back(da::FeatureTable::features(target.rows[i]));
        split.target_finetune.y.push_back(target.rows[i].label_delay_s);
    }

    std::vector<da::GridPoint> grid;
    for (double a : alphas) grid.push_back({a, mf.train()});
    da::GridResult gr = da::grid_search(split, grid, 3, mf.loss_enum());

    ordered_json j;
    j["best_alpha"] = gr.best.alpha;
    j["cv_score_mape_pct"] = gr.cv_score;
    j["scores"] = ordered_json::array();
    for (std::size_t g = 0; g < grid.size(); ++g)
        j["scores"].push_back({{"alpha", grid[g].alpha}, {"mape_pct", gr.scores[g]}});
    std::string out = j.dump(2) + "\n";
    if (out_path.empty()) {
        std::cout << out;
    } else {
        da::atomic_write(out_path, out);
        ordered_json flags = mf.flags_json();
        flags["alphas"] = alphas;
        flags["budget"] = budget;
        flags["policy"] = policy_str;
        std::vector<fs::path> inputs = source_paths;
        inputs.push_back(target_path);
        write_run_manifest(out_path, "gridsearch", flags, mf.seed, inputs);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"delay estimation at signalized intersections with domain adaptation"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "synthesize controller event logs");
    fs::path gen_scenario, gen_shift, gen_out = "out";
    int gen_fleet = 0;
    std::uint64_t gen_seed = 0;
    gen->add_option("--scenario", gen_scenario, "scenario JSON")->required();
    gen->add_option("--shift", gen_shift, "fleet shift-range JSON");
    gen->add_option("--fleet", gen_fleet, "generate a fleet of this many intersections");
    auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "override the scenario seed");
    gen->add_option("--out-dir", gen_out, "output directory");

    // extract
    auto* ext = app.add_subcommand("extract", "hourly features from an event log");
    fs::path ext_events, ext_config, ext_out = "features.csv";
    ext->add_option("--events", ext_events, "event log CSV")->required();
    ext->add_option("--config", ext_config, "intersection JSON")->required();
    ext->add_option("--out", ext_out, "feature CSV output");

    // train
    auto* trn = app.add_subcommand("train", "fit a model and save the artifact");
    std::vector<fs::path> trn_sources;
    fs::path trn_target, trn_out = "model.json";
    CommonModelFlags trn_flags;
    trn->add_option("--source", trn_sources, "source-domain feature CSVs")->required();
    trn->add_option("--target-finetune", trn_target, "target fine-tune feature CSV");
    trn->add_option("--out", trn_out, "model artifact output");
    trn_flags.attach(trn);

    // evaluate
    auto* evl = app.add_subcommand("evaluate", "score a saved model on labeled rows");
    fs::path evl_model, evl_features, evl_out;
    std::string evl_movement = "through";
    evl->add_option("--model-file", evl_model, "model artifact JSON")->required();
    evl->add_option("--features", evl_features, "feature CSV")->required();
    evl->add_option("--movement", evl_movement, "left_turn | through");
    evl->add_option("--out", evl_out, "report JSON (stdout when omitted)");

    // loio
    auto* loio = app.add_subcommand("loio", "leave-one-intersection-out comparison");
    std::vector<fs::path> loio_features;
    std::vector<std::string> loio_models = {"gbm", "gbbw"};
    std::vector<double> loio_grid;
    fs::path loio_out = "loio_report.json", loio_boxplot;
    std::string loio_policy = "first_complete_days";
    int loio_budget = -1, loio_jobs = default_jobs();
    CommonModelFlags loio_flags;
    loio->add_option("--features", loio_features, "one feature CSV per intersection")
        ->required();
    loio->add_option("--models", loio_models, "models to compare");
    loio->add_option("--gbbw-grid", loio_grid, "per-fold CV alpha grid for gbbw");
    loio->add_option("--budget", loio_budget,
                     "fine-tune rows per fold (default 72 left_turn / 96 through)");
    loio->add_option("--policy", loio_policy, "first_complete_days | seeded_random");
    loio->add_option("--jobs", loio_jobs, "parallel folds (env DELAY_ADAPT_JOBS)");
    loio->add_option("--out", loio_out, "report JSON output");
    loio->add_option("--boxplot", loio_boxplot, "per-fold metric CSV for plotting");
    loio_flags.attach(loio, /*with_model=*/false);

    // ablate
    auto* abl = app.add_subcommand("ablate", "fine-tune budget sweep");
    std::vector<fs::path> abl_features;
    std::vector<int> abl_budgets;
    std::vector<double> abl_grid;
    fs::path abl_out = "ablation.csv";
    std::string abl_policy = "first_complete_days";
    int abl_jobs = default_jobs();
    CommonModelFlags abl_flags;
    abl->add_option("--features", abl_features, "one feature CSV per intersection")
        ->required();
    abl->add_option("--budgets", abl_budgets, "budgets to sweep");
    abl->add_option("--gbbw-grid", abl_grid, "per-fold CV alpha grid for gbbw");
    abl->add_option("--policy", abl_policy, "first_complete_days | seeded_random");
    abl->add_option("--jobs", abl_jobs, "parallel folds (env DELAY_ADAPT_JOBS)");
    abl->add_option("--out", abl_out, "budget/MAPE CSV output");
    abl_flags.attach(abl);

    // gridsearch
    auto* grd = app.add_subcommand("gridsearch", "cross-validated alpha selection");
    std::vector<fs::path> grd_sources;
    std::vector<double> grd_alphas;
    fs::path grd_target, grd_out;
    std::string grd_policy = "first_complete_days";
    int grd_budget = -1;
    CommonModelFlags grd_flags;
    grd->add_option("--source", grd_sources, "source-domain feature CSVs")->required();
    grd->add_option("--target", grd_target, "target feature CSV")->required();
    grd->add_option("--alphas", grd_alphas, "alpha grid");
    grd->add_option("--budget", grd_budget,
                    "fine-tune rows (default 72 left_turn / 96 through)");
    grd->add_option("--policy", grd_policy, "first_complete_days | seeded_random");
    grd->add_option("--out", grd_out, "report JSON (stdout when omitted)");
    grd_flags.attach(grd, /*with_model=*/false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (gen->parsed())
            return cmd_generate(gen_scenario, gen_shift, gen_fleet, gen_seed,
                                gen_seed_opt->count() > 0, gen_out);
        if (ext->parsed()) return cmd_extract(ext_events, ext_config, ext_out);
        if (trn->parsed()) return cmd_train(trn_sources, trn_target, trn_flags, trn_out);
        if (evl->parsed()) return cmd_evaluate(evl_model, evl_features, evl_movement, evl_out);
        if (loio->parsed())
            return cmd_loio(loio_features, loio_models, loio_flags, loio_grid, loio_budget,
                            loio_policy, loio_jobs, loio_out, loio_boxplot);
        if (abl->parsed())
            return cmd_ablate(abl_features, abl_flags, abl_grid, abl_budgets, abl_policy,
                              abl_jobs, abl_out);
        if (grd->parsed())
            return cmd_gridsearch(grd_sources, grd_target, grd_flags, grd_alphas, grd_budget,
                                  grd_policy, grd_out);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const da::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const da::ScenarioError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const da::TimelineError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const da::ExtractError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const da::InsufficientTargetData& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitProtocol;
    } catch (const da::TooFewTargetSamples& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitProtocol;
    } catch (const da::AllLabelsZero& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitProtocol;
    } catch (const da::EmptyDomain& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitProtocol;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
