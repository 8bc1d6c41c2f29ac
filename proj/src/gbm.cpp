#include "delay_adapt/gbm.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "json_trees.hpp"

namespace da {

const char* to_string(Loss l) { return l == Loss::squared ? "squared" : "absolute"; }

Loss loss_from_string(const std::string& s) {
    if (s == "squared") return Loss::squared;
    if (s == "absolute") return Loss::absolute;
    throw std::runtime_error("unknown loss: " + s);
}

double loss_value(Loss loss, double y, double f) {
    double d = y - f;
    return loss == Loss::squared ? 0.5 * d * d : std::abs(d);
}

double RegressionTree::operator()(std::span<const double> x) const {
    int i = 0;
    while (!nodes[i].is_leaf())
        i = x[static_cast<std::size_t>(nodes[i].feature)] < nodes[i].threshold ? nodes[i].left
                                                                               : nodes[i].right;
    return nodes[i].value;
}

double GbmModel::predict(std::span<const double> x) const {
    if (x.size() != manifest.size()) throw DimensionMismatch(x.size(), manifest.size());
    double f = f0;
    for (const auto& s : stages) f += shrinkage * s.gamma * s.tree(x);
    return f;
}

namespace {

// Correctly-rounded summation (Shewchuk partials, fsum-style final round).
// The result depends only on the exact real-valued sum, so reductions over
// an integer-weighted sample and over its row-duplicated expansion agree
// bit for bit.
struct ExactSum {
    std::vector<double> partials;

    void add(double x) {
        std::size_t used = 0;
        for (std::size_t i = 0; i < partials.size(); ++i) {
            double y = partials[i];
            if (std::abs(x) < std::abs(y)) std::swap(x, y);
            double hi = x + y;
            double lo = y - (hi - x);
            if (lo != 0.0) partials[used++] = lo;
            x = hi;
        }
        partials.resize(used);
        partials.push_back(x);
    }

    // adds a*b exactly via an error-free product
    void add_product(double a, double b) {
        double p = a * b;
        double e = std::fma(a, b, -p);
        add(p);
        if (e != 0.0) add(e);
    }

    // adds a*b*c exactly
    void add_product3(double a, double b, double c) {
        double p = a * b;
        double e = std::fma(a, b, -p);
        add_product(p, c);
        if (e != 0.0) add_product(e, c);
    }

    double value() const {
        double hi = 0.0;
        std::size_t n = partials.size();
        if (n) {
            hi = partials[--n];
            double lo = 0.0;
            while (n) {
                double x = hi, y = partials[--n];
                hi = x + y;
                double yr = hi - x;
                lo = y - yr;
                if (lo != 0.0) break;
            }
            // round-half-even correction when the remainder is exactly half an ulp
            if (n && ((lo < 0.0 && partials[n - 1] < 0.0) ||
                      (lo > 0.0 && partials[n - 1] > 0.0))) {
                double y = lo * 2.0;
                double x = hi + y;
                double yr = x - hi;
                if (y == yr) hi = x;
            }
        }
        return hi;
    }
};

}  // namespace

double fit_constant(std::span<const WeightedSample> samples, Loss loss) {
    ExactSum sw;
    for (const auto& s : samples) sw.add(s.w);
    double wsum = sw.value();
    if (!(wsum > 0)) throw AllZeroWeights();
    if (loss == Loss::squared) {
        ExactSum num;
        for (const auto& s : samples) num.add_product(s.w, s.y);
        return num.value() / wsum;
    }
    // weighted median: smallest y whose cumulative weight reaches half
    std::vector<std::size_t> idx(samples.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return samples[a].y < samples[b].y;
    });
    ExactSum cum;
    for (std::size_t i : idx) {
        cum.add(samples[i].w);
        if (cum.value() >= 0.5 * wsum) return samples[i].y;
    }
    return samples[idx.back()].y;
}

std::vector<double> pseudo_residuals(std::span<const WeightedSample> samples,
                                     std::span<const double> preds, Loss loss) {
    std::vector<double> r(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        double d = samples[i].y - preds[i];
        r[i] = loss == Loss::squared ? d : (d > 0 ? 1.0 : d < 0 ? -1.0 : 0.0);
    }
    return r;
}

namespace {

// Columnar view with per-feature sort orders computed once per dataset;
// reused across all boosting stages.
struct TreeData {
    std::size_t n = 0, q = 0;
    std::vector<std::vector<double>> col;     // col[f][i]
    std::vector<std::vector<int>> order;      // indices sorted by col[f]
    std::vector<double> w;                    // raw positive weights

    void build(std::span<const WeightedSample> samples) {
        n = samples.size();
        q = n ? samples[0].x.size() : 0;
        col.assign(q, std::vector<double>(n));
        w.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (samples[i].x.size() != q)
                throw DimensionMismatch(samples[i].x.size(), q);
            for (std::size_t f = 0; f < q; ++f) col[f][i] = samples[i].x[f];
            w[i] = samples[i].w;
        }
        order.assign(q, {});
        for (std::size_t f = 0; f < q; ++f) {
            auto& o = order[f];
            o.resize(n);
            std::iota(o.begin(), o.end(), 0);
            std::stable_sort(o.begin(), o.end(), [&](int a, int b) {
                return col[f][static_cast<std::size_t>(a)] < col[f][static_cast<std::size_t>(b)];
            });
        }
    }
};

struct TreeBuilder {
    const TreeData& data;
    std::span<const double> target;
    const TrainConfig& cfg;
    double min_leaf;  // absolute weight threshold (min_leaf_weight * mean weight)
    std::vector<TreeNode> nodes;
    std::vector<char> in_node;

    TreeBuilder(const TreeData& d, std::span<const double> t, const TrainConfig& c,
                double min_leaf_abs)
        : data(d), target(t), cfg(c), min_leaf(min_leaf_abs), in_node(d.n, 0) {}

    int build(std::vector<int>& idx, int depth) {
        ExactSum sw, swt;
        for (int i : idx) {
            sw.add(data.w[static_cast<std::size_t>(i)]);
            swt.add_product(data.w[static_cast<std::size_t>(i)],
                            target[static_cast<std::size_t>(i)]);
        }
        double wsum = sw.value(), wt = swt.value();
        double mean = wsum > 0 ? wt / wsum : 0.0;

        int best_feature = -1;
        double best_threshold = 0;
        double parent_score = wsum > 0 ? wt * wt / wsum : 0.0;
        double best_score = parent_score;

        if (depth < cfg.max_depth && idx.size() >= 2) {
            for (int i : idx) in_node[static_cast<std::size_t>(i)] = 1;
            for (std::size_t f = 0; f < data.q; ++f) {
                const auto& colf = data.col[f];
                ExactSum sl, stl;
                double prev_value = 0;
                bool have_prev = false;
                for (int i : data.order[f]) {
                    if (!in_node[static_cast<std::size_t>(i)]) continue;
                    double v = colf[static_cast<std::size_t>(i)];
                    if (have_prev && v > prev_value) {
                        double wl = sl.value(), wtl = stl.value();
                        double wr = wsum - wl, wtr = wt - wtl;
                        if (wl >= min_leaf && wr >= min_leaf) {
                            double score = wtl * wtl / wl + wtr * wtr / wr;
                            // relative margin: exact ties (and rounding-level
                            // near-ties) keep the earlier candidate, i.e.
                            // lowest feature then lowest threshold
                            if (score > best_score * (1 + 1e-12)) {
                                best_score = score;
                                best_feature = static_cast<int>(f);
                                best_threshold = 0.5 * (prev_value + v);
                            }
                        }
                    }
                    sl.add(data.w[static_cast<std::size_t>(i)]);
                    stl.add_product(data.w[static_cast<std::size_t>(i)],
                                    target[static_cast<std::size_t>(i)]);
                    prev_value = v;
                    have_prev = true;
                }
            }
            for (int i : idx) in_node[static_cast<std::size_t>(i)] = 0;
        }

        int self = static_cast<int>(nodes.size());
        nodes.push_back({});
        if (best_feature < 0) {
            nodes[static_cast<std::size_t>(self)].value = mean;
            return self;
        }
        std::vector<int> left, right;
        left.reserve(idx.size());
        right.reserve(idx.size());
        for (int i : idx)
            (data.col[static_cast<std::size_t>(best_feature)][static_cast<std::size_t>(i)] <
                     best_threshold
                 ? left
                 : right)
                .push_back(i);
        nodes[static_cast<std::size_t>(self)].feature = best_feature;
        nodes[static_cast<std::size_t>(self)].threshold = best_threshold;
        nodes[static_cast<std::size_t>(self)].value = mean;
        int l = build(left, depth + 1);
        int r = build(right, depth + 1);
        nodes[static_cast<std::size_t>(self)].left = l;
        nodes[static_cast<std::size_t>(self)].right = r;
        return self;
    }
};

RegressionTree build_tree(const TreeData& data, std::span<const double> target,
                          const TrainConfig& cfg, double min_leaf_abs) {
    TreeBuilder b(data, target, cfg, min_leaf_abs);
    std::vector<int> idx(data.n);
    std::iota(idx.begin(), idx.end(), 0);
    b.build(idx, 0);
    return RegressionTree{std::move(b.nodes)};
}

// Keep only w > 0 samples; zero-weight rows never influence the fit.
std::vector<WeightedSample> filter_samples(std::span<const WeightedSample> samples) {
    std::vector<WeightedSample> out;
    for (const auto& s : samples) {
        if (s.w < 0 || !std::isfinite(s.w)) throw std::runtime_error("invalid sample weight");
        if (s.w > 0) out.push_back(s);
    }
    if (out.empty()) throw AllZeroWeights();
    return out;
}

// min_leaf_weight is expressed in average-weight-sample units; convert to an
// absolute weight so decisions scale with the data.
double min_leaf_absolute(std::span<const WeightedSample> samples, const TrainConfig& cfg) {
    ExactSum sw;
    for (const auto& s : samples) sw.add(s.w);
    return cfg.min_leaf_weight * (sw.value() / static_cast<double>(samples.size()));
}

double golden_section_min(const std::function<double(double)>& f, double lo, double hi,
                          double tol, int max_iter = 200) {
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - invphi * (b - a), d = a + invphi * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < max_iter && (b - a) > tol; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

double gamma_for(std::span<const WeightedSample> samples, std::span<const double> preds,
                 std::span<const double> h, Loss loss) {
    if (loss == Loss::squared) {
        ExactSum num, den;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            num.add_product3(samples[i].w, samples[i].y - preds[i], h[i]);
            den.add_product3(samples[i].w, h[i], h[i]);
        }
        double dv = den.value();
        return dv > 0 ? num.value() / dv : 0.0;
    }
    double bound = 0;
    bool any = false;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].w > 0 && h[i] != 0) {
            bound = std::max(bound, std::abs((samples[i].y - preds[i]) / h[i]));
            any = true;
        }
    }
    if (!any) return 0.0;
    bound += 1.0;
    auto obj = [&](double g) {
        ExactSum v;
        for (std::size_t i = 0; i < samples.size(); ++i)
            v.add_product(samples[i].w, std::abs(samples[i].y - preds[i] - g * h[i]));
        return v.value();
    };
    return golden_section_min(obj, -bound, bound, 1e-10 * (1.0 + bound));
}

}  // namespace

RegressionTree fit_tree(std::span<const WeightedSample> samples, const TrainConfig& cfg) {
    auto norm = filter_samples(samples);
    TreeData data;
    data.build(norm);
    std::vector<double> target(norm.size());
    for (std::size_t i = 0; i < norm.size(); ++i) target[i] = norm[i].y;
    return build_tree(data, target, cfg, min_leaf_absolute(norm, cfg));
}

double line_search_gamma(std::span<const WeightedSample> samples,
                         std::span<const double> preds, const RegressionTree& tree,
                         Loss loss) {
    std::vector<double> h(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) h[i] = tree(samples[i].x);
    return gamma_for(samples, preds, h, loss);
}

GbmModel fit_gbm(std::span<const WeightedSample> samples, const TrainConfig& cfg,
                 Loss loss, std::vector<std::string> manifest) {
    auto norm = filter_samples(samples);
    GbmModel model;
    model.shrinkage = cfg.shrinkage;
    model.loss = loss;
    model.manifest = std::move(manifest);
    model.f0 = fit_constant(norm, loss);

    TreeData data;
    data.build(norm);
    double min_leaf_abs = min_leaf_absolute(norm, cfg);
    std::vector<double> preds(norm.size(), model.f0);
    for (int m = 0; m < cfg.iterations; ++m) {
        std::vector<double> r = pseudo_residuals(norm, preds, loss);
        RegressionTree tree = build_tree(data, r, cfg, min_leaf_abs);
        std::vector<double> h(norm.size());
        for (std::size_t i = 0; i < norm.size(); ++i) h[i] = tree(norm[i].x);
        double gamma = gamma_for(norm, preds, h, loss);
        for (std::size_t i = 0; i < norm.size(); ++i)
            preds[i] += cfg.shrinkage * gamma * h[i];
        model.stages.push_back({std::move(tree), gamma});
    }
    return model;
}

std::string gbm_to_json(const GbmModel& model) {
    nlohmann::ordered_json j;
    j["version"] = 1;
    j["loss"] = to_string(model.loss);
    j["shrinkage"] = model.shrinkage;
    j["f0"] = model.f0;
    j["manifest"] = model.manifest;
    j["stages"] = nlohmann::ordered_json::array();
    for (const auto& s : model.stages) {
        nlohmann::ordered_json js;
        js["gamma"] = s.gamma;
        js["nodes"] = detail::nodes_to_json(s.tree);
        j["stages"].push_back(std::move(js));
    }
    return j.dump();
}

GbmModel gbm_from_json(const std::string& json_text) {
    auto j = nlohmann::json::parse(json_text);
    if (j.at("version").get<int>() != 1)
        throw std::runtime_error("unsupported model artifact version");
    GbmModel model;
    model.loss = loss_from_string(j.at("loss").get<std::string>());
    model.shrinkage = j.at("shrinkage").get<double>();
    model.f0 = j.at("f0").get<double>();
    model.manifest = j.at("manifest").get<std::vector<std::string>>();
    for (const auto& js : j.at("stages")) {
        GbmModel::Stage st;
        st.gamma = js.at("gamma").get<double>();
        st.tree = detail::nodes_from_json(js.at("nodes"));
        model.stages.push_back(std::move(st));
    }
    return model;
}

}  // namespace da
