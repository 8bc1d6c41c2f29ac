#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "delay_adapt/density_ratio.hpp"

using namespace da;

namespace {

Rows normal_rows(std::mt19937_64& rng, std::size_t n, double mean, double sd = 1.0) {
    std::normal_distribution<double> d(mean, sd);
    Rows r(n);
    for (auto& row : r) row = {d(rng)};
    return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    auto ranks = [](const std::vector<double>& v) {
        std::vector<std::size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
        std::vector<double> r(v.size());
        for (std::size_t k = 0; k < idx.size(); ++k) r[idx[k]] = static_cast<double>(k);
        return r;
    };
    auto ra = ranks(a), rb = ranks(b);
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= ra.size();
    mb /= rb.size();
    double num = 0, da = 0, db = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        num += (ra[i] - ma) * (rb[i] - mb);
        da += (ra[i] - ma) * (ra[i] - ma);
        db += (rb[i] - mb) * (rb[i] - mb);
    }
    return num / std::sqrt(da * db);
}

double rbf(const std::vector<double>& a, const std::vector<double>& b, double sigma) {
    double d2 = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
    return std::exp(-d2 / (2 * sigma * sigma));
}

double kmm_objective(const Rows& src, const Rows& tgt, double sigma,
                     const std::vector<double>& beta) {
    std::size_t n1 = src.size(), n2 = tgt.size();
    double quad = 0, lin = 0;
    for (std::size_t i = 0; i < n1; ++i)
        for (std::size_t j = 0; j < n1; ++j)
            quad += beta[i] * beta[j] * rbf(src[i], src[j], sigma);
    for (std::size_t i = 0; i < n1; ++i) {
        double kap = 0;
        for (std::size_t j = 0; j < n2; ++j) kap += rbf(src[i], tgt[j], sigma);
        lin += beta[i] * kap;
    }
    double a = static_cast<double>(n1), b = static_cast<double>(n2);
    return quad / (a * a) - 2.0 * lin / (a * b);
}

void check_basic(const WeightEstimate& est, std::size_t n1) {
    REQUIRE(est.weights.size() == n1);
    for (double w : est.weights) {
        CHECK(w >= 0.0);
        CHECK(std::isfinite(w));
    }
}

}  // namespace

TEST_CASE("median heuristic bandwidth is positive and scale-covariant") {
    std::mt19937_64 rng(1);
    Rows a = normal_rows(rng, 40, 0), b = normal_rows(rng, 40, 1);
    double s = median_heuristic_bandwidth(a, b, 7);
    CHECK(s > 0);
    Rows a2 = a, b2 = b;
    for (auto& r : a2) r[0] *= 10;
    for (auto& r : b2) r[0] *= 10;
    CHECK(median_heuristic_bandwidth(a2, b2, 7) == doctest::Approx(10 * s).epsilon(1e-9));
}

TEST_CASE("kmm: identical domains give near-uniform weights") {
    std::mt19937_64 rng(3);
    Rows pts = normal_rows(rng, 60, 0);
    WeightEstimate est = kmm_weights(pts, pts, {}, 10.0, 0.01);
    check_basic(est, 60);
    for (double w : est.weights) {
        CHECK(w >= 0.9);
        CHECK(w <= 1.1);
    }
}

TEST_CASE("kmm: B=1 and eps=0 force uniform weights") {
    std::mt19937_64 rng(5);
    Rows src = normal_rows(rng, 30, 0), tgt = normal_rows(rng, 25, 1);
    WeightEstimate est = kmm_weights(src, tgt, {}, 1.0, 0.0);
    check_basic(est, 30);
    for (double w : est.weights) CHECK(w == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("kmm: weights move toward the target mass (grid oracle)") {
    Rows src{{0.0}, {1.0}, {2.0}};
    Rows tgt{{2.0}, {2.0}, {2.0}};
    KernelSpec k;
    k.bandwidth = 1.0;
    WeightEstimate est = kmm_weights(src, tgt, k, 10.0, 0.01);
    check_basic(est, 3);
    CHECK(est.weights[2] > est.weights[0]);

    // brute-force the box [0,3]^3 on a 21^3 grid; solver must do at least as well
    double best = 1e100;
    for (int a = 0; a <= 20; ++a)
        for (int b = 0; b <= 20; ++b)
            for (int c = 0; c <= 20; ++c) {
                std::vector<double> beta{a * 0.15, b * 0.15, c * 0.15};
                double sum = beta[0] + beta[1] + beta[2];
                if (std::abs(sum - 3.0) > 3.0 * 0.01) continue;
                best = std::min(best, kmm_objective(src, tgt, 1.0, beta));
            }
    CHECK(kmm_objective(src, tgt, 1.0, est.weights) <= best + 1e-4);
}

TEST_CASE("kmm: constraints hold and objective beats uniform") {
    std::mt19937_64 rng(7);
    Rows src = normal_rows(rng, 80, 0), tgt = normal_rows(rng, 70, 1);
    double B = 1000.0, eps = 0.01;
    KernelSpec k;
    k.seed = 11;
    WeightEstimate est = kmm_weights(src, tgt, k, B, eps);
    check_basic(est, 80);
    double sum = std::accumulate(est.weights.begin(), est.weights.end(), 0.0);
    CHECK(std::abs(sum - 80.0) <= 80.0 * eps + 1e-6);
    for (double w : est.weights) CHECK(w <= B + 1e-6);
    double sigma = median_heuristic_bandwidth(src, tgt, 11);
    std::vector<double> uniform(80, 1.0);
    CHECK(kmm_objective(src, tgt, sigma, est.weights) <=
          kmm_objective(src, tgt, sigma, uniform) + 1e-12);
}

TEST_CASE("kliep: identical domains, one center") {
    std::mt19937_64 rng(13);
    Rows pts = normal_rows(rng, 50, 0);
    KernelSpec k;
    k.max_centers = 1;
    WeightEstimate est = kliep_weights(pts, pts, k);
    check_basic(est, 50);
    double mean = std::accumulate(est.weights.begin(), est.weights.end(), 0.0) / 50;
    CHECK(mean == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("kliep: mean-one constraint enforced at return") {
    std::mt19937_64 rng(17);
    Rows src = normal_rows(rng, 120, 0), tgt = normal_rows(rng, 100, 1);
    WeightEstimate est = kliep_weights(src, tgt, {});
    check_basic(est, 120);
    double mean = std::accumulate(est.weights.begin(), est.weights.end(), 0.0) / 120;
    CHECK(mean == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(est.constraint_residual <= 1e-9);
}

TEST_CASE("ulsif: residual small, weights clipped nonnegative, 1-center hand formula") {
    std::mt19937_64 rng(19);
    Rows src = normal_rows(rng, 100, 0), tgt = normal_rows(rng, 90, 1);
    WeightEstimate est = ulsif_weights(src, tgt, {}, 0.1);
    check_basic(est, 100);
    CHECK(est.constraint_residual < 1e-8);

    // 1 center with a huge bandwidth: K ~= 1 everywhere, so a = h/(H+lambda)
    // gives weights ~= 1/(1+lambda)
    Rows pts = normal_rows(rng, 80, 0);
    KernelSpec k1;
    k1.max_centers = 1;
    k1.bandwidth = 1e3;
    const double lambda = 0.25;
    WeightEstimate e1 = ulsif_weights(pts, pts, k1, lambda);
    double mean = std::accumulate(e1.weights.begin(), e1.weights.end(), 0.0) / 80;
    CHECK(mean == doctest::Approx(1.0 / (1.0 + lambda)).epsilon(1e-4));
}

TEST_CASE("rulsif: alpha 0 bit-equals ulsif; identical domains near 1; bounded") {
    std::mt19937_64 rng(23);
    Rows src = normal_rows(rng, 90, 0), tgt = normal_rows(rng, 80, 1);
    WeightEstimate u = ulsif_weights(src, tgt, {}, 0.1);
    WeightEstimate r0 = rulsif_weights(src, tgt, {}, 0.1, 0.0);
    CHECK(u.weights == r0.weights);
    CHECK(u.objective == r0.objective);

    Rows pts = normal_rows(rng, 80, 0);
    WeightEstimate same = rulsif_weights(pts, pts, {}, 0.01, 0.5);
    double mean = std::accumulate(same.weights.begin(), same.weights.end(), 0.0) / 80;
    CHECK(mean == doctest::Approx(1.0).epsilon(5e-2));

    // relative ratio against the 0.5-mixture is bounded by 1/alpha_rel
    WeightEstimate far = rulsif_weights(src, normal_rows(rng, 60, 6), {}, 0.1, 0.5);
    for (double w : far.weights) CHECK(w <= 2.0 + 0.1);
}

TEST_CASE("iwc: indistinguishable domains give weights near 1") {
    std::mt19937_64 rng(29);
    Rows pts = normal_rows(rng, 60, 0);
    WeightEstimate est = iwc_weights(pts, pts);
    check_basic(est, 60);
    for (double w : est.weights) CHECK(w == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("iwc: separable domains clip at the bounds") {
    std::mt19937_64 rng(31);
    Rows src = normal_rows(rng, 40, -30, 0.5), tgt = normal_rows(rng, 40, 30, 0.5);
    WeightEstimate est = iwc_weights(src, tgt, 1e-6);
    check_basic(est, 40);
    for (double w : est.weights) CHECK(w <= 50.0);
    double mx = *std::max_element(est.weights.begin(), est.weights.end());
    CHECK(mx < 1e-2);  // source points are confidently "not target"
}

TEST_CASE("shifted gaussians: estimators track the true ratio") {
    std::mt19937_64 rng(42);
    Rows src = normal_rows(rng, 500, 0), tgt = normal_rows(rng, 500, 1);
    std::vector<double> truth(500);
    for (std::size_t i = 0; i < 500; ++i) truth[i] = std::exp(src[i][0] - 0.5);

    KernelSpec k;
    k.seed = 5;
    CHECK(spearman(kliep_weights(src, tgt, k).weights, truth) >= 0.8);
    CHECK(spearman(ulsif_weights(src, tgt, k, 0.1).weights, truth) >= 0.8);
    CHECK(spearman(rulsif_weights(src, tgt, k, 0.1, 0.1).weights, truth) >= 0.8);
    CHECK(spearman(iwc_weights(src, tgt).weights, truth) >= 0.8);
}

TEST_CASE("permutation equivariance") {
    std::mt19937_64 rng(47);
    Rows src = normal_rows(rng, 40, 0), tgt = normal_rows(rng, 35, 1);
    std::vector<std::size_t> perm(40);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Rows permuted(40);
    for (std::size_t i = 0; i < 40; ++i) permuted[i] = src[perm[i]];

    KernelSpec k;
    k.bandwidth = median_heuristic_bandwidth(src, tgt, 0);  // fix sigma explicitly
    auto check_perm = [&](auto&& fn) {
        auto w0 = fn(src).weights;
        auto w1 = fn(permuted).weights;
        for (std::size_t i = 0; i < 40; ++i)
            CHECK(w1[i] == doctest::Approx(w0[perm[i]]).epsilon(1e-6));
    };
    check_perm([&](const Rows& s) { return ulsif_weights(s, tgt, k, 0.1); });
    check_perm([&](const Rows& s) { return rulsif_weights(s, tgt, k, 0.1, 0.1); });
    check_perm([&](const Rows& s) { return kliep_weights(s, tgt, k); });
}

TEST_CASE("median-heuristic scale robustness") {
    std::mt19937_64 rng(53);
    Rows src = normal_rows(rng, 60, 0), tgt = normal_rows(rng, 50, 1);
    Rows src2 = src, tgt2 = tgt;
    const double c = 250.0;
    for (auto& r : src2) r[0] *= c;
    for (auto& r : tgt2) r[0] *= c;
    auto w1 = ulsif_weights(src, tgt, {}, 0.1).weights;
    auto w2 = ulsif_weights(src2, tgt2, {}, 0.1).weights;
    for (std::size_t i = 0; i < w1.size(); ++i)
        CHECK(w2[i] == doctest::Approx(w1[i]).epsilon(1e-6));
}
