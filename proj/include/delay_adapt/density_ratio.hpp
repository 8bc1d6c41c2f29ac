#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace da {

using Rows = std::vector<std::vector<double>>;  // row-major samples

/// Gaussian RBF kernel spec. bandwidth <= 0 selects the median heuristic
/// (median pairwise distance over a seeded subsample of the pooled data).
struct KernelSpec {
    double bandwidth = 0;
    std::size_t max_centers = 100;
    std::uint64_t seed = 0;
};

struct WeightEstimate {
    std::vector<double> weights;  // length n1, all >= 0
    double objective = 0;
    int iterations = 0;
    double constraint_residual = 0;
    bool converged = true;
};

struct DensityRatioError : std::runtime_error {
    explicit DensityRatioError(const std::string& msg) : std::runtime_error(msg) {}
};

double median_heuristic_bandwidth(const Rows& source, const Rows& target, std::uint64_t seed);

/// Kernel mean matching by projected gradient with fixed step 1/Lipschitz.
/// Box constraint [0, B] and sum slack |sum - n1| <= n1*eps.
WeightEstimate kmm_weights(const Rows& source, const Rows& target, const KernelSpec& kernel,
                           double B = 1000.0, double eps = 0.01);

/// Mean-one-constrained log-likelihood maximization over kernel-center
/// mixing coefficients.
WeightEstimate kliep_weights(const Rows& source, const Rows& target, const KernelSpec& kernel);

/// Ridge-regularized least-squares fit of the density ratio; dense direct
/// solve, negative raw weights clipped to 0.
WeightEstimate ulsif_weights(const Rows& source, const Rows& target, const KernelSpec& kernel,
                             double lambda = 0.1);

/// alpha_rel-relative ratio against the mixture density; alpha_rel = 0
/// reduces exactly to ulsif_weights.
WeightEstimate rulsif_weights(const Rows& source, const Rows& target, const KernelSpec& kernel,
                              double lambda = 0.1, double alpha_rel = 0.1);

/// Logistic domain discriminator (source 0, target 1) on standardized
/// features; weights are scaled odds clipped to [0, 50].
WeightEstimate iwc_weights(const Rows& source, const Rows& target, double reg = 1e-3);

}  // namespace da
