#include "delay_adapt/density_ratio.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Dense>

#include "delay_adapt/util.hpp"

namespace da {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd to_matrix(const Rows& rows) {
    if (rows.empty()) throw DensityRatioError("empty sample");
    MatrixXd m(static_cast<Eigen::Index>(rows.size()),
               static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows[0].size())
            throw DensityRatioError("ragged sample rows");
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    return m;
}

double resolve_bandwidth(const KernelSpec& spec, const Rows& source, const Rows& target) {
    double sigma = spec.bandwidth > 0
                       ? spec.bandwidth
                       : median_heuristic_bandwidth(source, target, spec.seed);
    if (!(sigma > 0) || !std::isfinite(sigma))
        throw DensityRatioError("non-finite or degenerate kernel bandwidth");
    return sigma;
}

MatrixXd pick_centers(const MatrixXd& target, std::size_t max_centers, std::uint64_t seed) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(target.rows()));
    std::iota(idx.begin(), idx.end(), 0);
    if (idx.size() > max_centers) {
        std::mt19937_64 rng(derive_seed(seed, 0x5eed));
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(max_centers);
        std::sort(idx.begin(), idx.end());
    }
    MatrixXd c(static_cast<Eigen::Index>(idx.size()), target.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) c.row(static_cast<Eigen::Index>(i)) = target.row(idx[i]);
    return c;
}

// exp(-||x - c||^2 / (2 sigma^2)), rows of X against rows of C
MatrixXd rbf_kernel(const MatrixXd& X, const MatrixXd& C, double sigma) {
    MatrixXd K(X.rows(), C.rows());
    double inv = 1.0 / (2.0 * sigma * sigma);
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        for (Eigen::Index j = 0; j < C.rows(); ++j)
            K(i, j) = std::exp(-(X.row(i) - C.row(j)).squaredNorm() * inv);
    if (!K.allFinite()) throw DensityRatioError("non-finite kernel matrix");
    return K;
}

}  // namespace

double median_heuristic_bandwidth(const Rows& source, const Rows& target, std::uint64_t seed) {
    MatrixXd s = to_matrix(source), t = to_matrix(target);
    if (s.cols() != t.cols()) throw DensityRatioError("source/target dimension mismatch");
    MatrixXd pooled(s.rows() + t.rows(), s.cols());
    pooled << s, t;
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(pooled.rows()));
    std::iota(idx.begin(), idx.end(), 0);
    const std::size_t cap = 1000;
    if (idx.size() > cap) {
        std::mt19937_64 rng(derive_seed(seed, 0xbead));
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(cap);
    }
    std::vector<double> dists;
    dists.reserve(idx.size() * (idx.size() - 1) / 2);
    for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = i + 1; j < idx.size(); ++j)
            dists.push_back((pooled.row(idx[i]) - pooled.row(idx[j])).norm());
    if (dists.empty()) return 1.0;
    auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
    std::nth_element(dists.begin(), mid, dists.end());
    double med = *mid;
    return med > 0 ? med : 1.0;
}

WeightEstimate kmm_weights(const Rows& source, const Rows& target, const KernelSpec& kernel,
                           double B, double eps) {
    if (!(B > 0)) throw DensityRatioError("KMM weight cap B must be positive");
    double sigma = resolve_bandwidth(kernel, source, target);
    MatrixXd Xs = to_matrix(source), Xt = to_matrix(target);
    const double n1 = static_cast<double>(Xs.rows());
    const double n2 = static_cast<double>(Xt.rows());

    MatrixXd Kss = rbf_kernel(Xs, Xs, sigma);
    VectorXd kappa = rbf_kernel(Xs, Xt, sigma).rowwise().sum();  // K_st * 1

    // J(b) = b'Kss b / n1^2 - 2 b'kappa / (n1 n2)
    auto objective = [&](const VectorXd& b) {
        return b.dot(Kss * b) / (n1 * n1) - 2.0 * b.dot(kappa) / (n1 * n2);
    };
    const double lo = n1 * (1.0 - eps), hi = n1 * (1.0 + eps);
    auto project = [&](VectorXd b) {
        b = b.cwiseMax(0.0).cwiseMin(B);
        double s = b.sum();
        if (s > hi) {
            b *= hi / s;
        } else if (s < lo) {
            if (s <= 0) {
                b.setConstant(std::min(B, lo / n1));
            } else {
                // smallest multiplier reaching the lower sum bound under the cap
                double a = 1.0, c = B * n1 / s + 1.0;
                for (int it = 0; it < 100; ++it) {
                    double m = 0.5 * (a + c);
                    double sm = (b * m).cwiseMin(B).sum();
                    (sm < lo ? a : c) = m;
                }
                b = (b * c).cwiseMin(B);
            }
        }
        return b;
    };

    // symmetric PSD: lambda_max bounded by the max row sum
    double lmax = Kss.cwiseAbs().rowwise().sum().maxCoeff();
    double step = (n1 * n1) / (2.0 * std::max(lmax, 1e-12));

    VectorXd beta = project(VectorXd::Constant(Xs.rows(), 1.0));
    VectorXd best = beta;
    double best_obj = objective(beta);
    int iters = 0;
    for (; iters < 5000; ++iters) {
        VectorXd grad = 2.0 * (Kss * beta) / (n1 * n1) - 2.0 * kappa / (n1 * n2);
        VectorXd next = project(beta - step * grad);
        double gm = (beta - next).norm() / step;
        beta = next;
        double obj = objective(beta);
        if (obj < best_obj) {
            best_obj = obj;
            best = beta;
        }
        if (gm < 1e-6) break;
    }

    WeightEstimate out;
    out.weights.assign(best.data(), best.data() + best.size());
    out.objective = best_obj;
    out.iterations = iters;
    double box = std::max(0.0, std::max(-best.minCoeff(), best.maxCoeff() - B));
    double slack = std::max(0.0, std::max(lo - best.sum(), best.sum() - hi));
    out.constraint_residual = std::max(box, slack);
    out.converged = out.constraint_residual < 1e-6;
    return out;
}

WeightEstimate kliep_weights(const Rows& source, const Rows& target, const KernelSpec& kernel) {
    double sigma = resolve_bandwidth(kernel, source, target);
    MatrixXd Xs = to_matrix(source), Xt = to_matrix(target);
    MatrixXd C = pick_centers(Xt, kernel.max_centers, kernel.seed);
    MatrixXd At = rbf_kernel(Xt, C, sigma);
    MatrixXd As = rbf_kernel(Xs, C, sigma);
    VectorXd b = As.colwise().mean();  // (1/n1) sum_i k(x_i, .)
    if (b.sum() <= 0)
        throw DensityRatioError("all target kernel mass is zero at the source (sigma too small)");

    // target rows with zero mass at every center cannot contribute to the
    // log-likelihood; drop them, fail only if nothing is left
    std::vector<Eigen::Index> live;
    for (Eigen::Index j = 0; j < At.rows(); ++j)
        if (At.row(j).sum() > 0) live.push_back(j);
    if (live.empty())
        throw DensityRatioError("every target point has zero kernel mass (sigma too small)");
    MatrixXd Atl(static_cast<Eigen::Index>(live.size()), At.cols());
    for (std::size_t j = 0; j < live.size(); ++j) Atl.row(static_cast<Eigen::Index>(j)) = At.row(live[j]);

    auto rescale = [&](VectorXd a) {
        a = a.cwiseMax(0.0);
        double m = b.dot(a);
        if (m <= 0) {
            a.setConstant(1.0);
            m = b.dot(a);
        }
        return VectorXd(a / m);
    };
    auto objective = [&](const VectorXd& a) {
        VectorXd w = Atl * a;
        double v = 0;
        for (Eigen::Index j = 0; j < w.size(); ++j)
            v += std::log(std::max(w(j), 1e-300));
        return v;
    };

    VectorXd a = rescale(VectorXd::Constant(C.rows(), 1.0));
    double obj = objective(a);
    double step = 1e-2;
    int iters = 0;
    bool converged = false;
    for (; iters < 5000; ++iters) {
        VectorXd w = (Atl * a).cwiseMax(1e-300);
        VectorXd grad = Atl.transpose() * w.cwiseInverse();
        bool accepted = false;
        for (int half = 0; half < 30; ++half) {
            VectorXd cand = rescale(a + step * grad);
            double cobj = objective(cand);
            if (cobj > obj) {
                if (cobj - obj < 1e-8) {
                    a = cand;
                    obj = cobj;
                    converged = true;
                } else {
                    a = cand;
                    obj = cobj;
                    step *= 1.2;
                }
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted || converged) {
            converged = true;
            break;
        }
    }

    VectorXd w = As * a;
    WeightEstimate out;
    out.weights.assign(w.data(), w.data() + w.size());
    out.objective = obj;
    out.iterations = iters;
    out.constraint_residual = std::abs(w.mean() - 1.0);
    out.converged = converged;
    return out;
}

namespace {

WeightEstimate lsif_solve(const MatrixXd& As, const MatrixXd& H, const VectorXd& h,
                          double lambda) {
    MatrixXd A = H;
    A.diagonal().array() += lambda;
    Eigen::LDLT<MatrixXd> ldlt(A);
    if (ldlt.info() != Eigen::Success)
        throw DensityRatioError("singular kernel system; increase lambda");
    VectorXd a = ldlt.solve(h);
    double residual = (A * a - h).cwiseAbs().maxCoeff();
    if (!a.allFinite() || residual > 1e-8)
        throw DensityRatioError("singular kernel system; increase lambda");
    VectorXd w = (As * a).cwiseMax(0.0);
    WeightEstimate out;
    out.weights.assign(w.data(), w.data() + w.size());
    out.objective = 0.5 * a.dot(H * a) - h.dot(a) + 0.5 * lambda * a.squaredNorm();
    out.iterations = 1;
    out.constraint_residual = residual;
    return out;
}

}  // namespace

WeightEstimate ulsif_weights(const Rows& source, const Rows& target, const KernelSpec& kernel,
                             double lambda) {
    if (!(lambda > 0)) throw DensityRatioError("lambda must be positive");
    double sigma = resolve_bandwidth(kernel, source, target);
    MatrixXd Xs = to_matrix(source), Xt = to_matrix(target);
    MatrixXd C = pick_centers(Xt, kernel.max_centers, kernel.seed);
    MatrixXd As = rbf_kernel(Xs, C, sigma);
    MatrixXd At = rbf_kernel(Xt, C, sigma);
    MatrixXd H = As.transpose() * As / static_cast<double>(Xs.rows());
    VectorXd h = At.colwise().mean();
    return lsif_solve(As, H, h, lambda);
}

WeightEstimate rulsif_weights(const Rows& source, const Rows& target, const KernelSpec& kernel,
                              double lambda, double alpha_rel) {
    if (alpha_rel < 0 || alpha_rel >= 1)
        throw DensityRatioError("alpha_rel must be in [0, 1)");
    if (alpha_rel == 0) return ulsif_weights(source, target, kernel, lambda);
    if (!(lambda > 0)) throw DensityRatioError("lambda must be positive");
    double sigma = resolve_bandwidth(kernel, source, target);
    MatrixXd Xs = to_matrix(source), Xt = to_matrix(target);
    MatrixXd C = pick_centers(Xt, kernel.max_centers, kernel.seed);
    MatrixXd As = rbf_kernel(Xs, C, sigma);
    MatrixXd At = rbf_kernel(Xt, C, sigma);
    MatrixXd H = alpha_rel * (At.transpose() * At / static_cast<double>(Xt.rows())) +
                 (1.0 - alpha_rel) * (As.transpose() * As / static_cast<double>(Xs.rows()));
    VectorXd h = At.colwise().mean();
    return lsif_solve(As, H, h, lambda);
}

WeightEstimate iwc_weights(const Rows& source, const Rows& target, double reg) {
    MatrixXd Xs = to_matrix(source), Xt = to_matrix(target);
    if (Xs.rows() < 2 || Xt.rows() < 2)
        throw DensityRatioError("IWC needs at least 2 samples per domain");
    const Eigen::Index n1 = Xs.rows(), n2 = Xt.rows(), d = Xs.cols();
    const Eigen::Index n = n1 + n2;

    MatrixXd X(n, d + 1);
    X.block(0, 0, n1, d) = Xs;
    X.block(n1, 0, n2, d) = Xt;
    X.col(d).setOnes();  // bias
    VectorXd mean = X.leftCols(d).colwise().mean();
    for (Eigen::Index j = 0; j < d; ++j) {
        double sd = std::sqrt((X.col(j).array() - mean(j)).square().mean());
        if (sd <= 0) sd = 1.0;
        X.col(j) = (X.col(j).array() - mean(j)) / sd;
    }
    VectorXd z(n);
    z.head(n1).setZero();
    z.tail(n2).setOnes();

    double L = 0.25 * X.squaredNorm() / static_cast<double>(n) + reg;
    double step = 1.0 / L;
    VectorXd w = VectorXd::Zero(d + 1);
    int iters = 0;
    bool converged = false;
    for (; iters < 2000; ++iters) {
        VectorXd logits = X * w;
        VectorXd p = (1.0 + (-logits.array()).exp()).inverse();
        VectorXd grad = X.transpose() * (p - z) / static_cast<double>(n);
        grad.head(d) += reg * w.head(d);  // no penalty on the bias
        if (grad.cwiseAbs().maxCoeff() < 1e-8) {
            converged = true;
            break;
        }
        w -= step * grad;
    }

    VectorXd logits = (X.topRows(n1) * w).array() + std::log(static_cast<double>(n1) / n2);
    WeightEstimate out;
    out.weights.resize(static_cast<std::size_t>(n1));
    for (Eigen::Index i = 0; i < n1; ++i)
        out.weights[static_cast<std::size_t>(i)] =
            std::clamp(std::exp(logits(i)), 0.0, 50.0);
    out.iterations = iters;
    out.converged = converged;
    VectorXd p_all = (1.0 + (-(X * w).array()).exp()).inverse();
    double ll = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double pi = std::clamp(p_all(i), 1e-12, 1.0 - 1e-12);
        ll += z(i) > 0.5 ? std::log(pi) : std::log(1.0 - pi);
    }
    out.objective = ll / static_cast<double>(n);
    return out;
}

}  // namespace da
